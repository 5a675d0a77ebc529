//! Entanglement generation by cavity feedback in an ensemble of two-level
//! atoms.
//!
//! The exact atomic density matrix under cavity loss and Rayleigh scattering
//! is evaluated in permutation-reduced coordinates (`collective`), from which
//! spin squeezing, purity and the purity-change witness follow
//! (`observables`). Small ensembles can be written out densely for quantum
//! Fisher information (`metrology`) and checked against brute-force and
//! master-equation references (`oracle`). Closed-form limits live in
//! `asymptotics`; `sweep` and `figures` drive parameter scans.
//!
//! All quantities are in units where the cavity half-linewidth κ is 1.

pub mod asymptotics;
pub mod collective;
pub mod error;
pub mod figures;
pub mod metrology;
pub mod numerics;
pub mod observables;
pub mod oracle;
pub mod params;
pub mod sweep;

pub use asymptotics::{OatReference, OptimumPrediction, SqueezingRegime};
pub use collective::{CollectiveLabel, CollectiveState, LogComplex};
pub use error::{Error, Result};
pub use metrology::{Basis, DenseState, MixturePredictions, QfiResult, SpinAxis};
pub use observables::{SpinMoments, SqueezingResult};
pub use params::{
    derive_rates, validity_report, CheckStatus, CouplingRegime, DerivedRates, Mode, PhysicalConfig, ValidityCheck,
    ValidityReport,
};
pub use sweep::{OptimizationResult, SweepSpec, SweepTable};
