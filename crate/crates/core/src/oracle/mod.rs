//! Independent reference computations used to validate the collective path.

mod lindblad;

pub use lindblad::{lindblad_integrate, lindblad_integrate_with_limit, LindbladOutcome, LindbladSystem, MAX_LEAKAGE, MAX_LINDBLAD_ATOMS};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrology::{Basis, DenseState, MAX_DENSE_ATOMS};
use crate::params::{DerivedRates, Mode, PhysicalConfig};

/// Builds the density matrix entry by entry from the closed-form element
/// for each pair of bitstrings, without the sector reduction.
pub fn dense_from_definition(config: &PhysicalConfig, rates: &DerivedRates, t: f64) -> Result<DenseState> {
    config.validate()?;
    let n = config.n_atoms;
    if n > MAX_DENSE_ATOMS {
        return Err(Error::TooManyAtoms {
            what: "dense oracle",
            n,
            max: MAX_DENSE_ATOMS,
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let dim = 1usize << n;
    let linewidth = match config.mode {
        Mode::Full => rates.kappa_eff_over_kappa,
        _ => 1.0,
    };
    let gamma = match config.mode {
        Mode::Full => rates.gamma_ray,
        _ => 0.0,
    };
    let shift = |bits: usize| {
        let m = bits.count_ones() as f64 - 0.5 * n as f64;
        config.delta_over_kappa + config.phi0 * m
    };
    let alpha = |bits: usize| Complex64::new(config.eta_over_kappa, 0.0) / Complex64::new(linewidth, shift(bits));
    let prefactor = 0.5f64.powi(n as i32);
    let i = Complex64::new(0.0, 1.0);

    let matrix = DMatrix::from_fn(dim, dim, |e1, e2| {
        let a1 = alpha(e1);
        let a2 = alpha(e2);
        let d = (e1 ^ e2).count_ones() as f64;
        let phase = t * (a1.norm_sqr() * shift(e1) - a2.norm_sqr() * shift(e2));
        if config.mode == Mode::UnitaryOnly {
            return prefactor * (i * phase).exp();
        }
        // ln⟨α(m₂)|α(m₁)⟩
        let ln_overlap = -0.5 * a1.norm_sqr() - 0.5 * a2.norm_sqr() + a2.conj() * a1;
        let exponent = 1.0 + 2.0 * t + (n as f64 - d) * gamma * t;
        let projection = -(a1.norm_sqr() + a2.norm_sqr()) * d * gamma * t / 2.0;
        prefactor * (ln_overlap * exponent + i * phase + projection).exp()
    });
    DenseState::new(matrix, Basis::Product { n })
}
