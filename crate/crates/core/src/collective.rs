//! Analytic atomic density matrix in permutation-reduced coordinates.
//!
//! A matrix element `⟨ε₁|ρ(t)|ε₂⟩` between two product configurations of the
//! N atoms depends only on how many atoms are in |1⟩ on each side (`k1`,
//! `k2`) and how many positions carry |1⟩ on both sides (`u`). The 4^N
//! entries therefore collapse onto O(N³) sectors, each evaluated in log space
//! so that `2^-N` and the binomial multiplicities never overflow.
//!
//! Each element is the product of
//! * `2^-N`,
//! * the coherent-state overlap `⟨α(m₂)|α(m₁)⟩` raised to
//!   `1 + 2t + (N - d) Γ_Ray t` (information carried away by lost photons),
//! * the phase `t [|α(m₁)|²(δ + φ₀m₁) - |α(m₂)|²(δ + φ₀m₂)]`,
//! * `exp(-(|α(m₁)|² + |α(m₂)|²) d Γ_Ray t / 2)` (scattering that projects
//!   single atoms),
//!
//! with `d = k1 + k2 - 2u` the Hamming distance between the configurations.
//! The overlap is taken with the ket-side amplitude conjugated; this is the
//! ordering produced by the cavity master equation (see the oracle tests).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ln_binomial, ln_binomial_half, KahanSum};
use crate::params::{amplitude, DerivedRates, Mode, PhysicalConfig};

const LN_2: f64 = std::f64::consts::LN_2;

/// Sector coordinates of a configuration pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollectiveLabel {
    pub k1: u64,
    pub k2: u64,
    pub u: u64,
}

impl CollectiveLabel {
    pub fn new(n: u64, k1: u64, k2: u64, u: u64) -> Result<Self> {
        let label = Self { k1, k2, u };
        if !label.is_valid(n) {
            return Err(Error::InvalidArgument(format!(
                "label (k1={k1}, k2={k2}, u={u}) is not valid for N = {n}"
            )));
        }
        Ok(label)
    }

    pub fn is_valid(&self, n: u64) -> bool {
        self.k1 <= n
            && self.k2 <= n
            && self.u <= self.k1.min(self.k2)
            && self.k1 + self.k2 <= n + self.u
    }

    /// Hamming distance between the two configurations.
    pub fn hamming(&self) -> u64 {
        self.k1 + self.k2 - 2 * self.u
    }

    pub fn swapped(&self) -> Self {
        Self {
            k1: self.k2,
            k2: self.k1,
            u: self.u,
        }
    }
}

/// All valid labels for N atoms: `k1` outer, `k2` inner, `u` innermost.
pub fn labels(n: u64) -> impl Iterator<Item = CollectiveLabel> {
    (0..=n).flat_map(move |k1| {
        (0..=n).flat_map(move |k2| {
            let u_lo = (k1 + k2).saturating_sub(n);
            (u_lo..=k1.min(k2)).map(move |u| CollectiveLabel { k1, k2, u })
        })
    })
}

/// A complex number stored as natural-log magnitude and phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogComplex {
    pub log_magnitude: f64,
    pub phase: f64,
}

impl LogComplex {
    pub const ZERO: Self = Self {
        log_magnitude: f64::NEG_INFINITY,
        phase: 0.0,
    };

    /// `exp(z)` kept in log form.
    pub fn from_exponent(z: Complex64) -> Self {
        Self {
            log_magnitude: z.re,
            phase: z.im,
        }
    }

    pub fn exponent(&self) -> Complex64 {
        Complex64::new(self.log_magnitude, self.phase)
    }

    pub fn magnitude(&self) -> f64 {
        self.log_magnitude.exp()
    }

    pub fn to_complex(&self) -> Complex64 {
        if self.log_magnitude == f64::NEG_INFINITY {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(self.log_magnitude.exp(), self.phase)
    }

    pub fn conj(&self) -> Self {
        Self {
            log_magnitude: self.log_magnitude,
            phase: -self.phase,
        }
    }

    /// Scale by a positive real given as its logarithm.
    pub fn scale_log(&self, ln_factor: f64) -> Self {
        Self {
            log_magnitude: self.log_magnitude + ln_factor,
            phase: self.phase,
        }
    }
}

/// `⟨α₁|α₂⟩ = exp(-|α₁|²/2 - |α₂|²/2 + conj(α₁) α₂)` for coherent states.
pub fn coherent_overlap(alpha1: Complex64, alpha2: Complex64) -> LogComplex {
    LogComplex::from_exponent(log_overlap(alpha1, alpha2))
}

#[inline]
fn log_overlap(alpha1: Complex64, alpha2: Complex64) -> Complex64 {
    -0.5 * (alpha1.norm_sqr() + alpha2.norm_sqr()) + alpha1.conj() * alpha2
}

/// Precomputed parameters for fast sector evaluation.
#[derive(Clone, Debug)]
pub struct CollectiveState {
    n: u64,
    mode: Mode,
    eta: f64,
    linewidth: f64,
    delta: f64,
    phi0: f64,
    gamma_ray: f64,
}

impl CollectiveState {
    pub fn new(config: &PhysicalConfig, rates: &DerivedRates) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            n: config.n_atoms,
            mode: config.mode,
            eta: config.eta_over_kappa,
            linewidth: rates.linewidth(config.mode),
            delta: config.delta_over_kappa,
            phi0: config.phi0,
            gamma_ray: rates.rayleigh(config.mode),
        })
    }

    pub fn n_atoms(&self) -> u64 {
        self.n
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Detuning δ + φ₀ m for the sector with `k` atoms in |1⟩.
    #[inline]
    fn detuning(&self, k: u64) -> f64 {
        self.delta + self.phi0 * (k as f64 - 0.5 * self.n as f64)
    }

    #[inline]
    pub fn amplitude(&self, k: u64) -> Complex64 {
        amplitude(self.eta, self.linewidth, self.detuning(k))
    }

    /// Coefficients `(z0, zd)` such that `ln(2^N ⟨ε₁|ρ(t)|ε₂⟩) = z0 + d zd` for
    /// every Hamming distance `d` compatible with `(k1, k2)`.
    #[inline]
    pub fn sector_coefficients(&self, t: f64, k1: u64, k2: u64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let a1 = self.amplitude(k1);
        let n1 = a1.norm_sqr();
        let g = self.gamma_ray;
        if k1 == k2 {
            if self.mode == Mode::UnitaryOnly {
                return (zero, zero);
            }
            return (zero, Complex64::new(-n1 * g * t, 0.0));
        }
        let a2 = self.amplitude(k2);
        let n2 = a2.norm_sqr();
        let phase = t * (n1 * self.detuning(k1) - n2 * self.detuning(k2));
        if self.mode == Mode::UnitaryOnly {
            return (Complex64::new(0.0, phase), zero);
        }
        let overlap = log_overlap(a2, a1);
        let z0 = overlap * (1.0 + 2.0 * t + self.n as f64 * g * t) + Complex64::new(0.0, phase);
        let zd = -overlap * (g * t) - 0.5 * (n1 + n2) * g * t;
        (z0, zd)
    }

    /// `ln(2^N ⟨ε₁|ρ(t)|ε₂⟩)` for `|ε₁| = k1`, `|ε₂| = k2` at Hamming distance
    /// `d`. No validation; callers guarantee a consistent sector.
    #[inline]
    pub fn log_scaled_element(&self, t: f64, k1: u64, k2: u64, d: u64) -> Complex64 {
        let (z0, zd) = self.sector_coefficients(t, k1, k2);
        z0 + zd * d as f64
    }

    /// Matrix element for a validated label.
    pub fn element(&self, t: f64, label: CollectiveLabel) -> Result<LogComplex> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
        }
        if !label.is_valid(self.n) {
            return Err(Error::InvalidArgument(format!("label {label:?} invalid for N = {}", self.n)));
        }
        let z = self.log_scaled_element(t, label.k1, label.k2, label.hamming());
        Ok(LogComplex::from_exponent(z).scale_log(-(self.n as f64) * LN_2))
    }
}

/// `⟨ε₁|ρ(t)|ε₂⟩` for any configuration pair carrying `label`.
pub fn element(
    config: &PhysicalConfig,
    rates: &DerivedRates,
    t: f64,
    label: CollectiveLabel,
) -> Result<LogComplex> {
    CollectiveState::new(config, rates)?.element(t, label)
}

/// Natural log of the number of ordered configuration pairs with `label`:
/// `C(N,u) C(N-u, k1-u) C(N-k1, k2-u)`.
pub fn log_multiplicity(n: u64, label: CollectiveLabel) -> Result<f64> {
    if !label.is_valid(n) {
        return Err(Error::InvalidArgument(format!("label {label:?} invalid for N = {n}")));
    }
    let CollectiveLabel { k1, k2, u } = label;
    Ok(ln_binomial(n, u) + ln_binomial(n - u, k1 - u) + ln_binomial(n - k1, k2 - u))
}

/// `Tr ρ(t) = Σ_k C(N,k) ⟨k|ρ|k⟩`.
pub fn trace(config: &PhysicalConfig, rates: &DerivedRates, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let state = CollectiveState::new(config, rates)?;
    let n = config.n_atoms;
    let mut acc = KahanSum::default();
    for k in 0..=n {
        let w = ln_binomial_half(n, k);
        let z = state.log_scaled_element(t, k, k, 0);
        acc.add((w + z.re).exp());
    }
    Ok(acc.value())
}
