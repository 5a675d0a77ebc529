//! Closed-form limits: cavity-loss-limited optimum, critical atom number,
//! absorption floor, one-axis-twisting reference and Fisher scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SqueezingRegime {
    /// Photon loss through the mirrors dominates.
    BelowNc,
    /// Photon loss by atomic absorption dominates.
    AboveNc,
}

/// Predicted best squeezing and the time at which it occurs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimumPrediction {
    pub xi2_min: f64,
    pub t_min: f64,
    pub regime: SqueezingRegime,
    /// Whether `N^(-1/10) < φ₀√N < 1`, where the prediction applies.
    pub in_band: bool,
}

fn require_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Cavity-loss-limited optimum of the weak-coupling regime:
/// `ξ² = (5/6) 3^(4/5) N^(-2/5)` at `t = 2 · 3^(1/5) N^(-3/5) / (η² φ₀²)`.
pub fn weak_coupling_optimum(n_atoms: u64, eta_over_kappa: f64, phi0: f64) -> Result<OptimumPrediction> {
    if n_atoms == 0 {
        return Err(Error::InvalidArgument("n_atoms must be positive".into()));
    }
    require_positive("eta_over_kappa", eta_over_kappa)?;
    require_positive("phi0", phi0)?;
    let n = n_atoms as f64;
    let x = phi0 * n.sqrt();
    Ok(OptimumPrediction {
        xi2_min: 5.0 / 6.0 * 3f64.powf(0.8) * n.powf(-0.4),
        t_min: 2.0 / (eta_over_kappa * eta_over_kappa * phi0 * phi0) * 3f64.powf(0.2) * n.powf(-0.6),
        regime: SqueezingRegime::BelowNc,
        in_band: n.powf(-0.1) < x && x < 1.0,
    })
}

/// Atom number at which scattering-induced photon loss equals mirror loss,
/// `N_c = (4 (Δ/Γ) / (a_Ray + a_Ram + a_X))²` with `a_Ray = 2 a_σσ`.
pub fn critical_atom_number(gamma_over_delta: f64, a_ray: f64, a_ram: f64, a_x: f64) -> Result<f64> {
    require_positive("gamma_over_delta", gamma_over_delta)?;
    let total = a_ray + a_ram + a_x;
    if !(total.is_finite() && total > 0.0) || a_ray < 0.0 || a_ram < 0.0 || a_x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "scattering weights must be nonnegative with a positive sum, got ({a_ray}, {a_ram}, {a_x})"
        )));
    }
    let r = 4.0 / (gamma_over_delta * total);
    Ok(r * r)
}

/// Large-N squeezing floor set by absorption: `e (2 a₁₁ Γ/Δ)²`.
pub fn absorption_limit(a11: f64, gamma_over_delta: f64) -> Result<f64> {
    if !(a11.is_finite() && a11 >= 0.0 && gamma_over_delta.is_finite() && gamma_over_delta >= 0.0) {
        return Err(Error::InvalidArgument("a11 and gamma_over_delta must be nonnegative".into()));
    }
    let s = 2.0 * a11 * gamma_over_delta;
    Ok(std::f64::consts::E * s * s)
}

/// Below N_c up to and including the critical number itself.
pub fn classify_regime(n_atoms: u64, n_critical: f64) -> SqueezingRegime {
    if (n_atoms as f64) <= n_critical {
        SqueezingRegime::BelowNc
    } else {
        SqueezingRegime::AboveNc
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OatReference {
    pub xi2: f64,
    pub pc: f64,
    pub mean_sx: f64,
}

/// One-axis twisting `exp(-iχt S_z²)` applied to the coherent spin state
/// along x.
pub fn oat_reference(n_atoms: u64, chi_t: f64) -> Result<OatReference> {
    if n_atoms < 2 {
        return Err(Error::InvalidArgument("one-axis twisting needs at least two atoms".into()));
    }
    if !chi_t.is_finite() {
        return Err(Error::InvalidArgument(format!("chi_t must be finite, got {chi_t}")));
    }
    let n = n_atoms as f64;
    let c = chi_t.cos();
    let mean_sx = 0.5 * n * c.powf(n - 1.0);
    let mu = 2.0 * chi_t;
    let a = 1.0 - mu.cos().powf(n - 2.0);
    let b = 4.0 * (0.5 * mu).sin() * (0.5 * mu).cos().powf(n - 2.0);
    let v_minus = 0.25 * n * (1.0 + 0.25 * (n - 1.0) * (a - (a * a + b * b).sqrt()));
    Ok(OatReference {
        xi2: n * v_minus / (mean_sx * mean_sx),
        pc: 0.5 * (1.0 - c.powf(2.0 * (n - 1.0))),
        mean_sx,
    })
}

/// Large-N Fisher information of the twin-Fock mixture, `2 √(2/π) N^(3/2)`.
pub fn fisher_scaling(n_atoms: u64) -> f64 {
    2.0 * (2.0 / std::f64::consts::PI).sqrt() * (n_atoms as f64).powf(1.5)
}
