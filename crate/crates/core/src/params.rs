//! Physical configuration, derived rates and the steady-state cavity response.
//!
//! Everything is expressed in units of the cavity half-linewidth: κ = 1,
//! times are in 1/κ and rates in κ. The per-photon scattering rates are the
//! dimensionless products `(Γ/Δ) φ₀ × weight`, read as rates in units of κ.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which loss channels enter the collective density matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Cavity loss and Rayleigh scattering.
    #[default]
    #[serde(alias = "FULL")]
    Full,
    /// Cavity loss only.
    #[serde(alias = "CAVITY_ONLY", alias = "cavity-only")]
    CavityOnly,
    /// Coherent phase evolution only.
    #[serde(alias = "UNITARY_ONLY", alias = "unitary-only")]
    UnitaryOnly,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::CavityOnly => "cavity-only",
            Mode::UnitaryOnly => "unitary-only",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => Ok(Mode::Full),
            "cavity-only" => Ok(Mode::CavityOnly),
            "unitary-only" => Ok(Mode::UnitaryOnly),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

/// Dimensionless system parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub n_atoms: u64,
    pub delta_over_kappa: f64,
    pub eta_over_kappa: f64,
    pub phi0: f64,
    pub gamma_over_delta: f64,
    /// Diagonal scattering amplitude a_σσ, equal for both ground states.
    pub a_rayleigh: f64,
    /// Aggregated Raman weight Σ|a_σ'σ|²/a_σσ.
    #[serde(default)]
    pub a_raman: f64,
    /// Aggregated weight for scattering out of the two-level subspace.
    #[serde(default)]
    pub a_external: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_over_delta: Option<f64>,
    #[serde(default)]
    pub mode: Mode,
}

pub const PRESET_NAMES: [&str; 4] = ["fig2", "fig3", "fig4-rb87", "fig5"];

impl PhysicalConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Built-in parameter sets matching the published figures.
    pub fn preset(name: &str) -> Result<Self> {
        let config = match name {
            // N = 50, Δ/Γ = 500, a = 1, φ₀√N = 0.1
            "fig2" => Self {
                n_atoms: 50,
                delta_over_kappa: 1.0,
                eta_over_kappa: 0.1,
                phi0: 0.1 / 50f64.sqrt(),
                gamma_over_delta: 1.0 / 500.0,
                a_rayleigh: 1.0,
                a_raman: 0.0,
                a_external: 0.0,
                kappa_over_delta: None,
                mode: Mode::Full,
            },
            "fig3" => Self {
                n_atoms: 10,
                phi0: 14.0,
                ..Self::preset("fig2")?
            },
            // 87Rb clock states, π light on D2, one external state per ground state.
            "fig4-rb87" => Self {
                n_atoms: 100_000,
                delta_over_kappa: 1.0,
                eta_over_kappa: 0.1,
                phi0: 0.3 / 100_000f64.sqrt(),
                gamma_over_delta: 1.0 / 563.39,
                a_rayleigh: 0.702,
                a_raman: 0.0,
                a_external: 0.497 * 0.497 / 0.702,
                kappa_over_delta: None,
                mode: Mode::Full,
            },
            // Absorption-dominated regime; the drive is detuned by the
            // broadened linewidth.
            "fig5" => {
                let base = Self {
                    n_atoms: 10_000_000,
                    delta_over_kappa: 1.0,
                    eta_over_kappa: 0.1,
                    phi0: 10.0 / 10_000_000f64.sqrt(),
                    gamma_over_delta: 0.1,
                    a_rayleigh: 0.702,
                    a_raman: 0.0,
                    a_external: 0.0,
                    kappa_over_delta: None,
                    mode: Mode::Full,
                };
                base.with_detuning_at_linewidth()
            }
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("delta_over_kappa", self.delta_over_kappa),
            ("eta_over_kappa", self.eta_over_kappa),
            ("phi0", self.phi0),
            ("gamma_over_delta", self.gamma_over_delta),
            ("a_rayleigh", self.a_rayleigh),
            ("a_raman", self.a_raman),
            ("a_external", self.a_external),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be finite, got {v}")));
            }
        }
        if self.n_atoms < 1 {
            return Err(Error::InvalidConfig("n_atoms must be at least 1".into()));
        }
        if self.eta_over_kappa <= 0.0 {
            return Err(Error::InvalidConfig("eta_over_kappa must be positive".into()));
        }
        if self.phi0 <= 0.0 {
            return Err(Error::InvalidConfig("phi0 must be positive".into()));
        }
        for (name, v) in [
            ("gamma_over_delta", self.gamma_over_delta),
            ("a_rayleigh", self.a_rayleigh),
            ("a_raman", self.a_raman),
            ("a_external", self.a_external),
        ] {
            if v < 0.0 {
                return Err(Error::InvalidConfig(format!("{name} must be nonnegative")));
            }
        }
        if let Some(k) = self.kappa_over_delta {
            if !(k.is_finite() && k >= 0.0) {
                return Err(Error::InvalidConfig("kappa_over_delta must be finite and nonnegative".into()));
            }
        }
        if self.mode == Mode::Full && self.gamma_over_delta <= 0.0 {
            return Err(Error::InvalidConfig(
                "mode full requires gamma_over_delta > 0 (use cavity-only for lossless atoms)".into(),
            ));
        }
        Ok(())
    }

    /// Coupling expressed as the cavity shift from projection noise, φ₀√N.
    pub fn phi0_sqrt_n(&self) -> f64 {
        self.phi0 * (self.n_atoms as f64).sqrt()
    }

    pub fn with_phi0_sqrt_n(&self, x: f64) -> Self {
        Self {
            phi0: x / (self.n_atoms as f64).sqrt(),
            ..self.clone()
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    /// Copy with δ set equal to the linewidth seen by the cavity in this
    /// configuration's mode (κ_eff in full mode, κ otherwise).
    pub fn with_detuning_at_linewidth(&self) -> Self {
        let rates = derive_rates_unchecked(self);
        Self {
            delta_over_kappa: rates.linewidth(self.mode),
            ..self.clone()
        }
    }
}

/// Closed-form rates and timescales derived from a [`PhysicalConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub phi0: f64,
    pub cooperativity: f64,
    pub gamma_ray: f64,
    pub gamma_ram: f64,
    pub gamma_x: f64,
    pub kappa_eff_over_kappa: f64,
    /// `f64::INFINITY` when no scattering weight is present.
    pub n_critical: f64,
    pub t0: f64,
    pub t1: f64,
    pub chi_eff: f64,
}

impl DerivedRates {
    /// Linewidth entering α(m): κ_eff when atomic scattering is modeled,
    /// the bare κ = 1 otherwise.
    pub fn linewidth(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Full => self.kappa_eff_over_kappa,
            Mode::CavityOnly | Mode::UnitaryOnly => 1.0,
        }
    }

    /// Rayleigh rate as seen by the collective state in the given mode.
    pub fn rayleigh(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Full => self.gamma_ray,
            Mode::CavityOnly | Mode::UnitaryOnly => 0.0,
        }
    }
}

pub fn derive_rates(config: &PhysicalConfig) -> Result<DerivedRates> {
    config.validate()?;
    Ok(derive_rates_unchecked(config))
}

fn derive_rates_unchecked(config: &PhysicalConfig) -> DerivedRates {
    let gd = config.gamma_over_delta;
    let phi0 = config.phi0;
    let eta2 = config.eta_over_kappa * config.eta_over_kappa;
    let gamma_ray = 2.0 * gd * phi0 * config.a_rayleigh;
    let gamma_ram = gd * phi0 * config.a_raman;
    let gamma_x = gd * phi0 * config.a_external;
    let n = config.n_atoms as f64;
    DerivedRates {
        phi0,
        cooperativity: if gd > 0.0 { 0.5 * phi0 / gd } else { f64::INFINITY },
        gamma_ray,
        gamma_ram,
        gamma_x,
        kappa_eff_over_kappa: 1.0 + 0.25 * n * (gamma_ray + gamma_ram + gamma_x),
        n_critical: crate::asymptotics::critical_atom_number(
            gd,
            2.0 * config.a_rayleigh,
            config.a_raman,
            config.a_external,
        )
        .unwrap_or(f64::INFINITY),
        t0: 2.0 / eta2,
        t1: phi0 * phi0 / (4.0 * eta2),
        chi_eff: 0.25 * eta2 * phi0 * phi0,
    }
}

/// Steady-state cavity amplitude for the S_z eigenvalue `m`:
/// α(m) = (η/κ) / (κ_eff/κ + i(δ/κ + φ₀ m)).
pub fn cavity_amplitude(rates: &DerivedRates, config: &PhysicalConfig, m: f64) -> Result<Complex64> {
    let n = config.n_atoms as f64;
    let k = m + 0.5 * n;
    if !(m.abs() <= 0.5 * n && (k - k.round()).abs() < 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "m = {m} is not an S_z eigenvalue for N = {}",
            config.n_atoms
        )));
    }
    Ok(amplitude(
        config.eta_over_kappa,
        rates.linewidth(config.mode),
        config.delta_over_kappa + config.phi0 * m,
    ))
}

#[inline]
pub(crate) fn amplitude(eta: f64, linewidth: f64, detuning: f64) -> Complex64 {
    Complex64::new(eta, 0.0) / Complex64::new(linewidth, detuning)
}

/// Outcome of one validity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Unavailable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityCheck {
    pub status: CheckStatus,
    /// The measured quantity compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
}

impl ValidityCheck {
    fn at_most(value: f64, threshold: f64) -> Self {
        Self {
            status: if value <= threshold {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            value,
            threshold,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingRegime {
    /// φ₀√N < 1
    Weak,
    /// 1 ≤ φ₀√N < 10
    Intermediate,
    /// φ₀√N ≥ 10
    Strong,
}

/// Ratio threshold used for every "much smaller than" condition.
pub const MUCH_LESS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// (η/κ)² ≪ 1
    pub low_pumping: ValidityCheck,
    /// N φ₀ Γ/Δ ≪ 1, i.e. κ_eff ≈ κ
    pub linewidth: ValidityCheck,
    pub regime: CouplingRegime,
    pub phi0_sqrt_n: f64,
    /// φ₀√N (1 - √(N/N_c)) ≤ 1
    pub nonlinearity: ValidityCheck,
    /// g²⟨c†c⟩/Δ² ≪ 1 with ⟨c†c⟩ ≤ (η/κ)²; needs κ/Δ.
    pub saturation: ValidityCheck,
}

impl ValidityReport {
    pub fn all_pass(&self) -> bool {
        [&self.low_pumping, &self.linewidth, &self.nonlinearity]
            .into_iter()
            .all(ValidityCheck::passed)
            && self.saturation.status != CheckStatus::Fail
    }
}

pub fn validity_report(config: &PhysicalConfig) -> ValidityReport {
    let rates = derive_rates_unchecked(config);
    let n = config.n_atoms as f64;
    let eta2 = config.eta_over_kappa * config.eta_over_kappa;
    let x = config.phi0_sqrt_n();
    let regime = if x < 1.0 {
        CouplingRegime::Weak
    } else if x < 10.0 {
        CouplingRegime::Intermediate
    } else {
        CouplingRegime::Strong
    };
    let nonlinearity = x * (1.0 - (n / rates.n_critical).sqrt());
    // g²/Δ² = φ₀ (κ/Δ) / 2
    let saturation = match config.kappa_over_delta {
        Some(kd) => ValidityCheck::at_most(0.5 * config.phi0 * kd * eta2, MUCH_LESS),
        None => ValidityCheck {
            status: CheckStatus::Unavailable,
            value: f64::NAN,
            threshold: MUCH_LESS,
        },
    };
    ValidityReport {
        low_pumping: ValidityCheck::at_most(eta2, MUCH_LESS),
        linewidth: ValidityCheck::at_most(n * config.phi0 * config.gamma_over_delta, MUCH_LESS),
        regime,
        phi0_sqrt_n: x,
        nonlinearity: ValidityCheck::at_most(nonlinearity, 1.0),
        saturation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config() -> PhysicalConfig {
        PhysicalConfig::preset("fig2").unwrap()
    }

    #[test]
    fn t0_from_pump_strength() {
        let r = derive_rates(&config()).unwrap();
        assert_relative_eq!(r.t0, 200.0, max_relative = 1e-14);
    }

    #[test]
    fn t1_for_strong_coupling_preset() {
        let c = PhysicalConfig::preset("fig3").unwrap();
        let r = derive_rates(&c).unwrap();
        assert_relative_eq!(r.t1, 4900.0, max_relative = 1e-12);
        assert_relative_eq!(r.t1 / r.t0, 24.5, max_relative = 1e-12);
    }

    #[test]
    fn lossless_atoms_have_no_broadening() {
        let c = PhysicalConfig {
            a_rayleigh: 0.0,
            mode: Mode::CavityOnly,
            ..config()
        };
        let r = derive_rates(&c).unwrap();
        assert_eq!(r.kappa_eff_over_kappa, 1.0);
        assert!(r.n_critical.is_infinite() && r.n_critical > 0.0);
    }

    #[test]
    fn critical_number_for_fig5_parameters() {
        let c = PhysicalConfig {
            gamma_over_delta: 0.1,
            a_rayleigh: 0.702,
            ..config()
        };
        let r = derive_rates(&c).unwrap();
        assert_relative_eq!(r.n_critical, (40.0f64 / 1.404).powi(2), max_relative = 1e-12);
        assert!((r.n_critical - 811.6).abs() < 0.1);
    }

    #[test]
    fn rates_follow_closed_forms() {
        let c = PhysicalConfig {
            a_raman: 0.3,
            a_external: 0.2,
            ..config()
        };
        let r = derive_rates(&c).unwrap();
        let base = c.gamma_over_delta * c.phi0;
        assert_relative_eq!(r.gamma_ray, 2.0 * base * c.a_rayleigh);
        assert_relative_eq!(r.gamma_ram, base * 0.3);
        assert_relative_eq!(r.gamma_x, base * 0.2);
        assert_relative_eq!(
            r.kappa_eff_over_kappa,
            1.0 + 0.25 * 50.0 * (r.gamma_ray + r.gamma_ram + r.gamma_x)
        );
        assert_relative_eq!(r.cooperativity, 0.5 * c.phi0 * 500.0, max_relative = 1e-12);
    }

    #[test]
    fn broadening_is_linear_in_atom_number() {
        let c = config();
        let c2 = PhysicalConfig {
            n_atoms: 100,
            ..c.clone()
        };
        let k1 = derive_rates(&c).unwrap().kappa_eff_over_kappa - 1.0;
        let k2 = derive_rates(&c2).unwrap().kappa_eff_over_kappa - 1.0;
        assert_relative_eq!(k2, 2.0 * k1, max_relative = 1e-14);
    }

    #[test]
    fn amplitude_on_resonance_is_real_maximum() {
        let c = PhysicalConfig {
            n_atoms: 2,
            delta_over_kappa: -0.5,
            phi0: 0.5,
            mode: Mode::CavityOnly,
            ..config()
        };
        let r = derive_rates(&c).unwrap();
        let a = cavity_amplitude(&r, &c, 1.0).unwrap();
        assert_relative_eq!(a.re, 0.1, max_relative = 1e-15);
        assert_eq!(a.im, 0.0);
    }

    #[test]
    fn amplitude_at_unit_detuning() {
        let c = PhysicalConfig {
            mode: Mode::CavityOnly,
            ..config()
        };
        let r = derive_rates(&c).unwrap();
        let a = cavity_amplitude(&r, &c, 0.0).unwrap();
        assert_relative_eq!(a.re, 0.05, max_relative = 1e-14);
        assert_relative_eq!(a.im, -0.05, max_relative = 1e-14);
        assert_relative_eq!(a.norm_sqr(), 0.005, max_relative = 1e-14);
    }

    #[test]
    fn amplitude_vanishes_far_detuned() {
        let c = PhysicalConfig {
            n_atoms: 1000,
            phi0: 1e6,
            ..config()
        };
        let r = derive_rates(&c).unwrap();
        assert!(cavity_amplitude(&r, &c, 500.0).unwrap().norm() < 1e-9);
    }

    #[test]
    fn amplitude_rejects_invalid_projection() {
        let c = config();
        let r = derive_rates(&c).unwrap();
        assert!(cavity_amplitude(&r, &c, 25.5).is_err());
        assert!(cavity_amplitude(&r, &c, 0.5).is_err());
        assert!(cavity_amplitude(&r, &c, -25.0).is_ok());
    }

    #[test]
    fn rejects_non_finite_and_unknown_keys() {
        let mut c = config();
        c.phi0 = f64::NAN;
        assert!(derive_rates(&c).is_err());
        let json = r#"{"n_atoms": 10, "delta_over_kappa": 1, "eta_over_kappa": 0.1, "phi0": 1,
                       "gamma_over_delta": 0.01, "a_rayleigh": 1, "mystery": 3}"#;
        assert!(PhysicalConfig::from_json(json).is_err());
        let json = r#"{"n_atoms": 10, "delta_over_kappa": 1, "eta_over_kappa": 0.1, "phi0": 1,
                       "gamma_over_delta": 0.01, "a_rayleigh": 1, "mode": "cavity_only"}"#;
        assert_eq!(PhysicalConfig::from_json(json).unwrap().mode, Mode::CavityOnly);
    }

    #[test]
    fn full_mode_needs_spontaneous_emission() {
        let c = PhysicalConfig {
            gamma_over_delta: 0.0,
            ..config()
        };
        assert!(c.validate().is_err());
        assert!(c.with_mode(Mode::CavityOnly).validate().is_ok());
    }

    #[test]
    fn fig2_is_weak_and_valid() {
        let v = validity_report(&config());
        assert_eq!(v.regime, CouplingRegime::Weak);
        assert!(v.all_pass());
        assert_eq!(v.saturation.status, CheckStatus::Unavailable);
    }

    #[test]
    fn fig3_is_strong() {
        let v = validity_report(&PhysicalConfig::preset("fig3").unwrap());
        assert_eq!(v.regime, CouplingRegime::Strong);
        assert_relative_eq!(v.phi0_sqrt_n, 14.0 * 10f64.sqrt());
    }

    #[test]
    fn nonlinearity_condition_cancels_at_critical_number() {
        // N_c = (4 (Δ/Γ) / (2a))² = (40 / (4/3))² = 900
        let c = PhysicalConfig {
            n_atoms: 900,
            gamma_over_delta: 0.1,
            a_rayleigh: 2.0 / 3.0,
            phi0: 3.0,
            ..config()
        };
        assert_relative_eq!(derive_rates(&c).unwrap().n_critical, 900.0, max_relative = 1e-12);
        let v = validity_report(&c);
        assert!(v.nonlinearity.value.abs() < 1e-12);
        assert!(v.nonlinearity.passed());
    }

    #[test]
    fn saturation_uses_optional_ratio() {
        let c = PhysicalConfig {
            kappa_over_delta: Some(1e-3),
            ..config()
        };
        let v = validity_report(&c);
        assert_eq!(v.saturation.status, CheckStatus::Pass);
    }

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            PhysicalConfig::preset(name).unwrap();
        }
        assert!(matches!(PhysicalConfig::preset("nope"), Err(Error::UnknownPreset(_))));
    }
}
