//! Collective-spin moments, the spin-squeezing parameter, purity and the
//! one-atom purity change.
//!
//! Moments only need the sectors with Hamming distance 0, 1 and 2:
//! * `⟨S₊⟩` and `⟨{S_z, S₊}⟩/2` from `(k, k+1, d=1)`,
//! * `⟨S₊²⟩` from `(k, k+2, d=2)`,
//! * `⟨S₊S₋⟩` from `(k, k, d=2)` plus the diagonal.
//!
//! Each sector is weighted by its multiplicity, written as the binomial
//! probability `C(N,k)/2^N` times a polynomial in `k`, so that the sums stay
//! accurate to machine precision relative to N² even for N = 10⁷.

use serde::{Deserialize, Serialize};

use crate::collective::CollectiveState;
use crate::error::{Error, Result};
use crate::numerics::{BinomialBand, KahanSum, LnBinomialTable};
use crate::params::{DerivedRates, PhysicalConfig};

/// Default summation half-width in units of √N.
pub const DEFAULT_WINDOW: f64 = 12.0;

/// Largest N accepted by [`purity`] and [`purity_change`] unless overridden.
pub const DEFAULT_PURITY_LIMIT: u64 = 400;

/// Relative mean-spin length below which ξ² is not reported.
pub const COLLAPSED_SPIN_FRACTION: f64 = 1e-6;

/// First and second moments of (S_x, S_y, S_z) at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinMoments {
    pub n_atoms: u64,
    pub time: f64,
    pub mean: [f64; 3],
    /// Symmetrized second moments `⟨{S_a, S_b}⟩ / 2`.
    pub second_moments: [[f64; 3]; 3],
    /// Upper bound on the binomial weight left out by the summation window.
    pub tail_bound: f64,
}

impl SpinMoments {
    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = self.second_moments;
        for (a, row) in c.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v -= self.mean[a] * self.mean[b];
            }
        }
        c
    }

    pub fn mean_length(&self) -> f64 {
        self.mean.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Default)]
struct ComplexSum {
    re: KahanSum,
    im: KahanSum,
}

impl ComplexSum {
    fn add(&mut self, w: f64, z: num_complex::Complex64) {
        self.re.add(w * z.re);
        self.im.add(w * z.im);
    }

    fn value(&self) -> (f64, f64) {
        (self.re.value(), self.im.value())
    }
}

/// Collective-spin moments at time `t`.
///
/// `window` restricts the sums to `|k - N/2| <= window·√N`; `None` sums over
/// every sector.
pub fn spin_moments(
    config: &PhysicalConfig,
    rates: &DerivedRates,
    t: f64,
    window: Option<f64>,
) -> Result<SpinMoments> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let state = CollectiveState::new(config, rates)?;
    let band = BinomialBand::new(config.n_atoms, window)?;
    Ok(moments_from_band(&state, &band, t))
}

pub(crate) fn moments_from_band(state: &CollectiveState, band: &BinomialBand, t: f64) -> SpinMoments {
    let n = state.n_atoms();
    let half = 0.5 * n as f64;

    let mut raise = ComplexSum::default(); // ⟨S₊⟩
    let mut raise_z = ComplexSum::default(); // ⟨{S_z, S₊}⟩/2
    let mut raise2 = ComplexSum::default(); // ⟨S₊²⟩
    let mut hop = KahanSum::default(); // Σ_{i≠j} ⟨σ₊ⁱσ₋ʲ⟩
    let mut sz = KahanSum::default();
    let mut sz2 = KahanSum::default();

    for (k, p) in band.iter() {
        let kf = k as f64;
        let up = (n - k) as f64;
        let m = kf - half;
        sz.add(p * m);
        sz2.add(p * m * m);
        if k < n {
            let e = state.log_scaled_element(t, k, k + 1, 1).exp();
            raise.add(p * up, e);
            raise_z.add(p * up * (m + 0.5), e);
        }
        if k + 1 < n {
            let e = state.log_scaled_element(t, k, k + 2, 2).exp();
            raise2.add(p * up * (up - 1.0), e);
        }
        if k > 0 && k < n {
            let e = state.log_scaled_element(t, k, k, 2).exp();
            hop.add(p * kf * up * e.re);
        }
    }

    let (sx, sy) = raise.value();
    let (xz, yz) = raise_z.value();
    let (r2, i2) = raise2.value();
    let sz = sz.value();
    // ⟨S₊S₋⟩ = ⟨S_z⟩ + N/2 + Σ_{i≠j}; S_x² + S_y² = S₊S₋ - S_z
    let transverse = half + hop.value();
    let xx = 0.5 * (r2 + transverse);
    let yy = 0.5 * (-r2 + transverse);
    let xy = 0.5 * i2;

    SpinMoments {
        n_atoms: n,
        time: t,
        mean: [sx, sy, sz],
        second_moments: [[xx, xy, xz], [xy, yy, yz], [xz, yz, sz2.value()]],
        tail_bound: band.tail_bound(),
    }
}

/// Result of minimizing the transverse variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingResult {
    pub xi2: f64,
    pub mean_spin_length: f64,
    /// Angle of the minimal-variance direction in the plane orthogonal to
    /// the mean spin, measured from `mean × ẑ`-based reference axis `e₁`
    /// towards `e₂ = n × e₁`.
    pub optimal_transverse_angle: f64,
    pub min_variance: f64,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    [v[0] / l, v[1] / l, v[2] / l]
}

fn quadratic_form(c: &[[f64; 3]; 3], u: [f64; 3], v: [f64; 3]) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            s += u[a] * c[a][b] * v[b];
        }
    }
    s
}

/// Squeezing parameter ξ² = N·min Var(S_⊥)/|⟨S⟩|².
pub fn squeezing_xi2(moments: &SpinMoments) -> Result<SqueezingResult> {
    let length = moments.mean_length();
    let threshold = COLLAPSED_SPIN_FRACTION * 0.5 * moments.n_atoms as f64;
    if length.is_nan() || length < threshold {
        return Err(Error::CollapsedMeanSpin { length, threshold });
    }
    let n_hat = normalized(moments.mean);
    let reference = if n_hat[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let e1 = normalized(cross(reference, n_hat));
    let e2 = cross(n_hat, e1);
    let cov = moments.covariance();
    let a = quadratic_form(&cov, e1, e1);
    let b = quadratic_form(&cov, e2, e2);
    let c = quadratic_form(&cov, e1, e2);
    let min_variance = 0.5 * (a + b) - (0.25 * (a - b) * (a - b) + c * c).sqrt();
    if min_variance.is_nan() || min_variance <= 0.0 {
        return Err(Error::Numerical(format!(
            "minimal transverse variance {min_variance:e} is not positive"
        )));
    }
    let angle = 0.5 * (2.0 * c).atan2(a - b) + std::f64::consts::FRAC_PI_2;
    Ok(SqueezingResult {
        xi2: moments.n_atoms as f64 * min_variance / (length * length),
        mean_spin_length: length,
        optimal_transverse_angle: angle,
        min_variance,
    })
}

fn check_purity_inputs(config: &PhysicalConfig, t: f64, max_atoms: u64) -> Result<()> {
    if config.n_atoms > max_atoms {
        return Err(Error::TooManyAtoms {
            what: "purity",
            n: config.n_atoms,
            max: max_atoms,
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

fn full_purity(state: &CollectiveState, table: &LnBinomialTable, t: f64) -> f64 {
    let n = state.n_atoms();
    let ln_norm = -2.0 * n as f64 * std::f64::consts::LN_2;
    let mut acc = KahanSum::default();
    for k1 in 0..=n {
        for k2 in 0..=n {
            let (z0, zd) = state.sector_coefficients(t, k1, k2);
            let (a, b) = (2.0 * z0.re + ln_norm, 2.0 * zd.re);
            for u in (k1 + k2).saturating_sub(n)..=k1.min(k2) {
                let d = (k1 + k2 - 2 * u) as f64;
                let ln_m = table.get(n, u) + table.get(n - u, k1 - u) + table.get(n - k1, k2 - u);
                acc.add((ln_m + a + b * d).exp());
            }
        }
    }
    acc.value()
}

/// Purity of the state with the first atom traced out. The reduced element
/// for labels `(k1, k2, u)` over N-1 atoms is the sum of the N-atom elements
/// with the traced atom in |0⟩ on both sides and in |1⟩ on both sides.
fn reduced_purity(state: &CollectiveState, table: &LnBinomialTable, t: f64) -> f64 {
    let n = state.n_atoms();
    let r = n - 1;
    let ln_norm = -2.0 * n as f64 * std::f64::consts::LN_2;
    let mut acc = KahanSum::default();
    for k1 in 0..=r {
        for k2 in 0..=r {
            let (z0a, zda) = state.sector_coefficients(t, k1, k2);
            let (z0b, zdb) = state.sector_coefficients(t, k1 + 1, k2 + 1);
            for u in (k1 + k2).saturating_sub(r)..=k1.min(k2) {
                let d = (k1 + k2 - 2 * u) as f64;
                let sum = (z0a + zda * d).exp() + (z0b + zdb * d).exp();
                let ln_m = table.get(r, u) + table.get(r - u, k1 - u) + table.get(r - k1, k2 - u);
                acc.add((ln_m + ln_norm).exp() * sum.norm_sqr());
            }
        }
    }
    acc.value()
}

/// `Tr ρ²`.
pub fn purity(config: &PhysicalConfig, rates: &DerivedRates, t: f64) -> Result<f64> {
    purity_with_limit(config, rates, t, DEFAULT_PURITY_LIMIT)
}

pub fn purity_with_limit(config: &PhysicalConfig, rates: &DerivedRates, t: f64, max_atoms: u64) -> Result<f64> {
    check_purity_inputs(config, t, max_atoms)?;
    let state = CollectiveState::new(config, rates)?;
    let table = LnBinomialTable::new(config.n_atoms);
    Ok(full_purity(&state, &table, t))
}

/// `PC = Tr ρ² - Tr[(Tr₁ ρ)²]`.
pub fn purity_change(config: &PhysicalConfig, rates: &DerivedRates, t: f64) -> Result<f64> {
    purity_change_with_limit(config, rates, t, DEFAULT_PURITY_LIMIT)
}

pub fn purity_change_with_limit(
    config: &PhysicalConfig,
    rates: &DerivedRates,
    t: f64,
    max_atoms: u64,
) -> Result<f64> {
    check_purity_inputs(config, t, max_atoms)?;
    let state = CollectiveState::new(config, rates)?;
    let table = LnBinomialTable::new(config.n_atoms);
    if config.n_atoms == 1 {
        // Tracing the only atom leaves a trace-one scalar.
        return Ok(full_purity(&state, &table, t) - 1.0);
    }
    Ok(full_purity(&state, &table, t) - reduced_purity(&state, &table, t))
}
