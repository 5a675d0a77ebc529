//! Log-space combinatorics.
//!
//! Binomial probabilities at p = 1/2 use the saddle-point expansion
//! (Stirling remainder plus the deviance term `bd0`), which keeps full
//! relative precision for `C(N, k) / 2^N` even when `N` is in the tens of
//! millions and `ln C(N, k)` itself is of order `N`.

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_2: f64 = std::f64::consts::LN_2;

/// Largest tail weight a truncated summation window may discard.
pub const MAX_WINDOW_TAIL: f64 = 1e-10;

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirlerr(n: u64) -> f64 {
    if n <= 15 {
        let nf = n as f64;
        let ln_fact: f64 = (2..=n).map(|i| (i as f64).ln()).sum();
        return ln_fact - (nf + 0.5) * nf.ln() + nf - 0.5 * LN_2PI;
    }
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    let nf = n as f64;
    let nn = nf * nf;
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / nf
}

/// Deviance term `x ln(x/np) + np - x`, evaluated without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// `ln(C(n, k) / 2^n)`, the log-probability of `k` successes in `n` fair trials.
///
/// Returns `-inf` for `k > n`.
pub fn ln_binomial_half(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return -(n as f64) * LN_2;
    }
    let (nf, kf) = (n as f64, k as f64);
    let half = 0.5 * nf;
    let lc = stirlerr(n) - stirlerr(k) - stirlerr(n - k) - bd0(kf, half) - bd0(nf - kf, half);
    let lf = LN_2PI + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `ln C(n, k)`; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    ln_binomial_half(n, k) + n as f64 * LN_2
}

/// `ln(sum(exp(x)))` over the iterator, stable for arbitrarily large or
/// small terms. Empty input and all `-inf` input give `-inf`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    let mut acc = KahanSum::default();
    for v in &values {
        acc.add((v - max).exp());
    }
    max + acc.value().ln()
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Binomial weights `C(N, k) / 2^N` restricted to a band around `k = N/2`.
///
/// With a window `w` the band is `|k - N/2| <= w sqrt(N)`; the discarded
/// weight is bounded with Hoeffding's inequality and reported as
/// [`BinomialBand::tail_bound`].
#[derive(Clone, Debug)]
pub struct BinomialBand {
    n: u64,
    lo: u64,
    weights: Vec<f64>,
    tail_bound: f64,
}

impl BinomialBand {
    pub fn new(n: u64, window: Option<f64>) -> Result<Self> {
        let (lo, hi) = match window {
            None => (0, n),
            Some(w) => {
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "summation window must be positive and finite, got {w}"
                    )));
                }
                let nf = n as f64;
                let half_width = w * nf.sqrt();
                let lo = (0.5 * nf - half_width).ceil().max(0.0) as u64;
                let hi = ((0.5 * nf + half_width).floor() as u64).min(n);
                (lo, hi)
            }
        };
        let nf = n as f64;
        let mut tail_bound = 0.0;
        if lo > 0 {
            let s = 0.5 * nf - (lo as f64 - 1.0);
            tail_bound += (-2.0 * s * s / nf).exp();
        }
        if hi < n {
            let s = (hi as f64 + 1.0) - 0.5 * nf;
            tail_bound += (-2.0 * s * s / nf).exp();
        }
        if tail_bound > MAX_WINDOW_TAIL {
            return Err(Error::WindowTooSmall {
                tail_bound,
                limit: MAX_WINDOW_TAIL,
            });
        }
        let weights = (lo..=hi).map(|k| ln_binomial_half(n, k).exp()).collect();
        Ok(Self {
            n,
            lo,
            weights,
            tail_bound,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `(k, C(N,k)/2^N)` in ascending `k`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.weights
            .iter()
            .enumerate()
            .map(move |(i, &w)| (self.lo + i as u64, w))
    }
}

/// Table of `ln C(n, k)` for all `0 <= k <= n <= max_n`, for the O(N^3)
/// sector sums where the same coefficients are reused many times.
#[derive(Clone, Debug)]
pub struct LnBinomialTable {
    rows: Vec<Vec<f64>>,
}

impl LnBinomialTable {
    pub fn new(max_n: u64) -> Self {
        let rows = (0..=max_n)
            .map(|n| (0..=n).map(|k| ln_binomial(n, k)).collect())
            .collect();
        Self { rows }
    }

    #[inline]
    pub fn get(&self, n: u64, k: u64) -> f64 {
        if k > n {
            return f64::NEG_INFINITY;
        }
        self.rows[n as usize][k as usize]
    }
}
