//! Explicit density matrices for small ensembles, quantum Fisher
//! information, and the twin-Fock mixture reached at strong coupling.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::collective::CollectiveState;
use crate::error::{Error, Result};
use crate::numerics::{ln_binomial, ln_binomial_half};
use crate::params::{DerivedRates, PhysicalConfig};

/// Largest N for which a dense 2^N matrix is built.
pub const MAX_DENSE_ATOMS: u64 = 12;

/// Eigenvalue pairs with `p_i + p_j` at or below this are dropped from the QFI.
pub const QFI_CUTOFF: f64 = 1e-12;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-10;

/// Basis of a [`DenseState`].
///
/// `Product`: index bits are atom occupations with atom 1 as the most
/// significant bit, a set bit meaning |1⟩. `Dicke`: index `k` is the
/// symmetric state with `k` atoms in |1⟩, `S_z = k - N/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Basis {
    Product { n: u64 },
    Dicke { n: u64 },
}

impl Basis {
    pub fn n_atoms(&self) -> u64 {
        match *self {
            Basis::Product { n } | Basis::Dicke { n } => n,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            Basis::Product { n } => 1usize << n,
            Basis::Dicke { n } => n as usize + 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub const ALL: [SpinAxis; 3] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z];
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub dim: usize,
    pub matrix: DMatrix<Complex64>,
    pub basis: Basis,
}

impl DenseState {
    /// Checks shape, Hermiticity and unit trace.
    pub fn new(matrix: DMatrix<Complex64>, basis: Basis) -> Result<Self> {
        let dim = basis.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::NotDensityMatrix(format!(
                "shape {}x{} does not match basis dimension {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let state = Self { dim, matrix, basis };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("Hermiticity violated by {worst:e}")));
        }
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotDensityMatrix(format!("trace is {tr}")));
        }
        Ok(())
    }

    pub fn n_atoms(&self) -> u64 {
        self.basis.n_atoms()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Embeds a Dicke-basis state into the product basis; product states are
    /// returned unchanged.
    pub fn to_product_basis(&self) -> Result<DenseState> {
        let n = match self.basis {
            Basis::Product { .. } => return Ok(self.clone()),
            Basis::Dicke { n } => n,
        };
        check_dense_size("product-basis embedding", n)?;
        let dim = 1usize << n;
        // column k of `iso` is the normalized Dicke state |D_k⟩
        let mut iso = DMatrix::<Complex64>::zeros(dim, n as usize + 1);
        for i in 0..dim {
            let k = i.count_ones() as u64;
            iso[(i, k as usize)] = Complex64::new((-0.5 * ln_binomial(n, k)).exp(), 0.0);
        }
        let matrix = &iso * &self.matrix * iso.adjoint();
        Ok(DenseState {
            dim,
            matrix,
            basis: Basis::Product { n },
        })
    }

    /// Reduced state of atoms 2..N.
    pub fn partial_trace_first(&self) -> Result<DenseState> {
        let product = self.to_product_basis()?;
        let n = product.n_atoms();
        if n < 2 {
            return Err(Error::InvalidArgument("partial trace needs at least two atoms".into()));
        }
        let half = product.dim / 2;
        let m = &product.matrix;
        let reduced = DMatrix::from_fn(half, half, |i, j| m[(i, j)] + m[(i + half, j + half)]);
        Ok(DenseState {
            dim: half,
            matrix: reduced,
            basis: Basis::Product { n: n - 1 },
        })
    }

    /// `Tr ρ² - Tr[(Tr₁ ρ)²]`; for a single atom the traced state is the
    /// scalar 1.
    pub fn purity_change(&self) -> Result<f64> {
        if self.n_atoms() == 1 {
            return Ok(self.purity() - 1.0);
        }
        Ok(self.purity() - self.partial_trace_first()?.purity())
    }

    /// `⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩` and the symmetrized second moments.
    pub fn spin_moments(&self) -> ([f64; 3], [[f64; 3]; 3]) {
        let applied: Vec<DMatrix<Complex64>> =
            SpinAxis::ALL.iter().map(|&a| apply_spin(self.basis, a, &self.matrix)).collect();
        let mut mean = [0.0; 3];
        let mut second = [[0.0; 3]; 3];
        for a in 0..3 {
            mean[a] = applied[a].trace().re;
            for b in 0..3 {
                // Tr(S_a S_b ρ)
                let sb_rho = &applied[b];
                let tr = apply_spin(self.basis, SpinAxis::ALL[a], sb_rho).trace();
                second[a][b] = tr.re;
            }
        }
        for a in 0..3 {
            for b in 0..a {
                let s = 0.5 * (second[a][b] + second[b][a]);
                second[a][b] = s;
                second[b][a] = s;
            }
        }
        (mean, second)
    }
}

fn check_dense_size(what: &'static str, n: u64) -> Result<()> {
    if n > MAX_DENSE_ATOMS {
        return Err(Error::TooManyAtoms {
            what,
            n,
            max: MAX_DENSE_ATOMS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one atom".into()));
    }
    Ok(())
}

/// `S_a · M` without forming `S_a`.
pub fn apply_spin(basis: Basis, axis: SpinAxis, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let dim = m.nrows();
    let cols = m.ncols();
    let mut out = DMatrix::<Complex64>::zeros(dim, cols);
    match basis {
        Basis::Product { n } => {
            let half_n = 0.5 * n as f64;
            for i in 0..dim {
                match axis {
                    SpinAxis::Z => {
                        let mz = i.count_ones() as f64 - half_n;
                        for c in 0..cols {
                            out[(i, c)] = m[(i, c)] * mz;
                        }
                    }
                    SpinAxis::X | SpinAxis::Y => {
                        for b in 0..n {
                            let bit = 1usize << b;
                            let src = i ^ bit;
                            let coef = match axis {
                                SpinAxis::X => Complex64::new(0.5, 0.0),
                                // ⟨1|S_y|0⟩ = -i/2, ⟨0|S_y|1⟩ = i/2
                                _ if i & bit != 0 => Complex64::new(0.0, -0.5),
                                _ => Complex64::new(0.0, 0.5),
                            };
                            for c in 0..cols {
                                out[(i, c)] += coef * m[(src, c)];
                            }
                        }
                    }
                }
            }
        }
        Basis::Dicke { n } => {
            let nf = n as f64;
            // ⟨k+1|S₊|k⟩
            let raise = |k: usize| ((k as f64 + 1.0) * (nf - k as f64)).sqrt();
            for k in 0..dim {
                match axis {
                    SpinAxis::Z => {
                        let mz = k as f64 - 0.5 * nf;
                        for c in 0..cols {
                            out[(k, c)] = m[(k, c)] * mz;
                        }
                    }
                    SpinAxis::X | SpinAxis::Y => {
                        // row k receives S₊ from k-1 and S₋ from k+1
                        let (up, down) = match axis {
                            SpinAxis::X => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
                            _ => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
                        };
                        if k > 0 {
                            let w = up * raise(k - 1);
                            for c in 0..cols {
                                out[(k, c)] += w * m[(k - 1, c)];
                            }
                        }
                        if k + 1 < dim {
                            let w = down * raise(k);
                            for c in 0..cols {
                                out[(k, c)] += w * m[(k + 1, c)];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Dense matrix of `S_a` in the given basis.
pub fn spin_matrix(basis: Basis, axis: SpinAxis) -> DMatrix<Complex64> {
    apply_spin(basis, axis, &DMatrix::identity(basis.dim(), basis.dim()))
}

/// The collective density matrix written out in the product basis.
pub fn dense_state(config: &PhysicalConfig, rates: &DerivedRates, t: f64) -> Result<DenseState> {
    check_dense_size("dense state", config.n_atoms)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and nonnegative, got {t}")));
    }
    let state = CollectiveState::new(config, rates)?;
    let n = config.n_atoms;
    let dim = 1usize << n;
    let ln_norm = -(n as f64) * std::f64::consts::LN_2;
    let ks = n as usize + 1;
    let coeffs: Vec<(Complex64, Complex64)> = (0..ks * ks)
        .map(|idx| state.sector_coefficients(t, (idx / ks) as u64, (idx % ks) as u64))
        .collect();
    let matrix = DMatrix::from_fn(dim, dim, |i, j| {
        let (z0, zd) = coeffs[i.count_ones() as usize * ks + j.count_ones() as usize];
        let d = (i ^ j).count_ones() as f64;
        (z0 + zd * d + ln_norm).exp()
    });
    Ok(DenseState {
        dim,
        matrix,
        basis: Basis::Product { n },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiResult {
    pub value: f64,
    pub optimal_axis: [f64; 3],
}

fn max_eigen(f: Matrix3<f64>) -> QfiResult {
    let eig = f.symmetric_eigen();
    let (idx, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let v: Vector3<f64> = eig.eigenvectors.column(idx).into_owned();
    QfiResult {
        value,
        optimal_axis: [v[0], v[1], v[2]],
    }
}

/// Quantum Fisher information for rotations, maximized over the axis.
pub fn qfi(state: &DenseState) -> Result<QfiResult> {
    state.validate()?;
    let eig = state.matrix.clone().symmetric_eigen();
    let p: &DVector<f64> = &eig.eigenvalues;
    let lowest = p.iter().copied().fold(f64::INFINITY, f64::min);
    if lowest < -POSITIVITY_TOL {
        return Err(Error::NotDensityMatrix(format!("negative eigenvalue {lowest:e}")));
    }
    let u = &eig.eigenvectors;
    let dim = state.dim;
    // Only eigenvectors with p_i > ε/2 can take part in a surviving pair.
    let support: Vec<usize> = (0..dim).filter(|&i| p[i] > 0.5 * QFI_CUTOFF).collect();
    let in_support: Vec<bool> = {
        let mut v = vec![false; dim];
        for &i in &support {
            v[i] = true;
        }
        v
    };
    let u_s = u.select_columns(&support);
    let u_s_adj = u_s.adjoint();
    let w: Vec<DMatrix<Complex64>> = SpinAxis::ALL
        .iter()
        .map(|&a| &u_s_adj * apply_spin(state.basis, a, u))
        .collect();
    let mut f = Matrix3::<f64>::zeros();
    for (row, &i) in support.iter().enumerate() {
        for j in 0..dim {
            let s = p[i] + p[j];
            if s <= QFI_CUTOFF {
                continue;
            }
            let diff = p[i] - p[j];
            // pairs with j outside the support appear only once here
            let weight = 2.0 * diff * diff / s * if in_support[j] { 1.0 } else { 2.0 };
            for a in 0..3 {
                let wa = w[a][(row, j)];
                for b in a..3 {
                    f[(a, b)] += weight * (wa * w[b][(row, j)].conj()).re;
                }
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            f[(a, b)] = f[(b, a)];
        }
    }
    Ok(max_eigen(f))
}

/// Trace distance `½‖ρ - σ‖₁`; states are compared in the product basis.
pub fn trace_distance(a: &DenseState, b: &DenseState) -> Result<f64> {
    let a = a.to_product_basis()?;
    let b = b.to_product_basis()?;
    if a.basis != b.basis {
        return Err(Error::InvalidArgument(format!(
            "states live on different spaces: {:?} vs {:?}",
            a.basis, b.basis
        )));
    }
    let diff = &a.matrix - &b.matrix;
    Ok(0.5 * diff.symmetric_eigen().eigenvalues.iter().map(|v| v.abs()).sum::<f64>())
}

fn check_even(n: u64) -> Result<()> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::OddAtomNumber(n));
    }
    Ok(())
}

/// Dicke amplitudes of the coherent spin state along x, `√(C(N,k)/2^N)`.
fn css_amplitudes(n: u64) -> Vec<f64> {
    (0..=n).map(|k| (0.5 * ln_binomial_half(n, k)).exp()).collect()
}

/// `(p₀, |m=0⟩ amplitude vector, p⊥, |ψ⊥⟩ amplitude vector)` in the Dicke basis.
fn mixture_components(n: u64) -> (f64, Vec<f64>, f64, Vec<f64>) {
    let c = css_amplitudes(n);
    let mid = (n / 2) as usize;
    let p0 = c[mid] * c[mid];
    let p1 = 1.0 - p0;
    let mut zero = vec![0.0; c.len()];
    zero[mid] = 1.0;
    let norm = p1.sqrt();
    let perp: Vec<f64> = c
        .iter()
        .enumerate()
        .map(|(k, &a)| if k == mid { 0.0 } else { a / norm })
        .collect();
    (p0, zero, p1, perp)
}

/// `p₀|m=0⟩⟨m=0| + (1 - p₀)|ψ⊥⟩⟨ψ⊥|` with `p₀ = C(N, N/2)/2^N` and `|ψ⊥⟩` the
/// coherent spin state with its `m = 0` component removed.
pub fn strong_coupling_mixture(n_atoms: u64) -> Result<DenseState> {
    check_even(n_atoms)?;
    let (p0, zero, p1, perp) = mixture_components(n_atoms);
    let dim = zero.len();
    let matrix = DMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(p0 * zero[i] * zero[j] + p1 * perp[i] * perp[j], 0.0)
    });
    DenseState::new(matrix, Basis::Dicke { n: n_atoms })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePredictions {
    pub qfi: f64,
    pub pc: f64,
}

/// `S_a |v⟩` for a real Dicke vector, returned as complex amplitudes.
fn dicke_apply(n: u64, axis: SpinAxis, v: &[f64]) -> Vec<Complex64> {
    let col = DMatrix::from_iterator(v.len(), 1, v.iter().map(|&x| Complex64::new(x, 0.0)));
    apply_spin(Basis::Dicke { n }, axis, &col).iter().copied().collect()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Splits a Dicke vector over N atoms by the state of atom 1, using
/// `|D_k^N⟩ = √(k/N)|1⟩|D_{k-1}^{N-1}⟩ + √((N-k)/N)|0⟩|D_k^{N-1}⟩`.
/// Returns the (|1⟩-branch, |0⟩-branch) vectors over N-1 atoms.
fn split_first_atom(n: u64, v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    let mut one = vec![0.0; n as usize];
    let mut zero = vec![0.0; n as usize];
    for (k, &a) in v.iter().enumerate() {
        if k > 0 {
            one[k - 1] += a * (k as f64 / nf).sqrt();
        }
        if k < n as usize {
            zero[k] += a * ((nf - k as f64) / nf).sqrt();
        }
    }
    (one, zero)
}

/// QFI and purity change of [`strong_coupling_mixture`], from the two pure
/// components directly (no diagonalization).
pub fn mixture_predictions(n_atoms: u64) -> Result<MixturePredictions> {
    check_even(n_atoms)?;
    let n = n_atoms;
    let (p0, zero, p1, perp) = mixture_components(n);
    let to_c = |v: &[f64]| -> Vec<Complex64> { v.iter().map(|&x| Complex64::new(x, 0.0)).collect() };
    let (zc, pc_) = (to_c(&zero), to_c(&perp));
    let s0: Vec<Vec<Complex64>> = SpinAxis::ALL.iter().map(|&a| dicke_apply(n, a, &zero)).collect();
    let s1: Vec<Vec<Complex64>> = SpinAxis::ALL.iter().map(|&a| dicke_apply(n, a, &perp)).collect();

    // Two orthogonal pure components: F_ab =
    //   4(p0-p1)² Re[A01 B10]
    // + 4 p0 Re[⟨A0|B0⟩ - A00 B00 - A01 B10]
    // + 4 p1 Re[⟨A1|B1⟩ - A11 B11 - A10 B01]
    let mut f = Matrix3::<f64>::zeros();
    for a in 0..3 {
        for b in 0..3 {
            let a00 = inner(&zc, &s0[a]);
            let b00 = inner(&zc, &s0[b]);
            let a11 = inner(&pc_, &s1[a]);
            let b11 = inner(&pc_, &s1[b]);
            let a01 = inner(&zc, &s1[a]);
            let b01 = inner(&zc, &s1[b]);
            let a10 = inner(&pc_, &s0[a]);
            let b10 = inner(&pc_, &s0[b]);
            let cross = (a01 * b10).re;
            let d = p0 - p1;
            f[(a, b)] = 4.0 * d * d * cross
                + 4.0 * p0 * (inner(&s0[a], &s0[b]) - a00 * b00 - a01 * b10).re
                + 4.0 * p1 * (inner(&s1[a], &s1[b]) - a11 * b11 - a10 * b01).re;
        }
    }
    let f = 0.5 * (f + f.transpose());
    let qfi = max_eigen(f).value;

    // Reduced state is Σ_s p_s (|a_s⟩⟨a_s| + |b_s⟩⟨b_s|) over four vectors.
    let (one0, zero0) = split_first_atom(n, &zero);
    let (one1, zero1) = split_first_atom(n, &perp);
    let vectors = [(p0, one0), (p0, zero0), (p1, one1), (p1, zero1)];
    let mut reduced = 0.0;
    for (pa, va) in &vectors {
        for (pb, vb) in &vectors {
            let ov: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
            reduced += pa * pb * ov * ov;
        }
    }
    let full = p0 * p0 + p1 * p1;
    Ok(MixturePredictions {
        qfi,
        pc: full - reduced,
    })
}
