//! Master-equation integration for a few atoms coupled to a truncated
//! cavity mode.
//!
//! Hamiltonian `H = (δ + φ₀ S_z) c†c + iη (c† - c)`, jumps `√2 c` and, in full
//! mode, `√(Γ_Ray/2) σ_z^(i) c` per atom. The joint index is
//! `atoms · (n_max + 1) + n` with the product-basis convention for `atoms`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrology::{Basis, DenseState};
use crate::params::{DerivedRates, Mode, PhysicalConfig};

pub const MAX_LINDBLAD_ATOMS: u64 = 3;

/// Largest tolerated population in the two highest Fock levels.
pub const MAX_LEAKAGE: f64 = 1e-6;

/// Sparse operator as a list of `(row, col, value)` entries.
#[derive(Clone, Debug)]
struct SparseOp {
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    /// `self · m`
    fn left(&self, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        out.fill(Complex64::new(0.0, 0.0));
        let cols = m.ncols();
        for &(r, c, v) in &self.entries {
            for j in 0..cols {
                out[(r, j)] += v * m[(c, j)];
            }
        }
    }

    /// `m · self†`
    fn right_adjoint(&self, m: &DMatrix<Complex64>, out: &mut DMatrix<Complex64>) {
        out.fill(Complex64::new(0.0, 0.0));
        let rows = m.nrows();
        for &(r, c, v) in &self.entries {
            let vc = v.conj();
            for i in 0..rows {
                out[(i, r)] += m[(i, c)] * vc;
            }
        }
    }

    fn adjoint_times(&self, other: &SparseOp, dim: usize) -> SparseOp {
        // (self† · other)_{ij} = Σ_k conj(self_{ki}) other_{kj}
        let mut dense = DMatrix::<Complex64>::zeros(dim, dim);
        for &(k, i, a) in &self.entries {
            for &(k2, j, b) in &other.entries {
                if k == k2 {
                    dense[(i, j)] += a.conj() * b;
                }
            }
        }
        from_dense(&dense)
    }
}

fn from_dense(m: &DMatrix<Complex64>) -> SparseOp {
    let mut entries = Vec::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)] != Complex64::new(0.0, 0.0) {
                entries.push((i, j, m[(i, j)]));
            }
        }
    }
    SparseOp { entries }
}

/// Atoms plus one cavity mode.
#[derive(Clone, Debug)]
pub struct LindbladSystem {
    pub n_atoms: u64,
    pub photon_cutoff: usize,
    pub dim: usize,
    max_dt: f64,
    /// `H - (i/2) Σ L†L`
    effective_hamiltonian: SparseOp,
    jumps: Vec<SparseOp>,
    hamiltonian: SparseOp,
}

impl LindbladSystem {
    pub fn new(config: &PhysicalConfig, rates: &DerivedRates, photon_cutoff: usize) -> Result<Self> {
        config.validate()?;
        let n = config.n_atoms;
        if n > MAX_LINDBLAD_ATOMS {
            return Err(Error::TooManyAtoms {
                what: "master-equation oracle",
                n,
                max: MAX_LINDBLAD_ATOMS,
            });
        }
        if config.mode == Mode::UnitaryOnly {
            return Err(Error::InvalidArgument(
                "the master equation always includes cavity loss; use full or cavity-only".into(),
            ));
        }
        let eta = config.eta_over_kappa;
        let min_cutoff = (10.0 * eta * eta).ceil() as usize + 5;
        if photon_cutoff < min_cutoff {
            return Err(Error::InvalidArgument(format!(
                "photon cutoff {photon_cutoff} below the minimum {min_cutoff} for eta = {eta}"
            )));
        }
        let levels = photon_cutoff + 1;
        let n_configs = 1usize << n;
        let dim = n_configs * levels;
        let idx = |atoms: usize, p: usize| atoms * levels + p;

        let mut h = Vec::new();
        let mut cavity = Vec::new();
        for atoms in 0..n_configs {
            let m = atoms.count_ones() as f64 - 0.5 * n as f64;
            let shift = config.delta_over_kappa + config.phi0 * m;
            for p in 0..levels {
                if p > 0 {
                    h.push((idx(atoms, p), idx(atoms, p), Complex64::new(shift * p as f64, 0.0)));
                    let s = (p as f64).sqrt();
                    // iη c†: |p-1⟩ → |p⟩ ; -iη c: |p⟩ → |p-1⟩
                    h.push((idx(atoms, p), idx(atoms, p - 1), Complex64::new(0.0, eta * s)));
                    h.push((idx(atoms, p - 1), idx(atoms, p), Complex64::new(0.0, -eta * s)));
                    cavity.push((idx(atoms, p - 1), idx(atoms, p), Complex64::new(2f64.sqrt() * s, 0.0)));
                }
            }
        }
        let mut jumps = vec![SparseOp { entries: cavity }];
        let gamma = rates.rayleigh(config.mode);
        if gamma > 0.0 {
            let amp = (0.5 * gamma).sqrt();
            for atom in 0..n {
                let bit = 1usize << (n - 1 - atom);
                let mut entries = Vec::new();
                for atoms in 0..n_configs {
                    let sz = if atoms & bit != 0 { 1.0 } else { -1.0 };
                    for p in 1..levels {
                        let v = amp * sz * (p as f64).sqrt();
                        entries.push((idx(atoms, p - 1), idx(atoms, p), Complex64::new(v, 0.0)));
                    }
                }
                jumps.push(SparseOp { entries });
            }
        }

        let mut heff = DMatrix::<Complex64>::zeros(dim, dim);
        for &(r, c, v) in &h {
            heff[(r, c)] += v;
        }
        for l in &jumps {
            let ll = l.adjoint_times(l, dim);
            for &(r, c, v) in &ll.entries {
                heff[(r, c)] += Complex64::new(0.0, -0.5) * v;
            }
        }
        let fastest = (config.delta_over_kappa.abs() + 0.5 * config.phi0 * n as f64).max(1.0);
        Ok(Self {
            n_atoms: n,
            photon_cutoff,
            dim,
            max_dt: 0.01 / fastest,
            effective_hamiltonian: from_dense(&heff),
            jumps,
            hamiltonian: SparseOp { entries: h },
        })
    }

    /// Largest step accepted by [`lindblad_integrate`].
    pub fn max_dt(&self) -> f64 {
        self.max_dt
    }

    /// Largest deviation of the Hamiltonian from Hermiticity.
    pub fn hamiltonian_asymmetry(&self) -> f64 {
        let mut m = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.hamiltonian.entries {
            m[(r, c)] += v;
        }
        (&m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Coherent spin state along x with the cavity in vacuum.
    pub fn initial_state(&self) -> DMatrix<Complex64> {
        let levels = self.photon_cutoff + 1;
        let n_configs = 1usize << self.n_atoms;
        let amp = 1.0 / n_configs as f64;
        DMatrix::from_fn(self.dim, self.dim, |i, j| {
            if i % levels == 0 && j % levels == 0 {
                Complex64::new(amp, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    fn derivative(&self, rho: &DMatrix<Complex64>, scratch: &mut Scratch, out: &mut DMatrix<Complex64>) {
        // -i(H_eff ρ - ρ H_eff†) + Σ L ρ L†
        self.effective_hamiltonian.left(rho, &mut scratch.a);
        self.effective_hamiltonian.right_adjoint(rho, &mut scratch.b);
        let mi = Complex64::new(0.0, -1.0);
        out.copy_from(&scratch.a);
        *out -= &scratch.b;
        *out *= mi;
        for l in &self.jumps {
            l.left(rho, &mut scratch.a);
            l.right_adjoint(&scratch.a, &mut scratch.b);
            *out += &scratch.b;
        }
    }

    /// Population of the two highest Fock levels.
    pub fn leakage(&self, rho: &DMatrix<Complex64>) -> f64 {
        let levels = self.photon_cutoff + 1;
        (0..self.dim)
            .filter(|i| i % levels + 2 >= levels)
            .map(|i| rho[(i, i)].re)
            .sum()
    }

    /// Traces out the cavity mode.
    pub fn atomic_state(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let levels = self.photon_cutoff + 1;
        let n_configs = 1usize << self.n_atoms;
        DMatrix::from_fn(n_configs, n_configs, |a, b| {
            (0..levels).map(|p| rho[(a * levels + p, b * levels + p)]).sum()
        })
    }
}

/// `dst += a · src`
fn add_scaled(dst: &mut DMatrix<Complex64>, a: f64, src: &DMatrix<Complex64>) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += s * a;
    }
}

struct Scratch {
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
}

#[derive(Clone, Debug)]
pub struct LindbladOutcome {
    pub state: DenseState,
    /// Largest cutoff leakage seen at any step.
    pub leakage: f64,
    pub steps: usize,
    /// Trace of the joint state at the end, before any renormalization.
    pub joint_trace: f64,
}

/// Fixed-step classical Runge-Kutta from the initial state to `t_final`.
pub fn lindblad_integrate(system: &LindbladSystem, t_final: f64, dt: f64) -> Result<LindbladOutcome> {
    lindblad_integrate_with_limit(system, t_final, dt, MAX_LEAKAGE)
}

/// [`lindblad_integrate`] with a custom leakage tolerance.
pub fn lindblad_integrate_with_limit(
    system: &LindbladSystem,
    t_final: f64,
    dt: f64,
    max_leakage: f64,
) -> Result<LindbladOutcome> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_final must be finite and nonnegative, got {t_final}")));
    }
    if !(dt > 0.0 && dt <= system.max_dt * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "dt = {dt} must be positive and at most {:.3e}",
            system.max_dt
        )));
    }
    let steps = (t_final / dt).round() as usize;
    let h = if steps > 0 { t_final / steps as f64 } else { 0.0 };
    let dim = system.dim;
    let zeros = || DMatrix::<Complex64>::zeros(dim, dim);
    let mut scratch = Scratch { a: zeros(), b: zeros() };
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (zeros(), zeros(), zeros(), zeros(), zeros());
    let mut rho = system.initial_state();
    let mut leakage = 0.0f64;
    for _ in 0..steps {
        system.derivative(&rho, &mut scratch, &mut k1);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, 0.5 * h, &k1);
        system.derivative(&tmp, &mut scratch, &mut k2);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, 0.5 * h, &k2);
        system.derivative(&tmp, &mut scratch, &mut k3);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, h, &k3);
        system.derivative(&tmp, &mut scratch, &mut k4);
        add_scaled(&mut rho, h / 6.0, &k1);
        add_scaled(&mut rho, h / 3.0, &k2);
        add_scaled(&mut rho, h / 3.0, &k3);
        add_scaled(&mut rho, h / 6.0, &k4);
        leakage = leakage.max(system.leakage(&rho));
        if leakage > max_leakage {
            return Err(Error::CutoffLeakage {
                leakage,
                limit: max_leakage,
            });
        }
    }
    let joint_trace = rho.trace().re;
    let atoms = system.atomic_state(&rho);
    let state = DenseState::new(atoms, Basis::Product { n: system.n_atoms })?;
    Ok(LindbladOutcome {
        state,
        leakage,
        steps,
        joint_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::derive_rates;

    fn cavity_only(n: u64) -> (PhysicalConfig, DerivedRates) {
        let mut c = PhysicalConfig::preset("fig2").unwrap().with_mode(Mode::CavityOnly);
        c.n_atoms = n;
        c.phi0 = 0.1;
        let r = derive_rates(&c).unwrap();
        (c, r)
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let (c, r) = cavity_only(2);
        let s = LindbladSystem::new(&c, &r, 10).unwrap();
        assert!(s.hamiltonian_asymmetry() < 1e-12);
        assert_eq!(s.dim, 44);
    }

    #[test]
    fn undriven_state_is_constant() {
        let (mut c, _) = cavity_only(2);
        c.eta_over_kappa = 1e-300;
        let r = derive_rates(&c).unwrap();
        let s = LindbladSystem::new(&c, &r, 6).unwrap();
        let out = lindblad_integrate(&s, 5.0, s.max_dt()).unwrap();
        for z in out.state.matrix.iter() {
            assert!((z - Complex64::new(0.25, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (c, r) = cavity_only(1);
        assert!(LindbladSystem::new(&c, &r, 2).is_err());
        assert!(LindbladSystem::new(&c.with_mode(Mode::UnitaryOnly), &r, 10).is_err());
        let mut big = c.clone();
        big.n_atoms = 4;
        assert!(LindbladSystem::new(&big, &r, 10).is_err());
        let s = LindbladSystem::new(&c, &r, 10).unwrap();
        assert!(lindblad_integrate(&s, 1.0, 1.0).is_err());
    }

    #[test]
    fn leakage_is_detected() {
        let (mut c, _) = cavity_only(1);
        c.eta_over_kappa = 0.7;
        c.delta_over_kappa = 0.0;
        let r = derive_rates(&c).unwrap();
        let s = LindbladSystem::new(&c, &r, 10).unwrap();
        let out = lindblad_integrate(&s, 10.0, s.max_dt()).unwrap();
        assert!(out.leakage > 0.0 && out.leakage < MAX_LEAKAGE);
        assert!(matches!(
            lindblad_integrate_with_limit(&s, 10.0, s.max_dt(), 1e-14),
            Err(Error::CutoffLeakage { .. })
        ));
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let mut c = PhysicalConfig::preset("fig2").unwrap();
        c.n_atoms = 2;
        c.phi0 = 0.1;
        let r = derive_rates(&c).unwrap();
        let s = LindbladSystem::new(&c, &r, 8).unwrap();
        let out = lindblad_integrate(&s, 100.0, s.max_dt()).unwrap();
        assert!((out.joint_trace - 1.0).abs() < 1e-8);
        let m = &out.state.matrix;
        assert!((m - m.adjoint()).iter().all(|z| z.norm() < 1e-10));
    }
}
