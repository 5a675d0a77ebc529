//! Independent references: the master-equation integrator and the
//! one-axis-twisting closed form.

use cavfeed::asymptotics::oat_reference;
use cavfeed::metrology::dense_state;
use cavfeed::oracle::{lindblad_integrate, LindbladSystem};
use cavfeed::sweep::optimize_squeezing;
use cavfeed::{derive_rates, Mode, PhysicalConfig};

#[test]
fn halving_the_step_changes_little() {
    let mut c = PhysicalConfig::preset("fig2").unwrap();
    c.n_atoms = 2;
    c.phi0 = 0.5;
    let r = derive_rates(&c).unwrap();
    let system = LindbladSystem::new(&c, &r, 10).unwrap();
    let dt = system.max_dt();
    let coarse = lindblad_integrate(&system, 20.0, dt).unwrap().state;
    let fine = lindblad_integrate(&system, 20.0, 0.5 * dt).unwrap().state;
    let diff = coarse
        .matrix
        .iter()
        .zip(fine.matrix.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn master_equation_tracks_strong_feedback_for_one_atom() {
    let mut c = PhysicalConfig::preset("fig2").unwrap().with_mode(Mode::CavityOnly);
    c.n_atoms = 1;
    c.phi0 = 1.0;
    c.eta_over_kappa = 0.1f64.powf(1.5);
    let r = derive_rates(&c).unwrap();
    let system = LindbladSystem::new(&c, &r, 10).unwrap();
    let evolved = lindblad_integrate(&system, 50.0, system.max_dt()).unwrap();
    let analytic = dense_state(&c, &r, 50.0).unwrap();
    let coherence_ratio = evolved.state.matrix[(0, 1)] / analytic.matrix[(0, 1)];
    assert!((coherence_ratio - 1.0).norm() < 0.01, "{coherence_ratio}");
    assert!(evolved.leakage < 1e-6);
}

#[test]
fn optimizer_finds_twisting_optimum() {
    let mut c = PhysicalConfig::preset("fig2").unwrap().with_mode(Mode::UnitaryOnly);
    c.n_atoms = 100;
    let c = c.with_phi0_sqrt_n(0.01);
    let r = derive_rates(&c).unwrap();
    let found = optimize_squeezing(&c, &r, None).unwrap();
    let best = (1..20_000)
        .map(|i| oat_reference(100, i as f64 * 1e-5).unwrap().xi2)
        .fold(f64::INFINITY, f64::min);
    assert!((found.xi2_min / best - 1.0).abs() < 0.05, "{} vs {best}", found.xi2_min);
}
