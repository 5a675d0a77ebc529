//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured numbers. Lines go straight to stderr so they appear in
//! the log whether or not the harness captures output.
//!
//! Run alone with `cargo test -p cavfeed-core --test acceptance`.

use std::io::Write;
use std::time::Instant;

use cavfeed::asymptotics::{absorption_limit, fisher_scaling, oat_reference, weak_coupling_optimum};
use cavfeed::collective::{element, labels, trace};
use cavfeed::figures::{figure_pipeline, FigureName, FigureOptions};
use cavfeed::metrology::{dense_state, mixture_predictions, qfi, Basis, DenseState};
use cavfeed::observables::{purity, purity_change, spin_moments, squeezing_xi2};
use cavfeed::oracle::{dense_from_definition, lindblad_integrate, LindbladSystem};
use cavfeed::sweep::optimize_squeezing;
use cavfeed::{derive_rates, DerivedRates, Mode, PhysicalConfig};
use nalgebra::DMatrix;
use num_complex::Complex64;

const MODES: [Mode; 3] = [Mode::Full, Mode::CavityOnly, Mode::UnitaryOnly];

fn report(id: u32, title: &str, pass: bool, started: Instant, details: &[String]) {
    let mut err = std::io::stderr().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        err,
        "\n[{verdict}] criterion {id}: {title} ({:.1} s)",
        started.elapsed().as_secs_f64()
    );
    for d in details {
        let _ = writeln!(err, "         {d}");
    }
    assert!(pass, "criterion {id} failed: {}", details.join("; "));
}

fn with_rates(c: PhysicalConfig) -> (PhysicalConfig, DerivedRates) {
    let r = derive_rates(&c).unwrap();
    (c, r)
}

fn fig2(n: u64, mode: Mode) -> (PhysicalConfig, DerivedRates) {
    let mut c = PhysicalConfig::preset("fig2").unwrap();
    c.n_atoms = n;
    c.mode = mode;
    with_rates(c)
}

fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Relative error measured against the natural scale of the quantity, so
/// that entries which vanish by symmetry do not divide by zero.
fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / b.abs().max(scale)
}

#[test]
fn criterion_01_oracle_equivalence() {
    let start = Instant::now();
    let mut worst = (0.0f64, String::new());
    for n in [2u64, 4, 8, 10] {
        let half = 0.5 * n as f64;
        for mode in MODES {
            let (c, r) = fig2(n, mode);
            for t in log_times(1.0, 1e4, 5) {
                let dense = dense_from_definition(&c, &r, t).unwrap();
                let (mean, second) = dense.spin_moments();
                let m = spin_moments(&c, &r, t, None).unwrap();
                let mut errs = Vec::new();
                for a in 0..3 {
                    errs.push(rel(m.mean[a], mean[a], half));
                    for b in 0..3 {
                        errs.push(rel(m.second_moments[a][b], second[a][b], half * half));
                    }
                }
                errs.push(rel(purity(&c, &r, t).unwrap(), dense.purity(), 1.0));
                errs.push(rel(purity_change(&c, &r, t).unwrap(), dense.purity_change().unwrap(), 1.0));
                for e in errs {
                    if e > worst.0 {
                        worst = (e, format!("N={n} mode={} t={t:.0}", mode.as_str()));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        "collective path equals per-pair evaluation (moments, purity, PC)",
        worst.0 <= 1e-10 && elapsed < 30.0,
        start,
        &[format!("worst relative error {:.2e} at {} (limit 1e-10, runtime limit 30 s)", worst.0, worst.1)],
    );
}

fn lindblad_error(n: u64, eta2: f64) -> f64 {
    let mut c = PhysicalConfig::preset("fig2").unwrap();
    c.n_atoms = n;
    c.phi0 = 0.1;
    c.eta_over_kappa = eta2.sqrt();
    c.mode = if n == 1 { Mode::CavityOnly } else { Mode::Full };
    let (c, r) = with_rates(c);
    let system = LindbladSystem::new(&c, &r, 10).unwrap();
    let out = lindblad_integrate(&system, 50.0, system.max_dt()).unwrap();
    let analytic = dense_state(&c, &r, 50.0).unwrap();
    out.state
        .matrix
        .iter()
        .zip(analytic.matrix.iter())
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_02_master_equation() {
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for n in [1u64, 2] {
        let strong = lindblad_error(n, 1e-2);
        let weak = lindblad_error(n, 1e-3);
        let ok = strong < 0.05 && weak < 0.05 && weak < strong;
        pass &= ok;
        details.push(format!(
            "N={n}: max relative element error {strong:.3e} at (eta/kappa)^2=1e-2, {weak:.3e} at 1e-3"
        ));
    }
    pass &= start.elapsed().as_secs_f64() < 60.0;
    report(2, "master equation agrees with the analytic state within 5%", pass, start, &details);
}

#[test]
fn criterion_03_conservation() {
    let start = Instant::now();
    let times = log_times(1.0, 1e6, 13);
    let mut worst_trace = 0.0f64;
    let mut worst_sz = 0.0f64;
    let mut worst_herm = 0.0f64;
    let mut monotone = true;
    for mode in MODES {
        for n in [10u64, 50, 1000] {
            let (c, r) = fig2(n, mode);
            let nf = n as f64;
            let mut last_purity = f64::INFINITY;
            for &t in &times {
                worst_trace = worst_trace.max((trace(&c, &r, t).unwrap() - 1.0).abs());
                let m = spin_moments(&c, &r, t, Some(12.0)).unwrap();
                worst_sz = worst_sz
                    .max(m.mean[2].abs() / nf)
                    .max((m.second_moments[2][2] - nf / 4.0).abs() / nf);
                if n <= 50 && mode != Mode::UnitaryOnly {
                    let p = purity(&c, &r, t).unwrap();
                    monotone &= p <= last_purity + 1e-14;
                    last_purity = p;
                }
            }
        }
        let (c, r) = fig2(10, mode);
        for &t in &[0.0, 7.0, 3e3, 1e6] {
            for label in labels(10) {
                let a = element(&c, &r, t, label).unwrap().to_complex();
                let b = element(&c, &r, t, label.swapped()).unwrap().to_complex();
                worst_herm = worst_herm.max((a - b.conj()).norm() * 1024.0);
            }
        }
    }
    let pass = worst_trace <= 1e-12
        && worst_sz <= 1e-10
        && monotone
        && worst_herm <= 1e-12
        && start.elapsed().as_secs_f64() < 10.0;
    report(
        3,
        "trace, S_z moments, purity monotonicity, Hermiticity",
        pass,
        start,
        &[
            format!("max |trace - 1| = {worst_trace:.2e} (limit 1e-12)"),
            format!("max S_z deviation / N = {worst_sz:.2e} (limit 1e-10)"),
            format!("purity non-increasing: {monotone}"),
            format!("max Hermiticity defect (relative to 2^-N) = {worst_herm:.2e}"),
        ],
    );
}

fn rb(x: f64, mode: Mode) -> (PhysicalConfig, DerivedRates) {
    with_rates(PhysicalConfig::preset("fig4-rb87").unwrap().with_mode(mode).with_phi0_sqrt_n(x))
}

#[test]
fn criterion_04_weak_coupling_optimum() {
    let start = Instant::now();
    let (c, r) = rb(0.3, Mode::CavityOnly);
    let predicted = weak_coupling_optimum(c.n_atoms, c.eta_over_kappa, c.phi0).unwrap();
    let opt = optimize_squeezing(&c, &r, Some(12.0)).unwrap();
    let (c3, r3) = rb(3.0, Mode::CavityOnly);
    let strong = optimize_squeezing(&c3, &r3, Some(12.0)).unwrap();
    let xi_ok = (opt.xi2_min / 0.02007 - 1.0).abs() <= 0.25;
    let t_ok = opt.t_min / 2.77e5 <= 2.0 && opt.t_min / 2.77e5 >= 0.5;
    let loss_ok = strong.xi2_min > 10.0 * opt.xi2_min;
    report(
        4,
        "weak-coupling optimum at N=1e5, phi0 sqrt(N)=0.3",
        xi_ok && t_ok && loss_ok && start.elapsed().as_secs_f64() < 300.0,
        start,
        &[
            format!(
                "xi2_min = {:.5} vs {:.5} predicted: {:+.1}% (limit 25%) -> {}",
                opt.xi2_min,
                predicted.xi2_min,
                100.0 * (opt.xi2_min / 0.02007 - 1.0),
                if xi_ok { "ok" } else { "out of tolerance" }
            ),
            format!(
                "t_min = {:.4e} vs {:.4e} predicted: factor {:.2} (limit 2) -> {}",
                opt.t_min,
                predicted.t_min,
                opt.t_min / 2.77e5,
                if t_ok { "ok" } else { "out of tolerance" }
            ),
            format!(
                "xi2_min at phi0 sqrt(N)=3: {:.4} = {:.1} x the value at 0.3 (needs > 10) -> {}",
                strong.xi2_min,
                strong.xi2_min / opt.xi2_min,
                if loss_ok { "ok" } else { "too small" }
            ),
        ],
    );
}

#[test]
fn criterion_05_scaling_law() {
    let start = Instant::now();
    let ns = [1e4f64, 1e5, 1e6];
    let mut points = Vec::new();
    for &n in &ns {
        let mut c = PhysicalConfig::preset("fig4-rb87").unwrap().with_mode(Mode::CavityOnly);
        c.n_atoms = n as u64;
        let (c, r) = with_rates(c.with_phi0_sqrt_n(0.01));
        let opt = optimize_squeezing(&c, &r, Some(12.0)).unwrap();
        points.push((n.ln(), opt.xi2_min.ln(), opt.xi2_min));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    report(
        5,
        "xi2_min scales as N^(-2/5)",
        (slope + 0.4).abs() <= 0.05 && start.elapsed().as_secs_f64() < 900.0,
        start,
        &[
            format!(
                "xi2_min = {:.5}, {:.5}, {:.5} at N = 1e4, 1e5, 1e6 (phi0 sqrt(N) = 0.01, cavity only)",
                points[0].2, points[1].2, points[2].2
            ),
            format!("log-log slope {slope:.4} (target -0.4 +- 0.05)"),
        ],
    );
}

#[test]
fn criterion_06_absorption_floor() {
    let start = Instant::now();
    let floor = absorption_limit(0.702, 0.1).unwrap();
    let mut values = Vec::new();
    for n in [1e5f64, 1e6, 1e7] {
        let mut c = PhysicalConfig::preset("fig5").unwrap();
        c.n_atoms = n as u64;
        let (c, r) = with_rates(c.with_phi0_sqrt_n(10.0).with_detuning_at_linewidth());
        let opt = optimize_squeezing(&c, &r, Some(12.0)).unwrap();
        values.push((n, opt.xi2_min, opt.t_min, c.delta_over_kappa));
    }
    let last = values[2].1;
    let within = last / floor <= 2.0 && last / floor >= 0.5;
    let distance: Vec<f64> = values.iter().map(|v| (v.1 / floor).ln().abs()).collect();
    let approaching = distance.windows(2).all(|w| w[1] < w[0]);
    let mut details: Vec<String> = values
        .iter()
        .map(|(n, x, t, d)| format!("N={n:.0e}: xi2_min={x:.5} ({:.2} x floor) at t={t:.3e}, delta={d:.1}", x / floor))
        .collect();
    details.push(format!(
        "floor {floor:.5}; N=1e7 within factor 2: {within}; monotone approach: {approaching}"
    ));
    report(
        6,
        "absorption-limited floor at Delta/Gamma = 10",
        within && approaching && start.elapsed().as_secs_f64() < 1800.0,
        start,
        &details,
    );
}

#[test]
fn criterion_07_strong_coupling_mixture() {
    let start = Instant::now();
    let (c, r) = with_rates(PhysicalConfig::preset("fig3").unwrap());
    let prediction = mixture_predictions(10).unwrap();
    let eval = |t: f64| {
        let s = dense_state(&c, &r, t).unwrap();
        (s.purity_change().unwrap(), qfi(&s).unwrap().value)
    };
    let (pc250, q250) = eval(250.0);
    let plateau: Vec<(f64, f64)> = log_times(1.5 * r.t0, 0.5 * r.t1, 4).into_iter().map(eval).collect();
    let (pc_late, q_late) = eval(10.0 * r.t1);
    let spread = |v: Vec<f64>| {
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        (hi - lo) / hi
    };
    let pc_spread = spread(plateau.iter().map(|p| p.0).collect());
    let q_spread = spread(plateau.iter().map(|p| p.1).collect());
    let pc_match = (pc250 / prediction.pc - 1.0).abs();
    let q_match = (q250 / prediction.qfi - 1.0).abs();
    let pass = pc_match <= 0.1
        && q_match <= 0.1
        && pc_spread < 0.1
        && q_spread < 0.1
        && pc_late < 0.5 * pc250
        && q_late < 0.5 * q250
        && start.elapsed().as_secs_f64() < 300.0;
    report(
        7,
        "strong-coupling plateau matches the twin-Fock mixture",
        pass,
        start,
        &[
            format!(
                "t=250: PC={pc250:.4} vs {:.4} ({:.1}%), QFI={q250:.3} vs {:.3} ({:.1}%)",
                prediction.pc,
                100.0 * pc_match,
                prediction.qfi,
                100.0 * q_match
            ),
            format!(
                "plateau [{:.0}, {:.0}]: PC spread {:.1}%, QFI spread {:.1}%",
                1.5 * r.t0,
                0.5 * r.t1,
                100.0 * pc_spread,
                100.0 * q_spread
            ),
            format!("t=10 t1={:.0}: PC={pc_late:.4}, QFI={q_late:.3}", 10.0 * r.t1),
        ],
    );
}

#[test]
fn criterion_08_fisher_scaling() {
    let start = Instant::now();
    let target = fisher_scaling(1);
    let ratios: Vec<(u64, f64)> = [10u64, 50, 100, 200, 400]
        .iter()
        .map(|&n| (n, mixture_predictions(n).unwrap().qfi / (n as f64).powf(1.5)))
        .collect();
    let converging = ratios
        .windows(2)
        .all(|w| (w[1].1 - target).abs() < (w[0].1 - target).abs());
    let at_400 = ratios.last().unwrap().1;
    let within = (at_400 / target - 1.0).abs() <= 0.05;
    report(
        8,
        "mixture Fisher information approaches 2 sqrt(2/pi) N^(3/2)",
        converging && within && start.elapsed().as_secs_f64() < 60.0,
        start,
        &[
            format!(
                "QFI/N^1.5: {}",
                ratios.iter().map(|(n, v)| format!("N={n}: {v:.4}")).collect::<Vec<_>>().join(", ")
            ),
            format!(
                "N=400: {at_400:.4} vs {target:.4} ({:+.1}%, limit 5%); monotone approach: {converging}",
                100.0 * (at_400 / target - 1.0)
            ),
        ],
    );
}

/// `exp(-iχt S_z²)` applied to the coherent spin state, written out for
/// N atoms in the product basis.
fn oat_dense(n: u64, chi_t: f64) -> DenseState {
    let dim = 1usize << n;
    let amp: Vec<Complex64> = (0..dim)
        .map(|i| {
            let m = i.count_ones() as f64 - 0.5 * n as f64;
            Complex64::from_polar((dim as f64).sqrt().recip(), -chi_t * m * m)
        })
        .collect();
    let v = DMatrix::from_column_slice(dim, 1, &amp);
    DenseState::new(&v * v.adjoint(), Basis::Product { n }).unwrap()
}

#[test]
fn criterion_09_one_axis_twisting() {
    let start = Instant::now();
    let mut details = Vec::new();
    // closed forms against brute force
    let mut brute = 0.0f64;
    for &chi_t in &[0.05, 0.2, 0.7, std::f64::consts::FRAC_PI_2] {
        let s = oat_dense(4, chi_t);
        let reference = oat_reference(4, chi_t).unwrap();
        brute = brute.max((s.purity_change().unwrap() - reference.pc).abs());
        let (mean, _) = s.spin_moments();
        brute = brute.max((mean[0] - reference.mean_sx).abs());
        if chi_t < 1.0 {
            let m = cavfeed::SpinMoments {
                n_atoms: 4,
                time: 0.0,
                mean,
                second_moments: s.spin_moments().1,
                tail_bound: 0.0,
            };
            brute = brute.max((squeezing_xi2(&m).unwrap().xi2 - reference.xi2).abs());
        }
    }
    details.push(format!("closed forms vs brute force (N=4): max deviation {brute:.2e} (limit 1e-12)"));
    let mut pass = brute <= 1e-12;

    for n in [20u64, 100] {
        let (c, r) = with_rates(fig2(n, Mode::UnitaryOnly).0.with_phi0_sqrt_n(0.01));
        // OAT optimum time from the closed form
        let chi = r.chi_eff;
        let grid: Vec<f64> = (1..=4000).map(|i| i as f64 * 1e-4).collect();
        let chi_t_opt = grid
            .iter()
            .copied()
            .filter(|&x| oat_reference(n, x).unwrap().mean_sx > 0.0)
            .min_by(|a, b| {
                oat_reference(n, *a).unwrap().xi2.total_cmp(&oat_reference(n, *b).unwrap().xi2)
            })
            .unwrap();
        let mut worst_xi = 0.0f64;
        let mut worst_pc = 0.0f64;
        for i in 1..=10 {
            let t = chi_t_opt / chi * i as f64 / 10.0;
            let reference = oat_reference(n, chi * t).unwrap();
            let xi = squeezing_xi2(&spin_moments(&c, &r, t, None).unwrap()).unwrap().xi2;
            let pc = purity_change(&c, &r, t).unwrap();
            worst_xi = worst_xi.max((xi / reference.xi2 - 1.0).abs());
            worst_pc = worst_pc.max((pc / reference.pc - 1.0).abs());
        }
        pass &= worst_xi <= 0.02 && worst_pc <= 0.02;
        details.push(format!(
            "N={n}: up to chi t = {chi_t_opt:.4}, max relative deviation xi2 {:.2}%, PC {:.2}% (limit 2%)",
            100.0 * worst_xi,
            100.0 * worst_pc
        ));
    }
    pass &= start.elapsed().as_secs_f64() < 120.0;
    report(9, "unitary-only dynamics follow one-axis twisting", pass, start, &details);
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let outputs: Vec<_> = dirs
        .iter()
        .map(|d| figure_pipeline(FigureName::Fig4, d.path(), &FigureOptions::default()).unwrap())
        .collect();
    let mut identical = true;
    let mut details = Vec::new();
    for (a, b) in outputs[0].files.iter().zip(&outputs[1].files) {
        let (x, y) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        identical &= x == y && !x.is_empty();
        details.push(format!(
            "{}: {} bytes, identical: {}",
            a.file_name().unwrap().to_string_lossy(),
            x.len(),
            x == y
        ));
    }
    report(
        10,
        "fig4 pipeline is byte-reproducible",
        identical && start.elapsed().as_secs_f64() < 600.0,
        start,
        &details,
    );
}
