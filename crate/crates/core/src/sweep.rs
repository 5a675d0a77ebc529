//! Time optimization of ξ² and parameter sweeps with tabular output.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{absorption_limit, weak_coupling_optimum};
use crate::collective::CollectiveState;
use crate::error::{Error, Result};
use crate::metrology::{dense_state, qfi, MAX_DENSE_ATOMS};
use crate::numerics::BinomialBand;
use crate::observables::{moments_from_band, purity, purity_change, squeezing_xi2, DEFAULT_WINDOW};
use crate::params::{derive_rates, validity_report, DerivedRates, Mode, PhysicalConfig};

/// Points in the coarse logarithmic time scan.
pub const COARSE_POINTS: usize = 60;
/// Relative time tolerance of the golden-section refinement.
pub const TIME_TOLERANCE: f64 = 1e-3;
/// Written in place of a value that could not be computed.
pub const ERROR_SENTINEL: f64 = -1.0;

const MAX_GOLDEN_ITERATIONS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub t_min: f64,
    pub xi2_min: f64,
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub converged: bool,
}

/// Evaluates ξ²(t) on a fixed state; a collapsed mean spin counts as +∞.
struct Objective {
    state: CollectiveState,
    band: BinomialBand,
}

impl Objective {
    fn new(config: &PhysicalConfig, rates: &DerivedRates, window: Option<f64>) -> Result<Self> {
        Ok(Self {
            state: CollectiveState::new(config, rates)?,
            band: BinomialBand::new(config.n_atoms, window)?,
        })
    }

    fn eval(&self, t: f64) -> f64 {
        let m = moments_from_band(&self.state, &self.band, t);
        match squeezing_xi2(&m) {
            Ok(s) if s.xi2.is_finite() => s.xi2,
            _ => f64::INFINITY,
        }
    }
}

/// Time range of the coarse scan.
///
/// Below φ₀√N = 1 the scan spans two decades either side of the
/// cavity-loss-limited prediction. Otherwise it covers `[1, 10⁸]` in units
/// of 1/κ, stretched by the cube of the broadened linewidth: a detuned
/// drive at linewidth `L` lowers both the photon number and the twisting
/// rate, moving the optimum to later times.
pub fn scan_range(config: &PhysicalConfig, rates: &DerivedRates) -> Result<(f64, f64)> {
    let x = config.phi0_sqrt_n();
    if x < 1.0 {
        let p = weak_coupling_optimum(config.n_atoms, config.eta_over_kappa, config.phi0)?;
        return Ok((1e-2 * p.t_min, 1e2 * p.t_min));
    }
    let l = rates.linewidth(config.mode);
    Ok((1.0, 1e8 * l * l * l))
}

/// Minimizes ξ² over time by a log-spaced scan and golden-section search in
/// `ln t`.
pub fn optimize_squeezing(
    config: &PhysicalConfig,
    rates: &DerivedRates,
    window: Option<f64>,
) -> Result<OptimizationResult> {
    let (lo, hi) = scan_range(config, rates)?;
    optimize_squeezing_in(config, rates, window, lo, hi)
}

pub fn optimize_squeezing_in(
    config: &PhysicalConfig,
    rates: &DerivedRates,
    window: Option<f64>,
    t_lo: f64,
    t_hi: f64,
) -> Result<OptimizationResult> {
    if !(t_lo > 0.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid time range [{t_lo}, {t_hi}]")));
    }
    let objective = Objective::new(config, rates, window)?;
    let (ln_lo, ln_hi) = (t_lo.ln(), t_hi.ln());
    let step = (ln_hi - ln_lo) / (COARSE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..COARSE_POINTS).map(|i| ln_lo + step * i as f64).collect();
    let values: Vec<f64> = grid.par_iter().map(|&s| objective.eval(s.exp())).collect();
    let mut evaluations = COARSE_POINTS;

    let (imin, &vmin) = values
        .iter()
        .enumerate()
        .fold((0, &f64::INFINITY), |best, (i, v)| if *v < *best.1 { (i, v) } else { best });
    if !vmin.is_finite() || imin == 0 || imin == COARSE_POINTS - 1 {
        return Err(Error::NoInteriorMinimum { t_lo, t_hi });
    }

    let (mut a, mut b) = (grid[imin - 1], grid[imin + 1]);
    let mut best = (grid[imin], vmin);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let tol = TIME_TOLERANCE.ln_1p();
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective.eval(c.exp());
    let mut fd = objective.eval(d.exp());
    evaluations += 2;
    let mut converged = false;
    for _ in 0..MAX_GOLDEN_ITERATIONS {
        for (s, f) in [(c, fc), (d, fd)] {
            if f < best.1 {
                best = (s, f);
            }
        }
        if b - a <= tol {
            converged = true;
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective.eval(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective.eval(d.exp());
        }
        evaluations += 1;
    }
    Ok(OptimizationResult {
        t_min: best.0.exp(),
        xi2_min: best.1,
        bracket: (grid[imin - 1].exp(), grid[imin + 1].exp()),
        evaluations,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Evolution time in units of 1/κ.
    Time,
    /// Coupling φ₀√N at fixed N.
    #[serde(alias = "phi0_sqrtN")]
    Phi0SqrtN,
    /// Atom number at fixed φ₀√N.
    NAtoms,
}

impl SweepAxis {
    pub fn column(&self) -> &'static str {
        match self {
            SweepAxis::Time => "t_kappa",
            SweepAxis::Phi0SqrtN => "phi0_sqrt_n",
            SweepAxis::NAtoms => "n_atoms",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Grid {
    List { values: Vec<f64> },
    Linear { start: f64, stop: f64, count: usize },
    Log { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::List { values } => values.clone(),
            Grid::Linear { start, stop, count } => spaced(*start, *stop, *count, |x| x)?,
            Grid::Log { start, stop, count } => {
                if !(*start > 0.0 && *stop > 0.0) {
                    return Err(Error::InvalidConfig("log grid bounds must be positive".into()));
                }
                spaced(start.ln(), stop.ln(), *count, f64::exp)?
            }
        };
        if v.is_empty() {
            return Err(Error::InvalidConfig("grid is empty".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("grid values must be finite".into()));
        }
        if !v.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidConfig("grid must be strictly increasing".into()));
        }
        Ok(v)
    }
}

fn spaced(a: f64, b: f64, count: usize, post: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    match count {
        0 => Err(Error::InvalidConfig("grid count must be positive".into())),
        1 => Ok(vec![post(a)]),
        _ => {
            let step = (b - a) / (count - 1) as f64;
            Ok((0..count).map(|i| post(a + step * i as f64)).collect())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Xi2,
    Pc,
    Purity,
    Qfi,
    Moments,
    /// Closed-form cavity-loss optimum and absorption floor for comparison.
    References,
}

/// How the evolution time is chosen for axes other than time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeChoice {
    Fixed { t: f64 },
    /// Time of best squeezing.
    Optimize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetuningPolicy {
    /// Keep δ/κ from the base configuration.
    #[default]
    Fixed,
    /// Set δ equal to the linewidth of each grid point.
    Linewidth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: PhysicalConfig,
    pub axis: SweepAxis,
    pub grid: Grid,
    /// Optional slower-varying axis; the table lists the inner grid for each
    /// outer value in turn.
    #[serde(default)]
    pub outer: Option<(SweepAxis, Grid)>,
    pub quantities: Vec<Quantity>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default = "default_time")]
    pub time: TimeChoice,
    #[serde(default)]
    pub detuning: DetuningPolicy,
}

fn default_time() -> TimeChoice {
    TimeChoice::Optimize
}

impl SweepSpec {
    pub fn new(base: PhysicalConfig, axis: SweepAxis, grid: Grid, quantities: Vec<Quantity>) -> Self {
        Self {
            base,
            axis,
            grid,
            outer: None,
            quantities,
            mode: None,
            window: Some(DEFAULT_WINDOW),
            time: TimeChoice::Optimize,
            detuning: DetuningPolicy::Fixed,
        }
    }

    fn wants(&self, q: Quantity) -> bool {
        self.quantities.contains(&q)
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.grid.values()?;
        if let Some((axis, grid)) = &self.outer {
            if *axis == self.axis {
                return Err(Error::InvalidConfig("outer and inner axis must differ".into()));
            }
            grid.values()?;
        }
        if self.quantities.is_empty() {
            return Err(Error::InvalidConfig("no quantities requested".into()));
        }
        if self.wants(Quantity::Qfi) {
            let largest = self.point_atom_numbers()?.into_iter().max().unwrap_or(0);
            if largest > MAX_DENSE_ATOMS {
                return Err(Error::TooManyAtoms {
                    what: "qfi in sweeps",
                    n: largest,
                    max: MAX_DENSE_ATOMS,
                });
            }
        }
        if let TimeChoice::Fixed { t } = self.time {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidConfig(format!("fixed time must be nonnegative, got {t}")));
            }
        }
        Ok(())
    }

    fn point_atom_numbers(&self) -> Result<Vec<u64>> {
        let mut ns = vec![self.base.n_atoms];
        for (axis, grid) in std::iter::once((self.axis, &self.grid)).chain(self.outer.as_ref().map(|(a, g)| (*a, g))) {
            if axis == SweepAxis::NAtoms {
                ns = grid.values()?.into_iter().map(|v| v.round() as u64).collect();
            }
        }
        Ok(ns)
    }

    /// Column names, including units where they apply.
    pub fn columns(&self) -> Vec<String> {
        let mut cols = Vec::new();
        if let Some((axis, _)) = &self.outer {
            cols.push(format!("outer_{}", axis.column()));
        }
        cols.extend(["n_atoms", "phi0_sqrt_n", "delta_kappa", "t_kappa"].map(String::from));
        for q in &self.quantities {
            match q {
                Quantity::Xi2 => cols.push("xi2".into()),
                Quantity::Pc => cols.push("pc".into()),
                Quantity::Purity => cols.push("purity".into()),
                Quantity::Qfi => cols.push("qfi".into()),
                Quantity::Moments => cols.extend(
                    ["mean_sx", "mean_sy", "mean_sz", "sxx", "syy", "szz", "sxy", "sxz", "syz"].map(String::from),
                ),
                Quantity::References => cols.extend(
                    ["xi2_cavity_limit", "t_cavity_limit_kappa", "xi2_absorption_floor"].map(String::from),
                ),
            }
        }
        cols.push("valid".into());
        cols
    }

    fn point_config(&self, outer: Option<f64>, value: f64) -> PhysicalConfig {
        let mut c = self.base.clone();
        if let Some(mode) = self.mode {
            c.mode = mode;
        }
        let mut apply = |axis: SweepAxis, v: f64| match axis {
            SweepAxis::Time => {}
            SweepAxis::Phi0SqrtN => c = c.with_phi0_sqrt_n(v),
            SweepAxis::NAtoms => {
                let x = c.phi0_sqrt_n();
                c.n_atoms = v.round() as u64;
                c = c.with_phi0_sqrt_n(x);
            }
        };
        if let (Some((axis, _)), Some(o)) = (&self.outer, outer) {
            apply(*axis, o);
        }
        apply(self.axis, value);
        if self.detuning == DetuningPolicy::Linewidth {
            c = c.with_detuning_at_linewidth();
        }
        c
    }

    fn point_time(&self, outer: Option<f64>, value: f64) -> Option<f64> {
        if self.axis == SweepAxis::Time {
            return Some(value);
        }
        if let (Some((SweepAxis::Time, _)), Some(o)) = (&self.outer, outer) {
            return Some(o);
        }
        match self.time {
            TimeChoice::Fixed { t } => Some(t),
            TimeChoice::Optimize => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Per-row failure message; values of failed rows hold [`ERROR_SENTINEL`].
    pub errors: Vec<Option<String>>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Comma-separated output with 17 significant digits and a trailing
    /// `error` column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.columns.clone();
        header.push("error".into());
        w.write_record(&header)?;
        for (row, err) in self.rows.iter().zip(&self.errors) {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            record.push(err.clone().unwrap_or_default());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluate_point(spec: &SweepSpec, outer: Option<f64>, value: f64, width: usize) -> (Vec<f64>, Option<String>) {
    let config = spec.point_config(outer, value);
    let mut row = Vec::with_capacity(width);
    if let Some(o) = outer {
        row.push(o);
    }
    row.extend([
        config.n_atoms as f64,
        config.phi0_sqrt_n(),
        config.delta_over_kappa,
    ]);
    match evaluate_quantities(spec, &config, outer, value) {
        Ok(values) => {
            row.extend(values);
            (row, None)
        }
        Err(e) => {
            row.resize(width, ERROR_SENTINEL);
            (row, Some(e.to_string()))
        }
    }
}

fn evaluate_quantities(spec: &SweepSpec, config: &PhysicalConfig, outer: Option<f64>, value: f64) -> Result<Vec<f64>> {
    let rates = derive_rates(config)?;
    let mut out = Vec::new();
    let (t, optimized) = match spec.point_time(outer, value) {
        Some(t) => (t, None),
        None => {
            let opt = optimize_squeezing(config, &rates, spec.window)?;
            (opt.t_min, Some(opt.xi2_min))
        }
    };
    out.push(t);
    let moments = if spec.wants(Quantity::Xi2) || spec.wants(Quantity::Moments) {
        let state = CollectiveState::new(config, &rates)?;
        let band = BinomialBand::new(config.n_atoms, spec.window)?;
        Some(moments_from_band(&state, &band, t))
    } else {
        None
    };
    let dense = if spec.wants(Quantity::Qfi) {
        Some(dense_state(config, &rates, t)?)
    } else {
        None
    };
    for q in &spec.quantities {
        match q {
            Quantity::Xi2 => out.push(match optimized {
                Some(x) => x,
                None => squeezing_xi2(moments.as_ref().expect("moments computed"))?.xi2,
            }),
            Quantity::Pc => out.push(match &dense {
                Some(d) => d.purity_change()?,
                None => purity_change(config, &rates, t)?,
            }),
            Quantity::Purity => out.push(match &dense {
                Some(d) => d.purity(),
                None => purity(config, &rates, t)?,
            }),
            Quantity::Qfi => out.push(qfi(dense.as_ref().expect("dense state built"))?.value),
            Quantity::Moments => {
                let m = moments.as_ref().expect("moments computed");
                out.extend(m.mean);
                let s = m.second_moments;
                out.extend([s[0][0], s[1][1], s[2][2], s[0][1], s[0][2], s[1][2]]);
            }
            Quantity::References => {
                let p = weak_coupling_optimum(config.n_atoms, config.eta_over_kappa, config.phi0)?;
                out.extend([
                    p.xi2_min,
                    p.t_min,
                    absorption_limit(config.a_rayleigh, config.gamma_over_delta)?,
                ]);
            }
        }
    }
    out.push(if validity_report(config).all_pass() { 1.0 } else { 0.0 });
    Ok(out)
}

/// Evaluates every grid point; rows come back in grid order and a failing
/// point produces an error row instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let inner = spec.grid.values()?;
    let outer: Vec<Option<f64>> = match &spec.outer {
        Some((_, g)) => g.values()?.into_iter().map(Some).collect(),
        None => vec![None],
    };
    let points: Vec<(Option<f64>, f64)> = outer
        .iter()
        .flat_map(|&o| inner.iter().map(move |&v| (o, v)))
        .collect();
    let columns = spec.columns();
    let width = columns.len();
    let results: Vec<(Vec<f64>, Option<String>)> = points
        .par_iter()
        .map(|&(o, v)| evaluate_point(spec, o, v, width))
        .collect();
    let (rows, errors) = results.into_iter().unzip();
    Ok(SweepTable { columns, rows, errors })
}
