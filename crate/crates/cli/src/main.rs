use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cavfeed::asymptotics::{
    absorption_limit, classify_regime, critical_atom_number, fisher_scaling, weak_coupling_optimum,
};
use cavfeed::figures::{figure_pipeline, FigureName, FigureOptions};
use cavfeed::observables::{purity, purity_change, spin_moments};
use cavfeed::oracle::{dense_from_definition, lindblad_integrate, LindbladSystem};
use cavfeed::sweep::{optimize_squeezing, run_sweep, Grid, Quantity, SweepAxis};
use cavfeed::metrology::dense_state;
use cavfeed::{derive_rates, validity_report, Error, Mode, PhysicalConfig, Result, SweepSpec, SweepTable};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "cavfeed", version, about = "Collective spin dynamics under cavity feedback")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named configuration: fig2, fig3, fig4-rb87 or fig5.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, env = "CAVFEED_THREADS")]
    threads: Option<usize>,
    /// Summation window in units of √N around N/2.
    #[arg(long, global = true)]
    window: Option<f64>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Override the atom number, keeping φ₀ fixed.
    #[arg(long, global = true)]
    n_atoms: Option<u64>,
    /// Override φ₀ through the collective coupling φ₀√N.
    #[arg(long, global = true)]
    phi0_sqrt_n: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print derived rates and the validity report.
    Derive,
    /// Tabulate observables along a log-spaced time grid.
    Evolve {
        #[arg(long, default_value_t = 1.0)]
        t_start: f64,
        #[arg(long, default_value_t = 1e5)]
        t_stop: f64,
        #[arg(long, default_value_t = 41)]
        points: usize,
        /// Comma-separated subset of xi2, pc, purity, qfi, moments.
        #[arg(long, value_delimiter = ',', value_parser = parse_quantity, default_value = "xi2,pc")]
        quantities: Vec<Quantity>,
    },
    /// Minimize the squeezing parameter over time.
    Optimize,
    /// Run a sweep described by a JSON file.
    Sweep {
        spec: PathBuf,
    },
    /// Regenerate the data behind one figure.
    Figure {
        #[arg(value_parser = parse_figure)]
        name: FigureName,
        /// Number of points on the main axis.
        #[arg(long)]
        points: Option<usize>,
    },
    /// Compare the collective formulas against direct evaluation and the
    /// master equation on small systems.
    SelfCheck,
    /// Closed-form limits for the current configuration.
    Limits,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_quantity(s: &str) -> std::result::Result<Quantity, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown quantity '{s}'"))
}

fn parse_figure(s: &str) -> std::result::Result<FigureName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl GlobalArgs {
    fn base_config(&self) -> Result<PhysicalConfig> {
        self.config_or("fig2")
    }

    /// Loads `--config` or `--preset`, falling back to `default`, then
    /// applies the overrides.
    fn config_or(&self, default: &str) -> Result<PhysicalConfig> {
        self.config_or_base(&PhysicalConfig::preset(default)?)
    }

    fn config_or_base(&self, base: &PhysicalConfig) -> Result<PhysicalConfig> {
        let config = match (&self.config, &self.preset) {
            (Some(path), _) => PhysicalConfig::from_json(&std::fs::read_to_string(path)?)?,
            (None, Some(name)) => PhysicalConfig::preset(name)?,
            (None, None) => base.clone(),
        };
        self.with_overrides(config)
    }

    fn with_overrides(&self, mut config: PhysicalConfig) -> Result<PhysicalConfig> {
        if let Some(n) = self.n_atoms {
            config.n_atoms = n;
        }
        if let Some(x) = self.phi0_sqrt_n {
            config = config.with_phi0_sqrt_n(x);
        }
        if let Some(mode) = self.mode {
            config = config.with_mode(mode);
        }
        config.validate()?;
        Ok(config)
    }

    fn explicit_config(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn changes_config(&self) -> bool {
        self.explicit_config() || self.mode.is_some() || self.n_atoms.is_some() || self.phi0_sqrt_n.is_some()
    }
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn emit_table(table: &SweepTable, out: Option<&Path>, file: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(file);
            table.write_csv(BufWriter::new(File::create(&path)?))?;
            eprintln!("wrote {}", path.display());
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    let failed = table.errors.iter().flatten().count();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed; see the error column", table.rows.len());
    }
    Ok(())
}

fn derive(g: &GlobalArgs) -> Result<()> {
    let config = g.base_config()?;
    let rates = derive_rates(&config)?;
    print_json(&json!({
        "config": config,
        "rates": rates,
        "validity": validity_report(&config),
    }))
}

fn evolve(g: &GlobalArgs, t_start: f64, t_stop: f64, points: usize, quantities: Vec<Quantity>) -> Result<()> {
    let config = g.base_config()?;
    let mut spec = SweepSpec::new(
        config,
        SweepAxis::Time,
        Grid::Log { start: t_start, stop: t_stop, count: points },
        quantities,
    );
    spec.window = g.window.or(spec.window);
    emit_table(&run_sweep(&spec)?, g.out.as_deref(), "evolve.csv")
}

fn optimize(g: &GlobalArgs) -> Result<()> {
    let config = g.base_config()?;
    let rates = derive_rates(&config)?;
    let result = optimize_squeezing(&config, &rates, g.window)?;
    let prediction = weak_coupling_optimum(config.n_atoms, config.eta_over_kappa, config.phi0)?;
    print_json(&json!({
        "n_atoms": config.n_atoms,
        "phi0_sqrt_n": config.phi0_sqrt_n(),
        "mode": config.mode,
        "result": result,
        "weak_coupling_prediction": prediction,
    }))
}

fn sweep(g: &GlobalArgs, path: &Path) -> Result<()> {
    let mut spec: SweepSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if g.changes_config() {
        spec.base = g.config_or_base(&spec.base)?;
    }
    if let Some(mode) = g.mode {
        spec.mode = Some(mode);
    }
    if g.window.is_some() {
        spec.window = g.window;
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into());
    emit_table(&run_sweep(&spec)?, g.out.as_deref(), &format!("{stem}.csv"))
}

fn figure(g: &GlobalArgs, name: FigureName, points: Option<usize>) -> Result<()> {
    let options = FigureOptions {
        config: if g.changes_config() { Some(g.config_or(name.preset())?) } else { None },
        window: g.window,
        points,
    };
    let out = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let output = figure_pipeline(name, &out, &options)?;
    for f in output.files.iter().chain(std::iter::once(&output.manifest)) {
        println!("{}", f.display());
    }
    Ok(())
}

const SELF_CHECK_TOLERANCE: f64 = 1e-10;
const SELF_CHECK_LINDBLAD_TOLERANCE: f64 = 0.05;

fn self_check(g: &GlobalArgs) -> Result<()> {
    let base = g.base_config()?;
    let mut worst: f64 = 0.0;
    for n in [2u64, 4, 8, 10] {
        for mode in [Mode::Full, Mode::CavityOnly, Mode::UnitaryOnly] {
            let mut c = base.clone().with_mode(mode);
            c.n_atoms = n;
            let r = derive_rates(&c)?;
            for t in [1.0, 10.0, 100.0, 1e3, 1e4] {
                let dense = dense_from_definition(&c, &r, t)?;
                let (mean, second) = dense.spin_moments();
                let m = spin_moments(&c, &r, t, None)?;
                let scale = 0.25 * (n * n) as f64;
                for a in 0..3 {
                    worst = worst.max((m.mean[a] - mean[a]).abs() / scale);
                    for b in 0..3 {
                        worst = worst.max((m.second_moments[a][b] - second[a][b]).abs() / scale);
                    }
                }
                worst = worst
                    .max((purity(&c, &r, t)? - dense.purity()).abs())
                    .max((purity_change(&c, &r, t)? - dense.purity_change()?).abs());
            }
        }
    }
    let collective_ok = worst <= SELF_CHECK_TOLERANCE;
    println!(
        "collective vs direct evaluation: max deviation {worst:.2e} (limit {SELF_CHECK_TOLERANCE:.0e}) {}",
        if collective_ok { "ok" } else { "FAILED" }
    );

    let mut c = base.with_mode(Mode::CavityOnly);
    c.n_atoms = 1;
    c.phi0 = 0.1;
    let r = derive_rates(&c)?;
    let system = LindbladSystem::new(&c, &r, 10)?;
    let evolved = lindblad_integrate(&system, 50.0, system.max_dt())?;
    let analytic = dense_state(&c, &r, 50.0)?;
    let lindblad_err = evolved
        .state
        .matrix
        .iter()
        .zip(analytic.matrix.iter())
        .map(|(a, b)| (a - b).norm() / b.norm())
        .fold(0.0, f64::max);
    let lindblad_ok = lindblad_err <= SELF_CHECK_LINDBLAD_TOLERANCE;
    println!(
        "single atom vs master equation at t = 50: max relative deviation {lindblad_err:.2e} (limit {SELF_CHECK_LINDBLAD_TOLERANCE}) {}",
        if lindblad_ok { "ok" } else { "FAILED" }
    );

    if collective_ok && lindblad_ok {
        Ok(())
    } else {
        Err(Error::Numerical("self-check failed".into()))
    }
}

fn limits(g: &GlobalArgs) -> Result<()> {
    let config = g.base_config()?;
    let rates = derive_rates(&config)?;
    let n_c = critical_atom_number(
        config.gamma_over_delta,
        2.0 * config.a_rayleigh,
        config.a_raman,
        config.a_external,
    )?;
    print_json(&json!({
        "n_atoms": config.n_atoms,
        "phi0_sqrt_n": config.phi0_sqrt_n(),
        "weak_coupling_optimum": weak_coupling_optimum(config.n_atoms, config.eta_over_kappa, config.phi0)?,
        "critical_atom_number": n_c,
        "regime": classify_regime(config.n_atoms, n_c),
        "absorption_floor": absorption_limit(config.a_rayleigh, config.gamma_over_delta)?,
        "mixture_fisher_large_n": fisher_scaling(config.n_atoms),
        "t0_kappa": rates.t0,
        "t1_kappa": rates.t1,
        "chi_eff": rates.chi_eff,
    }))
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {k} threads: {e}")))?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Derive => derive(g),
        Command::Evolve { t_start, t_stop, points, quantities } => evolve(g, t_start, t_stop, points, quantities),
        Command::Optimize => optimize(g),
        Command::Sweep { spec } => sweep(g, &spec),
        Command::Figure { name, points } => figure(g, name, points),
        Command::SelfCheck => self_check(g),
        Command::Limits => limits(g),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
