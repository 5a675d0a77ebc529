//! Data pipelines for the four published figures. Each writes CSV tables
//! plus a JSON manifest recording inputs, derived rates and runtime.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::fisher_scaling;
use crate::error::{Error, Result};
use crate::metrology::mixture_predictions;
use crate::observables::DEFAULT_WINDOW;
use crate::params::{derive_rates, DerivedRates, Mode, PhysicalConfig};
use crate::sweep::{run_sweep, DetuningPolicy, Grid, Quantity, SweepAxis, SweepSpec, TimeChoice};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureName {
    /// Purity change and squeezing over time and coupling, N = 50.
    Fig2,
    /// Strong-coupling plateau of purity change and Fisher information.
    Fig3,
    /// Optimized squeezing versus coupling for rubidium, with and without
    /// Rayleigh scattering.
    Fig4,
    /// Optimized squeezing versus coupling for growing N in the absorption
    /// regime.
    Fig5,
}

impl FigureName {
    pub const ALL: [FigureName; 4] = [FigureName::Fig2, FigureName::Fig3, FigureName::Fig4, FigureName::Fig5];

    pub fn as_str(&self) -> &'static str {
        match self {
            FigureName::Fig2 => "fig2",
            FigureName::Fig3 => "fig3",
            FigureName::Fig4 => "fig4",
            FigureName::Fig5 => "fig5",
        }
    }

    /// Preset supplying the default base configuration.
    pub fn preset(&self) -> &'static str {
        match self {
            FigureName::Fig2 => "fig2",
            FigureName::Fig3 => "fig3",
            FigureName::Fig4 => "fig4-rb87",
            FigureName::Fig5 => "fig5",
        }
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureName::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown figure '{s}' (expected fig2, fig3, fig4 or fig5)")))
    }
}

#[derive(Clone, Debug, Default)]
pub struct FigureOptions {
    /// Replaces the preset base configuration.
    pub config: Option<PhysicalConfig>,
    /// Summation window; `None` uses [`DEFAULT_WINDOW`].
    pub window: Option<f64>,
    /// Overrides the number of points on the main axis.
    pub points: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRecord {
    pub file: String,
    pub spec: SweepSpec,
    pub rows: usize,
    pub failed_rows: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub figure: FigureName,
    pub version: String,
    pub runtime_seconds: f64,
    pub base_config: PhysicalConfig,
    pub derived_rates: DerivedRates,
    pub window: f64,
    pub tables: Vec<TableRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_files: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct FigureOutput {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn write_table(dir: &Path, file: &str, spec: SweepSpec, records: &mut Vec<TableRecord>) -> Result<PathBuf> {
    let table = run_sweep(&spec)?;
    let path = dir.join(file);
    table.write_csv(BufWriter::new(File::create(&path)?))?;
    records.push(TableRecord {
        file: file.to_string(),
        spec,
        rows: table.rows.len(),
        failed_rows: table.errors.iter().filter(|e| e.is_some()).count(),
    });
    Ok(path)
}

/// Runs a figure pipeline and writes its files into `out_dir`.
pub fn figure_pipeline(name: FigureName, out_dir: &Path, options: &FigureOptions) -> Result<FigureOutput> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let base = match &options.config {
        Some(c) => {
            c.validate()?;
            c.clone()
        }
        None => PhysicalConfig::preset(name.preset())?,
    };
    let window = options.window.unwrap_or(DEFAULT_WINDOW);
    let count = |default: usize| options.points.unwrap_or(default);
    let mut records = Vec::new();
    let mut files = Vec::new();
    let mut extra = Vec::new();
    let spec = |axis, grid, quantities| SweepSpec {
        window: Some(window),
        ..SweepSpec::new(base.clone(), axis, grid, quantities)
    };

    match name {
        FigureName::Fig2 => {
            let mut s = spec(
                SweepAxis::Time,
                Grid::Log { start: 1.0, stop: 1e5, count: count(41) },
                vec![Quantity::Xi2, Quantity::Pc],
            );
            s.outer = Some((SweepAxis::Phi0SqrtN, Grid::Log { start: 0.03, stop: 30.0, count: 31 }));
            files.push(write_table(out_dir, "fig2.csv", s, &mut records)?);
        }
        FigureName::Fig3 => {
            let s = spec(
                SweepAxis::Time,
                Grid::Log { start: 10.0, stop: 1e5, count: count(25) },
                vec![Quantity::Pc, Quantity::Qfi],
            );
            files.push(write_table(out_dir, "fig3.csv", s, &mut records)?);
            let rates = derive_rates(&base)?;
            let p = mixture_predictions(base.n_atoms)?;
            let path = out_dir.join("fig3_reference.csv");
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
            w.write_record(["n_atoms", "qfi_mixture", "pc_mixture", "qfi_large_n", "t0_kappa", "t1_kappa"])?;
            w.write_record(
                [
                    base.n_atoms as f64,
                    p.qfi,
                    p.pc,
                    fisher_scaling(base.n_atoms),
                    rates.t0,
                    rates.t1,
                ]
                .map(|v| format!("{v:.16e}")),
            )?;
            w.flush()?;
            files.push(path);
            extra.push("fig3_reference.csv".to_string());
        }
        FigureName::Fig4 => {
            for (mode, file) in [(Mode::Full, "fig4_full.csv"), (Mode::CavityOnly, "fig4_cavity_only.csv")] {
                let mut s = spec(
                    SweepAxis::Phi0SqrtN,
                    Grid::Log { start: 0.01, stop: 10.0, count: count(31) },
                    vec![Quantity::Xi2, Quantity::References],
                );
                s.mode = Some(mode);
                s.time = TimeChoice::Optimize;
                files.push(write_table(out_dir, file, s, &mut records)?);
            }
        }
        FigureName::Fig5 => {
            let mut s = spec(
                SweepAxis::Phi0SqrtN,
                Grid::Log { start: 0.1, stop: 100.0, count: count(19) },
                vec![Quantity::Xi2, Quantity::References],
            );
            s.outer = Some((
                SweepAxis::NAtoms,
                Grid::List { values: vec![1e3, 1e4, 1e5, 1e6, 1e7] },
            ));
            s.detuning = DetuningPolicy::Linewidth;
            s.time = TimeChoice::Optimize;
            files.push(write_table(out_dir, "fig5.csv", s, &mut records)?);
        }
    }

    let manifest = Manifest {
        figure: name,
        version: env!("CARGO_PKG_VERSION").to_string(),
        runtime_seconds: start.elapsed().as_secs_f64(),
        derived_rates: derive_rates(&base)?,
        base_config: base,
        window,
        tables: records,
        extra_files: extra,
    };
    let manifest_path = out_dir.join(format!("{}_manifest.json", name.as_str()));
    serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest_path)?), &manifest)?;
    Ok(FigureOutput {
        files,
        manifest: manifest_path,
    })
}
