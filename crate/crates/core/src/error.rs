use thiserror::Error;

/// Errors produced by the simulator.
///
/// Variants are grouped by how a caller should react; [`Error::exit_code`]
/// maps the groups onto process exit codes for the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown preset '{0}' (available: fig2, fig3, fig4-rb87, fig5)")]
    UnknownPreset(String),

    #[error("{what} supports at most {max} atoms, got {n}")]
    TooManyAtoms { what: &'static str, n: u64, max: u64 },

    #[error("the twin-Fock state m = 0 requires an even atom number, got N = {0}")]
    OddAtomNumber(u64),

    #[error("mean spin length {length:.3e} is below {threshold:.3e}; squeezing parameter undefined")]
    CollapsedMeanSpin { length: f64, threshold: f64 },

    #[error("no interior minimum of xi^2 on the time scan [{t_lo:.3e}, {t_hi:.3e}]")]
    NoInteriorMinimum { t_lo: f64, t_hi: f64 },

    #[error("summation window too narrow: binomial tail bound {tail_bound:.3e} exceeds {limit:.0e}")]
    WindowTooSmall { tail_bound: f64, limit: f64 },

    #[error("photon cutoff leakage {leakage:.3e} exceeds {limit:.0e}; raise the photon cutoff")]
    CutoffLeakage { leakage: f64, limit: f64 },

    #[error("not a valid density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 configuration, 3 physics regime, 4 numerical quality.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_)
            | Error::InvalidArgument(_)
            | Error::UnknownPreset(_)
            | Error::TooManyAtoms { .. }
            | Error::OddAtomNumber(_)
            | Error::Json(_) => 2,
            Error::CollapsedMeanSpin { .. } | Error::NoInteriorMinimum { .. } => 3,
            Error::WindowTooSmall { .. }
            | Error::CutoffLeakage { .. }
            | Error::NotDensityMatrix(_)
            | Error::Numerical(_) => 4,
            Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
