use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    /// |I| reached the critical current; superconductivity would break down.
    #[error("critical current exceeded: |I| = {current:.6e} A >= I_c = {i_crit:.6e} A{}", at_step.map(|s| format!(" (step {s})")).unwrap_or_default())]
    CriticalCurrentExceeded {
        current: f64,
        i_crit: f64,
        at_step: Option<usize>,
    },

    #[error("singular interface: front velocity {v:.6e} m/s equals transmitted phase velocity")]
    SingularInterface { v: f64 },

    #[error("CFL violation: dt = {dt:.6e} s exceeds limit {limit:.6e} s")]
    CflViolation { dt: f64, limit: f64 },

    #[error("non-finite field value at step {step}")]
    NonFiniteField { step: usize },

    #[error("no sample passed the magnitude gate")]
    EmptyGate,

    #[error("insufficient support for fit: {found} points selected, need at least {needed}")]
    InsufficientSupport { found: usize, needed: usize },

    #[error("fit diverged: {0}")]
    FitDiverged(String),

    #[error("fitted quadratic coefficient is non-negative ({a:.6e}); no redshift trend")]
    SignError { a: f64 },

    #[error("envelope alignment failed: {0}")]
    AlignmentFailed(String),

    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An error raised inside one run of a scenario, annotated with the run coordinates.
    #[error("run {run}: {source}")]
    InRun {
        run: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_run(run: impl Into<String>, source: Error) -> Self {
        Error::InRun {
            run: run.into(),
            source: Box::new(source),
        }
    }

    /// Strips run annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::InRun { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::CriticalCurrentExceeded { .. }
            | Error::SingularInterface { .. }
            | Error::NonFiniteField { .. }
            | Error::CflViolation { .. } => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}
