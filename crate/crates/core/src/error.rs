use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error(
        "component outputs are linearly dependent: component {component} lies in the span of the preceding outputs"
    )]
    LinearDependence { component: usize },

    #[error("degenerate dimension {0}: angles need at least two coordinates")]
    DegenerateDimension(usize),

    #[error("width bound violated: K = {k} is not below 2*sqrt(N) - 1 for N = {n}")]
    WidthBound { k: usize, n: usize },

    #[error("invalid activation profile: {0}")]
    InvalidProfile(String),

    #[error("epsilon must lie in (0, 1], got {0}")]
    InvalidEpsilon(f64),

    #[error("no improvement to wrap: composite loss {composite} is not below best component loss {best}")]
    NoImprovement { composite: f64, best: f64 },

    #[error("scaled plan left its interval at record {record}: hidden value {value} outside ({lo}, {hi})")]
    EscapedInterval {
        record: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("scaled plan deviates by {deviation} at record {record}, budget was {epsilon}")]
    ApproximationFailed {
        record: usize,
        deviation: f64,
        epsilon: f64,
    },

    #[error("graph contains a cycle through node {0}")]
    Cycle(usize),

    #[error("node {node} references missing node {child}")]
    DanglingReference { node: usize, child: usize },

    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("sampler could not produce a valid instance after {0} attempts")]
    SamplerExhausted(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input files or configuration rather
    /// than by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dataset(_)
                | Error::Io { .. }
                | Error::Csv { .. }
                | Error::Json(_)
                | Error::Graph(_)
                | Error::DanglingReference { .. }
                | Error::Cycle(_)
                | Error::InvalidProfile(_)
                | Error::InvalidEpsilon(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
