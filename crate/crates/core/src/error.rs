use thiserror::Error;

pub type Result<T> = std::result::Result<T, GlError>;

#[derive(Debug, Error)]
pub enum GlError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("chart error: {0}")]
    Chart(String),

    #[error("under-resolved: epsilon = {eps} but max spacing = {h} ({msg})")]
    UnderResolved { eps: f64, h: f64, msg: String },

    #[error("flow instability: {0}")]
    FlowInstability(String),

    #[error("no convergence after {steps} steps (residual {residual:.3e})")]
    NoConvergence { steps: usize, residual: f64 },

    #[error("linear solver stagnated: {0}")]
    LinearStagnation(String),

    #[error("phase jump of {jump:.6} rad at edge ({from}, {to}) is ambiguous")]
    PhaseJumpAmbiguous { from: usize, to: usize, jump: f64 },

    #[error("no valid seed node: {0}")]
    NoValidSeed(String),

    #[error("vector field not admissible: boundary tangency norm {0:.3e}")]
    NotAdmissible(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("scenario stage '{stage}' failed: {source}")]
    StageFailed {
        stage: String,
        #[source]
        source: Box<GlError>,
    },

    #[error("oracle check failed: {0}")]
    OracleFailed(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl GlError {
    /// Process exit code contract: 2 usage/config, 3 non-convergence, 1 assertion.
    pub fn exit_code(&self) -> i32 {
        match self {
            GlError::Config(_)
            | GlError::Chart(_)
            | GlError::UnderResolved { .. }
            | GlError::Precondition(_)
            | GlError::NotAdmissible(_)
            | GlError::UnknownScenario(_)
            | GlError::Io(_)
            | GlError::Serde(_) => 2,
            GlError::NoConvergence { .. } | GlError::FlowInstability(_) => 3,
            GlError::StageFailed { source, .. } => source.exit_code(),
            _ => 1,
        }
    }
}
