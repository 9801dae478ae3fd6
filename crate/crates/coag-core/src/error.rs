use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoagError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoagError {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("gamma pole at z = {0}")]
    Pole(f64),
    /// Neither the small-x series nor the large-x expansion reaches the
    /// requested tolerance and no fallback was allowed.
    #[error("series gap at x = {x}: best estimated relative error {estimate:.3e}")]
    SeriesGap { x: f64, estimate: f64 },
    #[error("divergent integral: {0}")]
    Divergence(String),
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("head singularity: {0}")]
    HeadSingular(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("fit instability: {0}")]
    FitInstability(String),
    #[error("non-contraction after {iterations} iterations: observed ratio {ratio:.4}")]
    NonContraction { iterations: usize, ratio: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl CoagError {
    /// Short stable tag used in machine-readable error lines.
    pub fn code(&self) -> &'static str {
        match self {
            CoagError::Domain(_) => "domain",
            CoagError::Pole(_) => "pole",
            CoagError::SeriesGap { .. } => "series_gap",
            CoagError::Divergence(_) => "divergence",
            CoagError::Coverage(_) => "coverage",
            CoagError::HeadSingular(_) => "head_singular",
            CoagError::Hypothesis(_) => "hypothesis",
            CoagError::FitInstability(_) => "fit_instability",
            CoagError::NonContraction { .. } => "non_contraction",
            CoagError::Config(_) => "config",
        }
    }
}
