use thiserror::Error;

/// Errors raised by the numerical kernels and the front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("convexity violation: Gaussian curvature {curvature:e} at ({x1}, {x2}) is not positive")]
    ConvexityViolation { x1: f64, x2: f64, curvature: f64 },

    #[error("direction lies within {eps:e} rad of the incident direction (angle {angle:e})")]
    ForwardSingularity { angle: f64, eps: f64 },

    #[error("Gauss-map inversion did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("degenerate spherical coordinates at ({x1}, {x2}): surface gradient vanishes")]
    DegenerateCoordinates { x1: f64, x2: f64 },

    #[error("reflection coefficient is indeterminate for gamma = 0 at grazing incidence")]
    Indeterminate,

    #[error("range error: spherical Bessel y_{order} overflows at x = {x:e}")]
    Range { order: usize, x: f64 },

    #[error("passivity violation: {0}")]
    Passivity(String),

    #[error("quadrature under-resolved: {required} polar nodes required, {given} given")]
    UnderResolved { required: usize, given: usize },

    #[error("density evaluation failed at direction ({}, {}, {}): {source}", .theta[0], .theta[1], .theta[2])]
    NodeEvaluation {
        theta: [f64; 3],
        #[source]
        source: Box<Error>,
    },

    #[error("planar integrand failed at ({}, {}): {source}", .x[0], .x[1])]
    PlanarNodeEvaluation {
        x: [f64; 2],
        #[source]
        source: Box<Error>,
    },

    #[error("sweep failed at ka = {ka}: {source}")]
    SweepPoint {
        ka: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible constraint set: {0}")]
    Feasibility(String),

    #[error("step schedule failed: {0}")]
    StepSchedule(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in structured error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::ConvexityViolation { .. } => "convexity-violation",
            Error::ForwardSingularity { .. } => "forward-singularity",
            Error::Convergence { .. } => "convergence",
            Error::DegenerateCoordinates { .. } => "degenerate-coordinates",
            Error::Indeterminate => "indeterminate",
            Error::Range { .. } => "range",
            Error::Passivity(_) => "passivity-violation",
            Error::UnderResolved { .. } => "under-resolved",
            Error::NodeEvaluation { .. } => "node-evaluation",
            Error::PlanarNodeEvaluation { .. } => "node-evaluation",
            Error::SweepPoint { .. } => "sweep-point",
            Error::Feasibility(_) => "feasibility",
            Error::StepSchedule(_) => "step-schedule",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
