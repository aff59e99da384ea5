use thiserror::Error;

/// Everything that can go wrong across the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("generator row {row} is not conservative (row sum {sum:e})")]
    NonConservativeGenerator { row: usize, sum: f64 },

    #[error("generator has a negative off-diagonal rate at ({row},{col}): {rate}")]
    NegativeRate { row: usize, col: usize, rate: f64 },

    #[error("discount rate rho = {rho} must exceed rho_o^+ = {floor}")]
    DiscountTooSmall { rho: f64, floor: f64 },

    #[error("cost function fails convexity/growth checks: {0}")]
    NonConvexCost(String),

    #[error("operation requires the two-regime case-study model: {0}")]
    NotTwoRegime(String),

    #[error("time step too coarse: dt * max|beta| = {0} > 0.1")]
    StepTooCoarse(f64),

    #[error("sigma_2({q}) = {value} is not positive")]
    DegenerateSigma2 { q: f64, value: f64 },

    #[error("no regime explains observed jump mark {mark} at eta = {eta}")]
    UnmatchableJump { mark: f64, eta: f64 },

    #[error("all particle weights collapsed at step {step}")]
    WeightCollapse { step: usize },

    #[error("grid resolution {0} is below the minimum of 100 nodes per axis")]
    ResolutionTooCoarse(usize),

    #[error("solver did not converge after {iterations} sweeps (worst residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("smooth-fit system has no positive solution: {0}")]
    NoRoot(String),

    #[error("no stopping node found in column y = {y}")]
    BoundaryNotFound { y: f64 },

    #[error("free boundary is not monotone at y = {y}")]
    NonMonotoneBoundary { y: f64 },

    #[error("theta^2 vanishes, V_yy formula is undefined")]
    DegenerateTheta,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 1 for configuration and input problems, 2 for
    /// numerical failures of a solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::NoConvergence { .. }
            | Self::NoRoot(_)
            | Self::BoundaryNotFound { .. }
            | Self::NonMonotoneBoundary { .. }
            | Self::WeightCollapse { .. } => 2,
            _ => 1,
        }
    }
}
