use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error(
        "stability conditions violated (rho_x={rho_x}, rho_y={rho_y}, rho_xy={rho_xy}); refusing to run"
    )]
    StabilityViolated { rho_x: f64, rho_y: f64, rho_xy: f64 },

    #[error("stability margin violated: beta = {0} <= 0")]
    StabilityMarginViolated(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible refinement: path of length {len} cannot be coarsened by {factor}")]
    IncompatibleRefinement { len: usize, factor: usize },

    #[error("time grid mismatch: {steps} steps of {k} do not span the horizon {t}")]
    TimeGridMismatch { steps: usize, k: f64, t: f64 },

    #[error("tridiagonal breakdown on line {line}: pivot {pivot:e} (rows not diagonally dominant)")]
    TridiagonalBreakdown { line: usize, pivot: f64 },

    #[error("non-finite value in the solution after step {step}")]
    NonFinite { step: usize },

    #[error("empty pilot table")]
    EmptyPilot,

    #[error("pilot variance is zero on every level")]
    ZeroVariance,

    #[error("tolerance {eps} not reachable within max level {max_level}; increase max level")]
    IncreaseMaxLevel { eps: f64, max_level: u32 },

    #[error("need at least {needed} points for a slope fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Refusals caused by the stability conditions, as opposed to numerical
    /// failures or bad input.
    pub fn is_stability_refusal(&self) -> bool {
        matches!(
            self,
            Error::StabilityViolated { .. } | Error::StabilityMarginViolated(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TridiagonalBreakdown { .. }
                | Error::NonFinite { .. }
                | Error::ZeroVariance
                | Error::IncreaseMaxLevel { .. }
        )
    }
}
