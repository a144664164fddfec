use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid system parameters: {0}")]
    Parameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("root finder did not converge for polynomial {poly} after {iterations} iterations")]
    RootsNotConverged { poly: String, iterations: usize },

    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenNotConverged(usize),

    #[error("Riccati iteration did not converge after {iterations} iterations (residual {residual:e})")]
    RiccatiNotConverged { iterations: usize, residual: f64 },

    #[error("closed loop of the Riccati gain is not stable (spectral radius {0})")]
    NotStabilizable(f64),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("controllability matrix is ill-conditioned (condition estimate {0:e})")]
    IllConditioned(f64),

    #[error("trajectory diverged at step {step}")]
    Diverged { step: usize },

    #[error("no excitation: every input in the regression window is zero")]
    NoExcitation,

    #[error("degenerate noise: the noise variance must be positive")]
    DegenerateNoise,

    #[error("policy reads the state and cannot run on the innovation path")]
    StateDependentPolicy,

    #[error("feasibility is not monotone in m: feasible at {feasible:e} but not at {infeasible:e}")]
    NonMonotone { feasible: f64, infeasible: f64 },

    #[error("co-stabilizability test failed at m = 0: {0}")]
    BaseInfeasible(String),
}
