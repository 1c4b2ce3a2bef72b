use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {point:?} lies outside the box beyond the one-cell margin")]
    OutOfDomain { point: [f64; 3] },
    #[error("vector of norm {norm:.3e} is outside the tubular neighborhood (floor {floor})")]
    DegenerateProjection { norm: f64, floor: f64 },
    #[error("coefficient bounds violated: min {min:.3e}, max {max:.3e}")]
    CoefficientBounds { min: f64, max: f64 },
    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("quadratic form is indefinite: functional value {value:.3e} at grid point {point}")]
    IndefiniteForm { value: f64, point: usize },
    #[error("magnetization support touches the boundary of the unpadded box")]
    SupportTouchesBoundary,
    #[error("stability bound violated: |grad psi| = {grad:.6e} > |m|/mu0 = {bound:.6e}")]
    StabilityBound { grad: f64, bound: f64 },
    #[error("tubular neighborhood violated at eps = {eps}: |m_hat| = {norm:.3e}")]
    TubularNeighborhood { eps: f64, norm: f64 },
    #[error(
        "no homogenized elastic tensor available for direction {nu:?} and re-solve is disabled"
    )]
    MissingTensor { nu: [f64; 3] },
    #[error("inadmissible deformation: {0}")]
    Inadmissible(String),
    #[error("field file format: {0}")]
    Format(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
