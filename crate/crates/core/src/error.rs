use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Variants carry the measured
/// quantity that tripped the check so callers can log it.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("S is not Hermitian (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    NonHermitianS { residual: f64, tolerance: f64 },
    #[error("operator identity violated (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    IdentityViolation { residual: f64, tolerance: f64 },
    #[error("S is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    SNotPositive { min_eigenvalue: f64 },
    #[error("Phi2 is rank deficient (rank {rank} < {p})")]
    Phi2RankDeficient { rank: usize, p: usize },
    #[error("node construction infeasible (least-squares residual {residual:.3e})")]
    ConstructionInfeasible { residual: f64 },
    #[error("resolvent singular at {z}")]
    ResolventSingular { z: Complex64 },
    #[error("frame has a pole at {z}")]
    FramePole { z: Complex64 },
    #[error("point {z} lies on the real axis")]
    RealAxisPoint { z: Complex64 },
    #[error("c-block singular at {z}")]
    CBlockSingular { z: Complex64 },
    #[error("evaluator failed at {z}: {reason}")]
    EvaluatorFailure { z: Complex64, reason: String },
    #[error("disk parameter is not contractive (norm {norm:.6})")]
    NotContractive { norm: f64 },
    #[error("linear-fractional denominator singular at {z} (sigma_min {sigma:.3e})")]
    DenominatorSingular { z: Complex64, sigma: f64 },
    #[error("Moebius map singular at {0}")]
    MapSingularity(Complex64),
    #[error("invalid Moebius center {0}: needs Im z0 > 0")]
    InvalidCenter(Complex64),
    #[error("point too close to the unit circle (|zeta| = {modulus:.9})")]
    TooCloseToBoundary { modulus: f64 },
    #[error("Szego condition fails (log integral {integral:.6e}, {floored} floored nodes)")]
    SzegoFail { integral: f64, floored: usize },
    #[error("factorization did not converge after {iterations} iterations (last step {step:.3e})")]
    NotConverged { iterations: usize, step: f64 },
    #[error("boundary zero at grid node {index} not resolved above round-off (leftover order {order:.2})")]
    UnresolvedZero { index: usize, order: f64 },
    #[error("density not positive definite at grid node {index} (lambda_min {lambda_min:.3e})")]
    DensityNotPD { index: usize, lambda_min: f64 },
    #[error("sum block singular at zeta = {zeta}")]
    SumBlockSingular { zeta: Complex64 },
    #[error("block form singular at zeta = {zeta}")]
    SingularForm { zeta: Complex64 },
    #[error("c-hat has an interior singularity at zeta = {zeta}")]
    InteriorSingularity { zeta: Complex64 },
    #[error("resolvent pole at z = {z} inside the required region")]
    PoleInRegion { z: Complex64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
