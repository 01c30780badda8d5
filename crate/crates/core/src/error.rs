//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid optical parameters: {0}")]
    InvalidOptics(String),
    #[error("dense materialization dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("fixed point map is not contractive (rho = {rho})")]
    NotContractive { rho: f64 },
    #[error("iteration cap {cap} reached, last bound {bound:e}")]
    IterationCap { cap: u64, bound: f64 },
    #[error("image norm {norm:e} below tolerance {eta:e}; iterate may be orthogonal to the principal direction")]
    ZeroImage { norm: f64, eta: f64 },
    #[error("power iteration stagnated over {window} steps at increment {increment:e}")]
    Stagnation { window: usize, increment: f64 },
    #[error("need at least {needed} recorded steps, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("descent stalled after {sweeps} sweeps at residual {residual:e} (target {target:e})")]
    DescentStall {
        sweeps: u64,
        residual: f64,
        target: f64,
    },
    #[error("saddle system is singular at lambda = {lambda}")]
    SingularSystem { lambda: f64 },
    #[error("residual norm increased over {0} consecutive steps; initial guess likely outside the convergence ball")]
    Divergence(usize),
    #[error(
        "shifted solve at zeta = {zeta} failed its certificate: residual {residual:e} > {eta:e}"
    )]
    ShiftTooClose {
        zeta: num_complex::Complex64,
        residual: f64,
        eta: f64,
    },
    #[error("imaginary residue {norm:e} exceeds allowance {allow:e}; contour encloses spectrum asymmetrically")]
    ImaginaryResidue { norm: f64, allow: f64 },
    #[error("degenerate contour: {0}")]
    ContourDegenerate(String),
    #[error("contour node at {zeta} is too close to the spectrum")]
    ContourHitsSpectrum { zeta: num_complex::Complex64 },
    #[error("dense eigensolver did not converge")]
    NoConvergence,
    #[error("residual certificate failed: {0}")]
    CertificateFail(String),
    #[error("degenerate spectral gap: |mu1| - |mu2| = {0:e}")]
    DegenerateGap(f64),
    #[error("unsupported Schatten exponent p = {0}")]
    UnsupportedP(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
