use thiserror::Error;

use crate::ComplexPoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid angle: {0}")]
    InvalidAngle(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("root finder did not converge ({failed} of {total} roots; max residual {max_residual:e})")]
    RootNonConvergence {
        failed: usize,
        total: usize,
        max_residual: f64,
    },

    #[error("newton continuation did not converge at parameter {param}")]
    NonConvergence { param: f64 },

    /// Newton landed on a sibling preimage. `good` counts the points that
    /// were accepted before the jump.
    #[error("branch jump at parameter {param} after {good} accepted points")]
    BranchJump { param: f64, good: usize },

    #[error("ray {angle} did not converge to a landing point: {reason}")]
    NotConverged { angle: String, reason: String },

    #[error("rays {theta_r} and {theta_l} do not co-land (gap {gap:e})")]
    NoColanding {
        theta_r: String,
        theta_l: String,
        gap: f64,
    },

    #[error("point {point} lies outside the linearization domain (radius {radius:e})")]
    OutsideLinearizationDomain { point: ComplexPoint, radius: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("wrong pullback for cut {cut}: side ends {gap:e} away from the root")]
    WrongPullback { cut: String, gap: f64 },

    #[error("degree mismatch: formula gives {formula}, preimage count gives {counted}")]
    DegreeMismatch { formula: usize, counted: usize },

    #[error("carrot degree {d_c} < 2: P is injective on the avoiding set")]
    InjectiveOnAvoidingSet { d_c: usize },

    #[error("carrots {a} and {b} overlap")]
    CarrotOverlap { a: usize, b: usize },

    #[error("continuity gap {gap:e} on {patch}")]
    ContinuityGap { patch: String, gap: f64 },

    #[error("grid mismatch between masks")]
    GridMismatch,

    #[error("scene error at {path}: {message}")]
    Scene { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
