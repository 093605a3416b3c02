use thiserror::Error;

use crate::sl2::C64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not tracefree (|tr| = {0:e})")]
    NotTracefree(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("zero vector does not define a projective line")]
    ZeroVector,
    #[error("not a point of H3: {0}")]
    NotH3Point(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("period mismatch: {0} vs {1}")]
    PeriodMismatch(f64, f64),
    #[error("not quasi-periodic (residual {0:e})")]
    NotQuasiPeriodic(f64),
    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),
    #[error("curve is not unit speed (max deviation {0:e})")]
    NotUnitSpeed(f64),
    #[error("curve is not closed (endpoint gap {0:e})")]
    NotClosed(f64),
    #[error("step count {0} too small (need at least 8)")]
    TooFewSteps(usize),
    #[error("integration overflow at lambda = {0}")]
    IntegrationOverflow(C64),
    #[error("root localization failed for k = {k}: disc center {center}, radius {radius:e}, winding {winding}")]
    RootLocalization { k: i64, center: C64, radius: f64, winding: i64 },
    #[error("eigenline ill-conditioned (|mu - 1/mu| = {0:e}); use the order report path")]
    EigenlineIllConditioned(f64),
    #[error("contour radius misconfigured: {0}")]
    RadiusMisconfigured(String),
    #[error("order detection failed: {0}")]
    OrderDetection(String),
    #[error("pole of the simple factor at lambda = {0}")]
    Pole(C64),
    #[error("simple factor pole must be non-real, got {0}")]
    RealPole(C64),
    #[error("frame computed at lambda = {found}, expected {expected}")]
    FrameMismatch { expected: C64, found: C64 },
    #[error("L not an eigenline of M(lambda*); dressed flow not periodic (defect {0:e})")]
    NotEigenline(f64),
    #[error("direction selection failed; best singular values {0:?}")]
    DirectionSelection(Vec<f64>),
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonMaxIter { iterations: usize, residual: f64 },
    #[error("Newton Jacobian singular (condition {0:e})")]
    JacobianSingular(f64),
    #[error("potential is not real-valued (max |Im q| = {0:e})")]
    NotReal(f64),
    #[error("symmetry violation: {0}")]
    SymmetryViolation(String),
    #[error("input fails closing condition (residual {0:e})")]
    InputNotClosed(f64),
    #[error("[{stage}] {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    /// Stage tag of the outermost tagged error, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// Innermost error beneath stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            tagged @ Error::Stage { .. } => tagged,
            e => Error::Stage { stage, source: Box::new(e) },
        })
    }
}
