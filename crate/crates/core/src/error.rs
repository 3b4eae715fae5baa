use serde::Serialize;
use thiserror::Error;

/// Structural assumptions that the solver pipeline certifies.
///
/// The string labels are part of the machine-readable certificate and error
/// formats written by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Assumption {
    /// `Delta2` is invertible.
    Delta2Invertible,
    /// The reduced differential Riccati equation has a solution on `[0, T]`.
    ReducedDreSolvable,
    /// The reduced algebraic Riccati equation has a stabilising root.
    StabilizingAre,
    /// The symmetric part of `S = A22 + Delta2 * P22bar` is negative definite.
    NegativeDefiniteSymPart,
    /// `-P22bar` lies inside the certified attraction ball.
    AttractionBall,
}

impl Assumption {
    pub const ALL: [Assumption; 5] = [
        Assumption::Delta2Invertible,
        Assumption::ReducedDreSolvable,
        Assumption::StabilizingAre,
        Assumption::NegativeDefiniteSymPart,
        Assumption::AttractionBall,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Assumption::Delta2Invertible => "3.1",
            Assumption::ReducedDreSolvable => "3.2a",
            Assumption::StabilizingAre => "3.2b",
            Assumption::NegativeDefiniteSymPart => "4.1",
            Assumption::AttractionBall => "4.2",
        }
    }
}

/// Which ODE system produced a blow-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OdeSystem {
    Full,
    ReducedDre,
    BoundaryLayer,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game specification: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("eps = {0} is outside (0, 1]")]
    EpsOutOfRange(f64),

    #[error("t = {t} is outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("{system:?} solution escapes to infinity near t = {t_escape}")]
    BlowUp { system: OdeSystem, t_escape: f64 },

    #[error(
        "{system:?} integration stalled at t = {t}: step budget exhausted or step below floor"
    )]
    StepLimitExceeded { system: OdeSystem, t: f64 },

    #[error("Delta2 is singular (smallest singular value {sigma_min:e})")]
    Delta2Singular { sigma_min: f64 },

    #[error("reduced algebraic Riccati equation has no stabilising solution: {0}")]
    NoStabilizingSolution(String),

    #[error("Lambda is singular (smallest singular value {sigma_min:e})")]
    LambdaSingular { sigma_min: f64 },

    #[error("assumption {} failed: {detail}", .assumption.label())]
    AssumptionFailed {
        assumption: Assumption,
        detail: String,
    },

    #[error("delta = {delta} must lie in (0, gamma = {gamma})")]
    DeltaOutOfRange { delta: f64, gamma: f64 },

    #[error("boundary-layer solution leaves its decay envelope at tau = {tau}")]
    EnvelopeViolated { tau: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("rate fit needs at least 3 positive points, got {0}")]
    InsufficientPoints(usize),

    #[error("scalar formulas need all dimensions equal to 1")]
    NotScalar,

    #[error("closed-form condition failed: {0}")]
    ConditionFailed(String),

    #[error("feedback kind does not match the supplied solution")]
    KindMismatch,

    #[error("step h = {h} exceeds eps/10 = {limit}")]
    StepTooLarge { h: f64, limit: f64 },

    #[error("simulation path {path} blew up at t = {t}")]
    PathBlowUp { path: usize, t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The structural assumption whose failure this error signals, if any.
    pub fn assumption(&self) -> Option<Assumption> {
        match self {
            Error::Delta2Singular { .. } => Some(Assumption::Delta2Invertible),
            Error::BlowUp {
                system: OdeSystem::ReducedDre,
                ..
            } => Some(Assumption::ReducedDreSolvable),
            Error::NoStabilizingSolution(_) | Error::LambdaSingular { .. } => {
                Some(Assumption::StabilizingAre)
            }
            Error::AssumptionFailed { assumption, .. } => Some(*assumption),
            _ => None,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::Dimension(_) => "Dimension",
            Error::EpsOutOfRange(_) => "EpsOutOfRange",
            Error::TimeOutOfRange { .. } => "TimeOutOfRange",
            Error::InvalidTolerance(_) => "InvalidTolerance",
            Error::BlowUp { .. } => "BlowUp",
            Error::StepLimitExceeded { .. } => "StepLimitExceeded",
            Error::Delta2Singular { .. } => "Delta2Singular",
            Error::NoStabilizingSolution(_) => "NoStabilizingSolution",
            Error::LambdaSingular { .. } => "LambdaSingular",
            Error::AssumptionFailed { .. } => "AssumptionFailed",
            Error::DeltaOutOfRange { .. } => "DeltaOutOfRange",
            Error::EnvelopeViolated { .. } => "EnvelopeViolated",
            Error::GridMismatch(_) => "GridMismatch",
            Error::InsufficientPoints(_) => "InsufficientPoints",
            Error::NotScalar => "NotScalar",
            Error::ConditionFailed(_) => "ConditionFailed",
            Error::KindMismatch => "KindMismatch",
            Error::StepTooLarge { .. } => "StepTooLarge",
            Error::PathBlowUp { .. } => "PathBlowUp",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
