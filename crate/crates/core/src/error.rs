use alloc::string::String;
use core::fmt;

/// Failure modes shared by every fitting and evaluation routine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not conform.
    DimensionMismatch { expected: usize, found: usize, context: &'static str },
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// `W + T` lost rank during a QR retraction.
    RetractionSingular,
    /// The training loss became NaN or infinite.
    Divergence { epoch: usize },
    /// A flow trajectory left the finite reals.
    FlowDiverged { step: usize },
    /// The affine system defining a level set has no solution.
    EmptyLevelSet,
    /// Closed-form integration requested for a non-polynomial field.
    UnsupportedAnalytic,
    /// Dataset generator name not recognised.
    UnknownGenerator(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found, context } => {
                write!(f, "dimension mismatch in {context}: expected {expected}, found {found}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::RetractionSingular => write!(f, "retraction-singular: W + T is rank deficient"),
            Error::Divergence { epoch } => write!(f, "divergence: non-finite loss at epoch {epoch}"),
            Error::FlowDiverged { step } => write!(f, "flow-diverged: non-finite state at step {step}"),
            Error::EmptyLevelSet => write!(f, "empty-levelset: affine components are inconsistent"),
            Error::UnsupportedAnalytic => {
                write!(f, "unsupported: analytic similarity needs polynomial fields, use monte-carlo")
            }
            Error::UnknownGenerator(name) => write!(f, "unknown dataset generator `{name}`"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    /// True for failures caused by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RetractionSingular
                | Error::Divergence { .. }
                | Error::FlowDiverged { .. }
                | Error::EmptyLevelSet
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize, context: &'static str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found, context })
    }
}
