use alloc::string::String;
use core::fmt;

/// Errors from model construction, state algebra and integration.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Fock truncation below the minimum of 2 levels.
    InvalidDimension { dim: usize },
    /// Subsystem index outside the layout.
    SlotOutOfRange { slot: usize, count: usize },
    /// Operator/state dimensions disagree with the layout.
    DimensionMismatch { expected: usize, got: usize },
    /// Layouts of two objects differ.
    LayoutMismatch,
    /// A builder was called with an incompatible qubit count.
    WrongBuilder { expected: usize, got: usize },
    /// Partial trace over an empty keep set.
    EmptyKeepSet,
    /// A required model parameter is missing or out of range.
    InvalidParameter(String),
    /// Dispersive shift not one of {0, +-2chi, +-4chi}.
    InvalidShift,
    /// Trace (or norm) collapsed during integration; the step size is too large.
    IntegratorBlowup { trace: f64 },
    /// The pure-state unraveling needs exactly one collapse channel, the measured one.
    UnsupportedUnraveling(String),
    /// Fock-tail population exceeded the monitor threshold.
    TruncationTail { population: f64, threshold: f64 },
    /// A density matrix failed validity checks beyond tolerance.
    InvalidDensity(String),
    /// Classifier training input had a single class or was empty.
    DegenerateTrainingSet,
    /// Requested time lies beyond the recorded data.
    TauBeyondRecord { tau: f64, end: f64 },
    /// Record checkpoints required for this operation are missing.
    MissingCheckpoints,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension { dim } => {
                write!(f, "Fock dimension must be >= 2, got {dim}")
            }
            Error::SlotOutOfRange { slot, count } => {
                write!(f, "subsystem slot {slot} out of range (layout has {count})")
            }
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::LayoutMismatch => write!(f, "operands live on different Hilbert layouts"),
            Error::WrongBuilder { expected, got } => {
                write!(f, "builder expects qubit_count={expected}, spec has {got}")
            }
            Error::EmptyKeepSet => write!(f, "partial trace needs a nonempty keep set"),
            Error::InvalidParameter(s) => write!(f, "invalid parameter: {s}"),
            Error::InvalidShift => write!(f, "dispersive shift must be one of 0, +-2chi, +-4chi"),
            Error::IntegratorBlowup { trace } => {
                write!(f, "trace collapsed to {trace}; reduce dt")
            }
            Error::UnsupportedUnraveling(s) => write!(f, "unsupported unraveling: {s}"),
            Error::TruncationTail { population, threshold } => write!(
                f,
                "top Fock levels hold population {population:.3e} (> {threshold:.1e}); increase truncation"
            ),
            Error::InvalidDensity(s) => write!(f, "invalid density matrix: {s}"),
            Error::DegenerateTrainingSet => {
                write!(f, "threshold training needs records of both parities")
            }
            Error::TauBeyondRecord { tau, end } => {
                write!(f, "tau={tau} beyond recorded end time {end}")
            }
            Error::MissingCheckpoints => write!(f, "record lacks conditioned-state checkpoints"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
