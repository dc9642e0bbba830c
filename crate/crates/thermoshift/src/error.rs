use std::fmt;

/// Everything that can go wrong across the library.
///
/// Violated mathematical expectations (a distortion ratio outside its bound, a
/// tail probability above its envelope) are *data* carried in report structs,
/// not errors; this enum covers structural problems and exhausted budgets.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A transition table has an all-zero row or column.
    ZeroRowOrColumn { index: usize, is_row: bool },
    /// No single connecting-word length admits a witness set up to the search depth.
    NoWitnessFound { depth: usize },
    /// A word violates the transition structure at the given position
    /// (position `i` refers to the step from symbol `i` to symbol `i+1`,
    /// or to an out-of-alphabet symbol at `i`).
    InadmissibleWord { position: usize },
    /// An anchor sequence is out of alphabet, too short for the potential
    /// depth, or does not connect to the summed words.
    InadmissibleAnchor,
    /// Enumerating the requested word set would exceed the word budget.
    AlphabetTooLargeForEnumeration { required: u128, budget: u64 },
    /// A computation budget (words, pairs, iterations) would be exceeded.
    BudgetExceeded { required: u128, budget: u64 },
    /// No word satisfies the requested constraint; the caller should treat
    /// the associated sum as empty (log-sum -inf).
    EmptyConstraintSet,
    /// Free-energy samples violate convexity beyond the certified slack,
    /// so a Legendre transform would be meaningless.
    NonconvexSamples { beta: f64, violation: f64 },
    /// Operator iteration failed to settle: the pointwise growth ratios
    /// still spread more than the tolerance after the final sweep.
    DivergedInterpolation { spread: f64, tolerance: f64 },
    /// Floating-point resolution ran out: an expansion stopped before the
    /// requested digit count (the digits recovered so far are carried
    /// along), or a positive sum was consumed entirely by roundoff.
    PrecisionExhausted { digits: Vec<u64> },
    /// A continued-fraction expansion hit a rational point and stopped early.
    TerminatedExpansion { digits: Vec<u64> },
    /// theta must lie in (0, min(c0^-3, 1/5)].
    ThetaOutOfRange { theta: f64, max: f64 },
    /// The model does not support the requested exact computation.
    UnsupportedModel(&'static str),
    /// A configuration document failed validation.
    ConfigInvalid(String),
    /// A precondition on plain arguments failed.
    InvalidInput(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ZeroRowOrColumn { index, is_row } => {
                let kind = if *is_row { "row" } else { "column" };
                write!(f, "transition {} {} is all zeros", kind, index)
            }
            Error::NoWitnessFound { depth } => {
                write!(f, "no connecting-word witness up to length {}", depth)
            }
            Error::InadmissibleWord { position } => {
                write!(f, "word is inadmissible at position {}", position)
            }
            Error::InadmissibleAnchor => write!(f, "anchor is inadmissible for this computation"),
            Error::AlphabetTooLargeForEnumeration { required, budget } => write!(
                f,
                "enumeration needs {} words but the budget is {}",
                required, budget
            ),
            Error::BudgetExceeded { required, budget } => {
                write!(
                    f,
                    "computation needs {} units but the budget is {}",
                    required, budget
                )
            }
            Error::EmptyConstraintSet => write!(f, "no word satisfies the constraint"),
            Error::NonconvexSamples { beta, violation } => write!(
                f,
                "free-energy samples nonconvex near beta = {} (violation {:.3e})",
                beta, violation
            ),
            Error::DivergedInterpolation { spread, tolerance } => write!(
                f,
                "growth ratios spread {:.3e} exceeds tolerance {:.3e}",
                spread, tolerance
            ),
            Error::PrecisionExhausted { digits } => {
                if digits.is_empty() {
                    write!(f, "floating-point precision exhausted")
                } else {
                    write!(f, "precision exhausted after {} digits", digits.len())
                }
            }
            Error::TerminatedExpansion { digits } => {
                write!(
                    f,
                    "expansion terminated (rational) after {} digits",
                    digits.len()
                )
            }
            Error::ThetaOutOfRange { theta, max } => {
                write!(f, "theta = {} outside (0, {}]", theta, max)
            }
            Error::UnsupportedModel(what) => write!(f, "unsupported model: {}", what),
            Error::ConfigInvalid(msg) => write!(f, "invalid config: {}", msg),
            Error::InvalidInput(msg) => write!(f, "invalid input: {}", msg),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
