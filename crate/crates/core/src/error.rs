use alloc::string::String;
use core::fmt;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on shape.
    Shape {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
    /// A shape mismatch inside a specific layer of the recurrent stack.
    LayerShape {
        layer: usize,
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    /// An input sequence or collection that must be nonempty was empty.
    Empty(&'static str),
    /// A value that must be finite was NaN or infinite.
    NonFinite { context: &'static str, index: usize },
    /// A target or observation that must be strictly positive was not.
    NonPositiveTarget { index: usize, value: f64 },
    /// Training produced a non-finite loss.
    Diverged { epoch: usize, batch: usize },
    /// A configuration value is outside its allowed range.
    InvalidConfig(String),
    /// A horizon had no samples to evaluate.
    EmptyHorizon(u32),
    /// The linear system in the least-squares fit was not positive definite.
    Singular,
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                context,
                expected,
                actual,
            } => write!(
                f,
                "{context}: shape mismatch, expected {}x{}, got {}x{}",
                expected.0, expected.1, actual.0, actual.1
            ),
            Error::LayerShape {
                layer,
                context,
                expected,
                actual,
            } => write!(
                f,
                "layer {layer}: {context} has length {actual}, expected {expected}"
            ),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::NonFinite { context, index } => {
                write!(f, "{context}: non-finite value at index {index}")
            }
            Error::NonPositiveTarget { index, value } => {
                write!(f, "target {index} is {value}, must be > 0")
            }
            Error::Diverged { epoch, batch } => {
                write!(f, "non-finite loss at epoch {epoch}, batch {batch}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::EmptyHorizon(h) => write!(f, "no samples available for horizon {h}"),
            Error::Singular => f.write_str("normal equations are not positive definite"),
        }
    }
}

impl core::error::Error for Error {}
