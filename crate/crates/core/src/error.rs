use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Error type shared by every module in the core crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Matrix/vector dimensions do not agree.
    ShapeMismatch(String),
    /// A precondition on the inputs was violated (empty set, unbalanced
    /// classes, invalid ratio, ...).
    Contract(String),
    /// A NaN or infinity showed up where finite values are required; the
    /// message names the location (time step, epoch, coordinate).
    NonFinite(String),
    /// A textual report could not be parsed back.
    Parse(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for Error {}

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::Error::ShapeMismatch(alloc::format!($($arg)*))
    };
}

macro_rules! contract_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Contract(alloc::format!($($arg)*))
    };
}

macro_rules! nonfinite_err {
    ($($arg:tt)*) => {
        $crate::error::Error::NonFinite(alloc::format!($($arg)*))
    };
}

pub(crate) use {contract_err, nonfinite_err, shape_err};
