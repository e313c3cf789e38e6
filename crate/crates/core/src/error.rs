use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Everything that can go wrong in the numerical core.
///
/// Variants map onto the CLI exit classes: all of them are "search or
/// numerical" failures (exit code 2); I/O lives in the companion crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point fell outside (or within `1e-12` of the edge of) the domain
    /// of the conformal factor.
    Domain { what: &'static str, value: f64 },
    /// A caller-supplied argument violates a documented precondition.
    Precondition(String),
    /// Quadrature or ODE integration failed to reach the requested accuracy.
    Numerical(String),
    /// A bracketing search found no sign change. `table` holds the scanned
    /// `(parameter, value)` pairs.
    Search { what: String, table: Vec<(f64, f64)> },
    /// A barrier construction could not be completed.
    Geometry(String),
    /// The two charts of a section curve stopped agreeing.
    Consistency { t: f64, detail: String },
    /// Classifications during bisection were not monotone in the parameter.
    Monotonicity { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "domain error: {what} = {value}"),
            Error::Precondition(msg) => write!(f, "precondition violated: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
            Error::Search { what, table } => {
                write!(f, "search error: {what} ({} scanned points)", table.len())
            }
            Error::Geometry(msg) => write!(f, "geometry error: {msg}"),
            Error::Consistency { t, detail } => write!(f, "chart consistency lost at t = {t}: {detail}"),
            Error::Monotonicity { detail } => write!(f, "non-monotone classification: {detail}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
