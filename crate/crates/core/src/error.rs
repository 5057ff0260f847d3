//! Error type shared by every module of the library.
//!
//! All arithmetic here is exact, so errors never signal numerical trouble;
//! they signal that a requested object does not exist in the chosen ring
//! (`NotExact`, `TooNonlocal`), that an operator was not expanded far enough
//! to answer the question (`InsufficientCutoff`), or that the caller passed
//! indices outside an operation's domain.

use std::fmt;

/// Everything that can go wrong in the calculus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CalcError {
    /// An antiderivative (or a rule that needs one) does not exist in the
    /// differential polynomial ring.  The message names the integrand or the
    /// computation stage that required it.
    NotExact(String),
    /// An operator was truncated above the degree needed by the requested
    /// operation.  The message states the degree that would be required.
    InsufficientCutoff(String),
    /// An operator application needed `D^-2` or lower, which has no closed
    /// form on differential polynomials.
    TooNonlocal(String),
    /// A substitution binds a variable that also appears in a bound
    /// expression.
    SelfReferential(u32),
    /// `evolve` met a variable with no prescribed time derivative.
    MissingFlow(u32),
    /// The zero polynomial has no weight.
    ZeroPolynomial,
    /// A polynomial expected to be weight homogeneous mixes weights.
    Inhomogeneous(i64, i64),
    /// Generalized binomial coefficients are only defined for `j >= 0`.
    NegativeJ(i64),
    /// An index pair lies outside an operator family's defined range.
    BadIndex(String),
    /// A reduction step found its pivot variable occurring nonlinearly (or
    /// not at all), so the triangular solve cannot continue.
    NonlinearPivot(u32),
}

impl fmt::Display for CalcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalcError::NotExact(what) => write!(f, "no exact antiderivative: {what}"),
            CalcError::InsufficientCutoff(what) => {
                write!(f, "operator truncated too high: {what}")
            }
            CalcError::TooNonlocal(what) => write!(f, "result leaves the ring: {what}"),
            CalcError::SelfReferential(j) => {
                write!(f, "substitution for u{j} mentions a bound variable")
            }
            CalcError::MissingFlow(j) => write!(f, "no flow prescribed for u{j}"),
            CalcError::ZeroPolynomial => write!(f, "the zero polynomial has no weight"),
            CalcError::Inhomogeneous(a, b) => {
                write!(f, "polynomial mixes weights {a} and {b}")
            }
            CalcError::NegativeJ(j) => write!(f, "binomial lower index {j} is negative"),
            CalcError::BadIndex(what) => write!(f, "invalid index or parameter: {what}"),
            CalcError::NonlinearPivot(j) => {
                write!(f, "u{j} does not occur linearly, cannot isolate it")
            }
        }
    }
}

impl std::error::Error for CalcError {}

/// Convenient alias used throughout the crate.
pub type CalcResult<T> = Result<T, CalcError>;
