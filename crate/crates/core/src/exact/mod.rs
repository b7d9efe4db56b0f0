//! Exact arithmetic: rationals, polynomials and rational functions in the
//! deformation parameter `t`, truncated power series, and π-graded scalars.

mod pi;
mod poly;
mod ratfun;
mod rational;
mod series;

pub use pi::PiScalar;
pub use poly::Poly;
pub use ratfun::RatFun;
pub use rational::Rational;
pub use series::Series;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExactError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("rational function with zero denominator")]
    ZeroDenominator,
    #[error("denominator vanishes at t = 0; no Taylor expansion")]
    PoleAtZero,
    #[error("pole at t = {0}")]
    Pole(String),
    #[error("binomial series needs constant term 1, found {0}")]
    NonUnitConstant(String),
    #[error("cannot parse rational from {0:?}")]
    Parse(String),
}

/// Convenience: `series_expand` under its contract name.
pub fn series_expand(f: &RatFun, order: usize) -> Result<Series, ExactError> {
    Series::expand(f, order)
}

/// Convenience: `series_pow` under its contract name.
pub fn series_pow(s: &Series, q: &Rational, order: usize) -> Result<Series, ExactError> {
    s.pow(q, order)
}
