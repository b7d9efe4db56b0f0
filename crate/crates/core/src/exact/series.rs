use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ExactError, Poly, RatFun, Rational};

/// Truncated power series in `t`: `coeffs[k]` multiplies `t^k`, and the
/// series carries exactly `order + 1` coefficients.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Series {
    coeffs: Vec<Rational>,
}

impl Series {
    pub fn new(mut coeffs: Vec<Rational>, order: usize) -> Self {
        coeffs.resize(order + 1, Rational::zero());
        Series { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        let order = coeffs.len().saturating_sub(1);
        Series::new(coeffs.iter().map(|&c| Rational::from_int(c)).collect(), order)
    }

    pub fn one(order: usize) -> Self {
        Series::new(vec![Rational::one()], order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Series::new(self.coeffs.iter().take(order + 1).cloned().collect(), order)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Series { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    /// Product truncated at the smaller of the two orders.
    pub fn mul(&self, rhs: &Series) -> Series {
        let order = self.order().min(rhs.order());
        let mut out = vec![Rational::zero(); order + 1];
        for (i, a) in self.coeffs.iter().take(order + 1).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().take(order + 1 - i).enumerate() {
                out[i + j] += &(a * b);
            }
        }
        Series { coeffs: out }
    }

    pub fn add(&self, rhs: &Series) -> Series {
        let order = self.order().min(rhs.order());
        Series { coeffs: (0..=order).map(|k| self.coeff(k) + rhs.coeff(k)).collect() }
    }

    /// Taylor expansion of `f` at `t = 0` through `order`, exactly.
    pub fn expand(f: &RatFun, order: usize) -> Result<Series, ExactError> {
        let q0 = f.den().constant_term();
        let q0_inv = q0.recip().map_err(|_| ExactError::PoleAtZero)?;
        let mut c: Vec<Rational> = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut s = f.num().coeff(k);
            for j in 1..=k {
                let qj = f.den().coeff(j);
                if !qj.is_zero() {
                    s -= &(&qj * &c[k - j]);
                }
            }
            c.push(s * &q0_inv);
        }
        Ok(Series { coeffs: c })
    }

    /// `self^q` by the binomial series; requires constant term 1.
    ///
    /// Uses the recurrence from `b' a = q a' b`:
    /// `k b_k = Σ_{j=1..k} ((q+1) j − k) a_j b_{k−j}`.
    pub fn pow(&self, q: &Rational, order: usize) -> Result<Series, ExactError> {
        if !self.coeff(0).is_one() {
            return Err(ExactError::NonUnitConstant(self.coeff(0).to_string()));
        }
        let a = self.truncate(order);
        let q1 = q + Rational::one();
        let mut b = vec![Rational::one()];
        for k in 1..=order {
            let kk = Rational::from_int(k as i64);
            let mut s = Rational::zero();
            for j in 1..=k {
                let aj = a.coeff(j);
                if aj.is_zero() {
                    continue;
                }
                let w = &q1 * Rational::from_int(j as i64) - &kk;
                s += &(w * aj * &b[k - j]);
            }
            b.push(s / kk);
        }
        Ok(Series { coeffs: b })
    }

    pub fn to_poly(&self) -> Poly {
        Poly::new(self.coeffs.clone())
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + O(t^{})", self.to_poly(), self.order() + 1)
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.coeffs.iter()).finish()
    }
}
