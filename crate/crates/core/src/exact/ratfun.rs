use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{ExactError, Poly, Rational};

/// Exact rational function `num(t)/den(t)`.
///
/// Normalized on construction: common factors removed and the denominator
/// made monic, so two equal functions are structurally equal.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct RatFun {
    num: Poly,
    den: Poly,
}

impl RatFun {
    pub fn new(num: Poly, den: Poly) -> Result<Self, ExactError> {
        if den.is_zero() {
            return Err(ExactError::ZeroDenominator);
        }
        if num.is_zero() {
            return Ok(RatFun { num, den: Poly::one() });
        }
        let g = Poly::gcd(&num, &den);
        let (num, _) = num.div_rem(&g)?;
        let (den, _) = den.div_rem(&g)?;
        let lead = den.leading().unwrap().recip()?;
        Ok(RatFun { num: num.scale(&lead), den: den.scale(&lead) })
    }

    pub fn poly(p: Poly) -> Self {
        RatFun { num: p, den: Poly::one() }
    }

    pub fn constant(c: Rational) -> Self {
        RatFun::poly(Poly::constant(c))
    }

    pub fn zero() -> Self {
        RatFun::poly(Poly::zero())
    }

    pub fn one() -> Self {
        RatFun::constant(Rational::one())
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.degree() == Some(0)
    }

    pub fn recip(&self) -> Result<Self, ExactError> {
        RatFun::new(self.den.clone(), self.num.clone())
    }

    pub fn checked_div(&self, rhs: &RatFun) -> Result<Self, ExactError> {
        if rhs.is_zero() {
            return Err(ExactError::DivisionByZero);
        }
        RatFun::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        RatFun::new(self.num.scale(c), self.den.clone()).expect("denominator unchanged")
    }

    pub fn powi(&self, exp: i32) -> Result<Self, ExactError> {
        let base = if exp < 0 { self.recip()? } else { self.clone() };
        let e = exp.unsigned_abs();
        RatFun::new(base.num.pow(e), base.den.pow(e))
    }

    pub fn eval(&self, t: &Rational) -> Result<Rational, ExactError> {
        let d = self.den.eval(t);
        if d.is_zero() {
            return Err(ExactError::Pole(t.to_string()));
        }
        Ok(self.num.eval(t) / d)
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.num.eval_f64(t) / self.den.eval_f64(t)
    }

    /// Value at `t = 0`, if the denominator does not vanish there.
    pub fn at_zero(&self) -> Result<Rational, ExactError> {
        self.eval(&Rational::zero())
    }

    /// d/dt as a rational function.
    pub fn derivative(&self) -> Self {
        let n = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        RatFun::new(n, &self.den * &self.den).expect("nonzero denominator")
    }

    /// Exact square root with positive value at `t = 0`, if one exists.
    pub fn sqrt_exact(&self) -> Option<Self> {
        // The denominator is monic and coprime to the numerator, so the
        // function is a square iff both parts are.
        let n = self.num.sqrt_exact()?;
        let d = self.den.sqrt_exact()?;
        let mut r = RatFun::new(n, d).ok()?;
        let sign_ref = r.at_zero().ok().filter(|v| !v.is_zero());
        if let Some(v) = sign_ref {
            if v.is_negative() {
                r = -&r;
            }
        }
        Some(r)
    }

    /// `(num, den)` rescaled so the denominator has constant term 1, the
    /// natural form for functions regular at `t = 0`.
    pub fn unit_constant_form(&self) -> (Poly, Poly) {
        let d0 = self.den.constant_term();
        match d0.recip() {
            Ok(inv) => (self.num.scale(&inv), self.den.scale(&inv)),
            Err(_) => (self.num.clone(), self.den.clone()),
        }
    }
}

impl fmt::Display for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.unit_constant_form();
        if d.degree() == Some(0) && d.constant_term().is_one() {
            write!(f, "{n}")
        } else {
            write!(f, "({n}) / ({d})")
        }
    }
}

impl fmt::Debug for RatFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RatFun({self})")
    }
}

#[derive(Deserialize)]
struct RatFunRepr {
    num: Poly,
    den: Poly,
}

impl<'de> Deserialize<'de> for RatFun {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = RatFunRepr::deserialize(d)?;
        RatFun::new(r.num, r.den).map_err(serde::de::Error::custom)
    }
}

impl Add for &RatFun {
    type Output = RatFun;
    fn add(self, rhs: &RatFun) -> RatFun {
        let n = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        RatFun::new(n, &self.den * &rhs.den).expect("nonzero denominator")
    }
}

impl Sub for &RatFun {
    type Output = RatFun;
    fn sub(self, rhs: &RatFun) -> RatFun {
        let n = &(&self.num * &rhs.den) - &(&rhs.num * &self.den);
        RatFun::new(n, &self.den * &rhs.den).expect("nonzero denominator")
    }
}

impl Mul for &RatFun {
    type Output = RatFun;
    fn mul(self, rhs: &RatFun) -> RatFun {
        RatFun::new(&self.num * &rhs.num, &self.den * &rhs.den).expect("nonzero denominator")
    }
}

impl Neg for &RatFun {
    type Output = RatFun;
    fn neg(self) -> RatFun {
        RatFun { num: -&self.num, den: self.den.clone() }
    }
}

impl Add for RatFun {
    type Output = RatFun;
    fn add(self, rhs: RatFun) -> RatFun {
        &self + &rhs
    }
}

impl Sub for RatFun {
    type Output = RatFun;
    fn sub(self, rhs: RatFun) -> RatFun {
        &self - &rhs
    }
}

impl Mul for RatFun {
    type Output = RatFun;
    fn mul(self, rhs: RatFun) -> RatFun {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_is_structural() {
        let a = RatFun::new(Poly::from_ints(&[-1, 0, 1]), Poly::from_ints(&[2, 2])).unwrap();
        let b = RatFun::new(Poly::from_ints(&[-1, 1]), Poly::from_ints(&[2])).unwrap();
        assert_eq!(a, b);
        assert!(a.den().leading().unwrap().is_positive());
        assert!(RatFun::new(Poly::one(), Poly::zero()).is_err());
    }

    #[test]
    fn unit_constant_display() {
        let den = Poly::from_ints(&[1, 0, -1, 0, -56, 0, -144]);
        let f = RatFun::new(Poly::one(), den.clone()).unwrap();
        let (n, d) = f.unit_constant_form();
        assert_eq!(n, Poly::one());
        assert_eq!(d, den);
        assert_eq!(f.to_string(), "(1) / (1 - t^2 - 56 t^4 - 144 t^6)");
    }

    #[test]
    fn sqrt_picks_positive_branch() {
        let f = RatFun::new(Poly::from_ints(&[1, 2, 1]), Poly::from_ints(&[4])).unwrap();
        let r = f.sqrt_exact().unwrap();
        assert_eq!(r.at_zero().unwrap(), Rational::frac(1, 2));
        assert_eq!(&r * &r, f);
        let not_square = RatFun::poly(Poly::from_ints(&[1, 3]));
        assert!(not_square.sqrt_exact().is_none());
    }

    #[test]
    fn eval_and_pole() {
        let f = RatFun::new(Poly::one(), Poly::from_ints(&[1, -3])).unwrap();
        assert_eq!(f.eval(&Rational::frac(1, 10)).unwrap(), Rational::frac(10, 7));
        assert!(f.eval(&Rational::frac(1, 3)).is_err());
    }

    #[test]
    fn derivative_of_reciprocal() {
        // d/dt (1+3t)^{-1} = −3 (1+3t)^{-2}
        let f = RatFun::new(Poly::one(), Poly::from_ints(&[1, 3])).unwrap();
        assert_eq!(f.derivative().at_zero().unwrap(), Rational::from_int(-3));
    }
}
