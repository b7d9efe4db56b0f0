use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{ExactError, Rational};

/// Univariate polynomial in `t` with rational coefficients, stored from the
/// constant term upward. The zero polynomial has no coefficients.
#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<Rational>", into = "Vec<Rational>")]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl From<Vec<Rational>> for Poly {
    fn from(coeffs: Vec<Rational>) -> Self {
        Poly::new(coeffs)
    }
}

impl From<Poly> for Vec<Rational> {
    fn from(p: Poly) -> Self {
        p.coeffs
    }
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Rational::is_zero) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Rational::from_int(c)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Poly::new(vec![c])
    }

    /// The monomial `t`.
    pub fn t() -> Self {
        Poly::from_ints(&[0, 1])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(0)
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn eval(&self, t: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * t + c;
        }
        acc
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c.to_f64())
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * Rational::from_int(k as i64))
                .collect(),
        )
    }

    pub fn pow(&self, exp: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..exp {
            out = &out * self;
        }
        out
    }

    pub fn monic(&self) -> Poly {
        match self.leading() {
            Some(l) => self.scale(&l.recip().expect("leading coefficient is nonzero")),
            None => Poly::zero(),
        }
    }

    /// Euclidean division: returns `(q, r)` with `self = q·d + r`, `deg r < deg d`.
    pub fn div_rem(&self, d: &Poly) -> Result<(Poly, Poly), ExactError> {
        let dd = d.degree().ok_or(ExactError::DivisionByZero)?;
        let lead_inv = d.leading().unwrap().recip()?;
        let mut rem = self.coeffs.clone();
        let mut quot = vec![Rational::zero(); self.coeffs.len().saturating_sub(dd)];
        while rem.len() > dd && !rem.is_empty() {
            let k = rem.len() - 1 - dd;
            let c = rem.last().unwrap() * &lead_inv;
            for (j, dc) in d.coeffs.iter().enumerate() {
                rem[k + j] -= &(&c * dc);
            }
            quot[k] = c;
            rem.pop();
            while rem.last().is_some_and(Rational::is_zero) {
                rem.pop();
            }
        }
        Ok((Poly::new(quot), Poly::new(rem)))
    }

    /// Monic greatest common divisor (zero when both inputs are zero).
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        let (mut x, mut y) = (a.clone(), b.clone());
        while !y.is_zero() {
            let (_, r) = x.div_rem(&y).expect("nonzero divisor");
            x = y;
            y = r;
        }
        x.monic()
    }

    /// Exact square root `r` with `r² = self` and `r(0) ≥ 0` (or positive
    /// leading coefficient when `r(0) = 0`), if one exists.
    pub fn sqrt_exact(&self) -> Option<Poly> {
        let deg = match self.degree() {
            None => return Some(Poly::zero()),
            Some(d) => d,
        };
        // Strip a factor t^(2j) so the constant term is nonzero.
        let low = self.coeffs.iter().position(|c| !c.is_zero())?;
        if low % 2 == 1 || deg % 2 == 1 {
            return None;
        }
        let shifted = Poly::new(self.coeffs[low..].to_vec());
        let half = (deg - low) / 2;
        let c0 = shifted.coeffs[0].sqrt_exact()?;
        let two_c0 = &c0 * Rational::from_int(2);
        let mut r = vec![c0];
        for k in 1..=half {
            let mut s = shifted.coeff(k);
            for j in 1..k {
                s -= &(&r[j] * &r[k - j]);
            }
            r.push(s.checked_div(&two_c0).ok()?);
        }
        let mut root = Poly::new(r);
        if (&root * &root) != shifted {
            return None;
        }
        if low > 0 {
            let mut c = vec![Rational::zero(); low / 2];
            c.extend(root.coeffs);
            root = Poly::new(c);
        }
        Some(root)
    }

    /// Human-readable form in the variable `var`, e.g. `1 - t^2 - 56 t^4`.
    pub fn display_in(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let negative = c.is_negative();
            let mag = c.abs();
            if out.is_empty() {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            let mono = match k {
                0 => String::new(),
                1 => var.to_string(),
                _ => format!("{var}^{k}"),
            };
            if k == 0 {
                out.push_str(&mag.to_string());
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&format!("{mag} {mono}"));
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_in("t"))
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += &(a * b);
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        &self - &rhs
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_hand_expansion() {
        // (1+4t²)²(1−9t²) = 1 − t² − 56t⁴ − 144t⁶
        let a = Poly::from_ints(&[1, 0, 4]);
        let b = Poly::from_ints(&[1, 0, -9]);
        let p = &(&a * &a) * &b;
        assert_eq!(p, Poly::from_ints(&[1, 0, -1, 0, -56, 0, -144]));
        assert_eq!(p.to_string(), "1 - t^2 - 56 t^4 - 144 t^6");
    }

    #[test]
    fn division_and_gcd() {
        let a = Poly::from_ints(&[-1, 0, 1]); // t² − 1
        let b = Poly::from_ints(&[1, 1]); // t + 1
        let (q, r) = a.div_rem(&b).unwrap();
        assert_eq!(q, Poly::from_ints(&[-1, 1]));
        assert!(r.is_zero());
        let g = Poly::gcd(&a, &Poly::from_ints(&[2, 2]));
        assert_eq!(g, Poly::from_ints(&[1, 1]));
        assert!(a.div_rem(&Poly::zero()).is_err());
    }

    #[test]
    fn square_roots() {
        let sq = Poly::from_ints(&[1, 2, 1]);
        assert_eq!(sq.sqrt_exact(), Some(Poly::from_ints(&[1, 1])));
        let shifted = Poly::from_ints(&[0, 0, 4, 4, 1]); // t²(2+t)²
        assert_eq!(shifted.sqrt_exact(), Some(Poly::from_ints(&[0, 2, 1])));
        assert_eq!(Poly::from_ints(&[1, 1]).sqrt_exact(), None);
        assert_eq!(Poly::from_ints(&[2, 0, 2]).sqrt_exact(), None);
    }

    #[test]
    fn display_forms() {
        let p = Poly::new(vec![
            Rational::frac(36, 7),
            Rational::zero(),
            Rational::frac(18, 7),
            Rational::zero(),
            Rational::frac(32, 7),
        ]);
        assert_eq!(p.to_string(), "36/7 + 18/7 t^2 + 32/7 t^4");
        assert_eq!(Poly::from_ints(&[0, -1]).to_string(), "-t");
        assert_eq!(Poly::zero().to_string(), "0");
    }
}
