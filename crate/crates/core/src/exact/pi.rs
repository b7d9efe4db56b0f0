use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use super::Rational;

/// Exact scalar `Σ c_k π^k` with rational coefficients.
#[derive(Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PiScalar {
    terms: BTreeMap<u32, Rational>,
}

impl PiScalar {
    pub fn zero() -> Self {
        PiScalar::default()
    }

    pub fn rational(c: Rational) -> Self {
        PiScalar::monomial(c, 0)
    }

    pub fn monomial(c: Rational, pi_exp: u32) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(pi_exp, c);
        }
        PiScalar { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &Rational)> {
        self.terms.iter().map(|(k, v)| (*k, v))
    }

    /// The coefficient when this is a single monomial `c π^k`.
    pub fn as_monomial(&self) -> Option<(Rational, u32)> {
        if self.terms.len() == 1 {
            let (k, c) = self.terms.iter().next().unwrap();
            Some((c.clone(), *k))
        } else if self.terms.is_empty() {
            Some((Rational::zero(), 0))
        } else {
            None
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return PiScalar::zero();
        }
        PiScalar { terms: self.terms.iter().map(|(k, v)| (*k, v * c)).collect() }
    }

    pub fn to_f64(&self) -> f64 {
        self.terms.iter().map(|(k, c)| c.to_f64() * std::f64::consts::PI.powi(*k as i32)).sum()
    }

    /// Volume of the unit round sphere `S^m` as an exact multiple of a power of π.
    pub fn unit_sphere_volume(m: usize) -> Self {
        // |S^0| = 2, |S^1| = 2π, |S^m| = 2π/(m−1) · |S^{m−2}|
        let (mut c, mut k, mut d) = if m.is_multiple_of(2) {
            (Rational::from_int(2), 0u32, 0usize)
        } else {
            (Rational::from_int(2), 1u32, 1usize)
        };
        while d < m {
            d += 2;
            c = c * Rational::frac(2, (d - 1) as i64);
            k += 1;
        }
        PiScalar::monomial(c, k)
    }
}

impl Add for &PiScalar {
    type Output = PiScalar;
    fn add(self, rhs: &PiScalar) -> PiScalar {
        let mut terms = self.terms.clone();
        for (k, c) in &rhs.terms {
            let e = terms.entry(*k).or_insert_with(Rational::zero);
            *e += c;
            if e.is_zero() {
                terms.remove(k);
            }
        }
        PiScalar { terms }
    }
}

impl Mul for &PiScalar {
    type Output = PiScalar;
    fn mul(self, rhs: &PiScalar) -> PiScalar {
        let mut out = PiScalar::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                out = &out + &PiScalar::monomial(ca * cb, ka + kb);
            }
        }
        out
    }
}

impl fmt::Display for PiScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| match k {
                0 => c.to_string(),
                1 => format!("{c} pi"),
                _ => format!("{c} pi^{k}"),
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

impl fmt::Debug for PiScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PiScalar({self})")
    }
}
