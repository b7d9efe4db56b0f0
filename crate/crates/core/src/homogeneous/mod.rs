//! Exact curvature along products of round spheres with per-factor scale
//! functions `a_i(t)`: the factor metric is `a_i(t)·g_{S^{m_i}(1)}`.
//!
//! On such a product the Ricci tensor is block diagonal with the factor
//! block equal to `(m_i − 1)·g_{S^{m_i}(1)}`, so with `κ_i = 1/a_i`
//!
//! ```text
//! R      = Σ m_i (m_i − 1) κ_i
//! |Ric|² = Σ m_i (m_i − 1)² κ_i²
//! σ₂     = −½|Ric|² + n/(8(n−1)) R²
//! Vol    = Π a_i^{m_i/2} |S^{m_i}|
//! ```

mod family_file;
mod parallel;

pub use family_file::{FactorSpec, FamilyFile};
pub use parallel::{
    einstein_operator_parallel, parallel_tt_spectrum, second_variation_closed_form,
    stability_probe, Eigenvalue, EinsteinOperatorResult, ParallelTTTensor, ParallelTensor,
    StabilityReport, StabilityVerdict,
};

use serde::Serialize;
use thiserror::Error;

use crate::exact::{ExactError, PiScalar, Poly, RatFun, Rational, Series};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("family needs at least one factor")]
    Empty,
    #[error("factor {index}: sphere dimension must be at least 2, got {dim}")]
    FactorDim { index: usize, dim: usize },
    #[error("factor {index}: scale must be positive at t = 0, got {value}")]
    NonPositiveScale { index: usize, value: String },
    #[error("factor {index}: scale is not positive at t = {t}")]
    ScaleNotPositiveAt { index: usize, t: f64 },
    #[error("total dimension {0} is below the supported minimum")]
    TooSmall(usize),
    #[error("factor {index} has odd dimension {dim} and its scale {scale} is not a perfect square; exact volume undefined")]
    OddDimensionNonSquare { index: usize, dim: usize, scale: String },
    #[error("sigma_2 of the background vanishes; normalized H series undefined")]
    DegenerateSigma2,
    #[error("background is not Einstein (factor Ricci multiples {0:?})")]
    NotEinstein(Vec<String>),
    #[error("tensor has {got} coefficients but the family has {expected} factors")]
    Arity { expected: usize, got: usize },
    #[error("parallel tensor is not trace-free against the background (trace {0})")]
    NotTraceFree(String),
    #[error("parallel tensor is zero")]
    ZeroTensor,
}

/// One round-sphere factor with metric `scale(t)·g_{S^dim(1)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereFactor {
    pub dim: usize,
    pub scale: RatFun,
}

impl SphereFactor {
    pub fn new(dim: usize, scale: RatFun) -> Self {
        SphereFactor { dim, scale }
    }

    pub fn unit(dim: usize) -> Self {
        SphereFactor::new(dim, RatFun::one())
    }
}

/// Product of round spheres, each carrying an exact scale function of `t`.
/// The `t = 0` member plays the role of the background metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereProductFamily {
    factors: Vec<SphereFactor>,
}

/// Ricci-multiple data of the `t = 0` member: `Ric = (n−1)λ·ḡ` when Einstein.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EinsteinData {
    pub n: usize,
    pub lambda: Option<Rational>,
    pub is_einstein: bool,
    /// `(m_i − 1)/a_i(0)` per factor.
    pub ricci_multiples: Vec<Rational>,
}

impl EinsteinData {
    pub fn lambda_or_err(&self) -> Result<&Rational, GeometryError> {
        self.lambda.as_ref().filter(|_| self.is_einstein).ok_or_else(|| {
            GeometryError::NotEinstein(self.ricci_multiples.iter().map(|r| r.to_string()).collect())
        })
    }

    /// `σ₂(ḡ) = n(n−1)(n−2)²λ²/8`.
    pub fn sigma2_closed_form(&self) -> Option<Rational> {
        let lambda = self.lambda.as_ref()?;
        let n = self.n as i64;
        Some(Rational::frac(n * (n - 1) * (n - 2) * (n - 2), 8) * lambda * lambda)
    }
}

impl SphereProductFamily {
    pub fn new(factors: Vec<SphereFactor>) -> Result<Self, GeometryError> {
        if factors.is_empty() {
            return Err(GeometryError::Empty);
        }
        for (index, f) in factors.iter().enumerate() {
            if f.dim < 2 {
                return Err(GeometryError::FactorDim { index, dim: f.dim });
            }
            let a0 = f.scale.at_zero()?;
            if !a0.is_positive() {
                return Err(GeometryError::NonPositiveScale { index, value: a0.to_string() });
            }
        }
        Ok(SphereProductFamily { factors })
    }

    /// Undeformed product of unit spheres of the given dimensions.
    pub fn unit_product(dims: &[usize]) -> Result<Self, GeometryError> {
        SphereProductFamily::new(dims.iter().map(|&d| SphereFactor::unit(d)).collect())
    }

    /// The four-fold `S²` product deformed by
    /// `(1+4t²)^{-1}, (1+4t²)^{-1}, (1+3t)^{-1}, (1−3t)^{-1}`.
    pub fn counterexample() -> Self {
        let inv = |d: &[i64]| RatFun::new(Poly::one(), Poly::from_ints(d)).expect("nonzero");
        SphereProductFamily::new(vec![
            SphereFactor::new(2, inv(&[1, 0, 4])),
            SphereFactor::new(2, inv(&[1, 0, 4])),
            SphereFactor::new(2, inv(&[1, 3])),
            SphereFactor::new(2, inv(&[1, -3])),
        ])
        .expect("valid family")
    }

    /// Linear path `ḡ + t·h` for a parallel tensor `h = Σ c_i g_i`.
    pub fn linear_path(background: &SphereProductFamily, h: &ParallelTensor) -> Result<Self, GeometryError> {
        let k = background.factors.len();
        if h.coeffs.len() != k {
            return Err(GeometryError::Arity { expected: k, got: h.coeffs.len() });
        }
        let factors = background
            .factors
            .iter()
            .zip(&h.coeffs)
            .map(|(f, c)| {
                let a0 = f.scale.at_zero()?;
                Ok(SphereFactor::new(f.dim, RatFun::poly(Poly::new(vec![a0, c.clone()]))))
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        SphereProductFamily::new(factors)
    }

    pub fn factors(&self) -> &[SphereFactor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim).sum()
    }

    /// The family frozen at `t = 0`.
    pub fn background(&self) -> Result<SphereProductFamily, GeometryError> {
        let factors = self
            .factors
            .iter()
            .map(|f| Ok(SphereFactor::new(f.dim, RatFun::constant(f.scale.at_zero()?))))
            .collect::<Result<Vec<_>, GeometryError>>()?;
        SphereProductFamily::new(factors)
    }

    /// Every scale multiplied by the constant `c`.
    pub fn rescaled(&self, c: &Rational) -> Result<Self, GeometryError> {
        SphereProductFamily::new(
            self.factors.iter().map(|f| SphereFactor::new(f.dim, f.scale.scale(c))).collect(),
        )
    }

    pub fn scales_at_zero(&self) -> Result<Vec<Rational>, GeometryError> {
        Ok(self.factors.iter().map(|f| f.scale.at_zero()).collect::<Result<_, _>>()?)
    }

    /// Checks that every scale is finite and positive at `t`.
    pub fn check_positive_at(&self, t: f64) -> Result<(), GeometryError> {
        for (index, f) in self.factors.iter().enumerate() {
            let v = f.scale.eval_f64(t);
            if !(v.is_finite() && v > 0.0) {
                return Err(GeometryError::ScaleNotPositiveAt { index, t });
            }
        }
        Ok(())
    }

    /// Scalar curvature and squared Ricci norm of `g_t`.
    pub fn ricci_invariants(&self) -> Result<(RatFun, RatFun), GeometryError> {
        let mut r = RatFun::zero();
        let mut ric2 = RatFun::zero();
        for f in &self.factors {
            let m = f.dim as i64;
            let kappa = f.scale.recip()?;
            r = &r + &kappa.scale(&Rational::from_int(m * (m - 1)));
            ric2 = &ric2 + &(&kappa * &kappa).scale(&Rational::from_int(m * (m - 1) * (m - 1)));
        }
        Ok((r, ric2))
    }

    /// `σ₂(g_t) = −½|Ric|² + n/(8(n−1)) R²`.
    pub fn sigma2(&self) -> Result<RatFun, GeometryError> {
        let n = self.dim() as i64;
        let (r, ric2) = self.ricci_invariants()?;
        let c = Rational::frac(n, 8 * (n - 1));
        Ok(&ric2.scale(&Rational::frac(-1, 2)) + &(&r * &r).scale(&c))
    }

    /// `Π a_i(t)^{m_i/2}` as an exact rational function.
    fn volume_factor(&self) -> Result<RatFun, GeometryError> {
        let mut out = RatFun::one();
        for (index, f) in self.factors.iter().enumerate() {
            let p = if f.dim % 2 == 0 {
                f.scale.powi((f.dim / 2) as i32)?
            } else {
                let root = f.scale.sqrt_exact().ok_or_else(|| GeometryError::OddDimensionNonSquare {
                    index,
                    dim: f.dim,
                    scale: f.scale.to_string(),
                })?;
                root.powi(f.dim as i32)?
            };
            out = &out * &p;
        }
        Ok(out)
    }

    /// `Vol(g_t) = ratio(t)·baseVolume` with `ratio(0) = 1`.
    pub fn volume(&self) -> Result<(RatFun, PiScalar), GeometryError> {
        let v = self.volume_factor()?;
        let v0 = v.at_zero()?;
        let ratio = v.scale(&v0.recip()?);
        let mut base = PiScalar::rational(v0);
        for f in &self.factors {
            base = &base * &PiScalar::unit_sphere_volume(f.dim);
        }
        Ok((ratio, base))
    }

    /// Volume ratio in floating point; defined for any positive scales.
    pub fn volume_ratio_f64(&self, t: f64) -> f64 {
        self.factors
            .iter()
            .map(|f| (f.scale.eval_f64(t) / f.scale.eval_f64(0.0)).powf(f.dim as f64 / 2.0))
            .product()
    }

    /// Taylor series of `H(g_t)/H(ḡ) = ratio(t)^{4/n}·σ₂(g_t)/σ₂(ḡ)`, where
    /// `H(g) = Vol(g)^{4/n} ∫ σ₂(g) dv_ḡ` integrates against the background
    /// measure, so for this family `∫σ₂(g_t)dv_ḡ = σ₂(g_t)·Vol(ḡ)`.
    pub fn h_functional_series(&self, order: usize) -> Result<Series, GeometryError> {
        let s2 = self.sigma2()?;
        let s0 = s2.at_zero()?;
        if s0.is_zero() {
            return Err(GeometryError::DegenerateSigma2);
        }
        let vol_part = self.volume_power_series(order)?;
        let sigma_part = Series::expand(&s2, order)?.scale(&s0.recip()?);
        Ok(vol_part.mul(&sigma_part))
    }

    /// Unnormalized series of `Vol(g_t)^{4/n}·σ₂(g_t)/Vol(ḡ)^{4/n}`, used
    /// when `σ₂(ḡ) = 0`.
    pub fn h_functional_series_unnormalized(&self, order: usize) -> Result<Series, GeometryError> {
        let vol_part = self.volume_power_series(order)?;
        Ok(vol_part.mul(&Series::expand(&self.sigma2()?, order)?))
    }

    /// Series of `(Vol(g_t)/Vol(ḡ))^{4/n} = Π (a_i(t)/a_i(0))^{2m_i/n}`;
    /// unlike [`Self::volume`] this needs no exact square roots.
    fn volume_power_series(&self, order: usize) -> Result<Series, GeometryError> {
        let n = self.dim() as i64;
        let mut out = Series::one(order);
        for f in &self.factors {
            let rel = f.scale.scale(&f.scale.at_zero()?.recip()?);
            let q = Rational::frac(2 * f.dim as i64, n);
            out = out.mul(&Series::expand(&rel, order)?.pow(&q, order)?);
        }
        Ok(out)
    }

    pub fn einstein_check(&self) -> Result<EinsteinData, GeometryError> {
        let n = self.dim();
        let multiples: Vec<Rational> = self
            .factors
            .iter()
            .map(|f| Ok(Rational::from_int(f.dim as i64 - 1) * f.scale.at_zero()?.recip()?))
            .collect::<Result<_, GeometryError>>()?;
        let is_einstein = multiples.windows(2).all(|w| w[0] == w[1]);
        let lambda = is_einstein.then(|| &multiples[0] / Rational::from_int(n as i64 - 1));
        Ok(EinsteinData { n, lambda, is_einstein, ricci_multiples: multiples })
    }

    /// Velocity `d/dt g_t |₀` as a parallel tensor in unit-factor coefficients.
    pub fn velocity(&self) -> Result<ParallelTensor, GeometryError> {
        Ok(ParallelTensor {
            coeffs: self
                .factors
                .iter()
                .map(|f| f.scale.derivative().at_zero())
                .collect::<Result<_, _>>()?,
        })
    }

    /// `Vol(ḡ)^{-4/n}·d²/dt² H(g_t)|₀`, exactly, from the series route.
    pub fn h_second_derivative_normalized(&self) -> Result<PiScalar, GeometryError> {
        let series = self.h_functional_series(2)?;
        let s0 = self.sigma2()?.at_zero()?;
        let (_, base) = self.background()?.volume()?;
        // H(ḡ)·Vol(ḡ)^{-4/n} = σ₂(ḡ)·Vol(ḡ)
        Ok(base.scale(&(Rational::from_int(2) * series.coeff(2) * s0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    #[test]
    fn counterexample_invariants() {
        let fam = SphereProductFamily::counterexample();
        let (rs, ric2) = fam.ricci_invariants().unwrap();
        assert_eq!(rs, RatFun::poly(Poly::from_ints(&[8, 0, 16])));
        // 2(1+4t²)²·2 + 2(1+3t)² + 2(1−3t)²
        let a = Poly::from_ints(&[1, 0, 4]);
        let b = Poly::from_ints(&[1, 3]);
        let c = Poly::from_ints(&[1, -3]);
        let expect = &(&(&a * &a).scale(&r(4, 1)) + &(&b * &b).scale(&r(2, 1))) + &(&c * &c).scale(&r(2, 1));
        assert_eq!(ric2, RatFun::poly(expect));
    }

    #[test]
    fn counterexample_sigma2_and_volume() {
        let fam = SphereProductFamily::counterexample();
        let s = fam.sigma2().unwrap();
        assert_eq!(s, RatFun::poly(Poly::new(vec![r(36, 7), r(0, 1), r(18, 7), r(0, 1), r(32, 7)])));
        let (ratio, base) = fam.volume().unwrap();
        let den = Poly::from_ints(&[1, 0, -1, 0, -56, 0, -144]);
        assert_eq!(ratio, RatFun::new(Poly::one(), den).unwrap());
        assert_eq!(base, PiScalar::monomial(r(256, 1), 4));
    }

    #[test]
    fn round_sphere_constants() {
        for n in 3..=6usize {
            let fam = SphereProductFamily::unit_product(&[n]).unwrap();
            let (rs, ric2) = fam.ricci_invariants().unwrap();
            let ni = n as i64;
            assert_eq!(rs, RatFun::constant(r(ni * (ni - 1), 1)));
            assert_eq!(ric2, RatFun::constant(r(ni * (ni - 1) * (ni - 1), 1)));
        }
        let s2s2 = SphereProductFamily::unit_product(&[2, 2]).unwrap();
        let (rs, ric2) = s2s2.ricci_invariants().unwrap();
        assert_eq!(rs, RatFun::constant(r(4, 1)));
        assert_eq!(ric2, RatFun::constant(r(4, 1)));
    }

    #[test]
    fn sigma2_of_round_s4_two_routes() {
        let fam = SphereProductFamily::unit_product(&[4]).unwrap();
        let direct = fam.sigma2().unwrap().at_zero().unwrap();
        let closed = fam.einstein_check().unwrap().sigma2_closed_form().unwrap();
        assert_eq!(direct, r(6, 1));
        assert_eq!(closed, r(6, 1));
    }

    #[test]
    fn odd_dimension_volume() {
        let sq = RatFun::poly(Poly::from_ints(&[1, 2, 1]));
        let fam = SphereProductFamily::new(vec![SphereFactor::new(3, sq)]).unwrap();
        let (ratio, base) = fam.volume().unwrap();
        assert_eq!(ratio, RatFun::poly(Poly::from_ints(&[1, 1]).pow(3)));
        assert_eq!(base, PiScalar::monomial(r(2, 1), 2));

        let bad = SphereProductFamily::new(vec![
            SphereFactor::unit(2),
            SphereFactor::new(3, RatFun::poly(Poly::from_ints(&[1, 1]))),
        ])
        .unwrap();
        assert!(matches!(bad.volume(), Err(GeometryError::OddDimensionNonSquare { index: 1, .. })));
        // the H series only needs rational powers of each scale
        let series = bad.h_functional_series(4).unwrap();
        let t = 1e-3;
        let s2 = bad.sigma2().unwrap();
        let direct = bad.volume_ratio_f64(t).powf(4.0 / 5.0) * s2.eval_f64(t) / s2.eval_f64(0.0);
        let summed: f64 = (0..=4).map(|k| series.coeff(k).to_f64() * t.powi(k as i32)).sum();
        assert!((summed - direct).abs() < 1e-13, "{summed} vs {direct}");
    }

    #[test]
    fn odd_dimension_linear_path_is_critical() {
        let bg = SphereProductFamily::unit_product(&[3, 3]).unwrap();
        let path = SphereProductFamily::linear_path(&bg, &ParallelTensor::from_ints(&[1, -1])).unwrap();
        assert!(path.h_functional_series(2).unwrap().coeff(1).is_zero());
        assert!(path.h_second_derivative_normalized().is_ok());
    }

    #[test]
    fn constant_scale_volume() {
        let c = r(3, 1);
        let fam = SphereProductFamily::new(vec![SphereFactor::new(2, RatFun::constant(c))]).unwrap();
        let (ratio, base) = fam.volume().unwrap();
        assert_eq!(ratio, RatFun::one());
        assert_eq!(base, PiScalar::monomial(r(12, 1), 1));
    }

    #[test]
    fn h_series_examples() {
        let fam = SphereProductFamily::counterexample();
        assert_eq!(fam.h_functional_series(2).unwrap(), Series::from_ints(&[1, 0, 1]));

        let scaled = SphereProductFamily::new(
            [2usize, 3]
                .iter()
                .map(|&d| SphereFactor::new(d, RatFun::poly(Poly::from_ints(&[1, 1])).scale(&r(d as i64, 1))))
                .collect(),
        );
        // g_t = (1+t)·g_0 with an odd factor: no exact volume, but H is constant
        let scaled = scaled.unwrap();
        assert!(scaled.volume().is_err());
        assert_eq!(scaled.h_functional_series(3).unwrap(), Series::one(3));

        let uniform = SphereProductFamily::new(vec![
            SphereFactor::new(2, RatFun::poly(Poly::from_ints(&[1, 1]))),
            SphereFactor::new(4, RatFun::poly(Poly::from_ints(&[3, 3]))),
        ])
        .unwrap();
        assert_eq!(uniform.h_functional_series(5).unwrap(), Series::one(5));

        let sphere = SphereProductFamily::unit_product(&[5]).unwrap();
        assert_eq!(sphere.h_functional_series(0).unwrap(), Series::one(0));
    }

    #[test]
    fn h_series_needs_nonzero_sigma2() {
        let s2 = SphereProductFamily::unit_product(&[2]).unwrap();
        assert_eq!(s2.h_functional_series(2), Err(GeometryError::DegenerateSigma2));
        assert!(s2.h_functional_series_unnormalized(2).unwrap().coeffs().iter().all(Rational::is_zero));
    }

    #[test]
    fn einstein_checks() {
        let e = SphereProductFamily::unit_product(&[2, 2, 2, 2]).unwrap().einstein_check().unwrap();
        assert!(e.is_einstein);
        assert_eq!(e.n, 8);
        assert_eq!(e.lambda, Some(r(1, 7)));
        assert_eq!(e.sigma2_closed_form(), Some(r(36, 7)));

        let mixed = SphereProductFamily::unit_product(&[2, 4]).unwrap().einstein_check().unwrap();
        assert!(!mixed.is_einstein);
        assert_eq!(mixed.ricci_multiples, vec![r(1, 1), r(3, 1)]);

        // Sⁿ(r) with r = 3: scale r² = 9, λ = 1/r².
        let big = SphereProductFamily::new(vec![SphereFactor::new(3, RatFun::constant(r(9, 1)))]).unwrap();
        assert_eq!(big.einstein_check().unwrap().lambda, Some(r(1, 9)));
    }

    #[test]
    fn counterexample_velocity() {
        let v = SphereProductFamily::counterexample().velocity().unwrap();
        assert_eq!(v.coeffs, vec![r(0, 1), r(0, 1), r(-3, 1), r(3, 1)]);
    }

    #[test]
    fn positivity_on_interval() {
        let fam = SphereProductFamily::counterexample();
        assert!(fam.check_positive_at(0.1).is_ok());
        assert!(fam.check_positive_at(0.5).is_err());
    }
}
