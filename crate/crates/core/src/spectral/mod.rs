//! Laplace spectrum of round spheres: zonal harmonics and the
//! Lichnerowicz–Obata eigenvalue check.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::chart::{ScalarField, SphereChart};
use crate::exact::Rational;
use crate::quadrature::{mean_and_energy, QuadratureError, QuadratureGrid};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("axis must be a nonzero vector in R^{expected}, got length {got}")]
    BadAxis { expected: usize, got: usize },
    #[error("cannot parse harmonic selector {0:?}")]
    Selector(String),
}

/// Laplace eigenvalue magnitude `k(k+n−1)/r²` on `S^n(r)`.
pub fn eigenvalue(k: u32, n: usize, r: &Rational) -> Rational {
    let k = i64::from(k);
    Rational::from_int(k * (k + n as i64 - 1)) / (r * r)
}

/// Gegenbauer polynomial `C_k^α(x)` by the three-term recurrence.
pub fn gegenbauer(k: u32, alpha: f64, x: f64) -> f64 {
    let (mut c0, mut c1) = (1.0, 2.0 * alpha * x);
    if k == 0 {
        return c0;
    }
    for m in 1..k {
        let m = m as f64;
        let c2 = (2.0 * x * (m + alpha) * c1 - (m + 2.0 * alpha - 1.0) * c0) / (m + 1.0);
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Zonal harmonic `C_k^{(n−1)/2}(⟨x, axis⟩ / r)` of degree `k` on `S^n(r)`,
/// normalized so that its value at the pole is `C_k(1)`. For `n = 2` this is
/// the Legendre polynomial `P_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZonalHarmonic {
    pub k: u32,
    pub n: usize,
    pub r: f64,
    /// Unit vector in `ℝ^{n+1}`; `None` means the chart's polar axis.
    pub axis: Option<Vec<f64>>,
}

impl ZonalHarmonic {
    pub fn polar(k: u32, n: usize, r: f64) -> Self {
        ZonalHarmonic { k, n, r, axis: None }
    }

    pub fn with_axis(k: u32, n: usize, r: f64, axis: &[f64]) -> Result<Self, SpectralError> {
        let norm = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
        if axis.len() != n + 1 || !(norm > 0.0) {
            return Err(SpectralError::BadAxis { expected: n + 1, got: axis.len() });
        }
        Ok(ZonalHarmonic { k, n, r, axis: Some(axis.iter().map(|v| v / norm).collect()) })
    }

    pub fn eigenvalue(&self) -> f64 {
        let k = self.k as f64;
        k * (k + self.n as f64 - 1.0) / (self.r * self.r)
    }

    /// Value at the point with cosine `x` to the axis.
    pub fn profile(&self, x: f64) -> f64 {
        gegenbauer(self.k, (self.n as f64 - 1.0) / 2.0, x)
    }

    pub fn value_at_chart(&self, p: &[f64]) -> f64 {
        match &self.axis {
            None => self.profile(p[0].cos()),
            Some(a) => {
                let x = SphereChart::new(self.n, self.r).embed(p);
                let c: f64 = x.iter().zip(a).map(|(x, a)| x * a).sum::<f64>() / self.r;
                self.profile(c)
            }
        }
    }

    /// Parses `harmonic:k=2` or `harmonic:k=1,axis=polar|x0,x1,…`.
    pub fn parse(selector: &str, n: usize, r: f64) -> Result<Self, SpectralError> {
        let err = || SpectralError::Selector(selector.to_string());
        let body = selector.strip_prefix("harmonic:").ok_or_else(err)?;
        let mut k = None;
        let mut axis: Option<Vec<f64>> = None;
        let mut parts = body.split(',').peekable();
        while let Some(part) = parts.next() {
            let (key, val) = part.split_once('=').ok_or_else(err)?;
            match key.trim() {
                "k" => k = Some(val.trim().parse::<u32>().map_err(|_| err())?),
                "axis" if val.trim() == "polar" => axis = None,
                "axis" => {
                    let mut comps = vec![val.trim().parse::<f64>().map_err(|_| err())?];
                    while let Some(next) = parts.peek() {
                        match next.trim().parse::<f64>() {
                            Ok(v) => {
                                comps.push(v);
                                parts.next();
                            }
                            Err(_) => break,
                        }
                    }
                    axis = Some(comps);
                }
                _ => return Err(err()),
            }
        }
        let k = k.ok_or_else(err)?;
        match axis {
            None => Ok(ZonalHarmonic::polar(k, n, r)),
            Some(a) => ZonalHarmonic::with_axis(k, n, r, &a),
        }
    }
}

impl ScalarField for ZonalHarmonic {
    fn value(&self, p: &[f64]) -> f64 {
        self.value_at_chart(p)
    }
}

/// `c₀ + Σ cᵢ Zᵢ` for zonal harmonics `Zᵢ` about assorted axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicCombination {
    pub constant: f64,
    pub terms: Vec<(f64, ZonalHarmonic)>,
}

impl HarmonicCombination {
    /// Random combination of degrees `0..=max_degree`, deterministic in `seed`.
    pub fn random(n: usize, r: f64, max_degree: u32, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        let constant = unit();
        let count = 1 + ((unit() + 1.0) * 1.5) as usize;
        let terms = (0..count)
            .map(|_| {
                let k = 1 + (((unit() + 1.0) / 2.0 * max_degree as f64) as u32).min(max_degree - 1);
                let axis: Vec<f64> = (0..=n).map(|_| unit()).collect();
                let z = ZonalHarmonic::with_axis(k, n, r, &axis)
                    .unwrap_or_else(|_| ZonalHarmonic::polar(k, n, r));
                (unit(), z)
            })
            .collect();
        HarmonicCombination { constant, terms }
    }

    /// All terms have degree `k`, so the field minus its constant lies in one eigenspace.
    pub fn single_degree(&self) -> Option<u32> {
        let k = self.terms.first()?.1.k;
        self.terms.iter().all(|t| t.1.k == k).then_some(k)
    }
}

impl ScalarField for HarmonicCombination {
    fn value(&self, p: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(c, z)| c * z.value_at_chart(p)).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ObataReport {
    pub mean: f64,
    pub grad_energy: f64,
    pub centered_l2: f64,
    pub deficit: f64,
    /// Relative L² distance of `u − ū` from the degree-1 span.
    pub degree_one_residual: f64,
    pub is_equality_case: bool,
    pub tolerance: f64,
}

/// Obata deficit of `u` on `S^n(r)` with equality classification by
/// projection onto the ambient linear functions.
pub fn obata_report(
    u: &dyn ScalarField,
    n: usize,
    r: f64,
    grid: &QuadratureGrid,
    step: f64,
    tolerance: f64,
) -> Result<ObataReport, SpectralError> {
    let chart = SphereChart::new(n, r);
    let lambda = 1.0 / (r * r);
    let me = mean_and_energy(&chart, u, grid, lambda, step)?;
    let m = n + 1;
    let values = grid.map(|p| -> Result<(f64, Vec<f64>), SpectralError> { Ok((u.value(p) - me.mean, chart.embed(p))) })?;
    // Gram system of the ambient coordinates restricted to the sphere
    let mut gram = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut rhs = nalgebra::DVector::<f64>::zeros(m);
    for a in 0..m {
        let col: Vec<f64> = values.iter().map(|(f, x)| f * x[a]).collect();
        rhs[a] = grid.weighted_sum(&col);
        for b in a..m {
            let col: Vec<f64> = values.iter().map(|(_, x)| x[a] * x[b]).collect();
            let v = grid.weighted_sum(&col);
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let coef = gram.clone().cholesky().map(|c| c.solve(&rhs)).unwrap_or_else(|| nalgebra::DVector::zeros(m));
    let residual: Vec<f64> = values
        .iter()
        .map(|(f, x)| {
            let proj: f64 = x.iter().zip(coef.iter()).map(|(x, c)| x * c).sum();
            (f - proj) * (f - proj)
        })
        .collect();
    let res_l2 = grid.weighted_sum(&residual).max(0.0);
    let scale = me.centered_l2.max(0.0);
    let degree_one_residual = if scale <= 1e-24 { 0.0 } else { (res_l2 / scale).sqrt() };
    let is_equality_case = me.obata_deficit.abs() < tolerance.max(tolerance * scale) && degree_one_residual < 1e-6;
    Ok(ObataReport {
        mean: me.mean,
        grad_energy: me.grad_energy,
        centered_l2: me.centered_l2,
        deficit: me.obata_deficit,
        degree_one_residual,
        is_equality_case,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{scalar_field_calculus, MetricChart, DEFAULT_STEP};
    use crate::quadrature::Manifold;
    use std::f64::consts::PI;

    #[test]
    fn eigenvalues() {
        let one = Rational::one();
        assert_eq!(eigenvalue(1, 3, &one), Rational::from_int(3));
        assert_eq!(eigenvalue(0, 5, &one), Rational::zero());
        assert_eq!(eigenvalue(2, 2, &one), Rational::from_int(6));
        assert_eq!(eigenvalue(1, 2, &Rational::frac(1, 2)), Rational::from_int(8));
    }

    #[test]
    fn legendre_case() {
        let z = ZonalHarmonic::polar(2, 2, 1.0);
        let p = [0.7, 1.0];
        assert!((z.value(&p) - (3.0 * 0.7f64.cos().powi(2) - 1.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_residual_on_nodes() {
        for (n, r) in [(2, 1.0), (3, 1.0), (3, 2.0), (4, 1.0)] {
            let grid = Manifold::Sphere { n, r }.grid(6).unwrap();
            let chart = SphereChart::new(n, r);
            for k in 0..=3 {
                let axis: Vec<f64> = (0..=n).map(|i| 1.0 + i as f64).collect();
                let z = ZonalHarmonic::with_axis(k, n, r, &axis).unwrap();
                let mut weighted = 0.0;
                for i in 0..grid.len() {
                    let p = grid.node(i);
                    let c = scalar_field_calculus(&chart, &z, p, 4e-3).unwrap();
                    let err = (c.laplacian + z.eigenvalue() * c.value).abs();
                    weighted += grid.weights[i] * err;
                    // roundoff grows like g^{φφ} next to the coordinate poles
                    let (_, cond) = chart.metric_at(p).inverse_with_cond().unwrap();
                    if cond <= 100.0 {
                        assert!(err < 1e-7, "n={n} k={k} at {p:?}: {err:e}");
                    }
                }
                assert!(weighted / grid.total_weight() < 1e-8);
            }
        }
    }

    #[test]
    fn orthogonality() {
        let grid = Manifold::sphere(3).grid(16).unwrap();
        let zs: Vec<_> = (0..4).map(|k| ZonalHarmonic::polar(k, 3, 1.0)).collect();
        for a in 0..4 {
            for b in a + 1..4 {
                let ip = grid.integrate(|p| -> Result<f64, ()> { Ok(zs[a].value(p) * zs[b].value(p)) }).unwrap();
                assert!(ip.abs() < 1e-9, "⟨{a},{b}⟩ = {ip}");
            }
        }
    }

    #[test]
    fn obata_cases() {
        let grid = Manifold::sphere(2).grid(24).unwrap();
        let z1 = ZonalHarmonic::polar(1, 2, 1.0);
        let rep = obata_report(&z1, 2, 1.0, &grid, DEFAULT_STEP, 1e-8).unwrap();
        assert!(rep.deficit.abs() < 1e-8 && rep.is_equality_case);
        assert!((rep.grad_energy - 8.0 * PI / 3.0).abs() < 1e-8);
        let c = |_: &[f64]| 2.5;
        assert!(obata_report(&c, 2, 1.0, &grid, DEFAULT_STEP, 1e-8).unwrap().is_equality_case);
        let g3 = Manifold::sphere(3).grid(16).unwrap();
        let z3 = ZonalHarmonic::polar(3, 3, 1.0);
        let rep = obata_report(&z3, 3, 1.0, &g3, DEFAULT_STEP, 1e-8).unwrap();
        assert!((rep.deficit - 12.0 * rep.centered_l2).abs() < 1e-7 * rep.centered_l2);
        assert!(rep.deficit > 0.0 && !rep.is_equality_case);
    }

    #[test]
    fn selector_parsing() {
        assert_eq!(ZonalHarmonic::parse("harmonic:k=2", 3, 1.0).unwrap(), ZonalHarmonic::polar(2, 3, 1.0));
        assert_eq!(ZonalHarmonic::parse("harmonic:k=1,axis=polar", 2, 1.0).unwrap().k, 1);
        let z = ZonalHarmonic::parse("harmonic:k=1,axis=0,0,2", 2, 1.0).unwrap();
        assert_eq!(z.axis, Some(vec![0.0, 0.0, 1.0]));
        assert!(ZonalHarmonic::parse("harmonic:q=1", 2, 1.0).is_err());
    }

    #[test]
    fn random_combinations_are_seeded() {
        let a = HarmonicCombination::random(3, 1.0, 3, 7);
        let b = HarmonicCombination::random(3, 1.0, 3, 7);
        assert_eq!(a, b);
        assert_ne!(a, HarmonicCombination::random(3, 1.0, 3, 8));
        assert!(a.terms.iter().all(|t| (1..=3).contains(&t.1.k)));
    }
}
