//! Parallel symmetric 2-tensors `h = Σ c_i g_i` on a sphere product, the
//! Einstein operator on them, and the strict-stability probe.
//!
//! Parallel tensors have `Δh = 0`, so `Δ_E h = 2 Rm·h`, and the curvature
//! term acts factorwise: `(Rm·h)|_i = κ_i (m_i − 1) c_i g_i` with
//! `κ_i = 1/a_i(0)`. The inner product is `⟨h, k⟩ = Σ c_i d_i m_i κ_i²`.
//!
//! Strict stability means `Δ_E` is negative on nonzero TT tensors. A
//! nonnegative eigenvalue along a parallel TT direction therefore rules it
//! out; all-negative parallel eigenvalues say nothing about the remaining
//! TT spectrum.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{GeometryError, SphereProductFamily};
use crate::exact::{PiScalar, Rational};

/// Coefficients `c_i` of `Σ c_i g_i`, with `g_i` the unit metric of factor `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelTensor {
    pub coeffs: Vec<Rational>,
}

impl ParallelTensor {
    pub fn new(coeffs: Vec<Rational>) -> Self {
        ParallelTensor { coeffs }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        ParallelTensor::new(c.iter().map(|&v| Rational::from_int(v)).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Rational::is_zero)
    }

    pub fn scale(&self, s: &Rational) -> Self {
        ParallelTensor::new(self.coeffs.iter().map(|c| c * s).collect())
    }
}

/// A nonzero parallel tensor that is trace-free against the `t = 0` member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelTTTensor(ParallelTensor);

impl ParallelTTTensor {
    pub fn new(family: &SphereProductFamily, h: ParallelTensor) -> Result<Self, GeometryError> {
        let geo = FactorGeometry::of(family)?;
        if h.coeffs.len() != geo.m.len() {
            return Err(GeometryError::Arity { expected: geo.m.len(), got: h.coeffs.len() });
        }
        if h.is_zero() {
            return Err(GeometryError::ZeroTensor);
        }
        let tr = geo.trace(&h.coeffs);
        if !tr.is_zero() {
            return Err(GeometryError::NotTraceFree(tr.to_string()));
        }
        Ok(ParallelTTTensor(h))
    }

    pub fn tensor(&self) -> &ParallelTensor {
        &self.0
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0.coeffs
    }
}

/// Eigenvalue in floating point plus its exact value when it is rational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub approx: f64,
    pub exact: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EinsteinOperatorResult {
    /// `Δ_E h` in unit-factor coefficients.
    pub image: ParallelTensor,
    /// Spectrum of `Δ_E` compressed to the parallel TT space, ascending.
    pub eigenvalues: Vec<Eigenvalue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityVerdict {
    /// Every parallel TT eigenvalue is negative (necessary condition only).
    StrictlyStableOnProbe,
    /// Some parallel TT direction has `Δ_E`-eigenvalue ≥ 0.
    Unstable,
    /// No parallel TT directions exist (single factor).
    Inconclusive,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::StrictlyStableOnProbe => "strictly-stable-on-probe",
            StabilityVerdict::Unstable => "unstable",
            StabilityVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StabilityReport {
    pub verdict: StabilityVerdict,
    pub eigenvalues: Vec<Eigenvalue>,
    pub n: usize,
    pub lambda: Rational,
}

struct FactorGeometry {
    m: Vec<Rational>,
    kappa: Vec<Rational>,
    a0: Vec<Rational>,
}

impl FactorGeometry {
    fn of(family: &SphereProductFamily) -> Result<Self, GeometryError> {
        let a0 = family.scales_at_zero()?;
        let kappa = a0.iter().map(|a| a.recip()).collect::<Result<Vec<_>, _>>()?;
        let m = family.factors().iter().map(|f| Rational::from_int(f.dim as i64)).collect();
        Ok(FactorGeometry { m, kappa, a0 })
    }

    fn trace(&self, c: &[Rational]) -> Rational {
        c.iter().zip(&self.m).zip(&self.kappa).fold(Rational::zero(), |acc, ((c, m), k)| acc + c * m * k)
    }

    fn inner(&self, c: &[Rational], d: &[Rational]) -> Rational {
        (0..c.len()).fold(Rational::zero(), |acc, i| {
            acc + &c[i] * &d[i] * &self.m[i] * &self.kappa[i] * &self.kappa[i]
        })
    }

    /// Diagonal action of `Δ_E = 2 Rm·` on coefficient `i`.
    fn operator_diag(&self) -> Vec<Rational> {
        self.m
            .iter()
            .zip(&self.kappa)
            .map(|(m, k)| Rational::from_int(2) * k * (m - Rational::one()))
            .collect()
    }

    /// Orthogonal (unnormalized) basis of the parallel TT space from the
    /// differences of unit-trace factor directions.
    fn tt_basis(&self) -> Vec<Vec<Rational>> {
        let k = self.m.len();
        let unit_trace = |i: usize| -> Vec<Rational> {
            let mut v = vec![Rational::zero(); k];
            v[i] = &self.a0[i] / &self.m[i];
            v
        };
        let mut basis: Vec<Vec<Rational>> = Vec::new();
        for i in 0..k.saturating_sub(1) {
            let (ei, ej) = (unit_trace(i), unit_trace(i + 1));
            let mut v: Vec<Rational> = ei.iter().zip(&ej).map(|(a, b)| a - b).collect();
            for b in &basis {
                let coef = self.inner(&v, b) / self.inner(b, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= &(&coef * bi);
                }
            }
            basis.push(v);
        }
        basis
    }
}

/// Spectrum of `Δ_E` restricted (by orthogonal compression) to the parallel
/// TT space, ascending.
pub fn parallel_tt_spectrum(family: &SphereProductFamily) -> Result<Vec<Eigenvalue>, GeometryError> {
    let geo = FactorGeometry::of(family)?;
    let basis = geo.tt_basis();
    let dim = basis.len();
    if dim == 0 {
        return Ok(Vec::new());
    }
    let diag = geo.operator_diag();
    let apply = |v: &[Rational]| -> Vec<Rational> { v.iter().zip(&diag).map(|(c, d)| c * d).collect() };
    let gram: Vec<Rational> = basis.iter().map(|b| geo.inner(b, b)).collect();
    // Exact compressed operator in the orthogonal basis: M = G^{-1} K.
    let mut m_exact = vec![vec![Rational::zero(); dim]; dim];
    let mut sym = DMatrix::<f64>::zeros(dim, dim);
    for a in 0..dim {
        let image = apply(&basis[a]);
        for b in 0..dim {
            let k_ab = geo.inner(&image, &basis[b]);
            m_exact[b][a] = &k_ab / &gram[b];
            sym[(a, b)] = k_ab.to_f64() / (gram[a].to_f64() * gram[b].to_f64()).sqrt();
        }
    }
    let charpoly = characteristic_polynomial(&m_exact);
    let mut values: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    Ok(values
        .into_iter()
        .map(|approx| {
            let exact = Rational::approximate(approx, 1_000_000).filter(|q| eval_poly(&charpoly, q).is_zero());
            let approx = exact.as_ref().map(Rational::to_f64).unwrap_or(approx);
            Eigenvalue { approx, exact }
        })
        .collect())
}

/// `Δ_E h` for a parallel TT tensor plus the compressed spectrum.
pub fn einstein_operator_parallel(
    family: &SphereProductFamily,
    h: &ParallelTTTensor,
) -> Result<EinsteinOperatorResult, GeometryError> {
    let geo = FactorGeometry::of(family)?;
    let diag = geo.operator_diag();
    let image = ParallelTensor::new(h.coeffs().iter().zip(&diag).map(|(c, d)| c * d).collect());
    Ok(EinsteinOperatorResult { image, eigenvalues: parallel_tt_spectrum(family)? })
}

/// Probe strict stability of an Einstein sphere product along parallel TT
/// directions.
pub fn stability_probe(family: &SphereProductFamily) -> Result<StabilityReport, GeometryError> {
    let background = family.background()?;
    let ed = background.einstein_check()?;
    let lambda = ed.lambda_or_err()?.clone();
    let eigenvalues = parallel_tt_spectrum(&background)?;
    let verdict = if eigenvalues.is_empty() {
        StabilityVerdict::Inconclusive
    } else if eigenvalues.iter().any(|e| match &e.exact {
        Some(q) => !q.is_negative(),
        None => e.approx >= 0.0,
    }) {
        StabilityVerdict::Unstable
    } else {
        StabilityVerdict::StrictlyStableOnProbe
    };
    Ok(StabilityReport { verdict, eigenvalues, n: ed.n, lambda })
}

/// `Vol(ḡ)^{-4/n} D²H(h, h)` for a parallel TT tensor on an Einstein
/// background:
/// `−¼ ∫ Δ_E(Δ_E − (n−2)²λ/2) h·h dv_ḡ`, exactly.
pub fn second_variation_closed_form(
    family: &SphereProductFamily,
    h: &ParallelTTTensor,
) -> Result<PiScalar, GeometryError> {
    let background = family.background()?;
    let ed = background.einstein_check()?;
    let lambda = ed.lambda_or_err()?;
    let geo = FactorGeometry::of(&background)?;
    let diag = geo.operator_diag();
    let n = ed.n as i64;
    let shift = Rational::frac((n - 2) * (n - 2), 2) * lambda;
    let mut total = Rational::zero();
    for (i, c) in h.coeffs().iter().enumerate() {
        let norm_sq = c * c * &geo.m[i] * &geo.kappa[i] * &geo.kappa[i];
        total += &(&diag[i] * (&diag[i] - &shift) * norm_sq);
    }
    let (_, vol) = background.volume()?;
    Ok(vol.scale(&(total * Rational::frac(-1, 4))))
}

/// Coefficients (constant term first) of `det(x I − M)` via Faddeev–LeVerrier.
fn characteristic_polynomial(m: &[Vec<Rational>]) -> Vec<Rational> {
    let n = m.len();
    let mut coeffs = vec![Rational::zero(); n + 1];
    coeffs[n] = Rational::one();
    let identity = |i: usize, j: usize| if i == j { Rational::one() } else { Rational::zero() };
    let mut mk: Vec<Vec<Rational>> = vec![vec![Rational::zero(); n]; n];
    for k in 1..=n {
        // M_k = M·M_{k−1} + c_{n−k+1} I
        let prev = mk.clone();
        for i in 0..n {
            for j in 0..n {
                let mut s = Rational::zero();
                for l in 0..n {
                    s += &(&m[i][l] * &prev[l][j]);
                }
                mk[i][j] = s + &coeffs[n - k + 1] * identity(i, j);
            }
        }
        let mut tr = Rational::zero();
        for i in 0..n {
            for l in 0..n {
                tr += &(&m[i][l] * &mk[l][i]);
            }
        }
        coeffs[n - k] = -tr / Rational::from_int(k as i64);
    }
    coeffs
}

fn eval_poly(coeffs: &[Rational], x: &Rational) -> Rational {
    coeffs.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::frac(n, d)
    }

    #[test]
    fn counterexample_velocity_is_eigen_two() {
        let fam = SphereProductFamily::unit_product(&[2, 2, 2, 2]).unwrap();
        let h = ParallelTTTensor::new(&fam, ParallelTensor::from_ints(&[0, 0, -3, 3])).unwrap();
        let res = einstein_operator_parallel(&fam, &h).unwrap();
        assert_eq!(res.image, ParallelTensor::from_ints(&[0, 0, -6, 6]));
        assert_eq!(res.eigenvalues.len(), 3);
        assert!(res.eigenvalues.iter().all(|e| e.exact == Some(r(2, 1))));
    }

    #[test]
    fn s2xs2_probe() {
        let fam = SphereProductFamily::unit_product(&[2, 2]).unwrap();
        let h = ParallelTTTensor::new(&fam, ParallelTensor::from_ints(&[1, -1])).unwrap();
        let res = einstein_operator_parallel(&fam, &h).unwrap();
        assert_eq!(res.image, ParallelTensor::from_ints(&[2, -2]));
        let probe = stability_probe(&fam).unwrap();
        assert_eq!(probe.verdict, StabilityVerdict::Unstable);
        assert_eq!(probe.eigenvalues[0].exact, Some(r(2, 1)));
    }

    #[test]
    fn rejects_bad_tensors() {
        let fam = SphereProductFamily::unit_product(&[2, 2]).unwrap();
        assert_eq!(
            ParallelTTTensor::new(&fam, ParallelTensor::from_ints(&[0, 0])),
            Err(GeometryError::ZeroTensor)
        );
        assert!(matches!(
            ParallelTTTensor::new(&fam, ParallelTensor::from_ints(&[1, 1])),
            Err(GeometryError::NotTraceFree(_))
        ));
        assert!(matches!(
            ParallelTTTensor::new(&fam, ParallelTensor::from_ints(&[1, -1, 0])),
            Err(GeometryError::Arity { .. })
        ));
    }

    #[test]
    fn single_sphere_probe_is_vacuous() {
        let fam = SphereProductFamily::unit_product(&[4]).unwrap();
        let probe = stability_probe(&fam).unwrap();
        assert_eq!(probe.verdict, StabilityVerdict::Inconclusive);
        assert!(probe.eigenvalues.is_empty());
    }

    #[test]
    fn probe_needs_einstein_background() {
        let fam = SphereProductFamily::unit_product(&[2, 4]).unwrap();
        assert!(matches!(stability_probe(&fam), Err(GeometryError::NotEinstein(_))));
        // The compressed operator itself is still defined.
        let spec = parallel_tt_spectrum(&fam).unwrap();
        assert_eq!(spec.len(), 1);
    }

    #[test]
    fn non_einstein_spectrum_is_compressed() {
        // S²×S⁴ unit: D = diag(2, 6), inner weights m κ² = (2, 4), TT direction
        // c ∝ (1/2, −1/4). Rayleigh quotient (2·¼·2 + 6·(1/16)·4)/(¼·2 + (1/16)·4) = 10/3.
        let fam = SphereProductFamily::unit_product(&[2, 4]).unwrap();
        let spec = parallel_tt_spectrum(&fam).unwrap();
        assert_eq!(spec[0].exact, Some(r(10, 3)));
    }

    #[test]
    fn second_variation_examples() {
        let fam = SphereProductFamily::unit_product(&[2, 2, 2, 2]).unwrap();
        let h = ParallelTTTensor::new(&fam, ParallelTensor::from_ints(&[0, 0, -3, 3])).unwrap();
        let (_, vol) = fam.volume().unwrap();
        assert_eq!(second_variation_closed_form(&fam, &h).unwrap(), vol.scale(&r(72, 7)));

        let fam2 = SphereProductFamily::unit_product(&[2, 2]).unwrap();
        let h2 = ParallelTTTensor::new(&fam2, ParallelTensor::from_ints(&[1, -1])).unwrap();
        let (_, vol2) = fam2.volume().unwrap();
        assert_eq!(second_variation_closed_form(&fam2, &h2).unwrap(), vol2.scale(&r(-8, 3)));

        let mixed = SphereProductFamily::unit_product(&[2, 4]).unwrap();
        let hm = ParallelTTTensor::new(&mixed, ParallelTensor::new(vec![r(1, 2), r(-1, 4)])).unwrap();
        assert!(matches!(second_variation_closed_form(&mixed, &hm), Err(GeometryError::NotEinstein(_))));
    }

    #[test]
    fn series_and_closed_form_agree_exactly() {
        let fam = SphereProductFamily::counterexample();
        let h = ParallelTTTensor::new(&fam.background().unwrap(), fam.velocity().unwrap()).unwrap();
        let closed = second_variation_closed_form(&fam, &h).unwrap();
        let series = fam.h_second_derivative_normalized().unwrap();
        assert_eq!(closed, series);
        let (_, vol) = fam.volume().unwrap();
        assert_eq!(series, vol.scale(&r(72, 7)));
    }

    #[test]
    fn charpoly_of_diagonal() {
        let m = vec![vec![r(2, 1), r(0, 1)], vec![r(0, 1), r(3, 1)]];
        // (x−2)(x−3) = 6 − 5x + x²
        assert_eq!(characteristic_polynomial(&m), vec![r(6, 1), r(-5, 1), r(1, 1)]);
    }
}
