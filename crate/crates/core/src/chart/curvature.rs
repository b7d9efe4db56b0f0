use serde::Serialize;

use super::fd::{d1, d2};
use super::{check_point, invert, ChartError, Mat, MetricChart, ScalarField, SymTensorField};

/// Metric with its first and (optionally) second coordinate derivatives at a point.
#[derive(Debug, Clone)]
pub struct MetricJet {
    pub g: Mat,
    pub ginv: Mat,
    /// `dg[a] = ∂_a g`.
    pub dg: Vec<Mat>,
    /// `ddg[a * n + b] = ∂_a ∂_b g`; empty for first-order jets.
    pub ddg: Vec<Mat>,
}

pub fn metric_jet(
    chart: &dyn MetricChart,
    p: &[f64],
    step: f64,
    second: bool,
) -> Result<MetricJet, ChartError> {
    check_point(chart, p, 2.0 * step)?;
    let f = |q: &[f64]| chart.metric_at(q);
    let raw = tensor_jet(&f, p, step, second)?;
    let ginv = invert(&raw.h, p)?;
    Ok(MetricJet { g: raw.h, ginv, dg: raw.dh, ddg: raw.ddh })
}

/// Value and coordinate derivatives of a symmetric tensor field. The caller
/// is responsible for stencil margins (`2·step`).
#[derive(Debug, Clone)]
pub struct TensorJet {
    pub h: Mat,
    pub dh: Vec<Mat>,
    /// Empty unless second derivatives were requested.
    pub ddh: Vec<Mat>,
}

pub fn tensor_jet(
    field: &dyn SymTensorField,
    p: &[f64],
    step: f64,
    second: bool,
) -> Result<TensorJet, ChartError> {
    let n = p.len();
    let f = |q: &[f64]| -> Result<Mat, ChartError> { Ok(field.value(q)) };
    let h = field.value(p);
    let dh = (0..n).map(|a| d1(&f, p, a, step)).collect::<Result<Vec<_>, _>>()?;
    let mut ddh = Vec::new();
    if second {
        ddh = vec![Mat::zeros(n); n * n];
        for a in 0..n {
            for b in a..n {
                let v = d2(&f, p, a, b, step, &h)?;
                ddh[a * n + b] = v;
                ddh[b * n + a] = v;
            }
        }
    }
    Ok(TensorJet { h, dh, ddh })
}

impl MetricJet {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Jet of `g + t·h`. Differencing commutes with the linear combination,
    /// so curvature along a linear path is an exact function of `t` given
    /// the two jets.
    pub fn perturbed(&self, h: &TensorJet, t: f64, p: &[f64]) -> Result<MetricJet, ChartError> {
        let g = self.g + h.h.scale(t);
        let ginv = invert(&g, p)?;
        let comb = |a: &[Mat], b: &[Mat]| -> Vec<Mat> { a.iter().zip(b).map(|(x, y)| *x + y.scale(t)).collect() };
        let ddg = if self.ddg.is_empty() || h.ddh.is_empty() { Vec::new() } else { comb(&self.ddg, &h.ddh) };
        Ok(MetricJet { g, ginv, dg: comb(&self.dg, &h.dh), ddg })
    }

    /// Christoffel symbols, `gamma[(k * n + i) * n + j] = Γ^k_ij`.
    pub fn christoffel(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n * n];
        for i in 0..n {
            for j in i..n {
                for k in 0..n {
                    let mut s = 0.0;
                    for l in 0..n {
                        s += self.ginv[(k, l)]
                            * (self.dg[i][(j, l)] + self.dg[j][(i, l)] - self.dg[l][(i, j)]);
                    }
                    out[(k * n + i) * n + j] = 0.5 * s;
                    out[(k * n + j) * n + i] = 0.5 * s;
                }
            }
        }
        out
    }

    /// `∂_m Γ^k_ij`, indexed `[((m * n + k) * n + i) * n + j]`. Needs a second-order jet.
    fn christoffel_derivative(&self) -> Vec<f64> {
        let n = self.dim();
        let mut dginv = vec![Mat::zeros(n); n];
        for (m, out) in dginv.iter_mut().enumerate() {
            *out = (&(&self.ginv * &self.dg[m]) * &self.ginv).scale(-1.0);
        }
        let mut out = vec![0.0; n * n * n * n];
        for m in 0..n {
            let ddm = &self.ddg[m * n..(m + 1) * n];
            for k in 0..n {
                for i in 0..n {
                    for j in i..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            let first = self.dg[i][(j, l)] + self.dg[j][(i, l)] - self.dg[l][(i, j)];
                            let second = ddm[i][(j, l)] + ddm[j][(i, l)] - ddm[l][(i, j)];
                            s += dginv[m][(k, l)] * first + self.ginv[(k, l)] * second;
                        }
                        out[((m * n + k) * n + i) * n + j] = 0.5 * s;
                        out[((m * n + k) * n + j) * n + i] = 0.5 * s;
                    }
                }
            }
        }
        out
    }
}

/// All pointwise curvature data at one chart point.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CurvaturePack {
    pub dim: usize,
    pub metric: Mat,
    #[serde(skip)]
    pub inverse: Mat,
    /// `Γ^k_ij` at `[(k * n + i) * n + j]`.
    pub gamma: Vec<f64>,
    /// `R_ijkl` at `[((i * n + j) * n + k) * n + l]`.
    pub riemann: Vec<f64>,
    pub ricci: Mat,
    pub scalar: f64,
    pub schouten: Mat,
    /// `W_ijkl`, same layout as `riemann`; identically zero when n = 2.
    pub weyl: Vec<f64>,
    pub sigma2: f64,
}

/// Residuals of the algebraic Riemann symmetries.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SymmetryResiduals {
    pub antisym_first: f64,
    pub antisym_second: f64,
    pub pair_exchange: f64,
    pub bianchi: f64,
}

impl SymmetryResiduals {
    pub fn max(&self) -> f64 {
        self.antisym_first.max(self.antisym_second).max(self.pair_exchange).max(self.bianchi)
    }
}

pub fn curvature_pack(
    chart: &dyn MetricChart,
    p: &[f64],
    step: f64,
) -> Result<CurvaturePack, ChartError> {
    let jet = metric_jet(chart, p, step, true)?;
    Ok(CurvaturePack::from_jet(&jet))
}

impl CurvaturePack {
    pub fn from_jet(jet: &MetricJet) -> Self {
        let n = jet.dim();
        let g = jet.g;
        let ginv = jet.ginv;
        let gamma = jet.christoffel();
        let dgamma = jet.christoffel_derivative();
        let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
        let dgm = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];

        // R^l_kij = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_ip Γ^p_jk − Γ^l_jp Γ^p_ik
        let mut up = vec![0.0; n * n * n * n];
        for l in 0..n {
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let mut s = dgm(i, l, j, k) - dgm(j, l, i, k);
                        for q in 0..n {
                            s += gm(l, i, q) * gm(q, j, k) - gm(l, j, q) * gm(q, i, k);
                        }
                        up[((l * n + k) * n + i) * n + j] = s;
                    }
                }
            }
        }
        let mut riemann = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        riemann[((i * n + j) * n + k) * n + l] =
                            (0..n).map(|m| g[(l, m)] * up[((m * n + k) * n + i) * n + j]).sum();
                    }
                }
            }
        }
        let rm = |i: usize, j: usize, k: usize, l: usize| riemann[((i * n + j) * n + k) * n + l];

        let mut ricci = Mat::from_fn(n, |j, k| {
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    s += ginv[(i, l)] * rm(i, j, k, l);
                }
            }
            s
        });
        ricci = (ricci + ricci.transpose()).scale(0.5);
        let scalar = ginv.dot(&ricci);
        let nf = n as f64;
        let schouten = ricci - g.scale(scalar / (2.0 * (nf - 1.0)));

        let mut weyl = vec![0.0; n * n * n * n];
        if n > 2 {
            let c = 1.0 / (nf - 2.0);
            let s = &schouten;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let kn = s[(i, l)] * g[(j, k)] + s[(j, k)] * g[(i, l)]
                                - s[(i, k)] * g[(j, l)]
                                - s[(j, l)] * g[(i, k)];
                            weyl[((i * n + j) * n + k) * n + l] = rm(i, j, k, l) - c * kn;
                        }
                    }
                }
            }
        }

        let ric_up = &(&ginv * &ricci) * &ginv;
        let ric_sq = ric_up.dot(&ricci);
        let sigma2 = -0.5 * ric_sq + nf / (8.0 * (nf - 1.0)) * scalar * scalar;

        CurvaturePack {
            dim: n,
            metric: g,
            inverse: ginv,
            gamma,
            riemann,
            ricci,
            scalar,
            schouten,
            weyl,
            sigma2,
        }
    }

    pub fn riemann_at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.riemann[((i * n + j) * n + k) * n + l]
    }

    pub fn weyl_at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.dim;
        self.weyl[((i * n + j) * n + k) * n + l]
    }

    pub fn gamma_at(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim;
        self.gamma[(k * n + i) * n + j]
    }

    /// `|Ric|²_g`.
    pub fn ricci_norm_sq(&self) -> f64 {
        (&(&self.inverse * &self.ricci) * &self.inverse).dot(&self.ricci)
    }

    /// Eigenvalues of the Schouten endomorphism `g⁻¹S`.
    pub fn schouten_eigenvalues(&self) -> Result<Vec<f64>, ChartError> {
        self.metric.generalized_eigenvalues(&self.schouten).ok_or(ChartError::Spectrum)
    }

    /// σ₂ through the elementary-symmetric route.
    pub fn sigma2_from_eigenvalues(&self) -> Result<f64, ChartError> {
        sigma_k(&self.schouten_eigenvalues()?, 2)
    }

    pub fn symmetry_residuals(&self) -> SymmetryResiduals {
        let n = self.dim;
        let mut r = SymmetryResiduals { antisym_first: 0.0, antisym_second: 0.0, pair_exchange: 0.0, bianchi: 0.0 };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.riemann_at(i, j, k, l);
                        r.antisym_first = r.antisym_first.max((v + self.riemann_at(j, i, k, l)).abs());
                        r.antisym_second = r.antisym_second.max((v + self.riemann_at(i, j, l, k)).abs());
                        r.pair_exchange = r.pair_exchange.max((v - self.riemann_at(k, l, i, j)).abs());
                        let b = v + self.riemann_at(j, k, i, l) + self.riemann_at(k, i, j, l);
                        r.bianchi = r.bianchi.max(b.abs());
                    }
                }
            }
        }
        r
    }

    /// Largest single contraction of the Weyl tensor with `g⁻¹` over any index pair.
    pub fn weyl_trace_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
        for (a, b) in pairs {
            for x in 0..n {
                for y in 0..n {
                    let mut s = 0.0;
                    for u in 0..n {
                        for v in 0..n {
                            let mut idx = [0usize; 4];
                            idx[a] = u;
                            idx[b] = v;
                            let mut rest = [x, y].into_iter();
                            for (slot, val) in idx.iter_mut().enumerate() {
                                if slot != a && slot != b {
                                    *val = rest.next().unwrap();
                                }
                            }
                            s += self.inverse[(u, v)] * self.weyl_at(idx[0], idx[1], idx[2], idx[3]);
                        }
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
        worst
    }

    pub fn weyl_max_abs(&self) -> f64 {
        self.weyl.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn riemann_max_abs(&self) -> f64 {
        self.riemann.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Elementary symmetric polynomial of degree `k` in the given eigenvalues.
pub fn sigma_k(eigenvalues: &[f64], k: usize) -> Result<f64, ChartError> {
    let n = eigenvalues.len();
    if k == 0 || k > n {
        return Err(ChartError::KOutOfRange { k, n });
    }
    // e[j] after processing a prefix holds σ_j of that prefix
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for &x in eigenvalues {
        for j in (1..=k).rev() {
            e[j] += x * e[j - 1];
        }
    }
    Ok(e[k])
}

/// Max-norm of `Ric − (R/n) g`.
pub fn einstein_residual(pack: &CurvaturePack) -> f64 {
    (pack.ricci - pack.metric.scale(pack.scalar / pack.dim as f64)).max_abs()
}

/// Gradient, Hessian and Laplacian (trace of the Hessian) of a scalar field.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalarCalculus {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub grad_norm_sq: f64,
    pub laplacian: f64,
    pub hessian: Mat,
}

pub fn scalar_field_calculus(
    chart: &dyn MetricChart,
    f: &dyn ScalarField,
    p: &[f64],
    step: f64,
) -> Result<ScalarCalculus, ChartError> {
    let jet = metric_jet(chart, p, step, false)?;
    let n = jet.dim();
    let gamma = jet.christoffel();
    let fv = |q: &[f64]| -> Result<f64, ChartError> { Ok(f.value(q)) };
    let value = f.value(p);
    let gradient = (0..n).map(|a| d1(&fv, p, a, step)).collect::<Result<Vec<_>, _>>()?;
    let mut hessian = Mat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut v = d2(&fv, p, i, j, step, &value)?;
            for k in 0..n {
                v -= gamma[(k * n + i) * n + j] * gradient[k];
            }
            hessian[(i, j)] = v;
            hessian[(j, i)] = v;
        }
    }
    let mut grad_norm_sq = 0.0;
    for i in 0..n {
        for j in 0..n {
            grad_norm_sq += jet.ginv[(i, j)] * gradient[i] * gradient[j];
        }
    }
    let laplacian = jet.ginv.dot(&hessian);
    Ok(ScalarCalculus { value, gradient, grad_norm_sq, laplacian, hessian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{FlatChart, SphereChart, DEFAULT_STEP};
    use std::f64::consts::PI;

    #[test]
    fn round_s2_scalar_curvature() {
        let s2 = SphereChart::new(2, 1.0);
        let pack = curvature_pack(&s2, &[PI / 2.0 + 0.3, 1.0], DEFAULT_STEP).unwrap();
        assert!((pack.scalar - 2.0).abs() < 1e-8, "R = {}", pack.scalar);
        // positive Ricci under the contraction R_jk = g^{il} R_ijkl
        assert!(pack.ricci[(0, 0)] > 0.9);
        assert!(pack.sigma2.abs() < 1e-8);
    }

    #[test]
    fn flat_is_flat() {
        let pack = curvature_pack(&FlatChart::euclidean(3), &[0.1, 0.2, -0.3], DEFAULT_STEP).unwrap();
        assert!(pack.riemann_max_abs() < 1e-10);
        assert!(pack.scalar.abs() < 1e-10);
    }

    #[test]
    fn s3_weyl_and_sigma2() {
        let s3 = SphereChart::new(3, 1.0);
        let pack = curvature_pack(&s3, &[1.1, 2.0, 0.4], DEFAULT_STEP).unwrap();
        assert!(pack.weyl_max_abs() < 1e-7);
        // n(n−1)(n−2)²λ²/8 with n = 3, λ = 1
        assert!((pack.sigma2 - 0.75).abs() < 1e-7, "σ₂ = {}", pack.sigma2);
        assert!((pack.sigma2_from_eigenvalues().unwrap() - pack.sigma2).abs() < 1e-8);
        assert!(pack.symmetry_residuals().max() < 1e-7);
        assert!(einstein_residual(&pack) < 1e-8);
    }

    #[test]
    fn sigma_k_examples() {
        assert_eq!(sigma_k(&[1.0, 2.0, 3.0], 1).unwrap(), 6.0);
        assert_eq!(sigma_k(&[1.0, 2.0, 3.0], 2).unwrap(), 11.0);
        let e = [3.0 / 7.0; 8];
        assert!((sigma_k(&e, 2).unwrap() - 36.0 / 7.0).abs() < 1e-13);
        assert!(sigma_k(&e, 0).is_err());
        assert!(sigma_k(&e, 9).is_err());
    }

    #[test]
    fn zonal_laplacian_on_s2() {
        let s2 = SphereChart::new(2, 1.0);
        let f = |p: &[f64]| p[0].cos();
        let p = [0.8, 2.5];
        let c = scalar_field_calculus(&s2, &f, &p, DEFAULT_STEP).unwrap();
        assert!((c.laplacian + 2.0 * p[0].cos()).abs() < 1e-8);
        let flat = FlatChart::euclidean(2);
        let q = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
        let c = scalar_field_calculus(&flat, &q, &[0.3, -0.5], DEFAULT_STEP).unwrap();
        assert!((c.laplacian - 4.0).abs() < 1e-8);
        assert!((c.grad_norm_sq - 4.0 * 0.34).abs() < 1e-9);
    }

    #[test]
    fn boundary_and_singularity_errors() {
        let s2 = SphereChart::new(2, 1.0);
        assert!(matches!(
            curvature_pack(&s2, &[0.001, 1.0], DEFAULT_STEP),
            Err(ChartError::NearBoundary { axis: 0, .. })
        ));
        assert!(matches!(curvature_pack(&s2, &[1.0], DEFAULT_STEP), Err(ChartError::DimMismatch { .. })));
        let degenerate = crate::chart::FnChart::new(2, vec![(-1.0, 1.0); 2], |p: &[f64]| {
            Mat::diag(&[1.0, p[0] * 0.0])
        });
        assert!(matches!(curvature_pack(&degenerate, &[0.0, 0.0], DEFAULT_STEP), Err(ChartError::Singular { .. })));
    }
}
