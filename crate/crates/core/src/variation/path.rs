use std::sync::Arc;

use crate::chart::{
    metric_jet, tensor_jet, ChartError, CurvaturePack, Mat, MetricChart, MetricJet, ScalarField, ScaledChart,
    SymTensorField, TensorJet,
};
use crate::exact::{RatFun, Rational};
use crate::homogeneous::{SphereFactor, SphereProductFamily};
use crate::quadrature::{Manifold, MetricModel};

use super::VariationError;

/// Linear metric path `ḡ + t·h` over a background chart.
#[derive(Clone)]
pub struct LinearPath {
    pub base: Arc<dyn MetricChart>,
    pub h: Arc<dyn SymTensorField>,
}

impl LinearPath {
    pub fn new(base: Arc<dyn MetricChart>, h: Arc<dyn SymTensorField>) -> Self {
        LinearPath { base, h }
    }

    pub fn at(&self, t: f64) -> PathChart {
        PathChart { path: self.clone(), t }
    }
}

/// Jets of `ḡ` and `h` at one point. Curvature of every member `ḡ + t·h`
/// follows from them without further differencing, so `t`-derivatives of
/// curvature carry no spatial roundoff that varies with `t`.
#[derive(Debug, Clone)]
pub struct PathJet {
    pub base: MetricJet,
    pub h: TensorJet,
    point: Vec<f64>,
}

impl PathJet {
    /// Needs a stencil margin of `2·step` around `p`.
    pub fn new(path: &LinearPath, p: &[f64], step: f64) -> Result<Self, ChartError> {
        let base = metric_jet(path.base.as_ref(), p, step, true)?;
        let h = tensor_jet(path.h.as_ref(), p, step, true)?;
        Ok(PathJet { base, h, point: p.to_vec() })
    }

    pub fn pack(&self, t: f64) -> Result<CurvaturePack, ChartError> {
        if t == 0.0 {
            return Ok(CurvaturePack::from_jet(&self.base));
        }
        Ok(CurvaturePack::from_jet(&self.base.perturbed(&self.h, t, &self.point)?))
    }

    /// `√(det g_t / det ḡ)`.
    pub fn density(&self, t: f64) -> Result<f64, VariationError> {
        let d = (self.base.g + self.h.h.scale(t)).det() / self.base.g.det();
        if !(d > 0.0) {
            return Err(VariationError::PathInvalid(format!("det g_t ≤ 0 at t = {t}, point {:?}", self.point)));
        }
        Ok(d.sqrt())
    }
}

/// The member `ḡ + t·h` of a [`LinearPath`] as a chart; its background is `ḡ`.
#[derive(Clone)]
pub struct PathChart {
    path: LinearPath,
    t: f64,
}

impl MetricChart for PathChart {
    fn dim(&self) -> usize {
        self.path.base.dim()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        self.path.base.domain()
    }
    fn periodic(&self, axis: usize) -> bool {
        self.path.base.periodic(axis)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        let g = self.path.base.metric_at(p);
        if self.t == 0.0 {
            g
        } else {
            g + self.path.h.value(p).scale(self.t)
        }
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        self.path.base.background_at(p)
    }
    fn label(&self) -> String {
        format!("{}+{}h", self.path.base.label(), self.t)
    }
}

/// Direction `h` of a metric variation.
#[derive(Clone)]
pub enum Perturbation {
    Zero,
    /// `h = ḡ`.
    Metric,
    /// `h = f·ḡ`, so `tr h = n·f` and `h̊ = 0`.
    Conformal { f: Arc<dyn ScalarField>, label: String },
    /// `h = Σ c_i g_i` with `g_i` the unit round (or flat) metric of factor `i`;
    /// on a torus, the constant diagonal tensor `diag(c)`.
    Parallel(Vec<Rational>),
    Tensor { h: Arc<dyn SymTensorField>, label: String },
}

impl std::fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl Perturbation {
    pub fn conformal(f: impl ScalarField + 'static, label: impl Into<String>) -> Self {
        Perturbation::Conformal { f: Arc::new(f), label: label.into() }
    }

    pub fn parallel_ints(c: &[i64]) -> Self {
        Perturbation::Parallel(c.iter().map(|&v| Rational::from_int(v)).collect())
    }

    pub fn label(&self) -> String {
        match self {
            Perturbation::Zero => "zero".into(),
            Perturbation::Metric => "metric".into(),
            Perturbation::Conformal { label, .. } => format!("conformal:{label}"),
            Perturbation::Parallel(c) => {
                format!("parallel:{}", c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
            }
            Perturbation::Tensor { label, .. } => format!("tensor:{label}"),
        }
    }

    /// `h` as a tensor field on the manifold's chart.
    pub fn field(&self, manifold: &Manifold) -> Result<Arc<dyn SymTensorField>, VariationError> {
        let chart = manifold.chart();
        let n = manifold.dim();
        Ok(match self {
            Perturbation::Zero => Arc::new(move |_: &[f64]| Mat::zeros(n)),
            Perturbation::Metric => Arc::new(move |p: &[f64]| chart.background_at(p)),
            Perturbation::Conformal { f, .. } => {
                let f = f.clone();
                Arc::new(move |p: &[f64]| chart.background_at(p).scale(f.value(p)))
            }
            Perturbation::Parallel(c) => {
                let blocks = parallel_blocks(manifold, c)?;
                Arc::new(move |p: &[f64]| {
                    let g = chart.background_at(p);
                    Mat::from_fn(n, |i, j| g[(i, j)] * blocks[i])
                })
            }
            Perturbation::Tensor { h, .. } => h.clone(),
        })
    }

    pub fn path(&self, manifold: &Manifold) -> Result<LinearPath, VariationError> {
        Ok(LinearPath::new(manifold.chart(), self.field(manifold)?))
    }
}

/// Per-factor coefficients `c_i / (unit scale)` relative to `ḡ`, repeated per axis.
fn parallel_blocks(manifold: &Manifold, c: &[Rational]) -> Result<Vec<f64>, VariationError> {
    let factors = factor_list(manifold);
    if manifold_is_torus(manifold) {
        if c.len() != manifold.dim() {
            return Err(VariationError::Arity { expected: manifold.dim(), got: c.len() });
        }
        return Ok(c.iter().map(Rational::to_f64).collect());
    }
    if c.len() != factors.len() {
        return Err(VariationError::Arity { expected: factors.len(), got: c.len() });
    }
    let mut out = Vec::with_capacity(manifold.dim());
    for (f, ci) in factors.iter().zip(c) {
        let v = ci.to_f64() / unit_scale(f);
        out.extend(std::iter::repeat_n(v, f.dim()));
    }
    Ok(out)
}

fn manifold_is_torus(m: &Manifold) -> bool {
    matches!(m, Manifold::Torus { .. })
}

/// Top-level factors; a single manifold is its own only factor.
pub fn factor_list(manifold: &Manifold) -> Vec<Manifold> {
    match manifold {
        Manifold::Product { factors } => factors.clone(),
        m => vec![m.clone()],
    }
}

/// `ḡ_i = scale·g_i`: `r²` for spheres, 1 for flat factors.
fn unit_scale(m: &Manifold) -> f64 {
    match m {
        Manifold::Sphere { r, .. } => r * r,
        _ => 1.0,
    }
}

/// Factor scales `1 + t·c_i/scale_i` of `ḡ + t·Σ c_i g_i` on a product.
pub fn parallel_scales(manifold: &Manifold, c: &[Rational], t: f64) -> Result<Vec<f64>, VariationError> {
    let factors = factor_list(manifold);
    if c.len() != factors.len() {
        return Err(VariationError::Arity { expected: factors.len(), got: c.len() });
    }
    factors
        .iter()
        .zip(c)
        .map(|(f, ci)| {
            let s = 1.0 + t * ci.to_f64() / unit_scale(f);
            if s <= 0.0 {
                return Err(VariationError::PathInvalid(format!("factor scale {s} at t = {t}")));
            }
            Ok(s)
        })
        .collect()
}

/// Structural product model of `ḡ + t·Σ c_i g_i`.
pub fn parallel_product_model(
    manifold: &Manifold,
    c: &[Rational],
    t: f64,
) -> Result<MetricModel, VariationError> {
    let scales = parallel_scales(manifold, c, t)?;
    Ok(MetricModel::Product(
        factor_list(manifold)
            .iter()
            .zip(scales)
            .map(|(f, s)| Arc::new(ScaledChart { base: f.chart(), c: s }) as Arc<dyn MetricChart>)
            .collect(),
    ))
}

/// The background of a product of round spheres as a constant exact family.
/// Radii must have rational squares (up to 1e−12).
pub fn background_family(manifold: &Manifold) -> Result<SphereProductFamily, VariationError> {
    let factors = factor_list(manifold)
        .iter()
        .map(|f| match f {
            Manifold::Sphere { n, r } => {
                let r2 = Rational::approximate(r * r, 1_000_000)
                    .filter(|q| (q.to_f64() - r * r).abs() < 1e-12)
                    .ok_or_else(|| VariationError::Unsupported(format!("radius {r} has no rational square")))?;
                Ok(SphereFactor::new(*n, RatFun::constant(r2)))
            }
            other => Err(VariationError::Unsupported(format!(
                "exact routes need round sphere factors, got {other:?}"
            ))),
        })
        .collect::<Result<Vec<_>, VariationError>>()?;
    Ok(SphereProductFamily::new(factors)?)
}

/// Pointwise split `h = h̊ + (u/n)ḡ` with `u = tr_ḡ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TTDecomposition {
    pub u: f64,
    pub h_ring: Mat,
}

pub fn tt_decompose(h: &Mat, g: &Mat, ginv: &Mat) -> TTDecomposition {
    let u = ginv.dot(h);
    let n = g.dim() as f64;
    TTDecomposition { u, h_ring: *h - g.scale(u / n) }
}

/// `u = tr_ḡ h` as a scalar field.
pub fn trace_field(chart: Arc<dyn MetricChart>, h: Arc<dyn SymTensorField>) -> impl ScalarField {
    move |p: &[f64]| match chart.background_at(p).inverse() {
        Some(ginv) => ginv.dot(&h.value(p)),
        None => f64::NAN,
    }
}

/// `h̊` as a tensor field.
pub fn trace_free_field(chart: Arc<dyn MetricChart>, h: Arc<dyn SymTensorField>) -> impl SymTensorField {
    move |p: &[f64]| {
        let g = chart.background_at(p);
        match g.inverse() {
            Some(ginv) => tt_decompose(&h.value(p), &g, &ginv).h_ring,
            None => Mat::zeros(g.dim()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::SphereChart;

    #[test]
    fn path_members() {
        let m = Manifold::sphere(2);
        let path = Perturbation::Metric.path(&m).unwrap();
        let g = path.at(0.5).metric_at(&[1.0, 0.2]);
        let g0 = SphereChart::new(2, 1.0).metric_at(&[1.0, 0.2]);
        assert!((g - g0.scale(1.5)).max_abs() < 1e-15);
        assert!((path.at(0.5).background_at(&[1.0, 0.2]) - g0).max_abs() < 1e-15);
    }

    #[test]
    fn jets_match_direct_differencing() {
        use crate::chart::curvature_pack;
        use crate::spectral::ZonalHarmonic;
        let m = Manifold::sphere(3);
        let path = Perturbation::conformal(ZonalHarmonic::polar(2, 3, 1.0), "k2").path(&m).unwrap();
        let p = [1.1, 0.8, 2.5];
        let jet = PathJet::new(&path, &p, 1e-3).unwrap();
        for t in [0.0, 0.01, -0.02] {
            let a = jet.pack(t).unwrap();
            let b = curvature_pack(&path.at(t), &p, 1e-3).unwrap();
            assert!((a.ricci - b.ricci).max_abs() < 1e-9, "t = {t}");
            assert!((a.sigma2 - b.sigma2).abs() < 1e-9);
        }
        let v = jet.density(0.02).unwrap();
        let direct = (path.at(0.02).metric_at(&p).det() / path.base.metric_at(&p).det()).sqrt();
        assert!((v - direct).abs() < 1e-14);
    }

    #[test]
    fn parallel_on_products_and_tori() {
        let m = Manifold::sphere_product(&[2, 3]);
        let h = Perturbation::parallel_ints(&[3, -2]).field(&m).unwrap();
        let p = [1.0, 0.5, 1.2, 0.7, 2.0];
        let g = m.chart().metric_at(&p);
        let hv = h.value(&p);
        let d = tt_decompose(&hv, &g, &g.inverse().unwrap());
        assert!((d.u - 0.0).abs() < 1e-14);
        assert!((hv[(0, 0)] - 3.0).abs() < 1e-14 && (hv[(2, 2)] + 2.0).abs() < 1e-14);

        let t = Manifold::Torus { n: 3 };
        let h = Perturbation::parallel_ints(&[1, 2, 3]).field(&t).unwrap();
        assert_eq!(h.value(&[0.1, 0.2, 0.3]), Mat::diag(&[1.0, 2.0, 3.0]));
        assert!(matches!(
            Perturbation::parallel_ints(&[1]).field(&m),
            Err(VariationError::Arity { expected: 2, got: 1 })
        ));
    }
}
