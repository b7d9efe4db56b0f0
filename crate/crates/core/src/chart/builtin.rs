use std::f64::consts::PI;
use std::sync::Arc;

use super::{Mat, MetricChart, ScalarField};

/// Round sphere `S^n(r)` in hyperspherical coordinates
/// `(ψ_1, …, ψ_{n−1}, φ)` with `ψ_i ∈ [0, π]` and periodic `φ ∈ [0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereChart {
    pub n: usize,
    pub r: f64,
}

impl SphereChart {
    pub fn new(n: usize, r: f64) -> Self {
        assert!(n >= 2 && r > 0.0);
        SphereChart { n, r }
    }

    /// Ambient coordinates in `ℝ^{n+1}`; the first one is `r cos ψ_1`.
    pub fn embed(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = Vec::with_capacity(n + 1);
        let mut prod = self.r;
        for &psi in &p[..n - 1] {
            x.push(prod * psi.cos());
            prod *= psi.sin();
        }
        let phi = p[n - 1];
        x.push(prod * phi.cos());
        x.push(prod * phi.sin());
        x
    }
}

impl MetricChart for SphereChart {
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        let mut d = vec![(0.0, PI); self.n - 1];
        d.push((0.0, 2.0 * PI));
        d
    }
    fn periodic(&self, axis: usize) -> bool {
        axis == self.n - 1
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        let mut d = Vec::with_capacity(self.n);
        let mut f = self.r * self.r;
        d.push(f);
        for &psi in &p[..self.n - 1] {
            let s = psi.sin();
            f *= s * s;
            d.push(f);
        }
        Mat::diag(&d)
    }
    fn label(&self) -> String {
        format!("sphere:n={},r={}", self.n, self.r)
    }
}

/// Euclidean metric on a coordinate box; periodic axes make it a flat torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatChart {
    pub n: usize,
    pub half_width: f64,
    pub torus: bool,
}

impl FlatChart {
    pub fn euclidean(n: usize) -> Self {
        FlatChart { n, half_width: 1.0, torus: false }
    }

    /// Flat torus `ℝⁿ / 2πℤⁿ`, coordinates in `[0, 2π]`.
    pub fn torus(n: usize) -> Self {
        FlatChart { n, half_width: PI, torus: true }
    }
}

impl MetricChart for FlatChart {
    fn dim(&self) -> usize {
        self.n
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        if self.torus {
            vec![(0.0, 2.0 * self.half_width); self.n]
        } else {
            vec![(-self.half_width, self.half_width); self.n]
        }
    }
    fn periodic(&self, _axis: usize) -> bool {
        self.torus
    }
    fn metric_at(&self, _p: &[f64]) -> Mat {
        Mat::identity(self.n)
    }
    fn label(&self) -> String {
        if self.torus {
            format!("torus:{}", self.n)
        } else {
            format!("flat:{}", self.n)
        }
    }
}

/// Riemannian product with block-diagonal metric; coordinates are concatenated.
#[derive(Clone)]
pub struct ProductChart {
    factors: Vec<Arc<dyn MetricChart>>,
    offsets: Vec<usize>,
}

impl ProductChart {
    pub fn new(factors: Vec<Arc<dyn MetricChart>>) -> Self {
        let mut offsets = Vec::with_capacity(factors.len() + 1);
        let mut off = 0;
        for f in &factors {
            offsets.push(off);
            off += f.dim();
        }
        offsets.push(off);
        ProductChart { factors, offsets }
    }

    pub fn factors(&self) -> &[Arc<dyn MetricChart>] {
        &self.factors
    }

    /// Coordinate range `[start, end)` of factor `i`.
    pub fn factor_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    fn locate(&self, axis: usize) -> (usize, usize) {
        let i = self.offsets.partition_point(|&o| o <= axis) - 1;
        (i, axis - self.offsets[i])
    }

    fn blocks(&self, p: &[f64], f: impl Fn(&dyn MetricChart, &[f64]) -> Mat) -> Mat {
        let blocks: Vec<Mat> = self
            .factors
            .iter()
            .enumerate()
            .map(|(i, c)| f(c.as_ref(), &p[self.factor_range(i)]))
            .collect();
        Mat::block_diag(&blocks)
    }
}

impl MetricChart for ProductChart {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        self.factors.iter().flat_map(|f| f.domain()).collect()
    }
    fn periodic(&self, axis: usize) -> bool {
        let (i, a) = self.locate(axis);
        self.factors[i].periodic(a)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        self.blocks(p, |c, q| c.metric_at(q))
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        self.blocks(p, |c, q| c.background_at(q))
    }
    fn label(&self) -> String {
        let parts: Vec<String> = self.factors.iter().map(|f| f.label()).collect();
        format!("product({})", parts.join(" x "))
    }
}

/// Constant multiple `c·g` of a base chart; the background stays the base's.
#[derive(Clone)]
pub struct ScaledChart {
    pub base: Arc<dyn MetricChart>,
    pub c: f64,
}

impl MetricChart for ScaledChart {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        self.base.domain()
    }
    fn periodic(&self, axis: usize) -> bool {
        self.base.periodic(axis)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        self.base.metric_at(p).scale(self.c)
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        self.base.background_at(p)
    }
    fn label(&self) -> String {
        format!("{}*{}", self.c, self.base.label())
    }
}

/// Conformal deformation `(1 + amp·f)·ḡ` of a base chart.
#[derive(Clone)]
pub struct ConformalChart {
    pub base: Arc<dyn MetricChart>,
    pub field: Arc<dyn ScalarField>,
    pub amp: f64,
    pub field_label: String,
}

impl MetricChart for ConformalChart {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        self.base.domain()
    }
    fn periodic(&self, axis: usize) -> bool {
        self.base.periodic(axis)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        self.base.metric_at(p).scale(1.0 + self.amp * self.field.value(p))
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        self.base.background_at(p)
    }
    fn label(&self) -> String {
        format!("conformal:base={},f={},amp={}", self.base.label(), self.field_label, self.amp)
    }
}

type MetricFn = dyn Fn(&[f64]) -> Mat + Send + Sync;

/// Chart from an arbitrary metric closure; mainly for tests and experiments.
#[derive(Clone)]
pub struct FnChart {
    dim: usize,
    domain: Vec<(f64, f64)>,
    periodic: Vec<bool>,
    metric: Arc<MetricFn>,
    background: Option<Arc<MetricFn>>,
}

impl FnChart {
    pub fn new(
        dim: usize,
        domain: Vec<(f64, f64)>,
        metric: impl Fn(&[f64]) -> Mat + Send + Sync + 'static,
    ) -> Self {
        FnChart { dim, domain, periodic: vec![false; dim], metric: Arc::new(metric), background: None }
    }

    pub fn with_periodic(mut self, periodic: Vec<bool>) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn with_background(mut self, bg: impl Fn(&[f64]) -> Mat + Send + Sync + 'static) -> Self {
        self.background = Some(Arc::new(bg));
        self
    }
}

impl MetricChart for FnChart {
    fn dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }
    fn periodic(&self, axis: usize) -> bool {
        self.periodic[axis]
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        (self.metric)(p)
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        match &self.background {
            Some(b) => b(p),
            None => (self.metric)(p),
        }
    }
    fn label(&self) -> String {
        "custom".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{curvature_pack, einstein_residual, DEFAULT_STEP};

    #[test]
    fn embedding_lies_on_sphere() {
        let s = SphereChart::new(4, 2.0);
        let x = s.embed(&[0.3, 1.2, 2.0, 5.0]);
        let norm: f64 = x.iter().map(|v| v * v).sum();
        assert_eq!(x.len(), 5);
        assert!((norm - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_scalar_curvature_all_dims() {
        for n in 2..=4 {
            for r in [1.0, 1.5] {
                let s = SphereChart::new(n, r);
                let mut p = vec![1.3; n];
                p[n - 1] = 0.7;
                let pack = curvature_pack(&s, &p, DEFAULT_STEP).unwrap();
                let expect = (n * (n - 1)) as f64 / (r * r);
                assert!((pack.scalar - expect).abs() < 1e-7, "n={n} r={r} R={}", pack.scalar);
            }
        }
    }

    #[test]
    fn product_einstein_residual() {
        let prod = ProductChart::new(vec![
            Arc::new(SphereChart::new(2, 1.0)),
            Arc::new(SphereChart::new(4, 1.0)),
        ]);
        assert_eq!(prod.dim(), 6);
        assert!(prod.periodic(1) && prod.periodic(5) && !prod.periodic(2));
        let pack = curvature_pack(&prod, &[1.0, 0.2, 1.1, 1.4, 1.7, 3.0], DEFAULT_STEP).unwrap();
        assert!((pack.scalar - 14.0).abs() < 1e-7);
        assert!(einstein_residual(&pack) >= 0.5);
        let torus = curvature_pack(&FlatChart::torus(3), &[0.0, 1.0, 6.0], DEFAULT_STEP).unwrap();
        assert!(einstein_residual(&torus) < 1e-10);
    }
}
