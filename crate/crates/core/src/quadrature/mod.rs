//! Quadrature over built-in manifolds and the global functionals
//! `Vol(g)`, `∫σ₂(g) dv_ḡ` and `H_ḡ(g)`.

mod rules;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chart::{
    curvature_pack, fit_step, scalar_field_calculus, ChartError, FlatChart, MetricChart, ProductChart,
    ScalarField, SphereChart,
};

pub use rules::{gauss_legendre, pairwise_sum, periodic_rule, polar_rule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error("resolution {resolution} too low: estimated error {error:e} exceeds tolerance {tolerance:e}")]
    ResolutionTooLow { resolution: usize, error: f64, tolerance: f64 },
    #[error("resolution must be at least 2, got {0}")]
    BadResolution(usize),
    #[error("Obata deficit needs λ > 0, got {0}")]
    NonPositiveLambda(f64),
    #[error("grid dimension {grid} does not match chart dimension {chart}")]
    DimMismatch { grid: usize, chart: usize },
    #[error("metric has non-positive determinant at {0:?}")]
    NonPositiveDeterminant(Vec<f64>),
}

/// Built-in manifolds with known charts and quadrature rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Manifold {
    Sphere { n: usize, r: f64 },
    /// Flat torus `ℝⁿ/2πℤⁿ`.
    Torus { n: usize },
    Product { factors: Vec<Manifold> },
}

impl Manifold {
    pub fn sphere(n: usize) -> Self {
        Manifold::Sphere { n, r: 1.0 }
    }

    pub fn sphere_product(dims: &[usize]) -> Self {
        Manifold::Product { factors: dims.iter().map(|&n| Manifold::sphere(n)).collect() }
    }

    pub fn dim(&self) -> usize {
        match self {
            Manifold::Sphere { n, .. } | Manifold::Torus { n } => *n,
            Manifold::Product { factors } => factors.iter().map(Manifold::dim).sum(),
        }
    }

    pub fn chart(&self) -> Arc<dyn MetricChart> {
        match self {
            Manifold::Sphere { n, r } => Arc::new(SphereChart::new(*n, *r)),
            Manifold::Torus { n } => Arc::new(FlatChart::torus(*n)),
            Manifold::Product { factors } => {
                Arc::new(ProductChart::new(factors.iter().map(Manifold::chart).collect()))
            }
        }
    }

    /// Einstein constant `λ` with `Ric = (n−1)λ ḡ`, when the standard metric is Einstein.
    pub fn einstein_lambda(&self) -> Option<f64> {
        match self {
            Manifold::Sphere { r, .. } => Some(1.0 / (r * r)),
            Manifold::Torus { .. } => Some(0.0),
            Manifold::Product { factors } => {
                let n = self.dim() as f64;
                let mut lambda = None;
                for f in factors {
                    // factor Ric = (m−1)/r² must equal (n−1)λ
                    let m = f.dim() as f64;
                    let l = match f {
                        Manifold::Sphere { r, .. } => (m - 1.0) / (r * r) / (n - 1.0),
                        Manifold::Torus { .. } => 0.0,
                        Manifold::Product { .. } => f.einstein_lambda()? * (m - 1.0) / (n - 1.0),
                    };
                    match lambda {
                        None => lambda = Some(l),
                        Some(prev) if (prev - l).abs() <= 1e-12 * prev.abs().max(1.0) => {}
                        Some(_) => return None,
                    }
                }
                lambda
            }
        }
    }

    /// Volume of the standard metric.
    pub fn volume_exact(&self) -> f64 {
        match self {
            Manifold::Sphere { n, r } => {
                crate::exact::PiScalar::unit_sphere_volume(*n).to_f64() * r.powi(*n as i32)
            }
            Manifold::Torus { n } => (2.0 * std::f64::consts::PI).powi(*n as i32),
            Manifold::Product { factors } => factors.iter().map(Manifold::volume_exact).product(),
        }
    }

    pub fn default_resolution(&self) -> usize {
        match self {
            Manifold::Sphere { n: 2, .. } => 48,
            Manifold::Sphere { n: 3, .. } => 32,
            Manifold::Sphere { .. } => 24,
            Manifold::Torus { .. } => 32,
            Manifold::Product { factors } => {
                factors.iter().map(Manifold::default_resolution).min().unwrap_or(16)
            }
        }
    }

    /// Whether the default rule is large enough to deserve a runtime warning.
    pub fn heavy(&self) -> bool {
        matches!(self, Manifold::Sphere { n, .. } if *n >= 4)
    }

    /// Tensor-product grid; spheres use `res` nodes per polar angle and
    /// `2·res` in the azimuth, tori `res` per axis.
    pub fn grid(&self, res: usize) -> Result<QuadratureGrid, QuadratureError> {
        if res < 2 {
            return Err(QuadratureError::BadResolution(res));
        }
        let axes: Vec<(Vec<f64>, Vec<f64>)> = match self {
            Manifold::Sphere { n, r } => {
                let mut axes: Vec<_> = (1..*n).map(|i| polar_rule(res, (*n - i) as u32)).collect();
                let (x, mut w) = periodic_rule(2 * res);
                let rn = r.powi(*n as i32);
                w.iter_mut().for_each(|v| *v *= rn);
                axes.push((x, w));
                axes
            }
            Manifold::Torus { n } => vec![periodic_rule(res); *n],
            Manifold::Product { factors } => {
                let grids = factors.iter().map(|f| f.grid(res)).collect::<Result<Vec<_>, _>>()?;
                return Ok(QuadratureGrid::tensor(&grids, res));
            }
        };
        Ok(QuadratureGrid::from_axes(&axes, res))
    }

    /// Grid for integration: flat for single manifolds, per-factor for products.
    pub fn domain(&self, res: usize) -> Result<Domain, QuadratureError> {
        match self {
            Manifold::Product { factors } => Ok(Domain::Product(
                factors.iter().map(|f| f.grid(res)).collect::<Result<Vec<_>, _>>()?,
            )),
            _ => Ok(Domain::Single(self.grid(res)?)),
        }
    }
}

/// Nodes and background-measure weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    pub dim: usize,
    nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub resolution: usize,
}

impl QuadratureGrid {
    fn from_axes(axes: &[(Vec<f64>, Vec<f64>)], resolution: usize) -> Self {
        let dim = axes.len();
        let total: usize = axes.iter().map(|a| a.0.len()).product();
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for (a, &i) in axes.iter().zip(&idx) {
                nodes.push(a.0[i]);
                w *= a.1[i];
            }
            weights.push(w);
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].0.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        QuadratureGrid { dim, nodes, weights, resolution }
    }

    fn tensor(grids: &[QuadratureGrid], resolution: usize) -> Self {
        let mut out = QuadratureGrid { dim: 0, nodes: vec![], weights: vec![1.0], resolution };
        for g in grids {
            let mut nodes = Vec::with_capacity(out.len() * g.len() * (out.dim + g.dim));
            let mut weights = Vec::with_capacity(out.len() * g.len());
            for i in 0..out.len() {
                for j in 0..g.len() {
                    nodes.extend_from_slice(out.node(i));
                    nodes.extend_from_slice(g.node(j));
                    weights.push(out.weights[i] * g.weights[j]);
                }
            }
            out = QuadratureGrid { dim: out.dim + g.dim, nodes, weights, resolution };
        }
        out
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn total_weight(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Values of `f` at every node, evaluated in parallel when enabled.
    pub fn map<T: Send, E: Send>(
        &self,
        f: impl Fn(&[f64]) -> Result<T, E> + Sync + Send,
    ) -> Result<Vec<T>, E> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            (0..self.len()).into_par_iter().map(|i| f(self.node(i))).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..self.len()).map(|i| f(self.node(i))).collect()
        }
    }

    /// `Σ w_i v_i` in deterministic order.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        let terms: Vec<f64> = self.weights.iter().zip(values).map(|(w, v)| w * v).collect();
        pairwise_sum(&terms)
    }

    /// `∫ f dv_ḡ`.
    pub fn integrate<E: Send>(
        &self,
        f: impl Fn(&[f64]) -> Result<f64, E> + Sync + Send,
    ) -> Result<f64, E> {
        Ok(self.weighted_sum(&self.map(f)?))
    }

    fn check_dim(&self, chart: &dyn MetricChart) -> Result<(), QuadratureError> {
        if chart.dim() != self.dim {
            return Err(QuadratureError::DimMismatch { grid: self.dim, chart: chart.dim() });
        }
        Ok(())
    }
}

/// A scalar with a resolution-halving error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FunctionalValue {
    pub value: f64,
    pub estimated_error: f64,
    pub grid_resolution: usize,
}

/// Evaluates `f` at `res` and `res/2`; the difference is the error estimate.
pub fn with_error_estimate(
    res: usize,
    tolerance: Option<f64>,
    f: impl Fn(usize) -> Result<f64, QuadratureError>,
) -> Result<FunctionalValue, QuadratureError> {
    let value = f(res)?;
    let coarse = f((res / 2).max(2))?;
    let estimated_error = (value - coarse).abs();
    if let Some(tol) = tolerance {
        if estimated_error > tol * value.abs().max(1.0) {
            return Err(QuadratureError::ResolutionTooLow { resolution: res, error: estimated_error, tolerance: tol });
        }
    }
    Ok(FunctionalValue { value, estimated_error, grid_resolution: res })
}

fn density_ratio(chart: &dyn MetricChart, p: &[f64]) -> Result<f64, QuadratureError> {
    let d = chart.metric_at(p).det();
    let b = chart.background_at(p).det();
    if !(d > 0.0 && b > 0.0) {
        return Err(QuadratureError::NonPositiveDeterminant(p.to_vec()));
    }
    Ok((d / b).sqrt())
}

/// `Vol(g) = ∫ √(det g / det ḡ) dv_ḡ`.
pub fn volume(chart: &dyn MetricChart, grid: &QuadratureGrid) -> Result<f64, QuadratureError> {
    grid.check_dim(chart)?;
    grid.integrate(|p| density_ratio(chart, p))
}

/// `∫ σ₂(g) dv_ḡ`, always against the background measure.
pub fn sigma2_integral(
    chart: &dyn MetricChart,
    grid: &QuadratureGrid,
    step: f64,
) -> Result<f64, QuadratureError> {
    grid.check_dim(chart)?;
    grid.integrate(|p| Ok(curvature_pack(chart, p, fit_step(chart, p, step, 2.0)?)?.sigma2))
}

/// `H_ḡ(g) = Vol(g)^{4/n} ∫ σ₂(g) dv_ḡ`.
pub fn h_functional(
    chart: &dyn MetricChart,
    grid: &QuadratureGrid,
    step: f64,
) -> Result<f64, QuadratureError> {
    let n = chart.dim() as f64;
    Ok(volume(chart, grid)?.powf(4.0 / n) * sigma2_integral(chart, grid, step)?)
}

/// Per-factor grids of a product; integrals of block-diagonal metrics whose
/// blocks depend only on their own factor's coordinates factor through them.
#[derive(Debug, Clone)]
pub enum Domain {
    Single(QuadratureGrid),
    Product(Vec<QuadratureGrid>),
}

/// Chart data matching a [`Domain`].
#[derive(Clone)]
pub enum MetricModel {
    Chart(Arc<dyn MetricChart>),
    Product(Vec<Arc<dyn MetricChart>>),
}

#[derive(Debug, Clone, Copy)]
struct FactorSums {
    vol: f64,
    vol_bg: f64,
    ric_sq: f64,
    scal: f64,
    scal_sq: f64,
}

fn factor_sums(
    chart: &dyn MetricChart,
    grid: &QuadratureGrid,
    step: f64,
) -> Result<FactorSums, QuadratureError> {
    grid.check_dim(chart)?;
    let vals = grid.map(|p| -> Result<[f64; 4], QuadratureError> {
        let pack = curvature_pack(chart, p, fit_step(chart, p, step, 2.0)?)?;
        Ok([density_ratio(chart, p)?, pack.ricci_norm_sq(), pack.scalar, pack.scalar * pack.scalar])
    })?;
    let col = |k: usize| grid.weighted_sum(&vals.iter().map(|v| v[k]).collect::<Vec<_>>());
    Ok(FactorSums { vol: col(0), vol_bg: grid.total_weight(), ric_sq: col(1), scal: col(2), scal_sq: col(3) })
}

impl Domain {
    pub fn resolution(&self) -> usize {
        match self {
            Domain::Single(g) => g.resolution,
            Domain::Product(gs) => gs.first().map_or(0, |g| g.resolution),
        }
    }

    /// Returns `(Vol(g), ∫σ₂(g) dv_ḡ)`.
    pub fn volume_and_sigma2(
        &self,
        model: &MetricModel,
        step: f64,
    ) -> Result<(f64, f64), QuadratureError> {
        match (self, model) {
            (Domain::Single(grid), MetricModel::Chart(c)) => {
                Ok((volume(c.as_ref(), grid)?, sigma2_integral(c.as_ref(), grid, step)?))
            }
            (Domain::Product(grids), MetricModel::Product(cs)) if grids.len() == cs.len() => {
                let sums = cs
                    .iter()
                    .zip(grids)
                    .map(|(c, g)| factor_sums(c.as_ref(), g, step))
                    .collect::<Result<Vec<_>, _>>()?;
                let n: usize = cs.iter().map(|c| c.dim()).sum();
                Ok((sums.iter().map(|s| s.vol).product(), product_sigma2(&sums, n)))
            }
            (Domain::Product(grids), MetricModel::Chart(c)) => {
                let flat = QuadratureGrid::tensor(grids, self.resolution());
                Domain::Single(flat).volume_and_sigma2(&MetricModel::Chart(c.clone()), step)
            }
            _ => Err(QuadratureError::DimMismatch { grid: 0, chart: 0 }),
        }
    }

    pub fn h_functional(&self, model: &MetricModel, step: f64) -> Result<f64, QuadratureError> {
        let n = match model {
            MetricModel::Chart(c) => c.dim(),
            MetricModel::Product(cs) => cs.iter().map(|c| c.dim()).sum(),
        } as f64;
        let (v, s) = self.volume_and_sigma2(model, step)?;
        Ok(v.powf(4.0 / n) * s)
    }

    pub fn volume(&self, model: &MetricModel) -> Result<f64, QuadratureError> {
        match (self, model) {
            (Domain::Single(g), MetricModel::Chart(c)) => volume(c.as_ref(), g),
            (Domain::Product(gs), MetricModel::Product(cs)) if gs.len() == cs.len() => {
                let mut v = 1.0;
                for (g, c) in gs.iter().zip(cs) {
                    v *= volume(c.as_ref(), g)?;
                }
                Ok(v)
            }
            (Domain::Product(gs), MetricModel::Chart(c)) => volume(c.as_ref(), &QuadratureGrid::tensor(gs, self.resolution())),
            _ => Err(QuadratureError::DimMismatch { grid: 0, chart: 0 }),
        }
    }
}

/// Per-factor sums of a product taken once, for evaluating the family of
/// metrics that rescale each factor by a constant.
#[derive(Debug, Clone)]
pub struct ScaledProduct {
    sums: Vec<FactorSums>,
    dims: Vec<usize>,
}

impl ScaledProduct {
    pub fn new(domain: &Domain, charts: &[Arc<dyn MetricChart>], step: f64) -> Result<Self, QuadratureError> {
        let Domain::Product(grids) = domain else {
            return Err(QuadratureError::DimMismatch { grid: domain.resolution(), chart: charts.len() });
        };
        if grids.len() != charts.len() {
            return Err(QuadratureError::DimMismatch { grid: grids.len(), chart: charts.len() });
        }
        let sums = charts
            .iter()
            .zip(grids)
            .map(|(c, g)| factor_sums(c.as_ref(), g, step))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { sums, dims: charts.iter().map(|c| c.dim()).collect() })
    }

    /// `(Vol, ∫σ₂ dv_ḡ)` with factor `i` scaled by `scales[i] > 0`.
    pub fn volume_and_sigma2(&self, scales: &[f64]) -> (f64, f64) {
        let sums: Vec<FactorSums> = self
            .sums
            .iter()
            .zip(&self.dims)
            .zip(scales)
            .map(|((f, &m), &s)| FactorSums {
                vol: f.vol * s.powf(m as f64 / 2.0),
                vol_bg: f.vol_bg,
                ric_sq: f.ric_sq / (s * s),
                scal: f.scal / s,
                scal_sq: f.scal_sq / (s * s),
            })
            .collect();
        let n = self.dims.iter().sum();
        (sums.iter().map(|s| s.vol).product(), product_sigma2(&sums, n))
    }
}

/// `∫σ₂ dv_ḡ` over a product from per-factor sums, using
/// `|Ric|² = Σ|Ric_i|²` and `R = Σ R_i`.
fn product_sigma2(s: &[FactorSums], n: usize) -> f64 {
    let nf = n as f64;
    let c = nf / (8.0 * (nf - 1.0));
    let others = |skip: &[usize]| -> f64 {
        s.iter().enumerate().filter(|(k, _)| !skip.contains(k)).map(|(_, f)| f.vol_bg).product()
    };
    let mut ric = 0.0;
    let mut scal_sq = 0.0;
    for (i, fi) in s.iter().enumerate() {
        ric += fi.ric_sq * others(&[i]);
        scal_sq += fi.scal_sq * others(&[i]);
        for (j, fj) in s.iter().enumerate() {
            if j != i {
                scal_sq += fi.scal * fj.scal * others(&[i, j]);
            }
        }
    }
    -0.5 * ric + c * scal_sq
}

/// Mean, gradient energy and the Lichnerowicz–Obata deficit of a scalar field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MeanEnergy {
    pub mean: f64,
    pub grad_energy: f64,
    /// `∫ (u − ū)² dv_ḡ`.
    pub centered_l2: f64,
    pub obata_deficit: f64,
}

/// Needs `λ > 0`; `λ` is the Einstein constant of the background chart.
pub fn mean_and_energy(
    chart: &dyn MetricChart,
    u: &dyn ScalarField,
    grid: &QuadratureGrid,
    lambda: f64,
    step: f64,
) -> Result<MeanEnergy, QuadratureError> {
    if !(lambda > 0.0) {
        return Err(QuadratureError::NonPositiveLambda(lambda));
    }
    grid.check_dim(chart)?;
    let vals = grid.map(|p| -> Result<(f64, f64), QuadratureError> {
        let c = scalar_field_calculus(chart, u, p, fit_step(chart, p, step, 2.0)?)?;
        Ok((c.value, c.grad_norm_sq))
    })?;
    let uv: Vec<f64> = vals.iter().map(|v| v.0).collect();
    let vol = grid.total_weight();
    let mean = grid.weighted_sum(&uv) / vol;
    let centered: Vec<f64> = uv.iter().map(|v| (v - mean) * (v - mean)).collect();
    let centered_l2 = grid.weighted_sum(&centered);
    let grad_energy = grid.weighted_sum(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
    let n = chart.dim() as f64;
    Ok(MeanEnergy { mean, grad_energy, centered_l2, obata_deficit: grad_energy - n * lambda * centered_l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{ScaledChart, DEFAULT_STEP};
    use std::f64::consts::PI;

    #[test]
    fn sphere_volumes() {
        let s2 = Manifold::sphere(2).grid(48).unwrap();
        assert!((s2.total_weight() / (4.0 * PI) - 1.0).abs() < 1e-9);
        let s3 = Manifold::sphere(3).grid(16).unwrap();
        assert!((s3.total_weight() / (2.0 * PI * PI) - 1.0).abs() < 1e-9);
        let chart = Manifold::sphere(3).chart();
        assert!((volume(chart.as_ref(), &s3).unwrap() / (2.0 * PI * PI) - 1.0).abs() < 1e-8);
        let s4r = Manifold::Sphere { n: 4, r: 2.0 };
        let g = s4r.grid(12).unwrap();
        assert!((g.total_weight() / s4r.volume_exact() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn einstein_constants() {
        assert_eq!(Manifold::sphere(3).einstein_lambda(), Some(1.0));
        assert_eq!(Manifold::sphere_product(&[2, 2, 2, 2]).einstein_lambda(), Some(1.0 / 7.0));
        assert_eq!(Manifold::sphere_product(&[2, 4]).einstein_lambda(), None);
        assert_eq!(Manifold::Torus { n: 3 }.einstein_lambda(), Some(0.0));
    }

    #[test]
    fn sphere_h_value() {
        let m = Manifold::sphere(3);
        let grid = m.grid(8).unwrap();
        let h = h_functional(m.chart().as_ref(), &grid, DEFAULT_STEP).unwrap();
        let expect = 0.75 * (2.0 * PI * PI).powf(7.0 / 3.0);
        assert!((h / expect - 1.0).abs() < 1e-6, "{h} vs {expect}");
    }

    #[test]
    fn scaling_invariance_numeric() {
        let m = Manifold::sphere(2);
        let grid = m.grid(12).unwrap();
        // σ₂ ≡ 0 on surfaces, so use S³
        let m3 = Manifold::sphere(3);
        let g3 = m3.grid(8).unwrap();
        let base = h_functional(m3.chart().as_ref(), &g3, 5e-3).unwrap();
        for c in [0.81, 1.21] {
            let scaled = ScaledChart { base: m3.chart(), c };
            let v = h_functional(&scaled, &g3, 5e-3).unwrap();
            assert!((v / base - 1.0).abs() < 1e-8, "c = {c}");
        }
        assert!(h_functional(m.chart().as_ref(), &grid, DEFAULT_STEP).unwrap().abs() < 1e-7);
    }

    #[test]
    fn product_structural_matches_flat() {
        let m = Manifold::sphere_product(&[2, 2]);
        let model = MetricModel::Product(vec![
            Arc::new(ScaledChart { base: Manifold::sphere(2).chart(), c: 1.3 }),
            Arc::new(ScaledChart { base: Manifold::sphere(2).chart(), c: 0.6 }),
        ]);
        let structural = m.domain(8).unwrap().volume_and_sigma2(&model, 5e-3).unwrap();
        let MetricModel::Product(ref cs) = model else { unreachable!() };
        let flat_chart: Arc<dyn MetricChart> = Arc::new(ProductChart::new(cs.clone()));
        let flat = m.domain(8).unwrap().volume_and_sigma2(&MetricModel::Chart(flat_chart), 5e-3).unwrap();
        assert!((structural.0 / flat.0 - 1.0).abs() < 1e-10);
        assert!((structural.1 / flat.1 - 1.0).abs() < 1e-7);
        // R = 2/1.3 + 2/0.6, |Ric|² = 2/1.3² + 2/0.6², n = 4
        let (r, rs) = (2.0 / 1.3 + 2.0 / 0.6, 2.0 / 1.69 + 2.0 / 0.36);
        let sigma2 = -0.5 * rs + 4.0 / 24.0 * r * r;
        assert!((structural.1 / (sigma2 * 16.0 * PI * PI) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn obata_on_s2() {
        let m = Manifold::sphere(2);
        let grid = m.grid(24).unwrap();
        let chart = m.chart();
        let u = |p: &[f64]| p[0].cos();
        let e = mean_and_energy(chart.as_ref(), &u, &grid, 1.0, DEFAULT_STEP).unwrap();
        assert!(e.mean.abs() < 1e-12);
        assert!((e.grad_energy - 8.0 * PI / 3.0).abs() < 1e-8);
        assert!(e.obata_deficit.abs() < 1e-8);
        let p2 = |p: &[f64]| (3.0 * p[0].cos().powi(2) - 1.0) / 2.0;
        let e = mean_and_energy(chart.as_ref(), &p2, &grid, 1.0, DEFAULT_STEP).unwrap();
        assert!((e.obata_deficit - 4.0 * 4.0 * PI / 5.0).abs() < 1e-7);
        assert!(mean_and_energy(chart.as_ref(), &u, &grid, 0.0, DEFAULT_STEP).is_err());
    }

    #[test]
    fn volume_error_estimate_and_convergence() {
        let m = Manifold::sphere(3);
        let conf = crate::chart::ConformalChart {
            base: m.chart(),
            field: Arc::new(|p: &[f64]| (p[0].cos() * p[1].sin() * p[2].cos()).powi(3)),
            amp: 0.5,
            field_label: "test".into(),
        };
        let err = |res: usize| {
            let v = volume(&conf, &m.grid(res).unwrap()).unwrap();
            let fine = volume(&conf, &m.grid(48).unwrap()).unwrap();
            (v - fine).abs()
        };
        assert!(err(4) >= 4.0 * err(8));
        let fv = with_error_estimate(32, Some(1e-6), |r| volume(&conf, &m.grid(r).unwrap())).unwrap();
        assert!(fv.estimated_error < 1e-6);
        assert!(matches!(
            with_error_estimate(4, Some(1e-14), |r| volume(&conf, &m.grid(r).unwrap())),
            Err(QuadratureError::ResolutionTooLow { .. })
        ));
    }
}
