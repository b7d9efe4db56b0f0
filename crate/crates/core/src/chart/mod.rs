//! Pointwise tensor calculus from coordinate charts by finite differences.

mod builtin;
mod curvature;
pub mod fd;
mod mat;
mod tensor;

use std::sync::Arc;

use thiserror::Error;

pub use builtin::{ConformalChart, FlatChart, FnChart, ProductChart, ScaledChart, SphereChart};
pub use curvature::{
    curvature_pack, einstein_residual, metric_jet, scalar_field_calculus, sigma_k, tensor_jet, CurvaturePack,
    MetricJet, ScalarCalculus, SymmetryResiduals, TensorJet,
};
pub use mat::{Mat, MAX_DIM};
pub use tensor::{covariant_derivatives, TensorDerivatives};

/// Default finite-difference step in chart coordinates.
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("coordinate {coord} on axis {axis} is within {margin} of the chart boundary")]
    NearBoundary { axis: usize, coord: f64, margin: f64 },
    #[error("metric is not invertible at {point:?} (condition number {cond:e})")]
    Singular { point: Vec<f64>, cond: f64 },
    #[error("point has {got} coordinates but the chart has dimension {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("schouten endomorphism has no real spectrum at this point")]
    Spectrum,
}

/// A coordinate box with a metric-component evaluator. Implementations must
/// be smooth enough on the box interior for fourth-order differencing and
/// must accept coordinates slightly past a periodic axis' bounds.
pub trait MetricChart: Send + Sync {
    fn dim(&self) -> usize;
    /// Closed interval per axis.
    fn domain(&self) -> Vec<(f64, f64)>;
    fn periodic(&self, _axis: usize) -> bool {
        false
    }
    fn metric_at(&self, p: &[f64]) -> Mat;
    /// The background metric ḡ; defaults to the chart metric itself.
    fn background_at(&self, p: &[f64]) -> Mat {
        self.metric_at(p)
    }
    fn label(&self) -> String;
}

impl<T: MetricChart + ?Sized> MetricChart for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        (**self).domain()
    }
    fn periodic(&self, axis: usize) -> bool {
        (**self).periodic(axis)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        (**self).metric_at(p)
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        (**self).background_at(p)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

impl<T: MetricChart + ?Sized> MetricChart for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        (**self).domain()
    }
    fn periodic(&self, axis: usize) -> bool {
        (**self).periodic(axis)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        (**self).metric_at(p)
    }
    fn background_at(&self, p: &[f64]) -> Mat {
        (**self).background_at(p)
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// Chart view of the background metric of another chart.
pub struct Background<C>(pub C);

impl<C: MetricChart> MetricChart for Background<C> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn domain(&self) -> Vec<(f64, f64)> {
        self.0.domain()
    }
    fn periodic(&self, axis: usize) -> bool {
        self.0.periodic(axis)
    }
    fn metric_at(&self, p: &[f64]) -> Mat {
        self.0.background_at(p)
    }
    fn label(&self) -> String {
        format!("background({})", self.0.label())
    }
}

/// Scalar field on chart coordinates.
pub trait ScalarField: Send + Sync {
    fn value(&self, p: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ScalarField for F {
    fn value(&self, p: &[f64]) -> f64 {
        self(p)
    }
}

/// Symmetric 2-tensor field `h_ij` on chart coordinates.
pub trait SymTensorField: Send + Sync {
    fn value(&self, p: &[f64]) -> Mat;
}

impl<F: Fn(&[f64]) -> Mat + Send + Sync> SymTensorField for F {
    fn value(&self, p: &[f64]) -> Mat {
        self(p)
    }
}

/// Stencil-margin and dimension check for a point.
pub fn check_point(chart: &dyn MetricChart, p: &[f64], margin: f64) -> Result<(), ChartError> {
    if p.len() != chart.dim() {
        return Err(ChartError::DimMismatch { expected: chart.dim(), got: p.len() });
    }
    if !(margin > 0.0) {
        return Err(ChartError::BadStep(margin));
    }
    for (axis, (&x, (lo, hi))) in p.iter().zip(chart.domain()).enumerate() {
        if chart.periodic(axis) {
            continue;
        }
        if x - lo < margin || hi - x < margin {
            return Err(ChartError::NearBoundary { axis, coord: x, margin });
        }
    }
    Ok(())
}

/// Largest step `≤ step` whose stencil of half-width `reach·step` stays
/// inside the chart at `p`. Quadrature nodes close to a coordinate
/// singularity get a proportionally finer stencil.
pub fn fit_step(chart: &dyn MetricChart, p: &[f64], step: f64, reach: f64) -> Result<f64, ChartError> {
    let mut s = step;
    for (axis, (&x, (lo, hi))) in p.iter().zip(chart.domain()).enumerate() {
        if chart.periodic(axis) {
            continue;
        }
        s = s.min((x - lo).min(hi - x) / (reach * 1.01));
        if s < step * 1e-2 {
            return Err(ChartError::NearBoundary { axis, coord: x, margin: reach * step });
        }
    }
    Ok(s)
}

pub(crate) fn invert(g: &Mat, p: &[f64]) -> Result<Mat, ChartError> {
    match g.inverse_with_cond() {
        Some((inv, cond)) if cond < 1e12 => Ok(inv),
        Some((_, cond)) => Err(ChartError::Singular { point: p.to_vec(), cond }),
        None => Err(ChartError::Singular { point: p.to_vec(), cond: f64::INFINITY }),
    }
}
