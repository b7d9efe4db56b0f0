//! Numeric first and second variations along metric paths, checked against
//! closed-form linearizations and integral identities around Einstein
//! backgrounds.

pub mod derivative;
pub mod identities;
pub mod linearization;
pub mod path;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::chart::{
    covariant_derivatives, curvature_pack, fit_step, scalar_field_calculus, ChartError, MetricChart, ScalarField,
};
use crate::exact::{ExactError, PiScalar, Rational};
use crate::homogeneous::{
    second_variation_closed_form, GeometryError, ParallelTTTensor, ParallelTensor, SphereProductFamily,
};
use crate::quadrature::{Manifold, QuadratureError, QuadratureGrid, ScaledProduct};
use crate::spectral::{HarmonicCombination, ZonalHarmonic};

pub use derivative::{numeric_derivative, numeric_derivatives, DerivativeEstimate, DEFAULT_SCHEDULE};
pub use identities::{classify_ring, RingClass, RingSummary};
pub use path::{
    background_family, factor_list, parallel_product_model, parallel_scales, trace_field, trace_free_field, tt_decompose,
    LinearPath, PathChart, PathJet, Perturbation, TTDecomposition,
};

use identities::{node_terms, term, NodeTerms};
use linearization::{d_ricci, d_scalar, d_sigma2_conformal, inner};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationError {
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("difference quotients diverge on refinement (spread {coarse:e} -> {fine:e})")]
    NonConvergent { coarse: f64, fine: f64 },
    #[error("step schedule must be positive and strictly decreasing, got {0:?}")]
    BadSchedule(Vec<f64>),
    #[error("expected {expected} coefficients, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("background is not Einstein: {0}")]
    NotEinstein(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown check `{0}`")]
    UnknownCheck(String),
    #[error("metric path leaves the positive cone: {0}")]
    PathInvalid(String),
}

/// Named checks. The string names are the CLI keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Check {
    /// `DH·h = 0` at an Einstein background.
    Criticality,
    /// `∫ h^{ij} R'_ij`
    HDotRicci,
    /// `∫ |Ric'|²`
    RicciSquare,
    /// `∫ ḡ^{ij} R''_ij`
    RicciSecondTrace,
    /// `∫ (R')²`
    ScalarSquare,
    /// `Vol^{-4/n} D²H`
    SecondVariation,
    /// `∫ D²σ₂` against its expression through `R'`, `R''`
    Sigma2Second,
    Volume1,
    Volume2,
    Scalar1,
    Ricci1,
    Sigma2First,
}

impl Check {
    pub const ALL: [Check; 12] = [
        Check::Criticality,
        Check::HDotRicci,
        Check::RicciSquare,
        Check::RicciSecondTrace,
        Check::ScalarSquare,
        Check::SecondVariation,
        Check::Sigma2Second,
        Check::Volume1,
        Check::Volume2,
        Check::Scalar1,
        Check::Ricci1,
        Check::Sigma2First,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Criticality => "prop3.1",
            Check::HDotRicci => "prop3.2",
            Check::RicciSquare => "prop3.3",
            Check::RicciSecondTrace => "prop3.4",
            Check::ScalarSquare => "prop3.5",
            Check::SecondVariation => "prop3.6",
            Check::Sigma2Second => "eq3.1",
            Check::Volume1 => "dvol",
            Check::Volume2 => "d2vol",
            Check::Scalar1 => "dr",
            Check::Ricci1 => "dric",
            Check::Sigma2First => "dsigma2",
        }
    }

    pub fn parse(s: &str) -> Result<Check, VariationError> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| VariationError::UnknownCheck(s.to_string()))
    }

    pub fn default_tolerance(self) -> f64 {
        match self {
            Check::Criticality | Check::Volume1 | Check::Sigma2First => 1e-6,
            Check::Volume2 | Check::Scalar1 | Check::Ricci1 => 1e-5,
            Check::Sigma2Second => 1e-3,
            _ => 1e-4,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    /// Quadrature resolution; `None` uses the manifold's default (8 for
    /// products integrated on a flattened grid).
    pub resolution: Option<usize>,
    /// Spatial step for curvature that is differentiated in `t`.
    pub step: f64,
    /// Spatial step for closed-form covariant derivatives.
    pub pointwise_step: f64,
    pub schedule: Vec<f64>,
    pub tolerance: Option<f64>,
    pub seed: u64,
    /// Sample points for pointwise checks and sample directions for criticality.
    pub samples: usize,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            resolution: None,
            step: 5e-3,
            pointwise_step: 1e-3,
            schedule: DEFAULT_SCHEDULE.to_vec(),
            tolerance: None,
            seed: 7,
            samples: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VariationReport {
    pub check: String,
    pub background: String,
    pub perturbation: String,
    pub numeric_value: f64,
    pub closed_form_value: f64,
    /// `|numeric − closed| / max(1, |closed|)`.
    pub residual: f64,
    pub step_schedule: Vec<f64>,
    pub richardson_order: u32,
    pub numeric_error_estimate: f64,
    pub spatial_step: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_resolution: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    pub tolerance: f64,
    pub passed: bool,
    pub details: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub exact: BTreeMap<String, String>,
}

/// `0, +h₁, −h₁, +h₂, …` for a schedule `h₁ > h₂ > …`.
fn t_points(schedule: &[f64]) -> Vec<f64> {
    std::iter::once(0.0).chain(schedule.iter().flat_map(|&h| [h, -h])).collect()
}

pub fn relative_residual(numeric: f64, closed: f64) -> f64 {
    (numeric - closed).abs() / closed.abs().max(1.0)
}

/// Runs checks for one background.
pub struct Lab {
    pub manifold: Manifold,
    pub config: LabConfig,
}

const NORMALIZED: &str = "Vol(g0)^(-4/n)";

impl Lab {
    pub fn new(manifold: Manifold) -> Self {
        Lab { manifold, config: LabConfig::default() }
    }

    pub fn with_config(manifold: Manifold, config: LabConfig) -> Self {
        Lab { manifold, config }
    }

    fn n(&self) -> usize {
        self.manifold.dim()
    }

    fn lambda(&self) -> Result<f64, VariationError> {
        self.manifold
            .einstein_lambda()
            .ok_or_else(|| VariationError::NotEinstein(self.manifold.chart().label()))
    }

    fn is_product(&self) -> bool {
        matches!(self.manifold, Manifold::Product { .. })
    }

    fn structural(&self, h: &Perturbation) -> bool {
        self.is_product() && matches!(h, Perturbation::Parallel(_) | Perturbation::Zero)
    }

    pub fn resolution(&self) -> usize {
        match (self.config.resolution, self.is_product()) {
            (Some(r), _) => r,
            (None, true) => 8,
            // differentiated integrands are smooth and low-degree; the
            // quadrature defaults would cost minutes per check on S³
            (None, false) => match self.manifold {
                Manifold::Sphere { n: 2, .. } => 32,
                Manifold::Sphere { n: 3, .. } => 16,
                Manifold::Sphere { .. } => 8,
                _ => 16,
            },
        }
    }

    /// Flattened grid; products above dimension 4 are too large for it.
    fn flat_grid(&self) -> Result<QuadratureGrid, VariationError> {
        if self.is_product() && self.n() > 4 {
            return Err(VariationError::Unsupported(format!(
                "pointwise integration on a {}-dimensional product; use a parallel direction or a product of dimension ≤ 4",
                self.n()
            )));
        }
        Ok(self.manifold.grid(self.resolution())?)
    }

    fn tolerance(&self, check: Check) -> f64 {
        self.config.tolerance.unwrap_or(check.default_tolerance())
    }

    /// Direction used when a check is run without one.
    pub fn default_perturbation(&self) -> Perturbation {
        match &self.manifold {
            Manifold::Sphere { n, r } => {
                Perturbation::conformal(ZonalHarmonic::polar(2, *n, *r), "harmonic:k=2")
            }
            Manifold::Torus { n } => {
                let mut c = vec![0i64; *n];
                c[0] = 1;
                if *n > 1 {
                    c[1] = -1;
                }
                Perturbation::parallel_ints(&c)
            }
            Manifold::Product { factors } => {
                // c_1 g_1 + c_2 g_2 traceless against ḡ: c_i m_i / r_i² cancel
                let mut c = vec![Rational::zero(); factors.len()];
                if factors.len() >= 2 {
                    let sq = |f: &Manifold| match f {
                        Manifold::Sphere { r, .. } => Rational::approximate(r * r, 1_000_000).unwrap_or(Rational::one()),
                        _ => Rational::one(),
                    };
                    let m = |f: &Manifold| Rational::from_int(f.dim() as i64);
                    c[0] = m(&factors[1]) * sq(&factors[0]);
                    c[1] = -(m(&factors[0]) * sq(&factors[1]));
                } else {
                    c[0] = Rational::one();
                }
                Perturbation::Parallel(c)
            }
        }
    }

    fn base_report(&self, check: Check, h: &Perturbation, numeric: f64, closed: f64) -> VariationReport {
        let residual = relative_residual(numeric, closed);
        let tolerance = self.tolerance(check);
        VariationReport {
            check: check.name().to_string(),
            background: self.manifold.chart().label(),
            perturbation: h.label(),
            numeric_value: numeric,
            closed_form_value: closed,
            residual,
            step_schedule: self.config.schedule.clone(),
            richardson_order: 2 * self.config.schedule.len() as u32,
            numeric_error_estimate: 0.0,
            spatial_step: self.config.step,
            grid_resolution: None,
            normalization: None,
            tolerance,
            passed: residual.is_finite() && residual < tolerance,
            details: BTreeMap::new(),
            exact: BTreeMap::new(),
        }
    }

    pub fn run(&self, check: Check, h: Option<&Perturbation>) -> Result<VariationReport, VariationError> {
        let default;
        let h = match h {
            Some(h) => h,
            None if check == Check::Criticality => return self.criticality(None),
            None => {
                default = self.default_perturbation();
                &default
            }
        };
        match check {
            Check::Criticality => self.criticality(Some(h)),
            Check::Volume1 => self.volume_check(h, 1),
            Check::Volume2 => self.volume_check(h, 2),
            Check::Scalar1 | Check::Ricci1 | Check::Sigma2First => self.pointwise_check(check, h),
            Check::HDotRicci
            | Check::RicciSquare
            | Check::RicciSecondTrace
            | Check::ScalarSquare
            | Check::Sigma2Second => self.identity_check(check, h),
            Check::SecondVariation => self.second_variation(h),
        }
    }

    // ---- global functionals -------------------------------------------------

    /// Per-factor model of `ḡ + t·Σ c_i g_i` on a product.
    fn path_for(&self, h: &Perturbation) -> Result<Option<LinearPath>, VariationError> {
        if self.structural(h) {
            Ok(None)
        } else {
            Ok(Some(h.path(&self.manifold)?))
        }
    }

    /// Derivatives of `[Vol, ∫σ₂ dv_ḡ, H]` (or `[Vol]`) along `ḡ + t·h`, and `Vol(ḡ)`.
    fn functional_derivatives(
        &self,
        h: &Perturbation,
        volume_only: bool,
    ) -> Result<(DerivativeEstimate, DerivativeEstimate, f64), VariationError> {
        let n = self.n() as f64;
        let finish = |v: f64, s: f64| if volume_only { vec![v] } else { vec![v, s, v.powf(4.0 / n) * s] };
        let table = match self.path_for(h)? {
            None => {
                let c = match h {
                    Perturbation::Parallel(c) => c.clone(),
                    _ => vec![Rational::zero(); factor_list(&self.manifold).len()],
                };
                let domain = self.manifold.domain(self.resolution())?;
                let charts: Vec<Arc<dyn MetricChart>> =
                    factor_list(&self.manifold).iter().map(|f| f.chart()).collect();
                // factor curvature is computed once; scaling is applied exactly
                let base = ScaledProduct::new(&domain, &charts, self.config.step)?;
                t_points(&self.config.schedule)
                    .into_iter()
                    .map(|t| {
                        let (v, s) = base.volume_and_sigma2(&parallel_scales(&self.manifold, &c, t)?);
                        Ok((t, finish(v, if volume_only { 0.0 } else { s })))
                    })
                    .collect::<Result<Vec<_>, VariationError>>()?
            }
            Some(path) => self.path_functionals(&path, volume_only)?.into_iter().map(|(t, v, s)| (t, finish(v, s))).collect(),
        };
        let v0 = table[0].1[0];
        let lookup = |t: f64| -> Result<Vec<f64>, VariationError> {
            Ok(table.iter().find(|(x, _)| *x == t).map(|(_, v)| v.clone()).expect("t is on the schedule"))
        };
        let (d1, d2) = numeric_derivatives(lookup, &self.config.schedule)?;
        Ok((d1, d2, v0))
    }

    /// `(t, Vol(g_t), ∫σ₂(g_t) dv_ḡ)` at every schedule point from one pass
    /// over the grid, using per-node jets.
    fn path_functionals(&self, path: &LinearPath, volume_only: bool) -> Result<Vec<(f64, f64, f64)>, VariationError> {
        let ts = t_points(&self.config.schedule);
        let grid = self.flat_grid()?;
        let bg = path.base.as_ref();
        let step = self.config.step;
        let per_node = grid.map(|p| -> Result<Vec<f64>, VariationError> {
            let jet = PathJet::new(path, p, fit_step(bg, p, step, 2.0)?)?;
            let mut out = Vec::with_capacity(2 * ts.len());
            for &t in &ts {
                out.push(jet.density(t)?);
                out.push(if volume_only { 0.0 } else { jet.pack(t)?.sigma2 });
            }
            Ok(out)
        })?;
        let column = |k: usize| grid.weighted_sum(&per_node.iter().map(|v| v[k]).collect::<Vec<_>>());
        Ok(ts.iter().enumerate().map(|(i, &t)| (t, column(2 * i), column(2 * i + 1))).collect())
    }

    fn volume_check(&self, h: &Perturbation, order: u8) -> Result<VariationReport, VariationError> {
        let check = if order == 1 { Check::Volume1 } else { Check::Volume2 };
        let (d1, d2, v0) = self.functional_derivatives(h, true)?;
        let d = if order == 1 { &d1 } else { &d2 };
        let closed = if let (true, Perturbation::Parallel(c)) = (self.structural(h), h) {
            let (tr, norm_sq) = parallel_trace_and_norm(&self.manifold, c)?;
            if order == 1 {
                0.5 * tr * v0
            } else {
                0.25 * (tr * tr - 2.0 * norm_sq) * v0
            }
        } else if matches!(h, Perturbation::Zero) {
            0.0
        } else {
            let grid = self.flat_grid()?;
            let field = h.field(&self.manifold)?;
            let chart = self.manifold.chart();
            grid.integrate(|p| -> Result<f64, VariationError> {
                let g = chart.background_at(p);
                let ginv = g.inverse().ok_or(ChartError::Singular { point: p.to_vec(), cond: f64::INFINITY })?;
                let hv = field.value(p);
                let tr = ginv.dot(&hv);
                Ok(if order == 1 { 0.5 * tr } else { 0.25 * (tr * tr - 2.0 * inner(&hv, &hv, &ginv)) })
            })?
        };
        let mut r = self.base_report(check, h, d.scalar(), closed);
        r.numeric_error_estimate = d.max_error();
        r.grid_resolution = Some(self.resolution());
        r.details.insert("volume".into(), v0);
        Ok(r)
    }

    // ---- pointwise linearizations --------------------------------------------

    /// Deterministic interior points away from coordinate singularities.
    pub fn sample_points(&self) -> Vec<Vec<f64>> {
        let chart = self.manifold.chart();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        (0..self.config.samples.max(1))
            .map(|_| {
                chart
                    .domain()
                    .iter()
                    .enumerate()
                    .map(|(a, (lo, hi))| {
                        let len = hi - lo;
                        if chart.periodic(a) {
                            lo + len * unit()
                        } else {
                            lo + len * (0.15 + 0.7 * unit())
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn pointwise_check(&self, check: Check, h: &Perturbation) -> Result<VariationReport, VariationError> {
        let n = self.n();
        let chart = self.manifold.chart();
        let field = h.field(&self.manifold)?;
        let path = LinearPath::new(chart.clone(), field.clone());
        let lambda = if check == Check::Sigma2First { Some(self.lambda()?) } else { None };
        let u_field = trace_field(chart.clone(), field.clone());
        let step = self.config.step;
        let pstep = self.config.pointwise_step;

        let mut worst = (0.0f64, 0.0f64, -1.0f64);
        let mut err = 0.0f64;
        let mut closed_max = 0.0f64;
        for p in self.sample_points() {
            let jet = PathJet::new(&path, &p, step)?;
            let values = |t: f64| -> Result<Vec<f64>, VariationError> {
                let pack = jet.pack(t)?;
                Ok(match check {
                    Check::Ricci1 => pack.ricci.to_rows().into_iter().flatten().collect(),
                    Check::Scalar1 => vec![pack.scalar],
                    _ => vec![pack.sigma2],
                })
            };
            let d = numeric_derivative(values, 1, &self.config.schedule)?;
            err = err.max(d.max_error());
            let (num, closed): (Vec<f64>, Vec<f64>) = match check {
                Check::Sigma2First => {
                    let g = chart.background_at(&p);
                    let ginv = g.inverse().ok_or(ChartError::Singular { point: p.clone(), cond: f64::INFINITY })?;
                    let tt = tt_decompose(&field.value(&p), &g, &ginv);
                    if tt.h_ring.max_abs() > 1e-10 * (1.0 + tt.u.abs()) {
                        return Err(VariationError::Unsupported(
                            "dsigma2 has a closed form only for conformal directions h = (u/n)ḡ".into(),
                        ));
                    }
                    let uc = scalar_field_calculus(chart.as_ref(), &u_field, &p, pstep)?;
                    (d.value.clone(), vec![d_sigma2_conformal(n, lambda.unwrap_or(0.0), uc.value, uc.laplacian)])
                }
                _ => {
                    let pack0 = curvature_pack(chart.as_ref(), &p, pstep)?;
                    let td = covariant_derivatives(chart.as_ref(), field.as_ref(), &p, pstep)?;
                    if check == Check::Ricci1 {
                        (d.value.clone(), d_ricci(&pack0, &td).to_rows().into_iter().flatten().collect())
                    } else {
                        (d.value.clone(), vec![d_scalar(&pack0, &td)])
                    }
                }
            };
            let scale = closed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            closed_max = closed_max.max(scale);
            for (a, b) in num.iter().zip(&closed) {
                let res = (a - b).abs() / scale.max(1.0);
                if res > worst.2 {
                    worst = (*a, *b, res);
                }
            }
        }
        let mut r = self.base_report(check, h, worst.0, worst.1);
        // residual is taken against the largest closed-form component at the point
        r.residual = worst.2;
        r.passed = r.residual.is_finite() && r.residual < r.tolerance;
        r.numeric_error_estimate = err;
        r.details.insert("points".into(), self.config.samples.max(1) as f64);
        r.details.insert("maxAbsClosedForm".into(), closed_max);
        r.details.insert("pointwiseStep".into(), pstep);
        if check == Check::Sigma2First {
            self.integrated_dsigma2(h, lambda.unwrap_or(0.0), &mut r)?;
        }
        Ok(r)
    }

    /// `∫Dσ₂·h` against `−(n−1)(n−2)²λ²/4 ∫u`.
    fn integrated_dsigma2(&self, h: &Perturbation, lambda: f64, r: &mut VariationReport) -> Result<(), VariationError> {
        let nf = self.n() as f64;
        let (d1, _, v0) = self.functional_derivatives(h, false)?;
        let int_u = if let (true, Perturbation::Parallel(c)) = (self.structural(h), h) {
            parallel_trace_and_norm(&self.manifold, c)?.0 * v0
        } else {
            let grid = self.flat_grid()?;
            let u = trace_field(self.manifold.chart(), h.field(&self.manifold)?);
            grid.integrate(|p| -> Result<f64, VariationError> { Ok(u.value(p)) })?
        };
        let closed = -(nf - 1.0) * (nf - 2.0) * (nf - 2.0) * lambda * lambda / 4.0 * int_u;
        let res = relative_residual(d1.value[1], closed);
        r.details.insert("integratedNumeric".into(), d1.value[1]);
        r.details.insert("integratedClosedForm".into(), closed);
        r.details.insert("integratedResidual".into(), res);
        r.grid_resolution = Some(self.resolution());
        r.passed &= res < r.tolerance;
        Ok(())
    }

    // ---- integral identities -------------------------------------------------

    fn integrate_terms(&self, h: &Perturbation, with_path: bool) -> Result<(NodeTerms, RingSummary, f64), VariationError> {
        let lambda = self.lambda()?;
        let chart = self.manifold.chart();
        let field = h.field(&self.manifold)?;
        let ring = classify_ring(chart.clone(), field.clone(), &self.sample_points(), self.config.pointwise_step)?;
        let grid = self.flat_grid()?;
        let path = LinearPath::new(chart, field);
        let values = grid.map(|p| node_terms(&path, p, lambda, self.config.step, &self.config.schedule, with_path))?;
        let mut sums = [0.0; term::COUNT];
        for (k, s) in sums.iter_mut().enumerate() {
            *s = grid.weighted_sum(&values.iter().map(|v| v[k]).collect::<Vec<_>>());
        }
        Ok((sums, ring, grid.total_weight()))
    }

    fn identity_check(&self, check: Check, h: &Perturbation) -> Result<VariationReport, VariationError> {
        use term::*;
        let n = self.n() as f64;
        let lambda = self.lambda()?;
        let (s, ring, vol) = self.integrate_terms(h, true)?;
        let (lhs, rhs) = match check {
            Check::HDotRicci => (s[H_DOT_RIC1], -0.5 * s[RING_LRING] + (n - 1.0) / (n * n) * s[GRAD_U_SQ]),
            Check::RicciSquare => (
                s[RIC1_SQ],
                0.25 * s[LRING_SQ] + (n - 1.0) / (4.0 * n) * s[LAP_U_SQ]
                    - (n - 1.0) * (n - 2.0) * (n - 2.0) / (4.0 * n * n) * lambda * s[GRAD_U_SQ],
            ),
            Check::RicciSecondTrace => (
                s[TR_RIC2],
                -0.5 * s[RING_LRING] - (n - 1.0) * (n - 2.0) / (2.0 * n * n) * s[GRAD_U_SQ],
            ),
            Check::ScalarSquare => {
                let c = (n - 1.0) * (n - 1.0);
                (
                    s[SCAL1_SQ],
                    c / (n * n) * s[LAP_U_SQ] - 2.0 * c / n * lambda * s[GRAD_U_SQ] + c * lambda * lambda * s[U_SQ],
                )
            }
            Check::Sigma2Second => (s[SIGMA2_2], s[SIGMA2_2_CLOSED]),
            _ => unreachable!(),
        };
        let mut r = self.base_report(check, h, lhs, rhs);
        r.grid_resolution = Some(self.resolution());
        r.numeric_error_estimate = if check == Check::Sigma2Second { s[SIGMA2_2_ERR] } else { f64::NAN };
        if !r.numeric_error_estimate.is_finite() {
            r.numeric_error_estimate = 0.0;
        }
        r.details.insert("lambda".into(), lambda);
        r.details.insert("volume".into(), vol);
        r.details.insert("ringMaxAbs".into(), ring.max_abs);
        r.details.insert("ringNablaMax".into(), ring.nabla_max);
        r.details.insert("ringDivergenceMax".into(), ring.divergence_max);
        r.details.insert("gradUSq".into(), s[GRAD_U_SQ]);
        r.details.insert("uSq".into(), s[U_SQ]);
        Ok(r)
    }

    // ---- second variation of H ------------------------------------------------

    fn second_variation(&self, h: &Perturbation) -> Result<VariationReport, VariationError> {
        let n = self.n() as f64;
        let lambda = self.lambda()?;
        let (_, d2, v0) = self.functional_derivatives(h, false)?;
        let norm = v0.powf(-4.0 / n);
        let numeric = d2.value[2] * norm;
        let error = d2.error[2] * norm;

        let mut exact = BTreeMap::new();
        let mut details = BTreeMap::new();
        let closed = match h {
            Perturbation::Parallel(c) if self.structural(h) => {
                let (closed, series) = self.exact_second_variation(c)?;
                exact.insert("closedForm".to_string(), closed.to_string());
                if let Some(s) = &series {
                    exact.insert("series".to_string(), s.to_string());
                    exact.insert("routesAgree".to_string(), (s == &closed).to_string());
                    details.insert("seriesValue".to_string(), s.to_f64());
                }
                closed.to_f64()
            }
            Perturbation::Zero => 0.0,
            _ => {
                use term::*;
                let (s, ring, vol) = self.integrate_terms(h, false)?;
                let ubar = s[U] / vol;
                let centered = s[U_SQ] - ubar * ubar * vol;
                let u_bracket = s[GRAD_U_SQ] - n * lambda * centered;
                let ring_part = -0.25 * (s[ERING_SQ] - (n - 2.0) * (n - 2.0) * lambda / 2.0 * s[RING_ERING]);
                let k = (n - 1.0) * (n - 2.0) * (n - 2.0) * (n + 4.0) * lambda / (8.0 * n * n);
                details.insert("ringMaxAbs".into(), ring.max_abs);
                details.insert("ringPart".into(), ring_part);
                details.insert("uBracket".into(), u_bracket);
                details.insert("centeredL2".into(), centered);
                ring_part - k * u_bracket
            }
        };
        let mut r = self.base_report(Check::SecondVariation, h, numeric, closed);
        r.numeric_error_estimate = error;
        r.grid_resolution = Some(self.resolution());
        r.normalization = Some(NORMALIZED.into());
        r.details = details;
        r.details.insert("volume".into(), v0);
        if exact.get("routesAgree").is_some_and(|v| v != "true") {
            r.passed = false;
        }
        r.exact = exact;
        Ok(r)
    }

    /// Closed-form and series routes for a parallel direction on a sphere product.
    fn exact_second_variation(&self, c: &[Rational]) -> Result<(PiScalar, Option<PiScalar>), VariationError> {
        let bg = background_family(&self.manifold)?;
        let ring = traceless_coefficients(&self.manifold, c)?;
        let closed = if ring.iter().all(Rational::is_zero) {
            PiScalar::zero()
        } else {
            second_variation_closed_form(&bg, &ParallelTTTensor::new(&bg, ParallelTensor::new(ring))?)?
        };
        let fam = SphereProductFamily::linear_path(&bg, &ParallelTensor::new(c.to_vec()))?;
        let series = match fam.h_second_derivative_normalized() {
            Ok(s) => Some(s),
            Err(GeometryError::DegenerateSigma2) => None,
            Err(e) => return Err(e.into()),
        };
        Ok((closed, series))
    }

    // ---- criticality ---------------------------------------------------------------

    /// Random conformal directions (low harmonics on spheres, low Fourier
    /// modes on tori).
    pub fn sample_directions(&self) -> Vec<Perturbation> {
        let count = self.config.samples.max(1) * 2;
        (0..count as u64)
            .map(|i| {
                let seed = self.config.seed.wrapping_mul(1000).wrapping_add(i);
                match &self.manifold {
                    Manifold::Sphere { n, r } => {
                        Perturbation::conformal(HarmonicCombination::random(*n, *r, 3, seed), format!("random:seed={seed}"))
                    }
                    _ => {
                        let n = self.n();
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        let k: Vec<f64> = (0..n).map(|_| (rng.next_u32() % 3) as f64).collect();
                        let a = (rng.next_u32() % 1000) as f64 / 1000.0;
                        Perturbation::conformal(
                            move |p: &[f64]| a + (k.iter().zip(p).map(|(k, x)| k * x).sum::<f64>()).cos(),
                            format!("fourier:seed={seed}"),
                        )
                    }
                }
            })
            .collect()
    }

    fn criticality(&self, h: Option<&Perturbation>) -> Result<VariationReport, VariationError> {
        self.lambda()?;
        let exact_route = self.is_product() && h.is_none_or(|h| self.structural(h)) && background_family(&self.manifold).is_ok();
        if exact_route {
            let k = factor_list(&self.manifold).len();
            let dirs: Vec<Vec<Rational>> = match h {
                Some(Perturbation::Parallel(c)) => vec![c.clone()],
                Some(_) => vec![vec![Rational::zero(); k]],
                None => {
                    let mut v: Vec<Vec<Rational>> = (0..k)
                        .map(|i| (0..k).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
                        .collect();
                    if let Perturbation::Parallel(c) = self.default_perturbation() {
                        v.push(c);
                    }
                    v
                }
            };
            let bg = background_family(&self.manifold)?;
            let mut worst = Rational::zero();
            let mut numeric_max = 0.0f64;
            let mut coeffs = Vec::new();
            for c in &dirs {
                let fam = SphereProductFamily::linear_path(&bg, &ParallelTensor::new(c.clone()))?;
                let series = match fam.h_functional_series(1) {
                    Ok(s) => s,
                    Err(GeometryError::DegenerateSigma2) => fam.h_functional_series_unnormalized(1)?,
                    Err(e) => return Err(e.into()),
                };
                let t1 = series.coeff(1);
                if t1.abs() > worst.abs() {
                    worst = t1.clone();
                }
                coeffs.push(t1.to_string());
                let p = Perturbation::Parallel(c.clone());
                let (d1, _, v0) = self.functional_derivatives(&p, false)?;
                numeric_max = numeric_max.max((d1.value[2] * v0.powf(-4.0 / self.n() as f64)).abs());
            }
            let label = h.map_or_else(|| format!("{} parallel directions", dirs.len()), Perturbation::label);
            let mut r = self.base_report(Check::Criticality, &Perturbation::Zero, worst.to_f64(), 0.0);
            r.perturbation = label;
            r.passed = worst.is_zero() && r.passed;
            r.normalization = Some(NORMALIZED.into());
            r.exact.insert("t1Coefficients".into(), coeffs.join(", "));
            r.details.insert("numericMax".into(), numeric_max);
            r.details.insert("directions".into(), dirs.len() as f64);
            return Ok(r);
        }

        let dirs = match h {
            Some(h) => vec![h.clone()],
            None => self.sample_directions(),
        };
        let n = self.n() as f64;
        let mut worst = 0.0f64;
        let mut err = 0.0f64;
        for d in &dirs {
            let (d1, _, v0) = self.functional_derivatives(d, false)?;
            let norm = v0.powf(-4.0 / n);
            let v = d1.value[2] * norm;
            if v.abs() > worst.abs() {
                worst = v;
            }
            err = err.max(d1.error[2] * norm);
        }
        let label = match h {
            Some(h) => h.label(),
            None => format!("{} sampled conformal directions (seed {})", dirs.len(), self.config.seed),
        };
        let mut r = self.base_report(Check::Criticality, &Perturbation::Zero, worst, 0.0);
        r.perturbation = label;
        r.numeric_error_estimate = err;
        r.grid_resolution = Some(self.resolution());
        r.normalization = Some(NORMALIZED.into());
        r.details.insert("directions".into(), dirs.len() as f64);
        Ok(r)
    }
}

/// `tr_ḡ h` and `|h|²_ḡ` for a parallel direction (both constant).
fn parallel_trace_and_norm(manifold: &Manifold, c: &[Rational]) -> Result<(f64, f64), VariationError> {
    let field = Perturbation::Parallel(c.to_vec()).field(manifold)?;
    let chart = manifold.chart();
    let p: Vec<f64> = chart.domain().iter().map(|(lo, hi)| 0.5 * (lo + hi) + 0.1).collect();
    let g = chart.background_at(&p);
    let ginv = g.inverse().ok_or(ChartError::Singular { point: p.clone(), cond: f64::INFINITY })?;
    let h = field.value(&p);
    Ok((ginv.dot(&h), inner(&h, &h, &ginv)))
}

/// Coefficients of `h̊` in unit-factor metrics: `c_i − u·r_i²/n`.
fn traceless_coefficients(manifold: &Manifold, c: &[Rational]) -> Result<Vec<Rational>, VariationError> {
    let bg = background_family(manifold)?;
    let scales = bg.scales_at_zero()?;
    let n = Rational::from_int(bg.dim() as i64);
    let mut u = Rational::zero();
    for ((f, ci), s) in bg.factors().iter().zip(c).zip(&scales) {
        u += &(Rational::from_int(f.dim as i64) * ci / s);
    }
    Ok(c.iter().zip(&scales).map(|(ci, s)| ci - &(&u * s / &n)).collect())
}

#[cfg(test)]
mod tests;
