use std::sync::Arc;

use serde::Serialize;

use sigma2_core::chart::{curvature_pack, einstein_residual, MetricChart, ProductChart, ScaledChart, SphereChart};
use sigma2_core::exact::Rational;
use sigma2_core::homogeneous::{GeometryError, SphereProductFamily};
use sigma2_core::quadrature::{
    sigma2_integral, volume, FunctionalValue, Manifold, QuadratureError, ScaledProduct,
};
use sigma2_core::registry::Background;
use sigma2_core::spectral::{obata_report, HarmonicCombination, ObataReport, ZonalHarmonic};
use sigma2_core::variation::{Check, Lab, LabConfig};

use crate::report::{relative, sci, CliError, Outcome, Table};
use crate::{CurvatureArgs, FunctionalArgs, ObataArgs, VerifyArgs};

pub fn verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let check = Check::parse(&args.check)?;
    let bg = Background::parse(&args.background)?;
    let manifold = bg.standard_manifold()?.clone();
    let h = args.h.as_deref().map(|s| bg.perturbation(s)).transpose()?;
    let mut config = LabConfig { resolution: args.resolution, tolerance: args.tolerance, seed: args.seed, ..LabConfig::default() };
    if let Some(step) = args.step {
        config.step = step;
    }
    if let Some(k) = args.order {
        if k == 0 {
            return Err(CliError::Usage("--order must be at least 1".into()));
        }
        config.schedule = (0..k).map(|i| 1e-2 / f64::from(1u32 << i)).collect();
    }
    let lab = Lab::with_config(manifold, config);
    let report = lab.run(check, h.as_ref())?;

    let mut t = Table::default();
    t.row("check", &report.check)
        .row("background", &report.background)
        .row("perturbation", &report.perturbation)
        .row("numeric", sci(report.numeric_value))
        .row("closed form", sci(report.closed_form_value))
        .row("residual", sci(report.residual))
        .row("tolerance", sci(report.tolerance));
    if let Some(r) = report.grid_resolution {
        t.row("grid resolution", r);
    }
    if let Some(n) = &report.normalization {
        t.row("normalization", n);
    }
    for (k, v) in &report.details {
        t.row(k.as_str(), sci(*v));
    }
    for (k, v) in &report.exact {
        t.row(format!("exact {k}"), v);
    }
    let passed = report.passed;
    Ok(Outcome::new("verify", &report, t.render(), passed))
}

/// Factor charts of `g_t` for a sphere-product family, unit spheres scaled by `a_i(t)`.
fn family_chart(fam: &SphereProductFamily, t: &Rational) -> Result<Arc<dyn MetricChart>, CliError> {
    fam.check_positive_at(t.to_f64())?;
    let factors = fam
        .factors()
        .iter()
        .map(|f| {
            let c = f.scale.eval(t)?.to_f64();
            Ok(Arc::new(ScaledChart { base: Arc::new(SphereChart::new(f.dim, 1.0)), c }) as Arc<dyn MetricChart>)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(if factors.len() == 1 { factors[0].clone() } else { Arc::new(ProductChart::new(factors)) })
}

fn parse_rational(flag: &str, s: &str) -> Result<Rational, CliError> {
    s.trim().parse().map_err(|_| CliError::Usage(format!("bad value `{s}` for {flag}")))
}

/// A point safely inside the chart: the box centre, nudged off symmetric
/// positions on non-periodic axes.
fn default_point(chart: &dyn MetricChart) -> Vec<f64> {
    chart
        .domain()
        .iter()
        .enumerate()
        .map(|(i, (lo, hi))| {
            let mid = 0.5 * (lo + hi);
            if chart.periodic(i) {
                mid
            } else {
                mid + 0.3 * (0.5 * (hi - lo)).min(1.0)
            }
        })
        .collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CurvatureCheck {
    name: &'static str,
    value: f64,
    tolerance: f64,
    passed: bool,
}

fn bound(name: &'static str, value: f64, tolerance: f64) -> CurvatureCheck {
    CurvatureCheck { name, value, tolerance, passed: value.is_finite() && value < tolerance }
}

pub fn curvature(args: &CurvatureArgs) -> Result<Outcome, CliError> {
    let bg = Background::parse(&args.background)?;
    let t = args.t.as_deref().map(|s| parse_rational("--t", s)).transpose()?;
    let (chart, exact) = match (&bg.family, &t) {
        (Some(fam), Some(t)) => (family_chart(fam, t)?, Some((fam.clone(), t.clone()))),
        (None, Some(_)) => return Err(CliError::Usage(format!("--t needs a family background, not `{}`", bg.name))),
        (Some(fam), None) => (bg.chart.clone(), Some((fam.clone(), Rational::zero()))),
        (None, None) => (bg.chart.clone(), None),
    };
    let point = match &args.point {
        Some(s) => s
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad coordinate `{v}` in --point"))))
            .collect::<Result<Vec<_>, _>>()?,
        None => default_point(chart.as_ref()),
    };
    if point.len() != chart.dim() {
        return Err(CliError::Usage(format!("--point has {} coordinates, chart has {}", point.len(), chart.dim())));
    }
    let pack = curvature_pack(chart.as_ref(), &point, args.step)?;
    let n = pack.dim;
    let via_eigen = pack.sigma2_from_eigenvalues()?;
    let eigen = pack.schouten_eigenvalues()?;
    let sym = pack.symmetry_residuals();

    let mut checks = vec![
        bound("sigma2TwoRoute", (via_eigen - pack.sigma2).abs() / pack.sigma2.abs().max(1.0), 1e-8),
        bound("riemannSymmetry", sym.max(), 1e-7),
    ];
    if n >= 3 {
        checks.push(bound("weylTrace", pack.weyl_trace_residual(), 1e-6));
    }
    let mut exact_values = None;
    if let Some((fam, t)) = &exact {
        let (r, ric2) = fam.ricci_invariants()?;
        let s2 = fam.sigma2()?;
        let (r, ric2, s2) = (r.eval(t)?, ric2.eval(t)?, s2.eval(t)?);
        checks.push(bound("scalarExact", relative(pack.scalar, r.to_f64()), 1e-7));
        checks.push(bound("ricciNormExact", relative(pack.ricci_norm_sq(), ric2.to_f64()), 1e-7));
        checks.push(bound("sigma2Exact", relative(pack.sigma2, s2.to_f64()), 1e-7));
        if fam.factors().len() == 1 && n >= 3 {
            // round spheres are conformally flat
            checks.push(bound("weylVanishes", pack.weyl_max_abs(), 1e-6));
        }
        exact_values = Some((r.to_string(), ric2.to_string(), s2.to_string()));
    }
    let passed = checks.iter().all(|c| c.passed);

    let mut tab = Table::default();
    tab.row("chart", chart.label())
        .row("point", point.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", "))
        .row("scalar", format!("{:.12}", pack.scalar))
        .row("|Ric|^2", format!("{:.12}", pack.ricci_norm_sq()))
        .row("sigma2", format!("{:.12}", pack.sigma2))
        .row("Schouten eigenvalues", eigen.iter().map(|e| format!("{e:.10}")).collect::<Vec<_>>().join(", "))
        .row("Einstein residual", sci(einstein_residual(&pack)))
        .row("max |W|", sci(pack.weyl_max_abs()));
    if let Some((r, ric2, s2)) = &exact_values {
        tab.row("exact scalar", r).row("exact |Ric|^2", ric2).row("exact sigma2", s2);
    }
    for c in &checks {
        tab.row(c.name, format!("{} ({})", sci(c.value), if c.passed { "ok" } else { "FAIL" }));
    }

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Payload {
        chart: String,
        point: Vec<f64>,
        step: f64,
        scalar: f64,
        ricci_norm_sq: f64,
        sigma2: f64,
        sigma2_from_eigenvalues: f64,
        schouten_eigenvalues: Vec<f64>,
        einstein_residual: f64,
        weyl_max_abs: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        exact: Option<ExactCurvature>,
        checks: Vec<CurvatureCheck>,
    }
    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct ExactCurvature {
        scalar: String,
        ricci_norm_sq: String,
        sigma2: String,
    }
    let payload = Payload {
        chart: chart.label(),
        point,
        step: args.step,
        scalar: pack.scalar,
        ricci_norm_sq: pack.ricci_norm_sq(),
        sigma2: pack.sigma2,
        sigma2_from_eigenvalues: via_eigen,
        schouten_eigenvalues: eigen,
        einstein_residual: einstein_residual(&pack),
        weyl_max_abs: pack.weyl_max_abs(),
        exact: exact_values.map(|(scalar, ricci_norm_sq, sigma2)| ExactCurvature { scalar, ricci_norm_sq, sigma2 }),
        checks,
    };
    Ok(Outcome::new("curvature", payload, tab.render(), passed))
}

/// How the numeric route evaluates `(Vol, ∫σ₂ dv_ḡ)` for a metric `s·g`.
enum Route {
    /// Per-factor sums taken once, then scaled exactly.
    Structural { manifold: Manifold, charts: Vec<Arc<dyn MetricChart>>, scales: Vec<f64> },
    Chart { manifold: Manifold, chart: Arc<dyn MetricChart> },
}

impl Route {
    fn dim(&self) -> usize {
        match self {
            Route::Structural { manifold, .. } | Route::Chart { manifold, .. } => manifold.dim(),
        }
    }

    /// Volume, `∫σ₂` and `H` of `s·g` at resolution `res`.
    fn evaluate(&self, res: usize, s: f64, step: f64) -> Result<[f64; 3], QuadratureError> {
        let n = self.dim() as f64;
        let (v, i) = match self {
            Route::Structural { manifold, charts, scales } => {
                let sp = ScaledProduct::new(&manifold.domain(res)?, charts, step)?;
                let scaled: Vec<f64> = scales.iter().map(|a| a * s).collect();
                sp.volume_and_sigma2(&scaled)
            }
            Route::Chart { manifold, chart } => {
                let grid = manifold.grid(res)?;
                let g: Arc<dyn MetricChart> =
                    if s == 1.0 { chart.clone() } else { Arc::new(ScaledChart { base: chart.clone(), c: s }) };
                (volume(g.as_ref(), &grid)?, sigma2_integral(g.as_ref(), &grid, step)?)
            }
        };
        Ok([v, i, v.powf(4.0 / n) * i])
    }

    fn values(&self, res: usize, s: f64, step: f64) -> Result<[FunctionalValue; 3], CliError> {
        let fine = self.evaluate(res, s, step)?;
        let coarse = self.evaluate((res / 2).max(2), s, step)?;
        Ok([0, 1, 2].map(|k| FunctionalValue {
            value: fine[k],
            estimated_error: (fine[k] - coarse[k]).abs(),
            grid_resolution: res,
        }))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ExactFunctional {
    volume: String,
    sigma2_integral: String,
    h: f64,
    h_series: String,
    /// Divisor of `H(g_t)` in `h_series`; `H(g0)` unless `σ₂(ḡ) = 0`.
    h_series_normalization: &'static str,
}

pub fn functional(args: &FunctionalArgs) -> Result<Outcome, CliError> {
    let bg = Background::parse(&args.background)?;
    let manifold = bg.quadrature_manifold()?.clone();
    let t = args.t.as_deref().map(|s| parse_rational("--t", s)).transpose()?;
    if t.is_some() && bg.family.is_none() {
        return Err(CliError::Usage(format!("--t needs a family background, not `{}`", bg.name)));
    }
    let tq = t.clone().unwrap_or_else(Rational::zero);
    let res = args.resolution.unwrap_or_else(|| manifold.default_resolution());

    let route = match (&manifold, &bg.family) {
        (Manifold::Product { factors }, Some(fam)) => {
            fam.check_positive_at(tq.to_f64())?;
            let a0 = fam.scales_at_zero()?;
            let scales = fam
                .factors()
                .iter()
                .zip(&a0)
                .map(|(f, a)| Ok((&f.scale.eval(&tq)? / a).to_f64()))
                .collect::<Result<Vec<_>, CliError>>()?;
            Route::Structural { manifold: manifold.clone(), charts: factors.iter().map(Manifold::chart).collect(), scales }
        }
        (_, Some(fam)) if t.is_some() => {
            let a = &fam.factors()[0].scale;
            let c = (&a.eval(&tq)? / &a.at_zero()?).to_f64();
            Route::Chart { manifold: manifold.clone(), chart: Arc::new(ScaledChart { base: bg.chart.clone(), c }) }
        }
        _ => Route::Chart { manifold: manifold.clone(), chart: bg.chart.clone() },
    };
    let [vol, int, h] = route.values(res, 1.0, args.step)?;

    let exact = match &bg.family {
        Some(fam) => {
            let (ratio, base) = fam.volume()?;
            let n = fam.dim() as f64;
            let v = base.scale(&ratio.eval(&tq)?);
            let i = base.scale(&fam.sigma2()?.eval(&tq)?);
            let (series, normalization) = match fam.h_functional_series(args.order) {
                Ok(s) => (s, "H(g0)"),
                Err(GeometryError::DegenerateSigma2) => {
                    (fam.h_functional_series_unnormalized(args.order)?, "Vol(g0)^(4/n)")
                }
                Err(e) => return Err(e.into()),
            };
            Some(ExactFunctional {
                h: v.to_f64().powf(4.0 / n) * i.to_f64(),
                volume: v.to_string(),
                sigma2_integral: i.to_string(),
                h_series: series.to_string(),
                h_series_normalization: normalization,
            })
        }
        None => None,
    };

    let mut checks = Vec::new();
    if let Some(e) = &exact {
        checks.push(bound("hExact", relative(h.value, e.h), args.tolerance));
    }

    let scaling = match &args.scale {
        Some(c) => Some(scaling_check(&parse_rational("--scale", c)?, &route, &bg, &tq, res, args, h.value)?),
        None => None,
    };
    if let Some(s) = &scaling {
        checks.push(bound("scalingNumeric", s.numeric_relative, 1e-8));
        if let Some(ok) = s.symbolic_invariant {
            checks.push(CurvatureCheck { name: "scalingSymbolic", value: if ok { 0.0 } else { 1.0 }, tolerance: 0.5, passed: ok });
        }
    }
    let passed = checks.iter().all(|c| c.passed);

    let mut tab = Table::default();
    tab.row("background", &bg.name);
    if let Some(t) = &t {
        tab.row("t", t);
    }
    tab.row("resolution", res)
        .row("Vol(g)", format!("{:.12} (err {})", vol.value, sci(vol.estimated_error)))
        .row("int sigma2 dv", format!("{:.12} (err {})", int.value, sci(int.estimated_error)))
        .row("H(g)", format!("{:.12} (err {})", h.value, sci(h.estimated_error)));
    if let Some(e) = &exact {
        tab.row("exact Vol(g)", &e.volume)
            .row("exact int sigma2 dv", &e.sigma2_integral)
            .row("exact H(g)", format!("{:.12}", e.h))
            .row(format!("H(g_t)/{}", e.h_series_normalization), &e.h_series);
    }
    if let Some(s) = &scaling {
        tab.row("c", &s.c).row("H(c^2 g)", format!("{:.12}", s.numeric_scaled));
        if let Some(ok) = s.symbolic_invariant {
            tab.row("symbolic H(c^2 g) = H(g)", ok);
        }
    }
    for c in &checks {
        tab.row(c.name, format!("{} ({})", sci(c.value), if c.passed { "ok" } else { "FAIL" }));
    }

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Payload {
        background: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        t: Option<String>,
        volume: FunctionalValue,
        sigma2_integral: FunctionalValue,
        h: FunctionalValue,
        #[serde(skip_serializing_if = "Option::is_none")]
        exact: Option<ExactFunctional>,
        #[serde(skip_serializing_if = "Option::is_none")]
        scaling: Option<Scaling>,
        checks: Vec<CurvatureCheck>,
    }
    let payload = Payload {
        background: bg.name.clone(),
        t: t.map(|t| t.to_string()),
        volume: vol,
        sigma2_integral: int,
        h,
        exact,
        scaling,
        checks,
    };
    Ok(Outcome::new("functional", payload, tab.render(), passed))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Scaling {
    c: String,
    numeric_scaled: f64,
    numeric_relative: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbolic_invariant: Option<bool>,
}

/// `H(c²g)` against `H(g)` with the background fixed.
fn scaling_check(
    c: &Rational,
    route: &Route,
    bg: &Background,
    t: &Rational,
    res: usize,
    args: &FunctionalArgs,
    h: f64,
) -> Result<Scaling, CliError> {
    if !c.is_positive() {
        return Err(CliError::Usage("--scale must be positive".into()));
    }
    let c2 = c * c;
    let scaled = route.evaluate(res, c2.to_f64(), args.step)?[2];
    let symbolic = match &bg.family {
        Some(fam) => Some(symbolic_invariance(fam, &c2, t)?),
        None => None,
    };
    Ok(Scaling { c: c.to_string(), numeric_scaled: scaled, numeric_relative: relative(scaled, h), symbolic_invariant: symbolic })
}

/// Exact check that `Vol(c²g_t)^{4/n} σ₂(c²g_t) = Vol(g_t)^{4/n} σ₂(g_t)`:
/// the volume ratios agree as rational functions, and with
/// `ρ = Vol(c²ḡ)/Vol(ḡ)`, `s = σ₂(c²g_t)/σ₂(g_t)` one has `ρ⁴ sⁿ = 1`.
fn symbolic_invariance(fam: &SphereProductFamily, c2: &Rational, t: &Rational) -> Result<bool, CliError> {
    let scaled = fam.rescaled(c2)?;
    let (ratio, base) = fam.volume()?;
    let (ratio_s, base_s) = scaled.volume()?;
    let rho = match (base.as_monomial(), base_s.as_monomial()) {
        (Some((a, k)), Some((b, l))) if k == l => &b / &a,
        _ => return Ok(false),
    };
    let s = &scaled.sigma2()?.eval(t)? / &fam.sigma2()?.eval(t)?;
    let n = fam.dim() as i32;
    let series_equal = scaled.h_functional_series(4)? == fam.h_functional_series(4)?;
    Ok(ratio == ratio_s && rho.pow(4) * s.pow(n) == Rational::one() && series_equal)
}

fn field_label(u: &HarmonicCombination) -> String {
    if u.terms.is_empty() {
        return format!("constant {}", u.constant);
    }
    let degrees: Vec<String> = u.terms.iter().map(|(_, z)| z.k.to_string()).collect();
    format!("degrees {}", degrees.join("+"))
}

fn parse_field(spec: &str, n: usize, r: f64) -> Result<HarmonicCombination, CliError> {
    if spec == "constant" {
        return Ok(HarmonicCombination { constant: 1.0, terms: vec![] });
    }
    if let Some(seed) = spec.strip_prefix("random:seed=") {
        let seed = seed.parse().map_err(|_| CliError::Usage(format!("bad seed in `{spec}`")))?;
        return Ok(HarmonicCombination::random(n, r, 3, seed));
    }
    let z = ZonalHarmonic::parse(spec, n, r)?;
    Ok(HarmonicCombination { constant: 0.0, terms: vec![(1.0, z)] })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ObataCase {
    field: String,
    #[serde(flatten)]
    report: ObataReport,
    expected_equality: bool,
    passed: bool,
}

pub fn obata(args: &ObataArgs) -> Result<Outcome, CliError> {
    let bg = Background::parse(&args.background)?;
    let Manifold::Sphere { n, r } = *bg.standard_manifold()? else {
        return Err(CliError::Usage(format!("obata needs a round sphere, not `{}`", bg.name)));
    };
    let res = args.resolution.unwrap_or(if n == 2 { 32 } else { 16 });
    let grid = Manifold::Sphere { n, r }.grid(res)?;
    let fields: Vec<HarmonicCombination> = match &args.u {
        Some(spec) => vec![parse_field(spec, n, r)?],
        None => {
            let mut v: Vec<HarmonicCombination> =
                (0..args.samples as u64).map(|i| HarmonicCombination::random(n, r, 3, args.seed + i)).collect();
            v.push(HarmonicCombination { constant: 1.0, terms: vec![] });
            v.push(HarmonicCombination { constant: 0.5, terms: vec![(1.0, ZonalHarmonic::polar(1, n, r))] });
            v
        }
    };
    let cases = fields
        .iter()
        .map(|u| {
            let report = obata_report(u, n, r, &grid, args.step, args.tolerance)?;
            let expected_equality = u.terms.is_empty() || u.single_degree() == Some(1);
            let passed = report.deficit >= -args.tolerance && report.is_equality_case == expected_equality;
            Ok(ObataCase { field: field_label(u), report, expected_equality, passed })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let passed = cases.iter().all(|c| c.passed);
    let min_deficit = cases.iter().map(|c| c.report.deficit).fold(f64::INFINITY, f64::min);
    let equality = cases.iter().filter(|c| c.report.is_equality_case).count();

    let mut text = format!("{:<24} {:>14} {:>14}  equality\n", "field", "deficit", "centred L2");
    for c in &cases {
        text.push_str(&format!(
            "{:<24} {:>14} {:>14}  {}{}\n",
            c.field,
            sci(c.report.deficit),
            sci(c.report.centered_l2),
            c.report.is_equality_case,
            if c.passed { "" } else { "  FAIL" }
        ));
    }
    text.push_str(&format!("cases {}, minimum deficit {}, equality cases {equality}\n", cases.len(), sci(min_deficit)));

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Payload {
        background: String,
        resolution: usize,
        tolerance: f64,
        min_deficit: f64,
        equality_cases: usize,
        cases: Vec<ObataCase>,
    }
    let payload = Payload {
        background: bg.name.clone(),
        resolution: res,
        tolerance: args.tolerance,
        min_deficit,
        equality_cases: equality,
        cases,
    };
    Ok(Outcome::new("obata", payload, text, passed))
}

