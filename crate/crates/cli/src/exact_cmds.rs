use serde::Serialize;

use sigma2_core::chart::{curvature_pack, fit_step, MetricChart};
use sigma2_core::exact::{Poly, RatFun, Rational};
use sigma2_core::homogeneous::{
    einstein_operator_parallel, stability_probe as probe, Eigenvalue, FamilyFile, ParallelTTTensor, ParallelTensor,
    SphereProductFamily, StabilityVerdict,
};
use sigma2_core::quadrature::{volume, Manifold};
use sigma2_core::registry::{Background, RegistryError};
use sigma2_core::variation::Perturbation;

use crate::report::{sci, CliError, Outcome, Table};
use crate::{ComparisonArgs, ProbeArgs};

const SERIES_ORDER: usize = 6;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Expectation {
    name: &'static str,
    expected: String,
    actual: String,
    matches: bool,
}

fn expect(name: &'static str, expected: &str, actual: impl ToString) -> Expectation {
    let actual = actual.to_string();
    Expectation { name, matches: actual == expected, expected: expected.to_string(), actual }
}

/// Exact eigenvalue with an explicit sign, e.g. `+2`.
pub fn signed(e: &Eigenvalue) -> String {
    match &e.exact {
        Some(q) if q.is_negative() => q.to_string(),
        Some(q) => format!("+{q}"),
        None => format!("{:+.12}", e.approx),
    }
}

/// Distinct eigenvalues with multiplicities, in the order given.
fn grouped(eigs: &[Eigenvalue]) -> Vec<(String, usize)> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for e in eigs {
        let s = signed(e);
        match out.iter_mut().find(|(v, _)| *v == s) {
            Some((_, m)) => *m += 1,
            None => out.push((s, 1)),
        }
    }
    out
}

/// `σ₂(g_t) − σ₂(ḡ)` is a polynomial with non-negative even coefficients.
fn sigma2_never_decreases(s2: &RatFun) -> Result<bool, CliError> {
    if !s2.is_polynomial() {
        return Ok(false);
    }
    let (num, den) = s2.unit_constant_form();
    if den.degree() != Some(0) {
        return Ok(false);
    }
    Ok(num.coeffs().iter().enumerate().skip(1).all(|(k, c)| !c.is_negative() && (k % 2 == 0 || c.is_zero())))
}

/// `1/den(t)` with `den` even, decreasing in `|t|` and positive at `bound`,
/// so the ratio is at least 1 on `|t| ≤ bound`.
fn volume_grows_up_to(ratio: &RatFun, bound: &Rational) -> bool {
    let (num, den) = ratio.unit_constant_form();
    let one = Poly::one();
    num == one
        && den.coeffs().iter().enumerate().skip(1).all(|(k, c)| !c.is_positive() && (k % 2 == 0 || c.is_zero()))
        && den.eval(bound).is_positive()
}

pub fn counterexample() -> Result<Outcome, CliError> {
    let fam = SphereProductFamily::counterexample();
    let s2 = fam.sigma2()?;
    let s0 = s2.at_zero()?;
    let (ratio, base) = fam.volume()?;
    let (_, den) = ratio.unit_constant_form();
    let series = fam.h_functional_series(SERIES_ORDER)?;
    let d2h = fam.h_second_derivative_normalized()?;
    let report = probe(&fam)?;
    let groups = grouped(&report.eigenvalues);
    let top = report
        .eigenvalues
        .iter()
        .max_by(|a, b| a.approx.total_cmp(&b.approx))
        .map(signed)
        .unwrap_or_default();
    let stability = match report.verdict {
        StabilityVerdict::StrictlyStableOnProbe => "strictly stable on probe",
        StabilityVerdict::Unstable => "not strictly stable",
        StabilityVerdict::Inconclusive => "inconclusive",
    };
    let bound = Rational::frac(1, 10);
    let sigma2_verdict = sigma2_never_decreases(&s2)?;
    let volume_verdict = volume_grows_up_to(&ratio, &bound);

    let checks = vec![
        expect("sigma2Background", "36/7", &s0),
        expect("sigma2Path", "36/7 + 18/7 t^2 + 32/7 t^4", &s2),
        expect("volumeRatio", "(1) / (1 - t^2 - 56 t^4 - 144 t^6)", &ratio),
        expect("volumeRatioDen", "1 - t^2 - 56 t^4 - 144 t^6", &den),
        expect("baseVolume", "256 pi^4", &base),
        expect("secondDerivativeNormalized", "18432/7 pi^4", &d2h),
        expect("parallelTTEigenvalue", "+2", &top),
        expect("stability", "not strictly stable", stability),
        expect("sigma2Verdict", "true", sigma2_verdict),
        expect("volumeVerdict", "true", volume_verdict),
    ];
    let passed = checks.iter().all(|c| c.matches);

    let mut t = Table::default();
    t.row("background", "(S^2)^4, unit factors")
        .row("sigma2(g_0)", &s0)
        .row("sigma2(g_t)", &s2)
        .row("Vol(g_t)/Vol(g_0)", &ratio)
        .row("Vol(g_0)", &base)
        .row("H(g_t)/H(g_0)", &series)
        .row("Vol^(-4/n) H''(0)", &d2h);
    for (v, m) in &groups {
        t.row("parallel TT eigenvalue", format!("{v} (multiplicity {m})"));
    }
    t.row("stability", stability)
        .row("sigma2(g_t) >= sigma2(g_0)", if sigma2_verdict { "yes, for all t" } else { "not shown" })
        .row(
            "Vol(g_t) >= Vol(g_0) for small |t|",
            if volume_verdict { format!("yes, for |t| <= {bound}") } else { "not shown".into() },
        );
    let mut text = t.render();
    for c in checks.iter().filter(|c| !c.matches) {
        text.push_str(&format!("mismatch {}: expected `{}`, got `{}`\n", c.name, c.expected, c.actual));
    }

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Payload<'a> {
        sigma2_background: String,
        sigma2_path: String,
        volume_ratio: String,
        volume_ratio_den: String,
        base_volume: String,
        h_series: String,
        second_derivative_normalized: String,
        eigenvalues: Vec<String>,
        verdict: &'a str,
        sigma2_increase: bool,
        volume_increase_bound: Option<String>,
        checks: Vec<Expectation>,
    }
    let payload = Payload {
        sigma2_background: s0.to_string(),
        sigma2_path: s2.to_string(),
        volume_ratio: ratio.to_string(),
        volume_ratio_den: den.to_string(),
        base_volume: base.to_string(),
        h_series: series.to_string(),
        second_derivative_normalized: d2h.to_string(),
        eigenvalues: report.eigenvalues.iter().map(signed).collect(),
        verdict: stability,
        sigma2_increase: sigma2_verdict,
        volume_increase_bound: volume_verdict.then(|| bound.to_string()),
        checks,
    };
    Ok(Outcome::new("counterexample", payload, text, passed))
}

pub fn stability_probe(args: &ProbeArgs) -> Result<Outcome, CliError> {
    let bg = Background::parse(&args.background)?;
    let fam = bg
        .family
        .clone()
        .ok_or_else(|| CliError::Usage(format!("`{}` is not a sphere-product background", bg.name)))?;
    let report = probe(&fam)?;
    let image = match &args.h {
        Some(spec) => {
            let coeffs = match bg.perturbation(spec)? {
                Perturbation::Parallel(c) => c,
                _ => return Err(CliError::Usage(format!("`{spec}` is not a parallel direction"))),
            };
            let background = fam.background()?;
            let tt = ParallelTTTensor::new(&background, ParallelTensor::new(coeffs.clone()))?;
            let res = einstein_operator_parallel(&background, &tt)?;
            Some((coeffs, res.image.coeffs))
        }
        None => None,
    };

    let mut t = Table::default();
    t.row("background", &bg.name).row("n", report.n).row("lambda", &report.lambda);
    for (v, m) in grouped(&report.eigenvalues) {
        t.row("parallel TT eigenvalue", format!("{v} (multiplicity {m})"));
    }
    if let Some((h, img)) = &image {
        t.row("h", join(h)).row("Delta_E h", join(img));
    }
    t.row("verdict", report.verdict.as_str());

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Payload {
        background: String,
        n: usize,
        lambda: String,
        eigenvalues: Vec<String>,
        eigenvalues_approx: Vec<f64>,
        verdict: &'static str,
        #[serde(skip_serializing_if = "Option::is_none")]
        direction: Option<Vec<String>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        image: Option<Vec<String>>,
    }
    let payload = Payload {
        background: bg.name.clone(),
        n: report.n,
        lambda: report.lambda.to_string(),
        eigenvalues: report.eigenvalues.iter().map(signed).collect(),
        eigenvalues_approx: report.eigenvalues.iter().map(|e| e.approx).collect(),
        verdict: report.verdict.as_str(),
        direction: image.as_ref().map(|(h, _)| h.iter().map(|c| c.to_string()).collect()),
        image: image.as_ref().map(|(_, i)| i.iter().map(|c| c.to_string()).collect()),
    };
    Ok(Outcome::new("stability-probe", payload, t.render(), true))
}

fn join(c: &[Rational]) -> String {
    c.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Row {
    t: f64,
    sigma2_ratio: f64,
    volume_ratio: f64,
    h_ratio: f64,
    violation: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma2_ratio_exact: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    volume_ratio_exact: Option<String>,
}

enum Family {
    Exact(SphereProductFamily),
    /// `(1 + t f)ḡ` on a sphere, evaluated by quadrature.
    Conformal { base: String, field: String },
}

fn parse_family(spec: &str) -> Result<Family, CliError> {
    match spec {
        "counterexample" => Ok(Family::Exact(SphereProductFamily::counterexample())),
        "trivial" => Ok(Family::Exact(SphereProductFamily::counterexample().background()?)),
        s if s.starts_with("conformal:") => {
            let body = s.strip_prefix("conformal:base=").ok_or_else(|| CliError::Usage(format!("bad family `{s}`")))?;
            let (base, field) =
                body.split_once(",f=").ok_or_else(|| CliError::Usage(format!("bad family `{s}`: expected base=…,f=…")))?;
            Ok(Family::Conformal { base: base.to_string(), field: field.to_string() })
        }
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| RegistryError::Io { path: path.to_string(), source })?;
            let file = FamilyFile::parse(&text)
                .map_err(|source| RegistryError::FamilyFile { path: path.to_string(), source })?;
            Ok(Family::Exact(file.to_family()?))
        }
    }
}

fn exact_row(fam: &SphereProductFamily, t: &Rational) -> Result<Row, CliError> {
    let tf = t.to_f64();
    fam.check_positive_at(tf)?;
    let s2 = fam.sigma2()?;
    let s0 = s2.at_zero()?;
    let (ratio, _) = fam.volume()?;
    let sigma2_ratio = &s2.eval(t)? / &s0;
    let volume_ratio = ratio.eval(t)?;
    let violation = !(sigma2_ratio < Rational::one()) && volume_ratio > Rational::one();
    let n = fam.dim() as f64;
    let vr = volume_ratio.to_f64();
    Ok(Row {
        t: tf,
        sigma2_ratio: sigma2_ratio.to_f64(),
        volume_ratio: vr,
        h_ratio: vr.powf(4.0 / n) * sigma2_ratio.to_f64(),
        violation,
        sigma2_ratio_exact: Some(sigma2_ratio.to_string()),
        volume_ratio_exact: Some(volume_ratio.to_string()),
    })
}

/// Per-node σ₂ values and the volume of one chart on one grid.
fn sample(chart: &dyn MetricChart, m: &Manifold, res: usize, step: f64) -> Result<(Vec<f64>, f64, f64), CliError> {
    let grid = m.grid(res)?;
    let s2 = grid.map(|p| -> Result<f64, CliError> { Ok(curvature_pack(chart, p, fit_step(chart, p, step, 2.0)?)?.sigma2) })?;
    Ok((s2.clone(), volume(chart, &grid)?, grid.weighted_sum(&s2)))
}

fn conformal_rows(base: &str, field: &str, ts: &[Rational], args: &ComparisonArgs) -> Result<Vec<Row>, CliError> {
    let bg = Background::parse(base)?;
    let m = bg.standard_manifold()?.clone();
    let res = args.resolution.unwrap_or(match m {
        Manifold::Sphere { n: 2, .. } => 32,
        _ => 16,
    });
    let n = m.dim() as f64;
    let (s0, v0, i0) = sample(bg.chart.as_ref(), &m, res, args.step)?;
    let h0 = v0.powf(4.0 / n) * i0;
    ts.iter()
        .map(|t| {
            let tf = t.to_f64();
            let deformed = Background::parse(&format!("conformal:base={base},f={field},amp={tf}"))?;
            let (st, vt, it) = sample(deformed.chart.as_ref(), &m, res, args.step)?;
            // the smallest pointwise ratio: σ₂(g_t) ≥ σ₂(ḡ) must hold everywhere
            let sigma2_ratio = st.iter().zip(&s0).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
            let volume_ratio = vt / v0;
            Ok(Row {
                t: tf,
                sigma2_ratio,
                volume_ratio,
                h_ratio: vt.powf(4.0 / n) * it / h0,
                violation: sigma2_ratio >= 1.0 - 1e-12 && volume_ratio > 1.0 + 1e-12 && tf != 0.0,
                sigma2_ratio_exact: None,
                volume_ratio_exact: None,
            })
        })
        .collect()
}

pub fn comparison(args: &ComparisonArgs) -> Result<Outcome, CliError> {
    let ts = args
        .t
        .split(',')
        .map(|s| s.trim().parse::<Rational>().map_err(|_| CliError::Usage(format!("bad parameter `{s}` in --t"))))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = match parse_family(&args.family)? {
        Family::Exact(fam) => ts.iter().map(|t| exact_row(&fam, t)).collect::<Result<Vec<_>, _>>()?,
        Family::Conformal { base, field } => conformal_rows(&base, &field, &ts, args)?,
    };
    let violations: Vec<f64> = rows.iter().filter(|r| r.violation).map(|r| r.t).collect();

    let mut text = format!("{:>10}  {:>14}  {:>14}  {:>14}  violation\n", "t", "sigma2 ratio", "Vol ratio", "H ratio");
    for r in &rows {
        text.push_str(&format!(
            "{:>10}  {:>14}  {:>14}  {:>14}  {}\n",
            r.t,
            sci(r.sigma2_ratio),
            sci(r.volume_ratio),
            sci(r.h_ratio),
            if r.violation { "yes" } else { "no" }
        ));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "sigma2_ratio", "volume_ratio", "h_ratio", "violation"])?;
    for r in &rows {
        w.write_record([
            r.t.to_string(),
            r.sigma2_ratio.to_string(),
            r.volume_ratio.to_string(),
            r.h_ratio.to_string(),
            r.violation.to_string(),
        ])?;
    }
    let csv = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8");

    #[derive(Serialize)]
    #[serde(rename_all = "camelCase")]
    struct Payload {
        family: String,
        rows: Vec<Row>,
        violations: Vec<f64>,
    }
    let payload = Payload { family: args.family.clone(), rows, violations };
    Ok(Outcome::new("comparison", payload, text, true).with_csv(csv))
}
