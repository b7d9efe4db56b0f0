use std::f64::consts::PI;

use super::*;
use crate::spectral::ZonalHarmonic;

fn lab(m: Manifold, res: usize) -> Lab {
    Lab::with_config(m, LabConfig { resolution: Some(res), ..LabConfig::default() })
}

fn zonal(k: u32, n: usize) -> Perturbation {
    Perturbation::conformal(ZonalHarmonic::polar(k, n, 1.0), format!("harmonic:k={k}"))
}

fn assert_pass(r: &VariationReport) {
    assert!(r.passed, "{} {} failed: {:#?}", r.check, r.perturbation, r);
}

#[test]
fn volume_variations_on_s2() {
    let s2 = lab(Manifold::sphere(2), 24);
    // h = (1 + P_1)ḡ: DVol = ½∫2(1 + cos ψ) = Vol(S²) = 4π
    let f = ZonalHarmonic::polar(1, 2, 1.0);
    let h = Perturbation::conformal(move |p: &[f64]| 1.0 + f.value(p), "1+k1");
    let r = s2.run(Check::Volume1, Some(&h)).unwrap();
    assert_pass(&r);
    assert!((r.numeric_value - 4.0 * PI).abs() < 1e-9);
    // D²Vol = ¼∫((2f)² − 2·2f²) = 0 in dimension 2
    let r = s2.run(Check::Volume2, Some(&h)).unwrap();
    assert_pass(&r);
    assert!(r.numeric_value.abs() < 1e-8);
}

#[test]
fn zero_direction_is_exactly_zero() {
    let s3 = lab(Manifold::sphere(3), 8);
    for check in [Check::Volume1, Check::Volume2, Check::SecondVariation, Check::Criticality] {
        let r = s3.run(check, Some(&Perturbation::Zero)).unwrap();
        assert_eq!(r.numeric_value, 0.0, "{check}");
        assert!(r.passed);
    }
    let r = s3.run(Check::HDotRicci, Some(&Perturbation::Zero)).unwrap();
    assert_eq!((r.numeric_value, r.closed_form_value), (0.0, 0.0));
}

#[test]
fn scalar_linearization() {
    let s2 = lab(Manifold::sphere(2), 8);
    let r = s2.run(Check::Scalar1, Some(&Perturbation::Metric)).unwrap();
    assert!((r.closed_form_value + 2.0).abs() < 1e-7 && (r.numeric_value + 2.0).abs() < 1e-7);
    assert_pass(&r);

    let s3 = lab(Manifold::sphere(3), 8);
    let r = s3.run(Check::Scalar1, Some(&zonal(2, 3))).unwrap();
    assert_pass(&r);

    // pointwise R' = (1−n)(Δu/n + λu) for h = fḡ, u = 3f, Δf = −8f
    let f = ZonalHarmonic::polar(2, 3, 1.0);
    for p in s3.sample_points() {
        let jet = PathJet::new(&zonal(2, 3).path(&s3.manifold).unwrap(), &p, 5e-3).unwrap();
        let d = numeric_derivative(|t| Ok::<_, VariationError>(vec![jet.pack(t)?.scalar]), 1, &DEFAULT_SCHEDULE).unwrap();
        let u = 3.0 * f.value(&p);
        let expect = linearization::d_scalar_conformal(3, 1.0, u, -8.0 * u);
        assert!((d.scalar() - expect).abs() < 1e-5 * expect.abs().max(1.0));
    }

    let flat = lab(Manifold::Torus { n: 3 }, 8);
    let r = flat.run(Check::Scalar1, Some(&Perturbation::parallel_ints(&[1, 2, -1]))).unwrap();
    assert!(r.numeric_value.abs() < 1e-12 && r.closed_form_value.abs() < 1e-9);
}

#[test]
fn ricci_linearization() {
    let s3 = lab(Manifold::sphere(3), 8);
    let r = s3.run(Check::Ricci1, Some(&Perturbation::Metric)).unwrap();
    assert!(r.numeric_value.abs() < 1e-7);
    assert_pass(&r);
    for k in [1, 2, 3] {
        assert_pass(&s3.run(Check::Ricci1, Some(&zonal(k, 3))).unwrap());
    }
    let flat = lab(Manifold::Torus { n: 2 }, 8);
    let r = flat.run(Check::Ricci1, Some(&Perturbation::parallel_ints(&[3, -1]))).unwrap();
    assert!(r.numeric_value.abs() < 1e-12);
}

#[test]
fn sigma2_linearization_uses_corrected_coefficient() {
    let s3 = lab(Manifold::sphere(3), 12);
    // h = ḡ, u = 3: −(n−1)(n−2)²λ²u/4 = −3/2
    let r = s3.run(Check::Sigma2First, Some(&Perturbation::Metric)).unwrap();
    assert!((r.closed_form_value + 1.5).abs() < 1e-12);
    assert_pass(&r);
    for k in [1, 2] {
        let r = s3.run(Check::Sigma2First, Some(&zonal(k, 3))).unwrap();
        assert_pass(&r);
        assert!(r.details["integratedResidual"] < 1e-6);
    }

    // the same numeric derivative rejects c(n) = −(n−1)(n²+4n−4)/(4n)
    let f = ZonalHarmonic::polar(2, 3, 1.0);
    let path = zonal(2, 3).path(&s3.manifold).unwrap();
    let p = s3.sample_points()[0].clone();
    let jet = PathJet::new(&path, &p, 5e-3).unwrap();
    let d = numeric_derivative(|t| Ok::<_, VariationError>(vec![jet.pack(t)?.sigma2]), 1, &DEFAULT_SCHEDULE).unwrap();
    let u = 3.0 * f.value(&p);
    let lap = -8.0 * u;
    let corrected = -2.0 * u / 4.0 + (-(2.0 * 1.0) / 12.0) * lap;
    let alternative = -2.0 * u / 4.0 + (-(2.0 * 17.0) / 12.0) * lap;
    assert!((d.scalar() - corrected).abs() < 1e-6);
    assert!((d.scalar() - alternative).abs() > 1e-2 * u.abs());
}

#[test]
fn identities_on_s3() {
    let s3 = lab(Manifold::sphere(3), 12);
    for check in [Check::HDotRicci, Check::RicciSquare, Check::RicciSecondTrace, Check::ScalarSquare, Check::Sigma2Second] {
        for k in [1, 2] {
            let r = s3.run(check, Some(&zonal(k, 3))).unwrap();
            assert_pass(&r);
        }
    }
    // first eigenfunctions annihilate R'
    let r = s3.run(Check::ScalarSquare, Some(&zonal(1, 3))).unwrap();
    assert!(r.numeric_value.abs() < 1e-6 && r.closed_form_value.abs() < 1e-6);
}

#[test]
fn parallel_identity_on_product() {
    let p = lab(Manifold::sphere_product(&[2, 2]), 4);
    let r = p.run(Check::HDotRicci, Some(&Perturbation::parallel_ints(&[1, -1]))).unwrap();
    assert_pass(&r);
    assert!(r.details["ringMaxAbs"] > 0.5 && r.details["ringNablaMax"] < 1e-8);
    // mixed parallel direction: nonzero trace part
    let r = p.run(Check::ScalarSquare, Some(&Perturbation::parallel_ints(&[2, 1]))).unwrap();
    assert_pass(&r);
    assert!(r.closed_form_value > 1.0);
}

#[test]
fn unsupported_ring_is_rejected() {
    let m = Manifold::sphere_product(&[2, 2]);
    let chart = m.chart();
    let h = Perturbation::Tensor {
        h: std::sync::Arc::new(move |p: &[f64]| {
            let g = chart.background_at(p);
            let v = 1.0 + 0.3 * p[0].cos();
            crate::chart::Mat::from_fn(4, |i, j| g[(i, j)] * if i < 2 { v } else { -v })
        }),
        label: "bumped".into(),
    };
    let err = lab(m, 4).run(Check::HDotRicci, Some(&h)).unwrap_err();
    assert!(matches!(err, VariationError::Unsupported(_)), "{err}");
}

#[test]
fn second_variation_on_s3() {
    let s3 = lab(Manifold::sphere(3), 16);
    let r = s3.run(Check::SecondVariation, Some(&zonal(1, 3))).unwrap();
    assert!(r.closed_form_value.abs() < 1e-5 && r.numeric_value.abs() < 1e-5, "{r:#?}");

    // ∫_{S³} (4cos²ψ − 1)² = 4π ∫_0^π (4c² − 1)² s² dψ by Simpson
    let m = 2000;
    let g = |x: f64| (4.0 * x.cos().powi(2) - 1.0).powi(2) * x.sin().powi(2);
    let hh = PI / m as f64;
    let simpson: f64 = (0..=m)
        .map(|i| {
            let w = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * g(i as f64 * hh)
        })
        .sum::<f64>()
        * hh
        / 3.0;
    let int_u2 = 9.0 * 4.0 * PI * simpson;
    let expected = -(7.0 / 36.0) * (8.0 - 3.0) * int_u2;
    let r = s3.run(Check::SecondVariation, Some(&zonal(2, 3))).unwrap();
    assert_pass(&r);
    assert!(r.closed_form_value < 0.0);
    assert!(relative_residual(r.closed_form_value, expected) < 1e-6, "{} vs {expected}", r.closed_form_value);
}

#[test]
fn second_variation_three_routes_on_counterexample_background() {
    let m = Manifold::sphere_product(&[2, 2, 2, 2]);
    let lab = lab(m, 6);
    let h = Perturbation::parallel_ints(&[0, 0, -3, 3]);
    let r = lab.run(Check::SecondVariation, Some(&h)).unwrap();
    assert_pass(&r);
    // (72/7)·Vol((S²)⁴) = (72/7)·256 π⁴
    let expected = Rational::frac(72 * 256, 7);
    assert_eq!(r.exact["closedForm"], format!("{expected} pi^4"));
    assert_eq!(r.exact["series"], r.exact["closedForm"]);
    assert!(relative_residual(r.numeric_value, expected.to_f64() * PI.powi(4)) < 1e-4);
}

#[test]
fn ricci_flat_branch() {
    let t = lab(Manifold::Torus { n: 3 }, 6);
    let r = t.run(Check::SecondVariation, Some(&Perturbation::parallel_ints(&[1, -1, 0]))).unwrap();
    assert_eq!(r.closed_form_value, 0.0);
    assert!(r.numeric_value.abs() < 1e-12);
    assert_pass(&r);
}

#[test]
fn criticality() {
    let s2 = Lab::with_config(
        Manifold::sphere(2),
        LabConfig { resolution: Some(16), samples: 5, ..LabConfig::default() },
    );
    // σ₂ ≡ 0 on surfaces, so H ≡ 0 and every sample is trivially critical
    let r = s2.run(Check::Criticality, None).unwrap();
    assert_pass(&r);
    assert_eq!(r.details["directions"], 10.0);

    let s3 = lab(Manifold::sphere(3), 12);
    let r = s3.run(Check::Criticality, Some(&Perturbation::Metric)).unwrap();
    assert!(r.numeric_value.abs() < 1e-9);

    let p = lab(Manifold::sphere_product(&[2, 2, 2, 2]), 4);
    let r = p.run(Check::Criticality, None).unwrap();
    assert_pass(&r);
    assert_eq!(r.numeric_value, 0.0);
    assert!(r.exact["t1Coefficients"].split(", ").all(|c| c == "0"));
    assert!(r.details["numericMax"] < 1e-6, "{r:#?}");
}

#[test]
fn check_names_round_trip() {
    for c in Check::ALL {
        assert_eq!(Check::parse(c.name()).unwrap(), c);
    }
    assert!(matches!(Check::parse("prop9"), Err(VariationError::UnknownCheck(_))));
}

#[test]
fn non_einstein_background_is_rejected() {
    let m = Manifold::Product { factors: vec![Manifold::sphere(2), Manifold::sphere(3)] };
    let err = lab(m, 4).run(Check::SecondVariation, None).unwrap_err();
    assert!(matches!(err, VariationError::NotEinstein(_)));
}
