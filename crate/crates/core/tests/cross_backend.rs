use std::f64::consts::PI;
use std::sync::Arc;

use sigma2_core::chart::{MetricChart, ScaledChart, DEFAULT_STEP};
use sigma2_core::exact::Rational;
use sigma2_core::homogeneous::SphereProductFamily;
use sigma2_core::quadrature::{h_functional, sigma2_integral, volume, Manifold, MetricModel};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn product_volume_matches_exact() {
    let m = Manifold::sphere_product(&[2, 2, 2, 2]);
    let domain = m.domain(24).unwrap();
    let charts: Vec<Arc<dyn MetricChart>> = (0..4).map(|_| Manifold::sphere(2).chart()).collect();
    let v = domain.volume(&MetricModel::Product(charts)).unwrap();
    let (_, exact) = SphereProductFamily::counterexample().volume().unwrap();
    assert_eq!(exact.to_string(), "256 pi^4");
    assert!(rel(v, exact.to_f64()) < 1e-7);
    assert!(rel(v, 256.0 * PI.powi(4)) < 1e-7);
}

#[test]
fn counterexample_h_numeric_matches_exact() {
    let fam = SphereProductFamily::counterexample();
    let t = 0.1;
    let tq = Rational::frac(1, 10);
    let scales: Vec<f64> = fam.factors().iter().map(|f| f.scale.eval(&tq).unwrap().to_f64()).collect();
    let charts: Vec<Arc<dyn MetricChart>> = scales
        .iter()
        .map(|&c| Arc::new(ScaledChart { base: Manifold::sphere(2).chart(), c }) as Arc<dyn MetricChart>)
        .collect();
    let m = Manifold::sphere_product(&[2, 2, 2, 2]);
    let numeric = m.domain(24).unwrap().h_functional(&MetricModel::Product(charts), 5e-3).unwrap();

    let (ratio, base) = fam.volume().unwrap();
    let vol = ratio.eval_f64(t) * base.to_f64();
    let sigma2 = fam.sigma2().unwrap().eval(&tq).unwrap().to_f64();
    let exact = vol.powf(0.5) * sigma2 * base.to_f64();
    assert!(rel(numeric, exact) < 1e-7, "{numeric} vs {exact}");
}

#[test]
fn sigma2_integral_uses_the_background_measure() {
    let m = Manifold::sphere(3);
    let grid = m.grid(12).unwrap();
    let c = 1.21;
    let g = ScaledChart { base: m.chart(), c };
    let s = sigma2_integral(&g, &grid, DEFAULT_STEP).unwrap();
    // σ₂(c·ḡ) = σ₂(ḡ)/c² = (3/4)/c², integrated over Vol(ḡ) = 2π²
    let expected = 0.75 / (c * c) * 2.0 * PI * PI;
    assert!(rel(s, expected) < 1e-8);
    let own_measure = s * c.powf(1.5);
    assert!((own_measure - s).abs() > 0.1 * s);
    // so H differs from Vol^{4/n}·∫σ₂ dv_g by the factor c^{3/2}
    let h = h_functional(&g, &grid, DEFAULT_STEP).unwrap();
    let v = volume(&g, &grid).unwrap();
    assert!(rel(h, v.powf(4.0 / 3.0) * s) < 1e-12);
    assert!(rel(h * c.powf(1.5), v.powf(4.0 / 3.0) * own_measure) < 1e-12);
}
