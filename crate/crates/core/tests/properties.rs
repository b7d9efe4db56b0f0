use std::sync::Arc;

use proptest::prelude::*;
use sigma2_core::chart::{curvature_pack, FnChart, Mat, MetricChart, SphereChart};
use sigma2_core::exact::{series_pow, Poly, RatFun, Rational, Series};
use sigma2_core::homogeneous::{
    second_variation_closed_form, ParallelTTTensor, ParallelTensor, SphereFactor, SphereProductFamily,
};
use sigma2_core::quadrature::{mean_and_energy, Manifold};
use sigma2_core::spectral::{obata_report, HarmonicCombination};
use sigma2_core::variation::tt_decompose;

fn rational() -> impl Strategy<Value = Rational> {
    (-60i64..=60, 1i64..=40).prop_map(|(p, q)| Rational::frac(p, q))
}

fn nonzero_rational() -> impl Strategy<Value = Rational> {
    rational().prop_filter("nonzero", |r| !r.is_zero())
}

/// Polynomial with non-zero constant term, so its expansion at 0 exists.
fn unit_poly() -> impl Strategy<Value = Poly> {
    (nonzero_rational(), prop::collection::vec(rational(), 0..4)).prop_map(|(c0, rest)| {
        let mut c = vec![c0];
        c.extend(rest);
        Poly::new(c)
    })
}

/// Einstein products: factor `i` is `(m_i − 1)·s·g_{S^{m_i}}` for one common
/// `s = 2(p/q)²`, which keeps `S³` factors' volumes exact.
fn einstein_product(
    dims: impl Strategy<Value = usize>,
) -> impl Strategy<Value = (SphereProductFamily, Vec<usize>, Rational)> {
    (prop::collection::vec(dims, 2..=4), 1i64..=5, 1i64..=5).prop_map(|(dims, p, q)| {
        let s = &Rational::from_int(2) * &Rational::frac(p, q).pow(2);
        let factors = dims
            .iter()
            .map(|&m| SphereFactor::new(m, RatFun::constant(&Rational::from_int(m as i64 - 1) * &s)))
            .collect();
        (SphereProductFamily::new(factors).unwrap(), dims, s)
    })
}

/// Trace-free parallel coefficients against `a_i(0)`: `Σ c_i m_i / a_i = 0`.
fn trace_free(fam: &SphereProductFamily, raw: &[i64]) -> Option<Vec<Rational>> {
    let a = fam.scales_at_zero().unwrap();
    let k = a.len();
    let mut c: Vec<Rational> = raw.iter().take(k).map(|&v| Rational::from_int(v)).collect();
    // solve the last coefficient from the trace condition
    let mut tr = Rational::zero();
    for i in 0..k - 1 {
        tr += &(&(&c[i] * &Rational::from_int(fam.factors()[i].dim as i64)) / &a[i]);
    }
    let last_weight = &Rational::from_int(fam.factors()[k - 1].dim as i64) / &a[k - 1];
    c[k - 1] = -(&tr / &last_weight);
    (!c.iter().all(Rational::is_zero)).then_some(c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rationals_stay_in_lowest_terms(a in rational(), b in nonzero_rational()) {
        for r in [&a + &b, &a - &b, &a * &b, &a / &b] {
            prop_assert!(r.denom() > &0.into());
            prop_assert_eq!(num_integer::Integer::gcd(r.numer(), r.denom()), if r.is_zero() { r.denom().clone() } else { 1.into() });
        }
        prop_assert_eq!(&(&a / &b) * &b, a.clone());
    }

    #[test]
    fn rational_text_round_trip(a in rational()) {
        let back: Rational = a.to_string().parse().unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn expansion_is_multiplicative(p in unit_poly(), q in unit_poly(), d in unit_poly()) {
        let f = RatFun::new(p, d.clone()).unwrap();
        let g = RatFun::new(q, d).unwrap();
        let order = 5;
        let lhs = Series::expand(&(&f * &g), order).unwrap();
        let rhs = Series::expand(&f, order).unwrap().mul(&Series::expand(&g, order).unwrap());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn series_powers_are_inverse(p in unit_poly(), num in -5i64..=5, den in 1i64..=4) {
        let p = p.scale(&p.constant_term().recip().unwrap());
        let s = Series::expand(&RatFun::poly(p), 6).unwrap();
        let q = Rational::frac(num, den);
        let up = series_pow(&s, &q, 6).unwrap();
        let down = series_pow(&s, &-q.clone(), 6).unwrap();
        prop_assert_eq!(up.mul(&down), Series::one(6));
        if den == 1 && num >= 0 {
            let mut direct = Series::one(6);
            for _ in 0..num { direct = direct.mul(&s); }
            prop_assert_eq!(up, direct);
        }
    }

    #[test]
    fn h_series_is_scale_invariant(
        dims in prop::collection::vec(2usize..=4, 1..=3),
        shift in prop::collection::vec(-4i64..=4, 3),
        // c² for c in {2, 1/3} or a random rational c
        c in prop_oneof![Just(Rational::from_int(4)), Just(Rational::frac(1, 9)), (1i64..20, 1i64..20).prop_map(|(p, q)| Rational::frac(p, q).pow(2))],
    ) {
        prop_assume!(dims.iter().sum::<usize>() >= 3);
        let factors: Vec<SphereFactor> = dims
            .iter()
            .zip(&shift)
            .map(|(&m, &s)| {
                // a(t) = (1 + s t)² keeps the volume exact in every dimension
                let lin = Poly::new(vec![Rational::one(), Rational::frac(s, 10)]);
                SphereFactor::new(m, RatFun::poly(&lin * &lin))
            })
            .collect();
        let fam = SphereProductFamily::new(factors).unwrap();
        let base = fam.h_functional_series(4).unwrap();
        prop_assert_eq!(fam.rescaled(&c).unwrap().h_functional_series(4).unwrap(), base);
    }

    #[test]
    fn einstein_sigma2_closed_form((fam, _, _) in einstein_product(2usize..=4)) {
        let ed = fam.einstein_check().unwrap();
        prop_assert!(ed.is_einstein);
        prop_assert_eq!(fam.sigma2().unwrap().at_zero().unwrap(), ed.sigma2_closed_form().unwrap());
    }

    #[test]
    fn einstein_backgrounds_are_critical(
        (fam, _, _) in einstein_product(2usize..=4),
        raw in prop::collection::vec(-4i64..=4, 4),
        pure_trace in any::<bool>(),
    ) {
        let c: Vec<Rational> = if pure_trace {
            // h = ḡ in unit-factor coefficients is a_i(0)
            fam.scales_at_zero().unwrap()
        } else {
            match trace_free(&fam, &raw) { Some(c) => c, None => return Ok(()) }
        };
        let path = SphereProductFamily::linear_path(&fam, &ParallelTensor::new(c)).unwrap();
        prop_assert!(path.h_functional_series(2).unwrap().coeff(1).is_zero());
    }

    #[test]
    fn second_derivative_matches_closed_form(
        (fam, _, _) in einstein_product(2usize..=4),
        raw in prop::collection::vec(-4i64..=4, 4),
    ) {
        let Some(c) = trace_free(&fam, &raw) else { return Ok(()) };
        let tt = ParallelTTTensor::new(&fam, ParallelTensor::new(c.clone())).unwrap();
        let closed = second_variation_closed_form(&fam, &tt).unwrap();
        let series = SphereProductFamily::linear_path(&fam, &ParallelTensor::new(c))
            .unwrap()
            .h_second_derivative_normalized()
            .unwrap();
        prop_assert_eq!(series, closed);
    }

    #[test]
    fn tt_split_reconstructs(entries in prop::collection::vec(-2.0f64..2.0, 6), psi in 0.3f64..2.8, chi in 0.3f64..2.8) {
        let g = SphereChart::new(3, 1.0).metric_at(&[psi, chi, 1.0]);
        let ginv = g.inverse().unwrap();
        let h = Mat::from_fn(3, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            entries[a * 3 - a * (a + 1) / 2 + b]
        });
        let tt = tt_decompose(&h, &g, &ginv);
        let back = tt.h_ring + g.scale(tt.u / 3.0);
        prop_assert!((back - h).max_abs() < 1e-12);
        prop_assert!(ginv.dot(&tt.h_ring).abs() < 1e-10);
    }
}

/// Smooth positive-definite metric near the identity on `[−1, 1]^n`.
fn perturbed_chart(n: usize, coef: Vec<f64>) -> FnChart {
    FnChart::new(n, vec![(-1.0, 1.0); n], move |p: &[f64]| {
        Mat::from_fn(n, |i, j| {
            let (a, b) = (i.min(j), i.max(j));
            let wave = coef[(a * n + b) % coef.len()] * (p[a] + 0.7 * p[b]).sin() * 0.15;
            if i == j {
                1.0 + wave.abs() + 0.2 * p[i] * p[i]
            } else {
                wave * 0.5
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn curvature_routes_agree_on_perturbed_charts(
        n in 2usize..=4,
        coef in prop::collection::vec(-1.0f64..1.0, 5),
        p in prop::collection::vec(-0.5f64..0.5, 4),
    ) {
        let chart = perturbed_chart(n, coef);
        let pack = curvature_pack(&chart, &p[..n], 1e-3).unwrap();
        let via_eigen = pack.sigma2_from_eigenvalues().unwrap();
        prop_assert!((via_eigen - pack.sigma2).abs() <= 1e-8 * pack.sigma2.abs().max(1.0));
        let sym = pack.symmetry_residuals();
        prop_assert!(sym.max() < 1e-7, "{:?}", sym);
        if n >= 3 {
            prop_assert!(pack.weyl_trace_residual() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn obata_deficit_is_non_negative(seed in any::<u64>(), n in 2usize..=3) {
        let m = Manifold::sphere(n);
        let grid = m.grid(if n == 2 { 24 } else { 12 }).unwrap();
        let u = HarmonicCombination::random(n, 1.0, 3, seed);
        let rep = obata_report(&u, n, 1.0, &grid, 1e-3, 1e-8).unwrap();
        prop_assert!(rep.deficit >= -1e-8, "{}", rep.deficit);
    }

    #[test]
    fn mean_identity(seed in any::<u64>()) {
        let m = Manifold::sphere(2);
        let grid = m.grid(16).unwrap();
        let u = HarmonicCombination::random(2, 1.0, 3, seed);
        let chart: Arc<dyn MetricChart> = m.chart();
        let me = mean_and_energy(chart.as_ref(), &u, &grid, 1.0, 1e-3).unwrap();
        let vol = grid.total_weight();
        let int_u = grid.integrate(|p| Ok::<_, std::convert::Infallible>(sigma2_core::chart::ScalarField::value(&u, p))).unwrap();
        let int_mean_sq = grid.integrate(|_| Ok::<_, std::convert::Infallible>(me.mean * me.mean)).unwrap();
        prop_assert!((int_u * int_u - vol * int_mean_sq).abs() <= 1e-10 * (int_u * int_u).max(1e-12));
    }
}
