/// Gauss–Legendre nodes and weights on `[−1, 1]`, nodes ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[m - 1 - i] = z;
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let d = m as f64 * (z * p - p0) / (z * z - 1.0);
    (p, d)
}

/// Nodes and weights in an angle `ψ ∈ (0, π)` for `∫ f(ψ) sin^m ψ dψ`.
/// `m = 1` maps Gauss–Legendre through `cos ψ`; otherwise Gauss–Legendre in
/// `ψ` with the density folded into the weights.
pub fn polar_rule(points: usize, m: u32) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(points);
    if m == 1 {
        let mut pairs: Vec<(f64, f64)> = x.iter().zip(&w).map(|(x, w)| (x.acos(), *w)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    } else {
        let half = std::f64::consts::FRAC_PI_2;
        x.iter()
            .zip(&w)
            .map(|(x, w)| {
                let psi = half * (x + 1.0);
                (psi, half * w * psi.sin().powi(m as i32))
            })
            .unzip()
    }
}

/// Uniform periodic rule on `[0, 2π)`.
pub fn periodic_rule(points: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * std::f64::consts::PI / points as f64;
    ((0..points).map(|i| (i as f64 + 0.5) * h).collect(), vec![h; points])
}

/// Sum in a fixed binary-tree order, independent of thread count.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}
