//! Three engine calls exposed to the browser. Each returns a JSON string.

use serde_json::{json, Value};
use sigma2_core::chart::{curvature_pack, SphereChart, MAX_DIM};
use sigma2_core::exact::Rational;
use sigma2_core::homogeneous::{stability_probe as probe, SphereProductFamily};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn counterexample_curves(t_max: f64, steps: u32) -> Result<String, JsError> {
    curves(t_max, steps).map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn stability_probe(dims: &str) -> Result<String, JsError> {
    stability(dims).map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sphere_curvature(n: usize, r: f64) -> Result<String, JsError> {
    sphere(n, r).map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

/// σ₂, volume and H ratios against t = 0 along the (S²)⁴ family.
pub fn curves(t_max: f64, steps: u32) -> Result<Value, String> {
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
        return Err("need t_max > 0 and steps > 0".into());
    }
    let fam = SphereProductFamily::counterexample();
    let s2 = fam.sigma2().map_err(|e| e.to_string())?;
    let (ratio, base) = fam.volume().map_err(|e| e.to_string())?;
    let n = fam.dim() as f64;
    let s0 = s2.eval_f64(0.0);
    let mut points = Vec::new();
    for i in 0..=steps {
        let t = t_max * f64::from(i) / f64::from(steps);
        let vr = ratio.eval_f64(t);
        // past the first root of the volume denominator the metric degenerates
        if fam.check_positive_at(t).is_err() || !(vr > 0.0 && vr.is_finite()) {
            break;
        }
        let sr = s2.eval_f64(t) / s0;
        points.push(json!({ "t": t, "sigma2Ratio": sr, "volumeRatio": vr, "hRatio": vr.powf(4.0 / n) * sr }));
    }
    Ok(json!({
        "sigma2": s2.to_string(),
        "volumeRatio": ratio.to_string(),
        "baseVolume": base.to_string(),
        "points": points,
    }))
}

/// Parallel TT spectrum of the Einstein operator on a product of unit spheres.
pub fn stability(dims: &str) -> Result<Value, String> {
    let dims = dims
        .split(|c: char| c == ',' || c == 'x' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad dimension {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let fam = SphereProductFamily::unit_product(&dims).map_err(|e| e.to_string())?;
    let report = probe(&fam).map_err(|e| e.to_string())?;
    let eigenvalues: Vec<String> = report
        .eigenvalues
        .iter()
        .map(|e| match &e.exact {
            Some(q) if q.is_negative() => q.to_string(),
            Some(q) => format!("+{q}"),
            None => format!("{:+.6}", e.approx),
        })
        .collect();
    Ok(json!({
        "n": report.n,
        "lambda": report.lambda.to_string(),
        "eigenvalues": eigenvalues,
        "verdict": report.verdict.as_str(),
    }))
}

/// Finite-difference curvature of S^n(r) at a generic point, next to the exact values.
pub fn sphere(n: usize, r: f64) -> Result<Value, String> {
    if !(2..=MAX_DIM).contains(&n) {
        return Err(format!("dimension must be in 2..={MAX_DIM}"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err("radius must be positive".into());
    }
    let chart = SphereChart::new(n, r);
    let mut p = vec![1.1; n];
    p[n - 1] = 0.7;
    let pack = curvature_pack(&chart, &p, 1e-3).map_err(|e| e.to_string())?;
    let nf = n as f64;
    let scalar = nf * (nf - 1.0) / (r * r);
    let sigma2 = nf * (nf - 1.0) / (8.0 * r.powi(4));
    let exact = (r.fract() == 0.0 && r <= 1e6).then(|| {
        let r2 = Rational::from_int(r as i64).pow(2);
        let nn = Rational::from_int((n * (n - 1)) as i64);
        json!({
            "scalar": (&nn / &r2).to_string(),
            "sigma2": (&nn / &(&Rational::from_int(8) * &r2.pow(2))).to_string(),
        })
    });
    Ok(json!({
        "scalar": pack.scalar,
        "sigma2": pack.sigma2,
        "scalarExpected": scalar,
        "sigma2Expected": sigma2,
        "scalarError": (pack.scalar - scalar).abs(),
        "sigma2Error": (pack.sigma2 - sigma2).abs(),
        "exact": exact,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_start_at_one_and_stop_before_collapse() {
        let v = curves(0.5, 50).unwrap();
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts[0]["sigma2Ratio"], 1.0);
        assert_eq!(pts[0]["volumeRatio"], 1.0);
        assert!(pts.len() < 51);
        assert!(pts.iter().skip(1).all(|p| p["sigma2Ratio"].as_f64().unwrap() > 1.0));
        assert_eq!(v["sigma2"], "36/7 + 18/7 t^2 + 32/7 t^4");
        assert!(curves(0.0, 5).is_err());
    }

    #[test]
    fn probe_flags_four_spheres() {
        let v = stability("2x2x2x2").unwrap();
        assert_eq!(v["verdict"], "unstable");
        assert_eq!(v["eigenvalues"], json!(["+2", "+2", "+2"]));
        assert!(stability("2,q").is_err());
    }

    #[test]
    fn sphere_matches_closed_form() {
        let v = sphere(3, 1.0).unwrap();
        assert!(v["sigma2Error"].as_f64().unwrap() < 1e-6);
        assert_eq!(v["exact"]["sigma2"], "3/4");
        assert_eq!(sphere(4, 2.0).unwrap()["exact"]["scalar"], "3");
        assert!(sphere(1, 1.0).is_err());
        assert!(sphere(3, -1.0).is_err());
    }
}
