//! Name-addressable backgrounds and perturbations.
//!
//! Backgrounds: `sphere:n=2,r=1`, `sphere3`, `flat:3`, `torus:3`,
//! `product:s2x4`, `product:2,4`, `product:counterexample`,
//! `product:<family file>`, and
//! `conformal:base=sphere3,f=harmonic:k=2,amp=0.1`.
//!
//! Perturbations: `zero`, `metric`, `velocity`, `parallel:0,0,-3,3`,
//! `conformal:harmonic:k=2[,axis=…]`, `conformal:fourier:k=1,axis=0`.

use std::sync::Arc;

use thiserror::Error;

use crate::chart::{ConformalChart, FlatChart, MetricChart};
use crate::exact::Rational;
use crate::homogeneous::{FamilyFile, GeometryError, SphereProductFamily};
use crate::quadrature::Manifold;
use crate::spectral::{SpectralError, ZonalHarmonic};
use crate::variation::Perturbation;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown background `{0}`")]
    UnknownBackground(String),
    #[error("unknown perturbation `{0}`")]
    UnknownPerturbation(String),
    #[error("cannot read family file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("family file {path}: {source}")]
    FamilyFile { path: String, source: serde_json::Error },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("`{0}` has no built-in quadrature; use sphere, torus or product backgrounds")]
    NoQuadrature(String),
    #[error("`{perturbation}` is not available on {background}")]
    Incompatible { perturbation: String, background: String },
}

/// A parsed background: the chart for pointwise work, the manifold whose
/// quadrature matches the chart, and the exact family when there is one.
#[derive(Clone)]
pub struct Background {
    pub name: String,
    pub chart: Arc<dyn MetricChart>,
    manifold: Option<Manifold>,
    /// Set when the chart is a deformation of `manifold`'s standard metric.
    deformed: bool,
    pub family: Option<SphereProductFamily>,
}

impl std::fmt::Debug for Background {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Background").field("name", &self.name).field("chart", &self.chart.label()).finish()
    }
}

impl Background {
    pub fn parse(spec: &str) -> Result<Self, RegistryError> {
        let spec = spec.trim();
        let unknown = || RegistryError::UnknownBackground(spec.to_string());
        if let Some(rest) = spec.strip_prefix("conformal:") {
            return Self::conformal(spec, rest);
        }
        if let Some(rest) = spec.strip_prefix("product:") {
            return Self::product(spec, rest);
        }
        if let Some(rest) = spec.strip_prefix("flat:") {
            let n = parse_dim(rest).ok_or_else(unknown)?;
            return Ok(Background {
                name: spec.to_string(),
                chart: Arc::new(FlatChart::euclidean(n)),
                manifold: None,
                deformed: false,
                family: None,
            });
        }
        if let Some(rest) = spec.strip_prefix("torus:") {
            let n = parse_dim(rest).ok_or_else(unknown)?;
            return Ok(Self::standard(spec, Manifold::Torus { n }, None));
        }
        if let Some(rest) = spec.strip_prefix("sphere:") {
            let (mut n, mut r) = (None, 1.0);
            for part in rest.split(',') {
                match part.split_once('=') {
                    Some(("n", v)) => n = Some(parse_dim(v).ok_or_else(unknown)?),
                    Some(("r", v)) => r = v.trim().parse::<f64>().ok().filter(|r| *r > 0.0).ok_or_else(unknown)?,
                    _ => return Err(unknown()),
                }
            }
            let n = n.ok_or_else(unknown)?;
            return Ok(Self::sphere(spec, n, r));
        }
        if let Some(rest) = spec.strip_prefix("sphere") {
            let n = parse_dim(rest).ok_or_else(unknown)?;
            return Ok(Self::sphere(spec, n, 1.0));
        }
        Err(unknown())
    }

    fn standard(name: &str, manifold: Manifold, family: Option<SphereProductFamily>) -> Self {
        Background { name: name.to_string(), chart: manifold.chart(), manifold: Some(manifold), deformed: false, family }
    }

    fn sphere(name: &str, n: usize, r: f64) -> Self {
        let family = Rational::approximate(r * r, 1_000_000)
            .filter(|r2| (r2.to_f64() - r * r).abs() <= 1e-12 * r * r)
            .and_then(|r2| {
                SphereProductFamily::new(vec![crate::homogeneous::SphereFactor::new(
                    n,
                    crate::exact::RatFun::constant(r2),
                )])
                .ok()
            });
        Self::standard(name, Manifold::Sphere { n, r }, family)
    }

    fn product(spec: &str, rest: &str) -> Result<Self, RegistryError> {
        if rest == "counterexample" {
            let family = SphereProductFamily::counterexample();
            return Ok(Self::standard(spec, Manifold::sphere_product(&[2, 2, 2, 2]), Some(family)));
        }
        if let Some(dims) = parse_product_dims(rest) {
            let family = SphereProductFamily::unit_product(&dims).ok();
            return Ok(Self::standard(spec, Manifold::sphere_product(&dims), family));
        }
        let text = std::fs::read_to_string(rest).map_err(|source| RegistryError::Io { path: rest.to_string(), source })?;
        let file = FamilyFile::parse(&text).map_err(|source| RegistryError::FamilyFile { path: rest.to_string(), source })?;
        let family = file.to_family()?;
        let factors = family
            .scales_at_zero()?
            .iter()
            .zip(family.factors())
            .map(|(a, f)| Manifold::Sphere { n: f.dim, r: a.to_f64().sqrt() })
            .collect();
        Ok(Self::standard(spec, Manifold::Product { factors }, Some(family)))
    }

    fn conformal(spec: &str, rest: &str) -> Result<Self, RegistryError> {
        let unknown = || RegistryError::UnknownBackground(spec.to_string());
        let body = rest.strip_prefix("base=").ok_or_else(unknown)?;
        let (base, tail) = body.split_once(",f=").ok_or_else(unknown)?;
        let (field, amp) = match tail.rsplit_once(",amp=") {
            Some((f, a)) => (f, a.trim().parse::<f64>().map_err(|_| unknown())?),
            None => (tail, 0.1),
        };
        let base = Background::parse(base)?;
        let manifold = base.manifold.clone().ok_or_else(|| RegistryError::NoQuadrature(base.name.clone()))?;
        let f = match &manifold {
            Manifold::Sphere { n, r } => ZonalHarmonic::parse(field, *n, *r)?,
            _ => {
                return Err(RegistryError::Incompatible {
                    perturbation: field.to_string(),
                    background: base.name.clone(),
                })
            }
        };
        let chart = ConformalChart { base: base.chart.clone(), field: Arc::new(f), amp, field_label: field.to_string() };
        Ok(Background { name: spec.to_string(), chart: Arc::new(chart), manifold: Some(manifold), deformed: true, family: None })
    }

    /// The manifold carrying the chart's quadrature.
    pub fn quadrature_manifold(&self) -> Result<&Manifold, RegistryError> {
        self.manifold.as_ref().ok_or_else(|| RegistryError::NoQuadrature(self.name.clone()))
    }

    /// The manifold when the chart is its standard metric, as the variation
    /// lab requires.
    pub fn standard_manifold(&self) -> Result<&Manifold, RegistryError> {
        match (&self.manifold, self.deformed) {
            (Some(m), false) => Ok(m),
            _ => Err(RegistryError::NoQuadrature(self.name.clone())),
        }
    }

    /// Parses a perturbation selector against this background.
    pub fn perturbation(&self, spec: &str) -> Result<Perturbation, RegistryError> {
        let spec = spec.trim();
        let incompatible =
            || RegistryError::Incompatible { perturbation: spec.to_string(), background: self.name.clone() };
        let m = self.standard_manifold()?;
        match spec {
            "zero" => return Ok(Perturbation::Zero),
            "metric" => return Ok(Perturbation::Metric),
            "velocity" => {
                let fam = self.family.as_ref().ok_or_else(incompatible)?;
                let v = if fam.velocity()?.is_zero() && is_unit_s2_power(m, 4) {
                    SphereProductFamily::counterexample().velocity()?
                } else {
                    fam.velocity()?
                };
                if v.is_zero() {
                    return Err(incompatible());
                }
                return Ok(Perturbation::Parallel(v.coeffs));
            }
            _ => {}
        }
        if let Some(rest) = spec.strip_prefix("parallel:") {
            let c = rest
                .split(',')
                .map(|v| v.trim().parse::<Rational>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| RegistryError::UnknownPerturbation(spec.to_string()))?;
            return Ok(Perturbation::Parallel(c));
        }
        if let Some(sel) = spec.strip_prefix("conformal:") {
            if sel.starts_with("harmonic:") {
                let Manifold::Sphere { n, r } = m else { return Err(incompatible()) };
                return Ok(Perturbation::conformal(ZonalHarmonic::parse(sel, *n, *r)?, sel));
            }
            if let Some(args) = sel.strip_prefix("fourier:") {
                let (k, axis) = parse_fourier(args).ok_or_else(|| RegistryError::UnknownPerturbation(spec.to_string()))?;
                if !matches!(m, Manifold::Torus { .. }) || axis >= m.dim() {
                    return Err(incompatible());
                }
                return Ok(Perturbation::conformal(move |p: &[f64]| (k * p[axis]).cos(), sel));
            }
        }
        Err(RegistryError::UnknownPerturbation(spec.to_string()))
    }
}

fn parse_dim(s: &str) -> Option<usize> {
    s.trim().parse::<usize>().ok().filter(|n| *n >= 1)
}

/// `s2x4` is four copies of `S²`; `s2xs3` is `S²×S³`; `2,4` is `S²×S⁴`.
fn parse_product_dims(s: &str) -> Option<Vec<usize>> {
    if s.contains(',') || s.chars().all(|c| c.is_ascii_digit()) {
        return s.split(',').map(|v| parse_dim(v).filter(|m| *m >= 2)).collect();
    }
    let mut dims = Vec::new();
    for tok in s.split('x') {
        if let Some(m) = tok.strip_prefix('s') {
            dims.push(parse_dim(m).filter(|m| *m >= 2)?);
        } else {
            let count = parse_dim(tok)?;
            let last = *dims.last()?;
            dims.extend(std::iter::repeat_n(last, count - 1));
        }
    }
    (!dims.is_empty()).then_some(dims)
}

fn parse_fourier(args: &str) -> Option<(f64, usize)> {
    let (mut k, mut axis) = (None, 0);
    for part in args.split(',') {
        match part.split_once('=')? {
            ("k", v) => k = Some(v.trim().parse::<u32>().ok()? as f64),
            ("axis", v) => axis = v.trim().parse().ok()?,
            _ => return None,
        }
    }
    Some((k?, axis))
}

fn is_unit_s2_power(m: &Manifold, count: usize) -> bool {
    match m {
        Manifold::Product { factors } => {
            factors.len() == count && factors.iter().all(|f| matches!(f, Manifold::Sphere { n: 2, r } if *r == 1.0))
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_names() {
        for (name, dim) in [
            ("sphere:n=2,r=1", 2),
            ("sphere3", 3),
            ("sphere4", 4),
            ("flat:3", 3),
            ("torus:2", 2),
            ("product:s2x4", 8),
            ("product:2,4", 6),
            ("product:s2xs3", 5),
            ("conformal:base=sphere3,f=harmonic:k=2,amp=0.1", 3),
        ] {
            let b = Background::parse(name).unwrap();
            assert_eq!(b.chart.dim(), dim, "{name}");
        }
        assert_eq!(parse_product_dims("s2x4"), Some(vec![2, 2, 2, 2]));
        assert_eq!(parse_product_dims("s2x2xs4"), Some(vec![2, 2, 4]));
        for bad in ["sphere", "sphere:r=2", "product:x4", "product:1,2", "moon"] {
            assert!(Background::parse(bad).is_err(), "{bad}");
        }
        assert!(Background::parse("flat:3").unwrap().quadrature_manifold().is_err());
        let conf = Background::parse("conformal:base=sphere2,f=harmonic:k=1,axis=0,0,1").unwrap();
        assert!(conf.quadrature_manifold().is_ok() && conf.standard_manifold().is_err());
    }

    #[test]
    fn product_family_file() {
        let dir = std::env::temp_dir().join(format!("sigma2-registry-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fam.json");
        let text = serde_json::to_string(&FamilyFile::from_family(&SphereProductFamily::counterexample())).unwrap();
        std::fs::write(&path, text).unwrap();
        let b = Background::parse(&format!("product:{}", path.display())).unwrap();
        assert_eq!(b.chart.dim(), 8);
        let Perturbation::Parallel(c) = b.perturbation("velocity").unwrap() else { panic!() };
        assert_eq!(c, ["0", "0", "-3", "3"].map(|v| v.parse::<Rational>().unwrap()));
        std::fs::remove_dir_all(&dir).ok();
        assert!(matches!(Background::parse("product:/nonexistent.json"), Err(RegistryError::Io { .. })));
        let built_in = Background::parse("product:counterexample").unwrap();
        assert_eq!(built_in.family, Some(SphereProductFamily::counterexample()));
    }

    #[test]
    fn perturbation_selectors() {
        let s3 = Background::parse("sphere3").unwrap();
        assert_eq!(s3.perturbation("conformal:harmonic:k=2").unwrap().label(), "conformal:harmonic:k=2");
        assert!(matches!(s3.perturbation("metric").unwrap(), Perturbation::Metric));
        assert!(s3.perturbation("conformal:fourier:k=1").is_err());
        assert!(s3.perturbation("velocity").is_err());
        let p = Background::parse("product:s2x4").unwrap();
        assert_eq!(p.perturbation("velocity").unwrap().label(), "parallel:0,0,-3,3");
        assert_eq!(p.perturbation("parallel:1/2,-1/2,0,0").unwrap().label(), "parallel:1/2,-1/2,0,0");
        let t = Background::parse("torus:2").unwrap();
        assert!(t.perturbation("conformal:fourier:k=2,axis=1").is_ok());
        assert!(t.perturbation("conformal:harmonic:k=1").is_err());
        assert!(matches!(s3.perturbation("wiggle"), Err(RegistryError::UnknownPerturbation(_))));
    }
}
