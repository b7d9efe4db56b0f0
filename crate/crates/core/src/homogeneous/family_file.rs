use serde::{Deserialize, Serialize};

use super::{GeometryError, SphereFactor, SphereProductFamily};
use crate::exact::{Poly, RatFun, Rational};

/// One factor of a family description file. Coefficients are listed from
/// the constant term upward; each entry is an integer or a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FactorSpec {
    pub dim: usize,
    pub scale_numerator_coeffs: Vec<Rational>,
    #[serde(default = "one_coeffs")]
    pub scale_denominator_coeffs: Vec<Rational>,
}

fn one_coeffs() -> Vec<Rational> {
    vec![Rational::one()]
}

/// Family description: either a bare list of factors or `{"factors": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FamilyFile {
    List(Vec<FactorSpec>),
    Object { factors: Vec<FactorSpec> },
}

impl FamilyFile {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn factors(&self) -> &[FactorSpec] {
        match self {
            FamilyFile::List(f) | FamilyFile::Object { factors: f } => f,
        }
    }

    pub fn to_family(&self) -> Result<SphereProductFamily, GeometryError> {
        let factors = self
            .factors()
            .iter()
            .map(|f| {
                let scale = RatFun::new(
                    Poly::new(f.scale_numerator_coeffs.clone()),
                    Poly::new(f.scale_denominator_coeffs.clone()),
                )?;
                Ok(SphereFactor::new(f.dim, scale))
            })
            .collect::<Result<Vec<_>, GeometryError>>()?;
        SphereProductFamily::new(factors)
    }

    pub fn from_family(family: &SphereProductFamily) -> Self {
        FamilyFile::Object {
            factors: family
                .factors()
                .iter()
                .map(|f| {
                    let (n, d) = f.scale.unit_constant_form();
                    FactorSpec {
                        dim: f.dim,
                        scale_numerator_coeffs: n.coeffs().to_vec(),
                        scale_denominator_coeffs: d.coeffs().to_vec(),
                    }
                })
                .collect(),
        }
    }
}
