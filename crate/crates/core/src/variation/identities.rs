//! Pointwise integrands for the integrated second-order identities.

use std::sync::Arc;

use serde::Serialize;

use crate::chart::{
    covariant_derivatives, fit_step, scalar_field_calculus, Mat, MetricChart, SymTensorField,
};

use super::derivative::numeric_derivatives_unchecked;
use super::linearization::{inner, lichnerowicz_algebraic};
use super::path::{trace_field, trace_free_field, tt_decompose, LinearPath, PathJet};
use super::VariationError;

/// Which part of the traceless component `h̊` a perturbation has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum RingClass {
    Zero,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RingSummary {
    pub class: RingClass,
    pub max_abs: f64,
    pub nabla_max: f64,
    pub divergence_max: f64,
}

/// Classifies `h̊` at a few interior points. Only the zero and parallel
/// classes have closed forms that need no elliptic solve.
pub fn classify_ring(
    chart: Arc<dyn MetricChart>,
    h: Arc<dyn SymTensorField>,
    points: &[Vec<f64>],
    step: f64,
) -> Result<RingSummary, VariationError> {
    let ring = trace_free_field(chart.clone(), h.clone());
    let (mut max_abs, mut h_max, mut nabla_max, mut divergence_max) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in points {
        h_max = h_max.max(h.value(p).max_abs());
        let td = covariant_derivatives(chart.as_ref(), &ring, p, step)?;
        max_abs = max_abs.max(td.h.max_abs());
        nabla_max = td.nabla.iter().fold(nabla_max, |m, v| m.max(v.abs()));
        divergence_max = td.divergence().iter().fold(divergence_max, |m, v| m.max(v.abs()));
    }
    let class = if max_abs <= 1e-10 * (1.0 + h_max) {
        RingClass::Zero
    } else if nabla_max <= 1e-6 * (1.0 + max_abs) {
        RingClass::Parallel
    } else {
        return Err(VariationError::Unsupported(format!(
            "traceless part is neither zero nor parallel (max |∇h̊| = {nabla_max:.3e}); \
             closed forms for general TT directions need an elliptic solve"
        )));
    };
    Ok(RingSummary { class, max_abs, nabla_max, divergence_max })
}

/// Indices into [`NodeTerms`].
pub mod term {
    /// `h^{ij} R'_ij`
    pub const H_DOT_RIC1: usize = 0;
    /// `|Ric'|²`
    pub const RIC1_SQ: usize = 1;
    /// `ḡ^{ij} R''_ij`
    pub const TR_RIC2: usize = 2;
    /// `(R')²`
    pub const SCAL1_SQ: usize = 3;
    /// `|∇u|²`
    pub const GRAD_U_SQ: usize = 4;
    /// `(Δu)²`
    pub const LAP_U_SQ: usize = 5;
    pub const U_SQ: usize = 6;
    pub const U: usize = 7;
    /// `h̊·Δ_L h̊`
    pub const RING_LRING: usize = 8;
    /// `|Δ_L h̊|²`
    pub const LRING_SQ: usize = 9;
    /// `|h|²`
    pub const H_SQ: usize = 10;
    /// `σ₂''`
    pub const SIGMA2_2: usize = 11;
    /// closed-form second variation of `σ₂` in terms of `R'`, `R''`
    pub const SIGMA2_2_CLOSED: usize = 12;
    /// `|Δ_E h̊|²`
    pub const ERING_SQ: usize = 13;
    /// `h̊·Δ_E h̊`
    pub const RING_ERING: usize = 14;
    /// `tr h`
    pub const TR_H: usize = 15;
    /// `Richardson error of σ₂''`
    pub const SIGMA2_2_ERR: usize = 16;
    pub const COUNT: usize = 17;
}

pub type NodeTerms = [f64; term::COUNT];

/// Integrands at one node. `with_path` adds the `t`-derivative terms
/// (`R'`, `R''`, `σ₂''`), which cost seven curvature packs.
pub fn node_terms(
    path: &LinearPath,
    p: &[f64],
    lambda: f64,
    step: f64,
    schedule: &[f64],
    with_path: bool,
) -> Result<NodeTerms, VariationError> {
    use term::*;
    let bg = path.base.as_ref();
    let n = bg.dim();
    let nf = n as f64;
    let s = fit_step(bg, p, step, 2.0)?;
    let jet = PathJet::new(path, p, s)?;
    let pack0 = jet.pack(0.0)?;
    let ginv = pack0.inverse;
    let h = path.h.value(p);
    let tt = tt_decompose(&h, &pack0.metric, &ginv);
    let u_field = trace_field(path.base.clone(), path.h.clone());
    let uc = scalar_field_calculus(bg, &u_field, p, s)?;
    let l_ring = lichnerowicz_algebraic(&pack0, &tt.h_ring);
    let e_ring = l_ring + tt.h_ring.scale(2.0 * (nf - 1.0) * lambda);

    let mut out = [0.0; COUNT];
    out[GRAD_U_SQ] = uc.grad_norm_sq;
    out[LAP_U_SQ] = uc.laplacian * uc.laplacian;
    out[U_SQ] = uc.value * uc.value;
    out[U] = uc.value;
    out[RING_LRING] = inner(&tt.h_ring, &l_ring, &ginv);
    out[LRING_SQ] = inner(&l_ring, &l_ring, &ginv);
    out[ERING_SQ] = inner(&e_ring, &e_ring, &ginv);
    out[RING_ERING] = inner(&tt.h_ring, &e_ring, &ginv);
    out[H_SQ] = inner(&h, &h, &ginv);
    out[TR_H] = tt.u;

    if with_path {
        let values = |t: f64| -> Result<Vec<f64>, VariationError> {
            let pack = jet.pack(t)?;
            let mut v: Vec<f64> = pack.ricci.to_rows().into_iter().flatten().collect();
            v.push(pack.scalar);
            v.push(pack.sigma2);
            Ok(v)
        };
        let (d1, d2) = numeric_derivatives_unchecked(values, schedule)?;
        let ric1 = Mat::from_fn(n, |i, j| d1.value[i * n + j]);
        let ric2 = Mat::from_fn(n, |i, j| d2.value[i * n + j]);
        let scal1 = d1.value[n * n];
        out[H_DOT_RIC1] = inner(&h, &ric1, &ginv);
        out[RIC1_SQ] = inner(&ric1, &ric1, &ginv);
        out[TR_RIC2] = ginv.dot(&ric2);
        out[SCAL1_SQ] = scal1 * scal1;
        out[SIGMA2_2] = d2.value[n * n + 1];
        out[SIGMA2_2_ERR] = d2.error[n * n + 1];
        out[SIGMA2_2_CLOSED] = (nf - 1.0) * (nf * nf - 6.0 * nf + 6.0) / 2.0 * lambda * lambda * out[H_SQ]
            + (-nf * nf + 8.0 * nf - 8.0) / 2.0 * lambda * out[H_DOT_RIC1]
            - out[RIC1_SQ]
            + (nf - 2.0) * (nf - 2.0) / 4.0 * lambda * out[TR_RIC2]
            + nf / (4.0 * (nf - 1.0)) * out[SCAL1_SQ];
    }
    Ok(out)
}
