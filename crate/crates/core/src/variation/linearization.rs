//! Closed-form linearizations at a background point.

use crate::chart::{CurvaturePack, Mat, TensorDerivatives};

/// `h^{ij} = ḡ^{ia} ḡ^{jb} h_ab`.
pub fn raise_both(h: &Mat, ginv: &Mat) -> Mat {
    &(ginv * h) * ginv
}

/// `⟨a, b⟩_ḡ = ḡ^{ia} ḡ^{jb} a_ij b_ab`.
pub fn inner(a: &Mat, b: &Mat, ginv: &Mat) -> f64 {
    raise_both(a, ginv).dot(b)
}

/// `(Rm·h)_jk = R_ijkl h^{il}`.
pub fn rm_action(pack: &CurvaturePack, h: &Mat) -> Mat {
    let n = pack.dim;
    let hu = raise_both(h, &pack.inverse);
    Mat::from_fn(n, |j, k| {
        let mut s = 0.0;
        for i in 0..n {
            for l in 0..n {
                s += pack.riemann_at(i, j, k, l) * hu[(i, l)];
            }
        }
        s
    })
}

/// `Ric_j^p h_pk + h_jp Ric^p_k`.
fn ricci_cross(pack: &CurvaturePack, h: &Mat) -> Mat {
    let left = &(&pack.ricci * &pack.inverse) * h;
    left + left.transpose()
}

/// Zeroth-order part of the Lichnerowicz Laplacian:
/// `2 Rm·h − Ric×h − h×Ric`. Equals `Δ_L h` when `∇h = 0`.
pub fn lichnerowicz_algebraic(pack: &CurvaturePack, h: &Mat) -> Mat {
    rm_action(pack, h).scale(2.0) - ricci_cross(pack, h)
}

/// `DRic·h = −½[Δh + 2Rm·h − Ric×h − h×Ric + ∇²tr h + ∇δh + (∇δh)ᵀ]`
/// with `δh_b = −ḡ^{ac}∇_a h_cb`.
pub fn d_ricci(pack: &CurvaturePack, td: &TensorDerivatives) -> Mat {
    let nd = td.nabla_divergence();
    let sum = td.rough_laplacian() + lichnerowicz_algebraic(pack, &td.h) + td.hessian_of_trace() + nd + nd.transpose();
    sum.scale(-0.5)
}

/// `DR·h = −Δ tr h + δ²h − ⟨Ric, h⟩`.
pub fn d_scalar(pack: &CurvaturePack, td: &TensorDerivatives) -> f64 {
    let lap_tr = td.ginv.dot(&td.hessian_of_trace());
    -lap_tr + td.double_divergence() - inner(&pack.ricci, &td.h, &td.ginv)
}

/// Coefficient of `λ Δu` in `Dσ₂·h` for `h = (u/n)ḡ` on an Einstein background.
pub fn c_n(n: usize) -> f64 {
    let n = n as f64;
    -(n - 1.0) * (n - 2.0) * (n - 2.0) / (4.0 * n)
}

/// `Dσ₂·h` for a conformal direction `h = (u/n)ḡ` on an Einstein background
/// with `Ric = (n−1)λḡ`:
/// `−(n−1)(n−2)²λ²u/4 + c(n) λ Δu`.
pub fn d_sigma2_conformal(n: usize, lambda: f64, u: f64, lap_u: f64) -> f64 {
    let nf = n as f64;
    -(nf - 1.0) * (nf - 2.0) * (nf - 2.0) * lambda * lambda * u / 4.0 + c_n(n) * lambda * lap_u
}

/// Pointwise `R'` for `h = (u/n)ḡ` on an Einstein background: `(1−n)(Δu/n + λu)`.
pub fn d_scalar_conformal(n: usize, lambda: f64, u: f64, lap_u: f64) -> f64 {
    let nf = n as f64;
    (1.0 - nf) * (lap_u / nf + lambda * u)
}
