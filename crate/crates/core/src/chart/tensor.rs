use super::curvature::metric_jet;
use super::fd::d1;
use super::{check_point, ChartError, Mat, MetricChart, SymTensorField};

/// First and second covariant derivatives of a symmetric 2-tensor at a point,
/// with the derived operators used by the linearization formulas.
#[derive(Debug, Clone)]
pub struct TensorDerivatives {
    pub dim: usize,
    pub h: Mat,
    pub ginv: Mat,
    /// `∇_a h_bc` at `[(a * n + b) * n + c]`.
    pub nabla: Vec<f64>,
    /// `∇_a ∇_b h_cd` at `[((a * n + b) * n + c) * n + d]`.
    pub nabla2: Vec<f64>,
}

fn nabla_at(
    chart: &dyn MetricChart,
    h: &dyn SymTensorField,
    q: &[f64],
    step: f64,
) -> Result<Vec<f64>, ChartError> {
    let jet = metric_jet(chart, q, step, false)?;
    let n = jet.dim();
    let gamma = jet.christoffel();
    let hv = h.value(q);
    let hf = |x: &[f64]| -> Result<Mat, ChartError> { Ok(h.value(x)) };
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        let dh = d1(&hf, q, a, step)?;
        for b in 0..n {
            for c in 0..n {
                let mut v = dh[(b, c)];
                for p in 0..n {
                    v -= gamma[(p * n + a) * n + b] * hv[(p, c)] + gamma[(p * n + a) * n + c] * hv[(b, p)];
                }
                out[(a * n + b) * n + c] = v;
            }
        }
    }
    Ok(out)
}

/// Nested fourth-order differences; needs a stencil margin of `4·step`.
pub fn covariant_derivatives(
    chart: &dyn MetricChart,
    h: &dyn SymTensorField,
    p: &[f64],
    step: f64,
) -> Result<TensorDerivatives, ChartError> {
    check_point(chart, p, 4.0 * step)?;
    let jet = metric_jet(chart, p, step, false)?;
    let n = jet.dim();
    let gamma = jet.christoffel();
    let gm = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let nabla = nabla_at(chart, h, p, step)?;
    let t = |a: usize, b: usize, c: usize| nabla[(a * n + b) * n + c];
    let tf = |x: &[f64]| nabla_at(chart, h, x, step);
    let mut nabla2 = vec![0.0; n * n * n * n];
    for a in 0..n {
        let dt = d1(&tf, p, a, step)?;
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let mut v = dt[(b * n + c) * n + d];
                    for q in 0..n {
                        v -= gm(q, a, b) * t(q, c, d) + gm(q, a, c) * t(b, q, d) + gm(q, a, d) * t(b, c, q);
                    }
                    nabla2[((a * n + b) * n + c) * n + d] = v;
                }
            }
        }
    }
    Ok(TensorDerivatives { dim: n, h: h.value(p), ginv: jet.ginv, nabla, nabla2 })
}

impl TensorDerivatives {
    fn n2(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        let n = self.dim;
        self.nabla2[((a * n + b) * n + c) * n + d]
    }

    /// Rough Laplacian `(Δh)_cd = g^{ab} ∇_a ∇_b h_cd`.
    pub fn rough_laplacian(&self) -> Mat {
        let n = self.dim;
        Mat::from_fn(n, |c, d| {
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += self.ginv[(a, b)] * self.n2(a, b, c, d);
                }
            }
            s
        })
    }

    /// `tr h = g^{ab} h_ab`.
    pub fn trace(&self) -> f64 {
        self.ginv.dot(&self.h)
    }

    /// `(δh)_b = −g^{ac} ∇_a h_cb`.
    pub fn divergence(&self) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|b| {
                let mut s = 0.0;
                for a in 0..n {
                    for c in 0..n {
                        s += self.ginv[(a, c)] * self.nabla[(a * n + c) * n + b];
                    }
                }
                -s
            })
            .collect()
    }

    /// `∇_a (δh)_b = −g^{cd} ∇_a ∇_c h_db`.
    pub fn nabla_divergence(&self) -> Mat {
        let n = self.dim;
        Mat::from_fn(n, |a, b| {
            let mut s = 0.0;
            for c in 0..n {
                for d in 0..n {
                    s += self.ginv[(c, d)] * self.n2(a, c, d, b);
                }
            }
            -s
        })
    }

    /// `δ²h = ∇^b ∇^c h_bc`.
    pub fn double_divergence(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        s += self.ginv[(a, b)] * self.ginv[(c, d)] * self.n2(a, c, b, d);
                    }
                }
            }
        }
        s
    }

    /// `∇_a ∇_b (tr h)`.
    pub fn hessian_of_trace(&self) -> Mat {
        let n = self.dim;
        Mat::from_fn(n, |a, b| {
            let mut s = 0.0;
            for c in 0..n {
                for d in 0..n {
                    s += self.ginv[(c, d)] * self.n2(a, b, c, d);
                }
            }
            s
        })
    }
}
