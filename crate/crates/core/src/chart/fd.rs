//! Fourth-order central difference stencils over chart coordinates.

use super::Mat;

const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
const W1: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
const W2: [f64; 4] = [-1.0, 16.0, 16.0, -1.0];

/// Values that can be combined linearly by the stencils.
pub trait Linear: Clone {
    fn zero_like(&self) -> Self;
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Linear for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Linear for Mat {
    fn zero_like(&self) -> Self {
        Mat::zeros(self.dim())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                self[(i, j)] += a * x[(i, j)];
            }
        }
    }
}

impl Linear for Vec<f64> {
    fn zero_like(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
}

fn shifted(p: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut q = p.to_vec();
    for &(axis, d) in moves {
        q[axis] += d;
    }
    q
}

fn scaled<T: Linear>(x: &T, c: f64) -> T {
    let mut out = x.zero_like();
    out.axpy(c, x);
    out
}

/// `∂_a f(p)`.
pub fn d1<T: Linear, E>(
    f: &impl Fn(&[f64]) -> Result<T, E>,
    p: &[f64],
    a: usize,
    h: f64,
) -> Result<T, E> {
    let mut acc: Option<T> = None;
    for (o, w) in OFFSETS.iter().zip(W1) {
        let v = f(&shifted(p, &[(a, o * h)]))?;
        let acc = acc.get_or_insert_with(|| v.zero_like());
        acc.axpy(w, &v);
    }
    Ok(scaled(&acc.unwrap(), 1.0 / (12.0 * h)))
}

/// `∂_a ∂_b f(p)`; `center` is `f(p)`, reused by the diagonal stencil.
pub fn d2<T: Linear, E>(
    f: &impl Fn(&[f64]) -> Result<T, E>,
    p: &[f64],
    a: usize,
    b: usize,
    h: f64,
    center: &T,
) -> Result<T, E> {
    let mut acc = center.zero_like();
    if a == b {
        acc.axpy(-30.0, center);
        for (o, w) in OFFSETS.iter().zip(W2) {
            let v = f(&shifted(p, &[(a, o * h)]))?;
            acc.axpy(w, &v);
        }
        Ok(scaled(&acc, 1.0 / (12.0 * h * h)))
    } else {
        for (oa, wa) in OFFSETS.iter().zip(W1) {
            for (ob, wb) in OFFSETS.iter().zip(W1) {
                let v = f(&shifted(p, &[(a, oa * h), (b, ob * h)]))?;
                acc.axpy(wa * wb, &v);
            }
        }
        Ok(scaled(&acc, 1.0 / (144.0 * h * h)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_quartics() {
        let f = |p: &[f64]| -> Result<f64, ()> { Ok(p[0].powi(4) + p[0] * p[1].powi(3)) };
        let p = [0.7, -0.4];
        let h = 0.1;
        assert!((d1(&f, &p, 0, h).unwrap() - (4.0 * 0.343 + (-0.064))).abs() < 1e-12);
        let c = f(&p).unwrap();
        assert!((d2(&f, &p, 0, 0, h, &c).unwrap() - 12.0 * 0.49).abs() < 1e-10);
        assert!((d2(&f, &p, 0, 1, h, &c).unwrap() - 3.0 * 0.16).abs() < 1e-10);
    }

    #[test]
    fn fourth_order_convergence() {
        let f = |p: &[f64]| -> Result<f64, ()> { Ok(p[0].sin()) };
        let e1 = (d1(&f, &[0.3], 0, 0.1).unwrap() - 0.3f64.cos()).abs();
        let e2 = (d1(&f, &[0.3], 0, 0.05).unwrap() - 0.3f64.cos()).abs();
        assert!(e1 / e2 > 14.0);
    }
}
