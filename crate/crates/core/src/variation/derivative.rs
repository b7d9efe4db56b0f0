use serde::Serialize;

use super::VariationError;

/// Default `t` steps for central differences.
pub const DEFAULT_SCHEDULE: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Richardson-extrapolated central-difference derivative of a vector-valued function.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DerivativeEstimate {
    pub value: Vec<f64>,
    /// Componentwise `|R[m][m] − R[m][m−1]|` from the last table row.
    pub error: Vec<f64>,
    pub schedule: Vec<f64>,
    /// Formal accuracy order after extrapolation (2 per table column).
    pub richardson_order: u32,
}

impl DerivativeEstimate {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }

    pub fn max_error(&self) -> f64 {
        self.error.iter().fold(0.0, |m, v| m.max(*v))
    }
}

/// Both central first and second derivatives of `f` at `t = 0` from one set
/// of evaluations at `0, ±h` for each step in `schedule` (decreasing).
pub fn numeric_derivatives<E>(
    f: impl Fn(f64) -> Result<Vec<f64>, E>,
    schedule: &[f64],
) -> Result<(DerivativeEstimate, DerivativeEstimate), VariationError>
where
    VariationError: From<E>,
{
    derivatives_impl(f, schedule, true)
}

/// As [`numeric_derivatives`] but never reports non-convergence; for
/// per-node integrands whose convergence is judged after integration.
pub fn numeric_derivatives_unchecked<E>(
    f: impl Fn(f64) -> Result<Vec<f64>, E>,
    schedule: &[f64],
) -> Result<(DerivativeEstimate, DerivativeEstimate), VariationError>
where
    VariationError: From<E>,
{
    derivatives_impl(f, schedule, false)
}

fn derivatives_impl<E>(
    f: impl Fn(f64) -> Result<Vec<f64>, E>,
    schedule: &[f64],
    check: bool,
) -> Result<(DerivativeEstimate, DerivativeEstimate), VariationError>
where
    VariationError: From<E>,
{
    check_schedule(schedule)?;
    let f0 = f(0.0)?;
    let mut d1 = Vec::with_capacity(schedule.len());
    let mut d2 = Vec::with_capacity(schedule.len());
    let mut scale = f0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for &h in schedule {
        let (fp, fm) = (f(h)?, f(-h)?);
        scale = fp.iter().chain(&fm).fold(scale, |m, v| m.max(v.abs()));
        d1.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
        d2.push(
            fp.iter().zip(&fm).zip(&f0).map(|((a, b), c)| (a - 2.0 * c + b) / (h * h)).collect::<Vec<_>>(),
        );
    }
    Ok((richardson(&d1, schedule, scale, 1, check)?, richardson(&d2, schedule, scale, 2, check)?))
}

/// Central derivative of order 1 or 2.
pub fn numeric_derivative<E>(
    f: impl Fn(f64) -> Result<Vec<f64>, E>,
    order: u8,
    schedule: &[f64],
) -> Result<DerivativeEstimate, VariationError>
where
    VariationError: From<E>,
{
    match order {
        1 => {
            check_schedule(schedule)?;
            let mut d1 = Vec::with_capacity(schedule.len());
            let mut scale = 0.0f64;
            for &h in schedule {
                let (fp, fm) = (f(h)?, f(-h)?);
                scale = fp.iter().chain(&fm).fold(scale, |m, v| m.max(v.abs()));
                d1.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
            }
            richardson(&d1, schedule, scale, 1, true)
        }
        2 => Ok(numeric_derivatives(f, schedule)?.1),
        _ => Err(VariationError::Unsupported(format!("derivative order {order}"))),
    }
}

fn check_schedule(schedule: &[f64]) -> Result<(), VariationError> {
    let ok = !schedule.is_empty()
        && schedule.iter().all(|h| *h > 0.0 && h.is_finite())
        && schedule.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(VariationError::BadSchedule(schedule.to_vec()))
    }
}

/// Richardson table for an even error expansion `D(h) = D + c₁h² + c₂h⁴ + …`.
fn richardson(
    rows: &[Vec<f64>],
    schedule: &[f64],
    scale: f64,
    order: i32,
    check: bool,
) -> Result<DerivativeEstimate, VariationError> {
    let m = rows.len();
    let len = rows[0].len();
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![rows[0].clone()]];
    for i in 1..m {
        let mut row = vec![rows[i].clone()];
        let q = schedule[i - 1] / schedule[i];
        for j in 1..=i {
            let f = q.powi(2 * j as i32) - 1.0;
            let prev = &row[j - 1];
            let up = &table[i - 1][j - 1];
            row.push(prev.iter().zip(up).map(|(a, b)| a + (a - b) / f).collect());
        }
        table.push(row);
    }
    let last = &table[m - 1];
    let value = last[m - 1].clone();
    let error = if m >= 2 {
        value.iter().zip(&last[m - 2]).map(|(a, b)| (a - b).abs()).collect()
    } else {
        vec![f64::NAN; len]
    };
    if check && m >= 3 {
        // roundoff floor of the finest raw difference quotient
        let floor = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE) / schedule[m - 1].powi(order);
        let spread = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
        let coarse = spread(&rows[m - 2], &rows[m - 3]);
        let fine = spread(&rows[m - 1], &rows[m - 2]);
        let mag = value.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if fine > coarse && fine > floor.max(1e-9 * mag.max(1.0)) {
            return Err(VariationError::NonConvergent { coarse, fine });
        }
    }
    Ok(DerivativeEstimate {
        value,
        error,
        schedule: schedule.to_vec(),
        richardson_order: 2 * m as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(v: Vec<f64>) -> Result<Vec<f64>, VariationError> {
        Ok(v)
    }

    #[test]
    fn exp_derivatives() {
        let (d1, d2) = numeric_derivatives(|t| ok(vec![(2.0 * t).exp(), t.sin()]), &DEFAULT_SCHEDULE).unwrap();
        assert!((d1.value[0] - 2.0).abs() < 1e-12);
        assert!((d1.value[1] - 1.0).abs() < 1e-12);
        assert!((d2.value[0] - 4.0).abs() < 1e-8);
        assert!(d2.value[1].abs() < 1e-8);
        assert_eq!(d1.richardson_order, 6);
    }

    #[test]
    fn zero_path_is_exactly_zero() {
        let d = numeric_derivative(|_| ok(vec![3.7]), 2, &DEFAULT_SCHEDULE).unwrap();
        assert_eq!(d.value[0], 0.0);
        let d = numeric_derivative(|_| ok(vec![3.7]), 1, &DEFAULT_SCHEDULE).unwrap();
        assert_eq!(d.value[0], 0.0);
    }

    #[test]
    fn divergent_schedule_is_reported() {
        // non-smooth at 0: difference quotients grow on refinement
        let r = numeric_derivative(|t: f64| ok(vec![t.abs().sqrt()]), 2, &DEFAULT_SCHEDULE);
        assert!(matches!(r, Err(VariationError::NonConvergent { .. })));
        assert!(matches!(
            numeric_derivative(|t| ok(vec![t]), 1, &[1e-3, 1e-2]),
            Err(VariationError::BadSchedule(_))
        ));
    }
}
