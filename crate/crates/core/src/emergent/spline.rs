//! Not-a-knot cubic splines through fixed abscissae, expressed as a linear
//! map from knot values to values at evaluation points.
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::real::Real;

/// Second derivatives at the knots for ordinates `y`.
fn second_derivatives(x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut a = Array2::zeros((n, n));
    let mut b = Array1::zeros(n);
    // third derivative continuous across the second and penultimate knots
    a[[0, 0]] = h[1];
    a[[0, 1]] = -(h[0] + h[1]);
    a[[0, 2]] = h[0];
    a[[n - 1, n - 3]] = h[n - 2];
    a[[n - 1, n - 2]] = -(h[n - 3] + h[n - 2]);
    a[[n - 1, n - 1]] = h[n - 3];
    for i in 1..n - 1 {
        a[[i, i - 1]] = h[i - 1];
        a[[i, i]] = 2.0 * (h[i - 1] + h[i]);
        a[[i, i + 1]] = h[i];
        b[i] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    solve(a, b, 1e-14)
        .map(|m| m.to_vec())
        .ok_or_else(|| Error::invalid("singular spline system"))
}

fn evaluate(x: &[f64], y: &[f64], m: &[f64], at: f64) -> f64 {
    let n = x.len();
    let i = x.partition_point(|&k| k <= at).clamp(1, n - 1) - 1;
    let h = x[i + 1] - x[i];
    let (l, r) = (x[i + 1] - at, at - x[i]);
    m[i] * l.powi(3) / (6.0 * h)
        + m[i + 1] * r.powi(3) / (6.0 * h)
        + (y[i] / h - m[i] * h / 6.0) * l
        + (y[i + 1] / h - m[i + 1] * h / 6.0) * r
}

/// Matrix `S` (`at.len() × knots.len()`) with `S·y` the not-a-knot spline
/// through `(knots, y)` evaluated at `at`. Knots must increase strictly.
pub fn spline_matrix<T: Real>(knots: &[f64], at: &[f64]) -> Result<Array2<T>> {
    let n = knots.len();
    if n < 4 {
        return Err(Error::invalid(format!(
            "a not-a-knot spline needs 4 knots, got {n}"
        )));
    }
    if knots.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("spline knots must increase strictly"));
    }
    let mut s = Array2::zeros((at.len(), n));
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let m = second_derivatives(knots, &e)?;
        for (r, &p) in at.iter().enumerate() {
            s[[r, j]] = T::lit(evaluate(knots, &e, &m, p));
        }
        e[j] = 0.0;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_on_uneven_knots() {
        let knots = [-1.0, -0.7, -0.1, 0.05, 0.4, 0.9, 1.0];
        let at: Vec<f64> = (0..41).map(|k| -1.0 + k as f64 * 0.05).collect();
        let s = spline_matrix::<f64>(&knots, &at).unwrap();
        let f = |x: f64| 0.3 - x + 2.0 * x * x - 0.7 * x.powi(3);
        let y = Array1::from_iter(knots.iter().map(|&x| f(x)));
        for (v, &x) in s.dot(&y).iter().zip(&at) {
            assert!((v - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_at_knots() {
        let knots = [0.0, 1.0, 2.5, 3.0, 4.0];
        let s = spline_matrix::<f64>(&knots, &knots).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert!((s[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rejects_unsorted_or_short() {
        assert!(spline_matrix::<f64>(&[0.0, 1.0, 1.0, 2.0], &[0.5]).is_err());
        assert!(spline_matrix::<f64>(&[0.0, 1.0, 2.0], &[0.5]).is_err());
    }
}
