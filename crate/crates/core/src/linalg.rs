//! Small dense solves that do not warrant a backend call.
use ndarray::{Array1, Array2};

use crate::real::Real;

/// Solves `a x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` when a pivot falls below `tol` times the largest pivot seen.
pub(crate) fn solve<T: Real>(mut a: Array2<T>, mut b: Array1<T>, tol: T) -> Option<Array1<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut scale = T::zero();
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[[i, col]].abs().partial_cmp(&a[[j, col]].abs()).unwrap())?;
        let p = a[[pivot, col]].abs();
        scale = scale.max(p);
        if !(p > tol * scale) || p == T::zero() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap([pivot, k], [col, k]);
            }
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[[row, col]] / a[[col, col]];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[[col, k]];
                a[[row, k]] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[[col, k]] * b[k];
        }
        b[col] = s / a[[col, col]];
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_with_pivoting() {
        let a: Array2<f64> = array![[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        let x = array![1.0, -2.0, 0.5];
        let b = a.dot(&x);
        let got = solve(a, b, 1e-14).unwrap();
        for (g, e) in got.iter().zip(&x) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_rejected() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(solve(a, array![1.0, 1.0], 1e-12).is_none());
    }
}
