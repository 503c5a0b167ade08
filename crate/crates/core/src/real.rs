//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use ndarray::{Array1, Array2, LinalgScalar, ScalarOperand};
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
///
/// Besides the usual arithmetic bounds this carries the one dense kernel that
/// is delegated to a concrete backend (symmetric eigendecomposition). Matrix
/// products go through `ndarray`, which dispatches to an optimized GEMM for
/// both implementors.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the two implementors.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Eigenpairs of a symmetric matrix, eigenvalues ascending, eigenvectors
    /// as unit-norm columns.
    fn symmetric_eigen(m: &Array2<Self>) -> (Array1<Self>, Array2<Self>);
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline(always)]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline(always)]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn symmetric_eigen(m: &Array2<Self>) -> (Array1<Self>, Array2<Self>) {
                let n = m.nrows();
                assert_eq!(n, m.ncols(), "symmetric_eigen needs a square matrix");
                let dm = nalgebra::DMatrix::<$t>::from_fn(n, n, |i, j| {
                    // symmetrize: the solver only reads one triangle
                    0.5 * (m[[i, j]] + m[[j, i]])
                });
                let eig = dm.symmetric_eigen();
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
                let vectors =
                    Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
                (values, vectors)
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn eigen_sorted_ascending() {
        let m = array![[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]];
        let (vals, vecs) = f64::symmetric_eigen(&m);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        assert!((vals[2] - 5.0).abs() < 1e-12);
        let v0 = vecs.column(0);
        let r = m.dot(&v0) - &v0 * vals[0];
        assert!(r.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn eigen_f32_matches_f64() {
        let m = array![[4.0f32, 1.0], [1.0, 3.0]];
        let (vals, _) = f32::symmetric_eigen(&m);
        let expected = 3.5 - 0.5 * 5.0f32.sqrt();
        assert!((vals[0] - expected).abs() < 1e-5);
    }
}
