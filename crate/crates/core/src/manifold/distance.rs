use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::real::Real;

fn euclid<T: Real>(a: ndarray::ArrayView1<T>, b: ndarray::ArrayView1<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y) * (*x - *y))
        .sum::<T>()
        .sqrt()
}

/// Euclidean distances between the rows of `points`; exactly symmetric with
/// a zero diagonal.
pub fn pairwise_distances<T: Real>(points: ArrayView2<T>) -> Array2<T> {
    let n = points.nrows();
    let mut d = Array2::zeros((n, n));
    d.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for j in 0..n {
                // evaluate each pair in a fixed orientation so d[i,j] == d[j,i] bitwise
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                row[j] = if i == j {
                    T::zero()
                } else {
                    euclid(points.row(a), points.row(b))
                };
            }
        });
    d
}

/// Distances from each row of `new` to each row of `train`.
pub fn cross_distances<T: Real>(new: ArrayView2<T>, train: ArrayView2<T>) -> Result<Array2<T>> {
    if new.ncols() != train.ncols() {
        return Err(Error::shape(format!(
            "feature length {} vs {}",
            new.ncols(),
            train.ncols()
        )));
    }
    let mut d = Array2::zeros((new.nrows(), train.nrows()));
    d.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = euclid(new.row(i), train.row(j));
            }
        });
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn pythagorean_pair() {
        let p = array![[0.0, 0.0], [3.0, 4.0]];
        let d = pairwise_distances(p.view());
        assert_eq!(d, array![[0.0, 5.0], [5.0, 0.0]]);
    }

    #[test]
    fn cross_matches_pairwise() {
        let p: Array2<f64> = array![[0.0, 1.0, 2.0], [1.0, -1.0, 0.5], [2.0, 2.0, 2.0]];
        let d = pairwise_distances(p.view());
        let c = cross_distances(p.view(), p.view()).unwrap();
        for (a, b) in d.iter().zip(c.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(cross_distances(p.view(), array![[1.0, 2.0]].view()).is_err());
    }
}
