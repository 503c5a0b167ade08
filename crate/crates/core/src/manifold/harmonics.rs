use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use super::distance::{cross_distances, pairwise_distances};
use crate::error::{Error, Result};
use crate::real::Real;

const SPECTRAL_FLOOR: f64 = 1e-10;

/// A function on sampled points extended by Gaussian-kernel eigenfunctions:
/// `f(x) ≈ c + Σ_l a_l ψ_l(x)` with `ψ_l(x) = Σ_j K(x, x_j) ψ_l(x_j) / σ_l`.
#[derive(Clone, Debug)]
pub struct GeometricHarmonics<T> {
    centers: Array2<T>,
    epsilon: T,
    /// `ψ_l(x_j) a_l / σ_l` summed over kept harmonics, one weight per center.
    weights: Array1<T>,
    offset: T,
    kept: usize,
}

impl<T: Real> GeometricHarmonics<T> {
    /// Fits `targets` on the rows of `coords` with the top `n_harmonics`
    /// eigenvectors of `exp(-‖x_i − x_j‖²/ε)`, plus a least-squares constant.
    pub fn fit(
        coords: ArrayView2<T>,
        targets: ArrayView1<T>,
        n_harmonics: usize,
        epsilon: T,
    ) -> Result<Self> {
        let n = coords.nrows();
        if targets.len() != n {
            return Err(Error::shape(format!(
                "{} targets for {n} points",
                targets.len()
            )));
        }
        if n_harmonics == 0 || n_harmonics > n {
            return Err(Error::invalid(format!("n_harmonics must be in 1..={n}")));
        }
        if !(epsilon > T::zero()) {
            return Err(Error::invalid("kernel width must be positive"));
        }
        let kernel = pairwise_distances(coords).mapv(|d| (-(d * d) / epsilon).exp());
        let (sigma, vecs) = T::symmetric_eigen(&kernel);
        let top = sigma[n - 1];
        let mut kept = 0;
        while kept < n_harmonics && sigma[n - 1 - kept] > T::lit(SPECTRAL_FLOOR) * top {
            kept += 1;
        }
        if kept < n_harmonics {
            log::warn!("geometric harmonics: truncated to {kept} of {n_harmonics} harmonics (eigenvalue floor)");
        }
        let basis = vecs.slice(ndarray::s![.., n - kept..]).to_owned();
        let sig = sigma.slice(ndarray::s![n - kept..]).to_owned();

        // residual projector P = I − ΨΨᵀ; offset c minimizes ‖P(f − c1)‖
        let ones = Array1::from_elem(n, T::one());
        let project = |v: &Array1<T>| v - &basis.dot(&basis.t().dot(v));
        let p1 = project(&ones);
        let denom = p1.dot(&p1);
        let offset = if denom > T::lit(1e-10) * T::lit(n as f64) {
            p1.dot(&targets) / denom
        } else {
            T::zero()
        };
        let shifted = &targets - offset;
        let coeffs = basis.t().dot(&shifted) / &sig;
        let weights = basis.dot(&coeffs);
        Ok(GeometricHarmonics {
            centers: coords.to_owned(),
            epsilon,
            weights,
            offset,
            kept,
        })
    }

    pub fn n_harmonics(&self) -> usize {
        self.kept
    }

    /// Evaluates the extension at each row of `coords`.
    pub fn evaluate(&self, coords: ArrayView2<T>) -> Result<Array1<T>> {
        let d = cross_distances(coords, self.centers.view())?;
        let mut out = Array1::zeros(coords.nrows());
        out.as_slice_mut()
            .expect("fresh array is contiguous")
            .par_iter_mut()
            .zip(d.axis_iter(Axis(0)).into_par_iter())
            .for_each(|(o, row)| {
                let s: T = row
                    .iter()
                    .zip(&self.weights)
                    .map(|(&x, &w)| (-(x * x) / self.epsilon).exp() * w)
                    .sum();
                *o = self.offset + s;
            });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 1), |(i, _)| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn constant_target_stays_constant() {
        let x = samples(50);
        let gh =
            GeometricHarmonics::fit(x.view(), Array1::from_elem(50, 3.5).view(), 10, 0.1).unwrap();
        let fine = Array2::from_shape_fn((200, 1), |(i, _)| -1.2 + 2.4 * i as f64 / 199.0);
        for v in gh.evaluate(fine.view()).unwrap() {
            assert!((v - 3.5).abs() < 1e-10);
        }
    }

    #[test]
    fn smooth_target_extends_between_samples() {
        let x = samples(60);
        let f = x.column(0).mapv(|v| (2.0 * v).sin() + 0.5 * v);
        let gh = GeometricHarmonics::fit(x.view(), f.view(), 40, 0.05).unwrap();
        let mid = Array2::from_shape_fn((59, 1), |(i, _)| -1.0 + (2.0 * i as f64 + 1.0) / 59.0);
        let got = gh.evaluate(mid.view()).unwrap();
        for (g, m) in got.iter().zip(mid.column(0)) {
            assert!((g - ((2.0 * m).sin() + 0.5 * m)).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let x = samples(10);
        let f = Array1::zeros(9);
        assert!(GeometricHarmonics::fit(x.view(), f.view(), 3, 0.1).is_err());
        let f = Array1::zeros(10);
        assert!(GeometricHarmonics::fit(x.view(), f.view(), 0, 0.1).is_err());
        assert!(GeometricHarmonics::fit(x.view(), f.view(), 3, 0.0).is_err());
    }
}
