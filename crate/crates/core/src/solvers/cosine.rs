use ndarray::{Array1, Array2};

use crate::real::Real;

/// Cosine (Neumann) expansion on `n` cell-centred nodes of `[0, L]`:
/// `u(x_j) = Σ_k a_k cos(kπ x_j / L)`, `x_j = (j + ½) L / n`.
///
/// Every basis function has zero slope at both ends, so the zero-flux
/// condition holds exactly. Transforms are dense matrix products, which for
/// the grid sizes used here are cheaper than FFT bookkeeping.
#[derive(Clone, Debug)]
pub struct CosineTransform<T> {
    n: usize,
    length: T,
    /// `synthesis[[j, k]] = cos(kπ(j+½)/n)`
    synthesis: Array2<T>,
    /// `analysis[[k, j]] = c_k cos(kπ(j+½)/n)` with `c_0 = 1/n`, `c_k = 2/n`
    analysis: Array2<T>,
}

impl<T: Real> CosineTransform<T> {
    pub fn new(n: usize, length: T) -> Self {
        let synthesis = Array2::from_shape_fn((n, n), |(j, k)| {
            T::lit((std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
        });
        let analysis = Array2::from_shape_fn((n, n), |(k, j)| {
            let c = if k == 0 {
                1.0 / n as f64
            } else {
                2.0 / n as f64
            };
            T::lit(c) * synthesis[[j, k]]
        });
        CosineTransform {
            n,
            length,
            synthesis,
            analysis,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Wavenumber `kπ/L` of mode `k`.
    pub fn wavenumber(&self, k: usize) -> T {
        T::PI() * T::lit(k as f64) / self.length
    }

    /// Node values to coefficients; columns are transformed independently.
    pub fn forward(&self, values: &Array2<T>) -> Array2<T> {
        self.analysis.dot(values)
    }

    pub fn inverse(&self, coeffs: &Array2<T>) -> Array2<T> {
        self.synthesis.dot(coeffs)
    }

    pub fn forward_vec(&self, values: &[T]) -> Array1<T> {
        self.analysis.dot(&Array1::from(values.to_vec()))
    }

    pub fn inverse_vec(&self, coeffs: &[T]) -> Array1<T> {
        self.synthesis.dot(&Array1::from(coeffs.to_vec()))
    }

    /// Derivative of the cosine interpolant at an arbitrary point.
    pub fn derivative_at(&self, coeffs: &[T], x: T) -> T {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let kk = self.wavenumber(k);
                -a * kk * (kk * x).sin()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = CosineTransform::<f64>::new(16, 3.0);
        let u: Vec<f64> = (0..16)
            .map(|j| (j as f64 * 0.37).sin() + 0.1 * j as f64)
            .collect();
        let back = t.inverse_vec(t.forward_vec(&u).as_slice().unwrap());
        for (a, b) in u.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_is_resolved() {
        let n = 32;
        let l = 5.0;
        let t = CosineTransform::<f64>::new(n, l);
        let u: Vec<f64> = (0..n)
            .map(|j| {
                let x = (j as f64 + 0.5) * l / n as f64;
                (3.0 * std::f64::consts::PI * x / l).cos()
            })
            .collect();
        let a = t.forward_vec(&u);
        for (k, v) in a.iter().enumerate() {
            let expected = if k == 3 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "mode {k}: {v}");
        }
        assert!(t.derivative_at(a.as_slice().unwrap(), 0.0).abs() < 1e-14);
    }
}
