//! Initial conditions used by the end-to-end runs.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datastore::{ComplexField1D, Grid, ScalarField1D};
use crate::error::Result;
use crate::real::Real;

/// Constant added to the random sine sum so densities stay positive.
pub const RANDOM_DENSITY_OFFSET: f64 = 2.0;
/// Lower clip applied after the offset.
pub const RANDOM_DENSITY_FLOOR: f64 = 1e-3;
const RANDOM_DENSITY_TERMS: usize = 20;

/// `1 − cos(2z)/2`.
pub fn cosine_density<T: Real>(grid: Grid<T>) -> Result<ScalarField1D<T>> {
    ScalarField1D::from_fn(grid, |z| T::one() - (z + z).cos() / T::lit(2.0))
}

/// Sum of 20 sines `A sin(l z + p)` with `A ~ U[-1/2, 1/2]`, `l ~ U{1..6}`,
/// `p ~ U[0, 2π)`, shifted by [`RANDOM_DENSITY_OFFSET`] and clipped below at
/// [`RANDOM_DENSITY_FLOOR`].
pub fn random_density<T: Real>(grid: Grid<T>, seed: u64) -> Result<ScalarField1D<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms: Vec<(f64, f64, f64)> = (0..RANDOM_DENSITY_TERMS)
        .map(|_| {
            let a = rng.random_range(-0.5..0.5);
            let l = rng.random_range(1..=6u32) as f64;
            let p = rng.random_range(0.0..std::f64::consts::TAU);
            (a, l, p)
        })
        .collect();
    ScalarField1D::from_fn(grid, |z| {
        let z = z.as_f64();
        let s: f64 = terms.iter().map(|&(a, l, p)| a * (l * z + p).sin()).sum();
        T::lit((RANDOM_DENSITY_OFFSET + s).max(RANDOM_DENSITY_FLOOR))
    })
}

/// `W(x, 0) = (1 + cos(πx/L))/2`, real.
pub fn cgle_front<T: Real>(grid: Grid<T>, length: T) -> Result<ComplexField1D<T>> {
    let re = grid
        .coords()
        .iter()
        .map(|&x| (T::one() + (x * T::PI() / length).cos()) / T::lit(2.0))
        .collect();
    ComplexField1D::new(grid, re, vec![T::zero(); grid.n])
}

/// Highest cosine mode of [`cgle_perturbed`].
pub const PERTURBATION_MODES: usize = 8;
/// Bound on each real and imaginary perturbation coefficient.
pub const PERTURBATION_AMPLITUDE: f64 = 0.1;

/// [`cgle_front`] plus `Σ_{m=1..8} (a_m + i b_m) cos(mπx/L)` with
/// `a_m, b_m ~ U[-0.1, 0.1]`.
pub fn cgle_perturbed<T: Real>(grid: Grid<T>, length: T, seed: u64) -> Result<ComplexField1D<T>> {
    let base = cgle_front(grid, length)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut re, mut im) = (base.re, base.im);
    let amp = PERTURBATION_AMPLITUDE;
    for m in 1..=PERTURBATION_MODES {
        let a: f64 = rng.random_range(-amp..amp);
        let b: f64 = rng.random_range(-amp..amp);
        for (i, &x) in grid.coords().iter().enumerate() {
            let c = (m as f64 * std::f64::consts::PI * x.as_f64() / length.as_f64()).cos();
            re[i] += T::lit(a * c);
            im[i] += T::lit(b * c);
        }
    }
    ComplexField1D::new(grid, re, im)
}
