use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve;
use crate::real::Real;
use crate::stats::median;

/// How the kernel width `ε` in `exp(-d²/ε)` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// Median of the off-diagonal distances.
    Median,
    /// Square of that median.
    MedianSquared,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionMapsConfig {
    pub epsilon: EpsilonRule,
    /// Number of nontrivial eigenvectors kept.
    pub n_coords: usize,
    /// Local-linear-regression residual above which a coordinate counts as independent.
    pub r_threshold: f64,
    /// Eigenvectors whose `Ŵ` eigenvalue `1 − λ_k` falls below this fraction
    /// of `1 − λ₁` are not candidates for independence.
    pub min_eigen_ratio: f64,
}

impl Default for DiffusionMapsConfig {
    fn default() -> Self {
        DiffusionMapsConfig {
            epsilon: EpsilonRule::Median,
            n_coords: 8,
            r_threshold: 0.5,
            min_eigen_ratio: 0.05,
        }
    }
}

/// Leading eigenpairs of `A = I − Ŵ`, with what is needed to extend them.
#[derive(Clone, Debug)]
pub struct Embedding<T> {
    /// λ₀ ≤ λ₁ ≤ … ≤ λ_m.
    pub eigenvalues: Array1<T>,
    /// One unit-norm column per eigenvalue; column 0 is constant.
    pub eigenvectors: Array2<T>,
    pub epsilon: T,
    /// Row sums `D` of the raw kernel on the training points.
    pub row_sums: Array1<T>,
    /// Independent coordinate indices (always starting with 1).
    pub independent: Vec<usize>,
}

impl<T: Real> Embedding<T> {
    pub fn n_points(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn coordinate(&self, k: usize) -> ndarray::ArrayView1<'_, T> {
        self.eigenvectors.column(k)
    }
}

fn check_distances<T: Real>(d: &ArrayView2<T>) -> Result<()> {
    let n = d.nrows();
    if d.ncols() != n {
        return Err(Error::shape(format!(
            "distance matrix is {}x{}",
            n,
            d.ncols()
        )));
    }
    for i in 0..n {
        if d[[i, i]] != T::zero() {
            return Err(Error::invalid(format!(
                "distance matrix has nonzero diagonal at {i}"
            )));
        }
        for j in 0..i {
            let (a, b) = (d[[i, j]], d[[j, i]]);
            if !a.is_finite() || a < T::zero() {
                return Err(Error::NonFinite { index: i * n + j });
            }
            if (a - b).abs() > T::lit(1e-12) * (T::one() + a.abs()) {
                return Err(Error::invalid(format!(
                    "distance matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Kernel width for the given rule, from the strict upper triangle of `d`.
pub fn kernel_epsilon<T: Real>(d: ArrayView2<T>, rule: EpsilonRule) -> Result<T> {
    let eps = match rule {
        EpsilonRule::Fixed(e) => T::lit(e),
        EpsilonRule::Median | EpsilonRule::MedianSquared => {
            let n = d.nrows();
            let upper: Vec<T> = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .map(|(i, j)| d[[i, j]])
                .collect();
            let m = median(&upper)
                .ok_or_else(|| Error::invalid("need at least two points for a median width"))?;
            if rule == EpsilonRule::Median {
                m
            } else {
                m * m
            }
        }
    };
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::invalid(format!(
            "kernel width must be positive and finite, got {eps}"
        )));
    }
    Ok(eps)
}

struct Kernel<T> {
    /// `W̄ = D⁻¹ W D⁻¹`.
    wbar: Array2<T>,
    d: Array1<T>,
    dbar: Array1<T>,
}

fn normalized_kernel<T: Real>(d: ArrayView2<T>, eps: T) -> Result<Kernel<T>> {
    let n = d.nrows();
    let mut w = d.mapv(|x| (-(x * x) / eps).exp());
    for (i, row) in w.axis_iter(Axis(0)).enumerate() {
        let off = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(T::zero(), |m, (_, &v)| m.max(v));
        if n > 1 && off <= T::epsilon() {
            return Err(Error::DisconnectedKernel {
                index: i,
                epsilon: eps.as_f64(),
            });
        }
    }
    let row_sums = w.sum_axis(Axis(1));
    Zip::indexed(&mut w).par_for_each(|(i, j), v| *v /= row_sums[i] * row_sums[j]);
    let dbar = w.sum_axis(Axis(1));
    Ok(Kernel {
        wbar: w,
        d: row_sums,
        dbar,
    })
}

/// Row-stochastic `Ŵ = D̄⁻¹ D⁻¹ W D⁻¹` for the distances `d` at width `eps`.
pub fn markov_matrix<T: Real>(d: ArrayView2<T>, eps: T) -> Result<Array2<T>> {
    check_distances(&d)?;
    let k = normalized_kernel(d, eps)?;
    let mut m = k.wbar;
    for (mut row, &s) in m.axis_iter_mut(Axis(0)).zip(&k.dbar) {
        row.mapv_inplace(|v| v / s);
    }
    Ok(m)
}

/// `A = I − Ŵ`.
pub fn diffusion_operator<T: Real>(d: ArrayView2<T>, eps: T) -> Result<Array2<T>> {
    let mut a = markov_matrix(d, eps)?;
    a.mapv_inplace(|v| -v);
    for i in 0..a.nrows() {
        a[[i, i]] += T::one();
    }
    Ok(a)
}

fn fix_sign<T: Real>(mut col: ndarray::ArrayViewMut1<T>) {
    let mut pivot = T::zero();
    for &v in col.iter() {
        if v.abs() > pivot.abs() {
            pivot = v;
        }
    }
    if pivot < T::zero() {
        col.mapv_inplace(|v| -v);
    }
}

/// Diffusion Maps on a symmetric distance matrix.
pub fn diffusion_maps<T: Real>(
    d: ArrayView2<T>,
    cfg: &DiffusionMapsConfig,
) -> Result<Embedding<T>> {
    check_distances(&d)?;
    let n = d.nrows();
    let m = cfg.n_coords;
    if m < 1 || n < m + 2 {
        return Err(Error::invalid(format!(
            "{n} points cannot support {m} diffusion coordinates"
        )));
    }
    let eps = kernel_epsilon(d, cfg.epsilon)?;
    let k = normalized_kernel(d, eps)?;

    // D̄^{-1/2} W̄ D̄^{-1/2} is symmetric and similar to Ŵ
    let root: Array1<T> = k.dbar.mapv(|v| v.sqrt());
    let mut s = k.wbar;
    Zip::indexed(&mut s).par_for_each(|(i, j), v| *v /= root[i] * root[j]);
    let (mu, v) = T::symmetric_eigen(&s);

    let mut eigenvalues = Array1::zeros(m + 1);
    let mut eigenvectors = Array2::zeros((n, m + 1));
    for c in 0..=m {
        let src = n - 1 - c;
        eigenvalues[c] = T::one() - mu[src];
        let mut col = eigenvectors.column_mut(c);
        for i in 0..n {
            col[i] = v[[i, src]] / root[i];
        }
        let norm = col.iter().map(|&x| x * x).sum::<T>().sqrt();
        col.mapv_inplace(|x| x / norm);
        fix_sign(col);
    }
    let mut emb = Embedding {
        eigenvalues,
        eigenvectors,
        epsilon: eps,
        row_sums: k.d,
        independent: Vec::new(),
    };
    emb.independent = select_independent_coords(&emb, cfg.r_threshold, cfg.min_eigen_ratio);
    Ok(emb)
}

/// Leave-one-out local-linear-regression residual of coordinate `target`
/// against the coordinates in `against`, relative to the target's norm.
pub fn regression_residual<T: Real>(
    emb: &Embedding<T>,
    target: usize,
    against: &[usize],
    neighbors: usize,
) -> f64 {
    let n = emb.n_points();
    let phi = &emb.eigenvectors;
    let p = against.len();
    let k = neighbors.clamp(p + 2, n - 1);
    let residuals: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dist: Vec<(T, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let s = against
                        .iter()
                        .map(|&c| (phi[[j, c]] - phi[[i, c]]).powi(2))
                        .sum::<T>();
                    (s, j)
                })
                .collect();
            dist.select_nth_unstable_by(k - 1, |a, b| a.0.partial_cmp(&b.0).unwrap());
            let near = &dist[..k];
            // normal equations for [1, Δφ] β ≈ φ_target
            let mut ata = Array2::<T>::zeros((p + 1, p + 1));
            let mut atb = Array1::<T>::zeros(p + 1);
            let mut x = vec![T::zero(); p + 1];
            for &(_, j) in near {
                x[0] = T::one();
                for (q, &c) in against.iter().enumerate() {
                    x[q + 1] = phi[[j, c]] - phi[[i, c]];
                }
                for a in 0..=p {
                    atb[a] += x[a] * phi[[j, target]];
                    for b in 0..=p {
                        ata[[a, b]] += x[a] * x[b];
                    }
                }
            }
            let ridge = T::lit(1e-12) * (0..=p).map(|a| ata[[a, a]]).fold(T::zero(), T::max);
            for a in 0..=p {
                ata[[a, a]] += ridge;
            }
            let fit = solve(ata, atb, T::epsilon())
                .map(|beta| beta[0])
                .unwrap_or_else(|| {
                    near.iter().map(|&(_, j)| phi[[j, target]]).sum::<T>() / T::lit(k as f64)
                });
            let y = phi[[i, target]];
            ((y - fit).as_f64().powi(2), y.as_f64().powi(2))
        })
        .collect();
    let (num, den) = residuals
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    if den == 0.0 {
        return 0.0;
    }
    (num / den).sqrt()
}

/// Indices of eigenvectors not explained locally by earlier accepted ones.
/// Uses `⌈n/10⌉` nearest neighbours; index 1 is always accepted. Candidates
/// with `1 − λ_k < min_eigen_ratio · (1 − λ₁)` are skipped.
pub fn select_independent_coords<T: Real>(
    emb: &Embedding<T>,
    r_threshold: f64,
    min_eigen_ratio: f64,
) -> Vec<usize> {
    let m = emb.eigenvectors.ncols() - 1;
    if m == 0 {
        return Vec::new();
    }
    let neighbors = emb.n_points().div_ceil(10);
    let mut accepted = vec![1];
    let lead = 1.0 - emb.eigenvalues[1].as_f64();
    for c in 2..=m {
        if 1.0 - emb.eigenvalues[c].as_f64() < min_eigen_ratio * lead {
            continue;
        }
        if regression_residual(emb, c, &accepted, neighbors) > r_threshold {
            accepted.push(c);
        }
    }
    accepted
}

/// Out-of-sample coordinates for new points.
#[derive(Clone, Debug)]
pub struct Extension<T> {
    /// One row per new point, same columns as the training eigenvectors.
    pub coords: Array2<T>,
    /// Columns left at zero because `1 − λ_k` is too small to divide by.
    pub skipped: Vec<usize>,
}

/// Nyström extension: `φ_k(x) = Σ_j Ŵ(x, j) φ_k(j) / (1 − λ_k)`, with the
/// new kernel row normalized exactly like the training rows.
pub fn nystrom_extend<T: Real>(
    emb: &Embedding<T>,
    distances: ArrayView2<T>,
) -> Result<Extension<T>> {
    let n = emb.n_points();
    if distances.ncols() != n {
        return Err(Error::shape(format!(
            "{} training columns, embedding has {n} points",
            distances.ncols()
        )));
    }
    let eps = emb.epsilon;
    let cols = emb.eigenvectors.ncols();
    let mut skipped = Vec::new();
    let mut scale = vec![T::zero(); cols];
    for (c, s) in scale.iter_mut().enumerate() {
        let mu = T::one() - emb.eigenvalues[c];
        if mu.abs() <= T::lit(1e-12) {
            log::warn!(
                "Nyström: skipping coordinate {c}, eigenvalue {} too close to 1",
                emb.eigenvalues[c]
            );
            skipped.push(c);
        } else {
            *s = T::one() / mu;
        }
    }

    let mut coords = Array2::zeros((distances.nrows(), cols));
    let failures: Vec<usize> = coords
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(distances.axis_iter(Axis(0)).into_par_iter())
        .enumerate()
        .filter_map(|(r, (mut out, drow))| {
            let w: Vec<T> = drow.iter().map(|&x| (-(x * x) / eps).exp()).collect();
            let d_new: T = w.iter().copied().sum();
            if !(d_new > T::zero()) {
                return Some(r);
            }
            let wbar: Vec<T> = w
                .iter()
                .zip(&emb.row_sums)
                .map(|(&v, &dj)| v / (d_new * dj))
                .collect();
            let dbar: T = wbar.iter().copied().sum();
            for c in 0..cols {
                if scale[c] == T::zero() {
                    continue;
                }
                let acc: T = wbar
                    .iter()
                    .zip(emb.eigenvectors.column(c))
                    .map(|(&a, &b)| a * b)
                    .sum();
                out[c] = acc / dbar * scale[c];
            }
            None
        })
        .collect();
    if let Some(&index) = failures.first() {
        return Err(Error::DisconnectedKernel {
            index,
            epsilon: eps.as_f64(),
        });
    }
    Ok(Extension { coords, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::pairwise_distances;
    use ndarray::array;

    fn line(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / (n - 1) as f64)
    }

    #[test]
    fn median_rule_uses_upper_triangle() {
        let d = pairwise_distances(array![[0.0], [1.0], [3.0]].view());
        // off-diagonal distances 1, 2, 3
        assert_eq!(kernel_epsilon(d.view(), EpsilonRule::Median).unwrap(), 2.0);
        assert_eq!(
            kernel_epsilon(d.view(), EpsilonRule::MedianSquared).unwrap(),
            4.0
        );
        assert_eq!(
            kernel_epsilon(d.view(), EpsilonRule::Fixed(0.3)).unwrap(),
            0.3
        );
        assert!(kernel_epsilon(d.view(), EpsilonRule::Fixed(0.0)).is_err());
    }

    #[test]
    fn markov_rows_sum_to_one() {
        let d = pairwise_distances(line(40).view());
        let m = markov_matrix(d.view(), 0.05).unwrap();
        for row in m.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn trivial_pair_is_constant() {
        let d = pairwise_distances(line(30).view());
        let emb = diffusion_maps(
            d.view(),
            &DiffusionMapsConfig {
                n_coords: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(emb.eigenvalues[0].abs() < 1e-10);
        let c = emb.coordinate(0);
        let spread = c.iter().fold(0.0f64, |m, &v| m.max((v - c[0]).abs()));
        assert!(spread < 1e-8 * c[0].abs());
        for col in emb.eigenvectors.columns() {
            assert!((col.dot(&col) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn line_has_one_independent_coordinate() {
        let d = pairwise_distances(line(200).view());
        let emb = diffusion_maps(
            d.view(),
            &DiffusionMapsConfig {
                n_coords: 5,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(emb.independent, vec![1]);
        let phi = emb.coordinate(1);
        let increasing = phi.windows(2).into_iter().all(|w| w[1] > w[0]);
        let decreasing = phi.windows(2).into_iter().all(|w| w[1] < w[0]);
        assert!(increasing || decreasing);
    }

    #[test]
    fn isolated_point_is_reported() {
        let d = pairwise_distances(array![[0.0], [0.01], [100.0]].view());
        let err = markov_matrix(d.view(), 1e-3).unwrap_err();
        assert!(matches!(err, Error::DisconnectedKernel { .. }));
    }

    #[test]
    fn nystrom_reproduces_training_points() {
        let pts = line(60);
        let d = pairwise_distances(pts.view());
        let emb = diffusion_maps(
            d.view(),
            &DiffusionMapsConfig {
                n_coords: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let ext = nystrom_extend(&emb, d.view()).unwrap();
        for (a, b) in ext.coords.iter().zip(emb.eigenvectors.iter()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let d = array![[0.0, 1.0, 2.0], [1.5, 0.0, 1.0], [2.0, 1.0, 0.0]];
        assert!(diffusion_maps(
            d.view(),
            &DiffusionMapsConfig {
                n_coords: 1,
                ..Default::default()
            }
        )
        .is_err());
    }
}
