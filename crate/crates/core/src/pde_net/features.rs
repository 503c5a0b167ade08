use ndarray::{Array2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::stencil::offset_weights;
use crate::datastore::{Boundary, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;

/// Which spatial derivatives feed the model, and how they are taken.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    /// Derivative orders; 0 is the field itself.
    pub orders: Vec<usize>,
    /// Periodic wraps centered stencils; zero-flux shifts them one-sided at the edges.
    pub boundary: Boundary,
    pub stencil_width: usize,
}

impl FeatureSpec {
    /// `(u, u_z, u_zz)` with 3-point periodic stencils.
    pub fn burgers() -> Self {
        FeatureSpec {
            orders: vec![0, 1, 2],
            boundary: Boundary::Periodic,
            stencil_width: 3,
        }
    }

    /// `(W, W_φ, W_φφ, W_φφφ)` with 9-point stencils, one-sided at the edges.
    pub fn cgle() -> Self {
        FeatureSpec {
            orders: vec![0, 1, 2, 3],
            boundary: Boundary::ZeroFlux,
            stencil_width: 9,
        }
    }

    pub fn n_features(&self, channels: usize) -> usize {
        self.orders.len() * channels
    }

    pub fn validate(&self, n_points: usize) -> Result<()> {
        if self.stencil_width.is_multiple_of(2) {
            return Err(Error::invalid("stencil width must be odd"));
        }
        if self.stencil_width > n_points {
            return Err(Error::invalid(format!(
                "stencil of width {} on {n_points} points",
                self.stencil_width
            )));
        }
        if let Some(&o) = self
            .orders
            .iter()
            .find(|&&o| o > 0 && o >= self.stencil_width)
        {
            return Err(Error::invalid(format!(
                "order {o} needs more than {} nodes",
                self.stencil_width
            )));
        }
        if self.orders.is_empty() {
            return Err(Error::invalid("at least one derivative order is required"));
        }
        Ok(())
    }
}

/// Precomputed stencils for every requested order on a fixed grid.
#[derive(Clone, Debug)]
pub struct DerivativeOperator<T> {
    n: usize,
    periodic: bool,
    width: usize,
    orders: Vec<usize>,
    /// `[order slot][point]` → (first node, weights); periodic grids store one entry.
    stencils: Vec<Vec<(isize, Vec<T>)>>,
}

impl<T: Real> DerivativeOperator<T> {
    pub fn new(spec: &FeatureSpec, n: usize, spacing: T) -> Result<Self> {
        spec.validate(n)?;
        let w = spec.stencil_width;
        let half = (w / 2) as isize;
        let periodic = spec.boundary == Boundary::Periodic;
        let h = spacing.as_f64();
        let mut stencils = Vec::with_capacity(spec.orders.len());
        for &order in &spec.orders {
            let mut per_point = Vec::new();
            let points = if periodic { 1 } else { n };
            for i in 0..points {
                let start = if periodic {
                    -half
                } else {
                    (i as isize - half).clamp(0, (n - w) as isize) - i as isize
                };
                let weights = offset_weights(start, w, order, h)?;
                per_point.push((start, weights.into_iter().map(T::lit).collect()));
            }
            stencils.push(per_point);
        }
        Ok(DerivativeOperator {
            n,
            periodic,
            width: w,
            orders: spec.orders.clone(),
            stencils,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    /// Writes features for a point-major interleaved snapshot into `out`
    /// (`n × orders·channels`, order-major then channel).
    pub fn apply(&self, snapshot: &[T], channels: usize, mut out: ArrayViewMut2<T>) {
        let n = self.n;
        debug_assert_eq!(snapshot.len(), n * channels);
        for (slot, &order) in self.orders.iter().enumerate() {
            for i in 0..n {
                for c in 0..channels {
                    let col = slot * channels + c;
                    if order == 0 {
                        out[[i, col]] = snapshot[i * channels + c];
                        continue;
                    }
                    let (start, weights) = if self.periodic {
                        &self.stencils[slot][0]
                    } else {
                        &self.stencils[slot][i]
                    };
                    let mut acc = T::zero();
                    for (k, &wk) in weights.iter().enumerate() {
                        let j = i as isize + start + k as isize;
                        let j = if self.periodic {
                            j.rem_euclid(n as isize) as usize
                        } else {
                            j as usize
                        };
                        acc += wk * snapshot[j * channels + c];
                    }
                    out[[i, col]] = acc;
                }
            }
        }
    }

    pub fn features(&self, snapshot: &[T], channels: usize) -> Array2<T> {
        let mut out = Array2::zeros((self.n, self.orders.len() * channels));
        self.apply(snapshot, channels, out.view_mut());
        out
    }

    pub fn stencil_width(&self) -> usize {
        self.width
    }
}

/// Pointwise regression data: one row per grid point per snapshot.
#[derive(Clone, Debug)]
pub struct TrainingSet<T> {
    pub features: Array2<T>,
    pub targets: Array2<T>,
    pub spec: FeatureSpec,
}

impl<T: Real> TrainingSet<T> {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Stacks several sets built with the same spec.
    pub fn concat(sets: &[TrainingSet<T>]) -> Result<Self> {
        let first = sets
            .first()
            .ok_or_else(|| Error::invalid("no training sets to concatenate"))?;
        if sets
            .iter()
            .any(|s| s.spec != first.spec || s.features.ncols() != first.features.ncols())
        {
            return Err(Error::invalid("training sets differ in feature layout"));
        }
        let f: Vec<_> = sets.iter().map(|s| s.features.view()).collect();
        let t: Vec<_> = sets.iter().map(|s| s.targets.view()).collect();
        Ok(TrainingSet {
            features: ndarray::concatenate(ndarray::Axis(0), &f)
                .map_err(|e| Error::shape(e.to_string()))?,
            targets: ndarray::concatenate(ndarray::Axis(0), &t)
                .map_err(|e| Error::shape(e.to_string()))?,
            spec: first.spec.clone(),
        })
    }
}

/// Features at every snapshot but the last, with forward-difference time
/// derivatives `(u(t_{n+1}) − u(t_n)) / Δt` as targets.
pub fn build_training_pairs<T: Real>(
    traj: &Trajectory<T>,
    spec: &FeatureSpec,
) -> Result<TrainingSet<T>> {
    let snaps = traj.n_snapshots();
    if snaps < 2 {
        return Err(Error::invalid(
            "need at least two snapshots for time derivatives",
        ));
    }
    let n = traj.grid.n;
    let channels = traj.channels.count();
    let op = DerivativeOperator::new(spec, n, traj.grid.spacing)?;
    let rows = (snaps - 1) * n;
    let mut features = Array2::zeros((rows, spec.n_features(channels)));
    let mut targets = Array2::zeros((rows, channels));
    let inv_dt = T::one() / traj.dt_sample;
    for s in 0..snaps - 1 {
        let block = ndarray::s![s * n..(s + 1) * n, ..];
        op.apply(traj.snapshot(s), channels, features.slice_mut(block));
        let (now, next) = (traj.snapshot(s), traj.snapshot(s + 1));
        let mut t = targets.slice_mut(block);
        for i in 0..n {
            for c in 0..channels {
                t[[i, c]] = (next[i * channels + c] - now[i * channels + c]) * inv_dt;
            }
        }
    }
    Ok(TrainingSet {
        features,
        targets,
        spec: spec.clone(),
    })
}
