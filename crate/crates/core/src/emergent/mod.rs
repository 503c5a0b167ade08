//! Recovering a spatial coordinate for agents whose positions are unknown,
//! from the similarity of their time series alone.
mod spline;

use ndarray::{Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datastore::{Boundary, Channels, Grid, Trajectory};
use crate::error::{Error, Result};
use crate::manifold::{diffusion_maps, pairwise_distances, DiffusionMapsConfig};
use crate::real::Real;
use crate::stats::{kendall, spearman};

pub use spline::spline_matrix;

/// One complex time series per agent, agents in arbitrary order.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentBundle<T> {
    /// `agents × times × 2` (real, imaginary).
    pub series: Array3<T>,
    pub t0: T,
    pub dt_sample: T,
    /// `permutation[a]` is the grid index agent `a` was taken from. Kept for
    /// verification; nothing in the pipeline reads it.
    pub permutation: Option<Vec<usize>>,
}

const MIN_AGENTS: usize = 8;

impl<T: Real> AgentBundle<T> {
    /// Agents in grid order, no permutation recorded.
    pub fn from_trajectory(traj: &Trajectory<T>) -> Result<Self> {
        if traj.channels != Channels::Complex {
            return Err(Error::invalid(
                "agent bundles are built from complex trajectories",
            ));
        }
        let (n, snaps) = (traj.grid.n, traj.n_snapshots());
        if n < MIN_AGENTS {
            return Err(Error::invalid(format!(
                "{n} agents; at least {MIN_AGENTS} are needed"
            )));
        }
        if snaps == 0 {
            return Err(Error::invalid("empty trajectory"));
        }
        let mut series = Array3::zeros((n, snaps, 2));
        for s in 0..snaps {
            let snap = traj.snapshot(s);
            for a in 0..n {
                series[[a, s, 0]] = snap[2 * a];
                series[[a, s, 1]] = snap[2 * a + 1];
            }
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: series.iter().position(|v| !v.is_finite()).unwrap_or(0),
            });
        }
        Ok(AgentBundle {
            series,
            t0: traj.t0,
            dt_sample: traj.dt_sample,
            permutation: None,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.series.len_of(Axis(0))
    }

    pub fn n_times(&self) -> usize {
        self.series.len_of(Axis(1))
    }

    /// Reverses the stored permutation, returning agents in grid order.
    pub fn unscrambled(&self) -> Option<Array3<T>> {
        let perm = self.permutation.as_ref()?;
        let mut out = Array3::zeros(self.series.raw_dim());
        for (a, &g) in perm.iter().enumerate() {
            out.index_axis_mut(Axis(0), g)
                .assign(&self.series.index_axis(Axis(0), a));
        }
        Some(out)
    }
}

/// Relabels the agents of a complex trajectory by a uniformly random permutation.
pub fn scramble<T: Real>(traj: &Trajectory<T>, seed: u64) -> Result<AgentBundle<T>> {
    let ordered = AgentBundle::from_trajectory(traj)?;
    let mut perm: Vec<usize> = (0..ordered.n_agents()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let series = ordered.series.select(Axis(0), &perm);
    Ok(AgentBundle {
        series,
        permutation: Some(perm),
        ..ordered
    })
}

/// Euclidean distances between agents' series of every `subsample_every`-th
/// sample, real and imaginary parts concatenated.
pub fn timeseries_distance_matrix<T: Real>(
    bundle: &AgentBundle<T>,
    subsample_every: usize,
) -> Result<Array2<T>> {
    let every = subsample_every.max(1);
    let kept: Vec<usize> = (0..bundle.n_times()).step_by(every).collect();
    if kept.len() < 2 {
        return Err(Error::invalid(format!(
            "{} samples left after subsampling by {every}",
            kept.len()
        )));
    }
    let n = bundle.n_agents();
    let mut points = Array2::zeros((n, 2 * kept.len()));
    for a in 0..n {
        for (k, &s) in kept.iter().enumerate() {
            points[[a, 2 * k]] = bundle.series[[a, s, 0]];
            points[[a, 2 * k + 1]] = bundle.series[[a, s, 1]];
        }
    }
    Ok(pairwise_distances(points.view()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartConfig {
    pub dmaps: DiffusionMapsConfig,
    pub subsample_every: usize,
}

impl Default for ChartConfig {
    fn default() -> Self {
        ChartConfig {
            dmaps: DiffusionMapsConfig::default(),
            subsample_every: 10,
        }
    }
}

/// The recovered one-dimensional coordinate of each agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmergentChart<T> {
    pub phi1: Vec<T>,
    /// `phi1` mapped affinely onto `[-1, 1]`.
    pub rescaled_phi: Vec<T>,
    /// Agents sorted by increasing `phi1`.
    pub agent_order: Vec<usize>,
    pub epsilon: T,
    pub eigenvalues: Vec<T>,
}

/// Diffusion Maps on time-series distances, requiring exactly one
/// independent coordinate. The sign is fixed so that agent 0 has `phi1 < 0`.
pub fn build_emergent_chart<T: Real>(
    bundle: &AgentBundle<T>,
    cfg: &ChartConfig,
) -> Result<EmergentChart<T>> {
    let n = bundle.n_agents();
    if n < MIN_AGENTS {
        return Err(Error::NotOneDimensional { found: Vec::new() });
    }
    let d = timeseries_distance_matrix(bundle, cfg.subsample_every)?;
    let dm = DiffusionMapsConfig {
        n_coords: cfg.dmaps.n_coords.min(n - 2),
        ..cfg.dmaps
    };
    let emb = diffusion_maps(d.view(), &dm)?;
    if emb.independent.len() != 1 {
        return Err(Error::NotOneDimensional {
            found: emb.independent.clone(),
        });
    }
    let mut phi1: Vec<T> = emb.coordinate(emb.independent[0]).to_vec();
    if phi1[0] > T::zero() {
        phi1.iter_mut().for_each(|v| *v = -*v);
    }
    let lo = phi1.iter().copied().fold(T::infinity(), T::min);
    let hi = phi1.iter().copied().fold(T::neg_infinity(), T::max);
    if !(hi > lo) {
        return Err(Error::invalid("emergent coordinate is constant"));
    }
    let two = T::lit(2.0);
    let rescaled_phi: Vec<T> = phi1
        .iter()
        .map(|&v| {
            if v == lo {
                -T::one()
            } else if v == hi {
                T::one()
            } else {
                two * (v - lo) / (hi - lo) - T::one()
            }
        })
        .collect();
    let mut agent_order: Vec<usize> = (0..n).collect();
    agent_order.sort_by(|&a, &b| {
        phi1[a]
            .partial_cmp(&phi1[b])
            .expect("finite coordinate")
            .then(a.cmp(&b))
    });
    Ok(EmergentChart {
        phi1,
        rescaled_phi,
        agent_order,
        epsilon: emb.epsilon,
        eigenvalues: emb.eigenvalues.to_vec(),
    })
}

/// Fields on `n_grid` equispaced points of `[-1, 1]` in the emergent
/// coordinate, at the bundle's sample times. Each snapshot and channel is a
/// not-a-knot cubic spline in `phi`; along time the samples are the knots.
pub fn resample_on_phi<T: Real>(
    bundle: &AgentBundle<T>,
    chart: &EmergentChart<T>,
    n_grid: usize,
) -> Result<Trajectory<T>> {
    if n_grid < 8 {
        return Err(Error::invalid(format!(
            "resampling grid of {n_grid} points; at least 8 required"
        )));
    }
    if chart.rescaled_phi.len() != bundle.n_agents() {
        return Err(Error::shape(
            "chart and bundle disagree on the number of agents",
        ));
    }
    let mut order: Vec<usize> = (0..bundle.n_agents()).collect();
    order.sort_by(|&a, &b| {
        chart.rescaled_phi[a]
            .partial_cmp(&chart.rescaled_phi[b])
            .expect("finite coordinate")
    });
    let knots: Vec<f64> = order
        .iter()
        .map(|&a| chart.rescaled_phi[a].as_f64())
        .collect();
    for (k, w) in knots.windows(2).enumerate() {
        if w[1] - w[0] <= 1e-12 {
            return Err(Error::DuplicateCoordinate {
                first: order[k],
                second: order[k + 1],
            });
        }
    }
    let grid = Grid::nodal(n_grid, T::lit(-1.0), T::one(), Boundary::ZeroFlux)?;
    let at: Vec<f64> = grid.coords().iter().map(|c| c.as_f64()).collect();
    let s = spline_matrix::<T>(&knots, &at)?;

    // rows: sorted agents; columns: (time, channel) interleaved like a trajectory
    let sorted = bundle.series.select(Axis(0), &order);
    let (n, times) = (bundle.n_agents(), bundle.n_times());
    let values = sorted
        .into_shape_with_order((n, times * 2))
        .map_err(|e| Error::shape(e.to_string()))?;
    let resampled = s.dot(&values);
    let mut data = vec![T::zero(); times * n_grid * 2];
    for i in 0..n_grid {
        for t in 0..times {
            for c in 0..2 {
                data[(t * n_grid + i) * 2 + c] = resampled[[i, t * 2 + c]];
            }
        }
    }
    Trajectory::from_data(grid, Channels::Complex, bundle.t0, bundle.dt_sample, data)
}

/// Agreement between the emergent coordinate and known positions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub spearman: f64,
    pub kendall: f64,
    /// `phi1` decreases with position.
    pub flipped: bool,
    /// Agents whose rank in `phi1` equals their rank in position, after
    /// reversing `phi1` when flipped.
    pub rank_matches: usize,
}

pub fn verify_ordering<T: Real>(
    chart: &EmergentChart<T>,
    true_positions: &[T],
) -> Result<OrderingReport> {
    let n = chart.phi1.len();
    if true_positions.len() != n {
        return Err(Error::shape(format!(
            "{} positions for {n} agents",
            true_positions.len()
        )));
    }
    let rho = spearman(&chart.phi1, true_positions);
    let tau = kendall(&chart.phi1, true_positions);
    let flipped = rho < 0.0;
    let mut by_position: Vec<usize> = (0..n).collect();
    by_position.sort_by(|&a, &b| {
        true_positions[a]
            .partial_cmp(&true_positions[b])
            .expect("finite position")
    });
    let mut rank = vec![0usize; n];
    for (r, &a) in chart.agent_order.iter().enumerate() {
        rank[a] = if flipped { n - 1 - r } else { r };
    }
    let rank_matches = by_position
        .iter()
        .enumerate()
        .filter(|&(r, &a)| rank[a] == r)
        .count();
    Ok(OrderingReport {
        spearman: rho,
        kendall: tau,
        flipped,
        rank_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_trajectory(n: usize, snaps: usize) -> Trajectory<f64> {
        let grid = Grid::nodal(n, 0.0, 1.0, Boundary::ZeroFlux).unwrap();
        let mut traj = Trajectory::new(grid, Channels::Complex, 0.0, 0.1).unwrap();
        for s in 0..snaps {
            let t = s as f64 * 0.1;
            let snap: Vec<f64> = (0..n)
                .flat_map(|i| {
                    let x = i as f64 / (n - 1) as f64;
                    let phase = t - 2.0 * x;
                    [phase.cos(), phase.sin()]
                })
                .collect();
            traj.push(&snap).unwrap();
        }
        traj
    }

    #[test]
    fn scramble_is_a_recorded_bijection() {
        let traj = toy_trajectory(16, 5);
        let bundle = scramble(&traj, 42).unwrap();
        let mut p = bundle.permutation.clone().unwrap();
        p.sort_unstable();
        assert_eq!(p, (0..16).collect::<Vec<_>>());
        assert_eq!(
            bundle.unscrambled().unwrap(),
            AgentBundle::from_trajectory(&traj).unwrap().series
        );
    }

    #[test]
    fn distance_diagonal_and_duplicates() {
        let traj = toy_trajectory(10, 8);
        let mut bundle = AgentBundle::from_trajectory(&traj).unwrap();
        let first = bundle.series.index_axis(Axis(0), 0).to_owned();
        bundle.series.index_axis_mut(Axis(0), 3).assign(&first);
        let d = timeseries_distance_matrix(&bundle, 2).unwrap();
        assert_eq!(d[[0, 3]], 0.0);
        assert!((0..10).all(|i| d[[i, i]] == 0.0));
        assert!(timeseries_distance_matrix(&bundle, 8).is_err());
    }

    #[test]
    fn ordering_report_orientation() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let chart = |phi: Vec<f64>| {
            let mut order: Vec<usize> = (0..10).collect();
            order.sort_by(|&a, &b| phi[a].partial_cmp(&phi[b]).unwrap());
            EmergentChart {
                rescaled_phi: phi.clone(),
                phi1: phi,
                agent_order: order,
                epsilon: 1.0,
                eigenvalues: vec![],
            }
        };
        let same = verify_ordering(&chart(x.clone()), &x).unwrap();
        assert_eq!(
            (same.spearman, same.flipped, same.rank_matches),
            (1.0, false, 10)
        );
        let neg = verify_ordering(&chart(x.iter().map(|v| -v).collect()), &x).unwrap();
        assert_eq!(
            (neg.spearman, neg.flipped, neg.rank_matches),
            (-1.0, true, 10)
        );
        assert_eq!(neg.kendall, -1.0);
    }
}
