//! Burgers particle model: density recovery from box moments and a neural
//! right-hand side learned in the data-driven density coordinate.
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ics::random_density;
use crate::datastore::{Boundary, Channels, Grid, ScalarField1D, Trajectory};
use crate::error::{Error, Result};
use crate::manifold::{
    cross_distances, diffusion_maps, ensemble_moments, nystrom_extend, pairwise_distances,
    DiffusionMapsConfig, Embedding, GeometricHarmonics,
};
use crate::particles::{lift_density, ParticleSimConfig, ParticleSimulator};
use crate::pde_net::{
    build_training_pairs, rel_mse, rollout, train_pde_rhs, Architecture, FeatureSpec, Mlp,
    RolloutBoundary, RolloutConfig, TrainConfig, TrainingSet,
};
use crate::real::Real;
use crate::solvers::{simulate_burgers_fv, BurgersConfig};

/// Box moments `0..=order` of a particle run, one `n_boxes × (order+1)`
/// matrix per recorded step.
#[derive(Clone, Debug)]
pub struct MomentSeries<T> {
    pub grid: Grid<T>,
    pub t0: T,
    pub dt_sample: T,
    pub snapshots: Vec<Array2<T>>,
}

/// Lifts `ic` to particles and records box moments every
/// `cfg.sample_every` steps, the initial ensemble included.
pub fn simulate_moments<T: Real>(
    ic: &ScalarField1D<T>,
    cfg: &ParticleSimConfig<T>,
    order: usize,
) -> Result<MomentSeries<T>> {
    let n_steps = cfg.n_steps()?;
    let mut sim = ParticleSimulator::new(ic, *cfg)?;
    let grid = Grid::cell_centered(cfg.n_boxes, ic.grid.domain_length, Boundary::Periodic)?;
    let mut snapshots = vec![ensemble_moments(sim.ensemble(), cfg.n_boxes, order)?];
    for s in 1..=n_steps {
        sim.step();
        if s % cfg.sample_every == 0 {
            snapshots.push(ensemble_moments(sim.ensemble(), cfg.n_boxes, order)?);
        }
    }
    Ok(MomentSeries {
        grid,
        t0: T::zero(),
        dt_sample: cfg.dt * T::lit(cfg.sample_every as f64),
        snapshots,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MassChartConfig {
    /// Boxes entering the eigenproblem; all others are Nyström-extended.
    pub n_points: usize,
    pub seed: u64,
    pub dmaps: DiffusionMapsConfig,
    /// Harmonics of the map from the coordinate back to density.
    pub n_harmonics: usize,
}

impl Default for MassChartConfig {
    fn default() -> Self {
        MassChartConfig {
            n_points: 1024,
            seed: 0,
            dmaps: DiffusionMapsConfig::default(),
            n_harmonics: 40,
        }
    }
}

/// A one-dimensional chart of local box states, `φ₁`, fitted on a sample of
/// boxes, with a geometric-harmonics map from `φ₁` back to density.
#[derive(Clone, Debug)]
pub struct MassChart<T> {
    pub sample: Array2<T>,
    pub embedding: Embedding<T>,
    pub coordinate: usize,
    pub box_width: T,
    density_map: GeometricHarmonics<T>,
}

impl<T: Real> MassChart<T> {
    /// Half of the sampled boxes are the ones whose mass is nearest to a
    /// uniform ladder between the smallest and largest observed mass, so the
    /// tails are covered; the other half are drawn uniformly at random.
    pub fn fit(runs: &[MomentSeries<T>], cfg: &MassChartConfig) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::invalid("no moment data"))?;
        let width = first
            .snapshots
            .first()
            .ok_or_else(|| Error::invalid("empty moment series"))?
            .ncols();
        let mut all: Vec<(T, usize, usize, usize)> = Vec::new();
        for (r, run) in runs.iter().enumerate() {
            for (s, snap) in run.snapshots.iter().enumerate() {
                if snap.ncols() != width {
                    return Err(Error::shape(
                        "moment series disagree on the number of moments",
                    ));
                }
                all.extend(
                    snap.column(0)
                        .iter()
                        .enumerate()
                        .map(|(b, &m)| (m, r, s, b)),
                );
            }
        }
        if cfg.n_points < 4 || cfg.n_points > all.len() {
            return Err(Error::invalid(format!(
                "chart sample of {} from {} boxes",
                cfg.n_points,
                all.len()
            )));
        }
        all.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite moments"));
        let (lo, hi) = (all[0].0.as_f64(), all[all.len() - 1].0.as_f64());
        let ladder = cfg.n_points / 2;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut sample = Array2::zeros((cfg.n_points, width));
        for i in 0..cfg.n_points {
            let (_, r, s, b) = if i < ladder {
                let target = lo + (hi - lo) * i as f64 / (ladder - 1).max(1) as f64;
                all[all
                    .partition_point(|x| x.0.as_f64() < target)
                    .min(all.len() - 1)]
            } else {
                all[rng.random_range(0..all.len())]
            };
            sample.row_mut(i).assign(&runs[r].snapshots[s].row(b));
        }

        MassChart::from_sample(sample, first.grid.spacing, cfg)
    }

    /// Builds the chart on given box-moment rows, column 0 being the mass.
    pub fn from_sample(sample: Array2<T>, box_width: T, cfg: &MassChartConfig) -> Result<Self> {
        let embedding = diffusion_maps(pairwise_distances(sample.view()).view(), &cfg.dmaps)?;
        if embedding.independent.len() != 1 {
            return Err(Error::NotOneDimensional {
                found: embedding.independent.clone(),
            });
        }
        let coordinate = embedding.independent[0];
        let phi = embedding
            .coordinate(coordinate)
            .to_owned()
            .insert_axis(Axis(1));
        let density = sample.column(0).mapv(|m| m / box_width);
        let harmonics = cfg.n_harmonics.min(sample.nrows());
        let density_map = GeometricHarmonics::fit(
            phi.view(),
            density.view(),
            harmonics,
            median_square(phi.view()),
        )?;
        Ok(MassChart {
            sample,
            embedding,
            coordinate,
            box_width,
            density_map,
        })
    }

    /// `φ₁` of each row of box moments.
    pub fn phi(&self, moments: ArrayView2<T>) -> Result<Vec<T>> {
        let d = cross_distances(moments, self.sample.view())?;
        Ok(nystrom_extend(&self.embedding, d.view())?
            .coords
            .column(self.coordinate)
            .to_vec())
    }

    /// Density reconstructed from `φ₁` values.
    pub fn density(&self, phi: &[T]) -> Result<Vec<T>> {
        let col = Array1::from(phi.to_vec()).insert_axis(Axis(1));
        Ok(self.density_map.evaluate(col.view())?.to_vec())
    }

    /// The `φ₁` field of every snapshot of a run.
    pub fn phi_trajectory(&self, run: &MomentSeries<T>) -> Result<Trajectory<T>> {
        let mut traj = Trajectory::new(run.grid, Channels::Real, run.t0, run.dt_sample)?;
        for snap in &run.snapshots {
            traj.push(&self.phi(snap.view())?)?;
        }
        Ok(traj)
    }

    /// Maps every snapshot of a `φ₁` trajectory to density.
    pub fn density_trajectory(&self, phi: &Trajectory<T>) -> Result<Trajectory<T>> {
        let mut out = Trajectory::new(phi.grid, Channels::Real, phi.t0, phi.dt_sample)?;
        for s in 0..phi.n_snapshots() {
            out.push(&self.density(phi.snapshot(s))?)?;
        }
        Ok(out)
    }
}

/// Median of the nonzero squared pairwise distances.
fn median_square<T: Real>(points: ArrayView2<T>) -> T {
    let d = pairwise_distances(points);
    let mut v: Vec<T> = d.iter().copied().filter(|&x| x > T::zero()).collect();
    if v.is_empty() {
        return T::one();
    }
    let mid = v.len() / 2;
    let (_, m, _) =
        v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distance"));
    *m * *m
}

/// Centered moving average over `2·half + 1` snapshots. The first and last
/// `half` snapshots, which lack a full window, are dropped.
pub fn moving_average<T: Real>(traj: &Trajectory<T>, half: usize) -> Result<Trajectory<T>> {
    let n = traj.n_snapshots();
    if n < 2 * half + 1 {
        return Err(Error::invalid(format!(
            "{n} snapshots are too few for a window of {}",
            2 * half + 1
        )));
    }
    let t0 = traj.time(half);
    let mut out = Trajectory::new(traj.grid, traj.channels, t0, traj.dt_sample)?;
    let len = traj.snapshot_len();
    let mut acc = vec![T::zero(); len];
    for s in 0..2 * half + 1 {
        acc.iter_mut()
            .zip(traj.snapshot(s))
            .for_each(|(a, &v)| *a += v);
    }
    let scale = T::one() / T::lit((2 * half + 1) as f64);
    let mut row = vec![T::zero(); len];
    for c in half..n - half {
        if c > half {
            let (add, drop) = (traj.snapshot(c + half), traj.snapshot(c - half - 1));
            for ((a, &x), &y) in acc.iter_mut().zip(add).zip(drop) {
                *a += x - y;
            }
        }
        row.iter_mut().zip(&acc).for_each(|(r, &a)| *r = a * scale);
        out.push(&row)?;
    }
    Ok(out)
}

/// Finite-volume reference on a grid `refinement` times finer than the
/// particle boxes, averaged back onto the boxes. The initial condition is the
/// piecewise-constant box density.
pub fn reference_density<T: Real>(
    ic: &ScalarField1D<T>,
    nu: T,
    t_final: T,
    sample_dt: T,
    refinement: usize,
    dt: T,
) -> Result<Trajectory<T>> {
    let n = ic.len();
    let fine = Grid::cell_centered(n * refinement, ic.grid.domain_length, Boundary::Periodic)?;
    let values: Vec<T> = (0..n * refinement)
        .map(|i| ic.values[i / refinement])
        .collect();
    let fine_ic = ScalarField1D::new(fine, values)?;
    let per_sample = (sample_dt / dt).as_f64().round() as usize;
    let cfg = BurgersConfig {
        nu,
        n_cells: n * refinement,
        dt,
        t_final,
        sample_every: per_sample.max(1),
    };
    let fv = simulate_burgers_fv(&fine_ic, &cfg)?;
    let mut out = Trajectory::new(ic.grid, Channels::Real, fv.t0, fv.dt_sample)?;
    let scale = T::one() / T::lit(refinement as f64);
    for s in 0..fv.n_snapshots() {
        let snap = fv.snapshot(s);
        let coarse: Vec<T> = snap
            .chunks(refinement)
            .map(|c| c.iter().copied().sum::<T>() * scale)
            .collect();
        out.push(&coarse)?;
    }
    Ok(out)
}

/// Keeps particle noise streams apart from the initial-condition generator,
/// which is seeded with the same small integers.
const PARTICLE_SEED_OFFSET: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnedBurgersConfig {
    pub n_trajectories: usize,
    /// Training trajectory `k` uses initial-condition seed `ic_seed + k`.
    pub ic_seed: u64,
    pub test_seed: u64,
    pub nu: f64,
    pub resolution: f64,
    pub n_boxes: usize,
    pub dt: f64,
    pub t_final: f64,
    pub moment_order: usize,
    pub chart: MassChartConfig,
    /// Half-width, in steps, of the temporal moving average applied to the
    /// `φ₁` fields before derivative features are formed.
    pub smoothing: usize,
    pub train: TrainConfig,
    pub reference_refinement: usize,
    pub reference_dt: f64,
}

impl Default for LearnedBurgersConfig {
    fn default() -> Self {
        LearnedBurgersConfig {
            n_trajectories: 8,
            ic_seed: 0,
            test_seed: 1000,
            nu: 0.05,
            resolution: 4e4,
            n_boxes: 128,
            dt: 1e-3,
            t_final: 2.0,
            moment_order: 6,
            chart: MassChartConfig::default(),
            smoothing: 10,
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::burgers()
            },
            reference_refinement: 8,
            reference_dt: 1e-4,
        }
    }
}

impl LearnedBurgersConfig {
    fn particles<T: Real>(&self, seed: u64) -> ParticleSimConfig<T> {
        ParticleSimConfig {
            nu: T::lit(self.nu),
            dt: T::lit(self.dt),
            n_boxes: self.n_boxes,
            resolution: T::lit(self.resolution),
            seed,
            t_final: T::lit(self.t_final),
            sample_every: 1,
        }
    }

    pub fn grid<T: Real>(&self) -> Result<Grid<T>> {
        Grid::cell_centered(self.n_boxes, T::TAU(), Boundary::Periodic)
    }
}

/// Everything up to, but excluding, network training.
pub struct BurgersData<T> {
    pub chart: MassChart<T>,
    pub training: TrainingSet<T>,
    /// `φ₁` of the test particle ensemble at `t = 0`.
    pub test_phi0: Vec<T>,
    pub reference: Trajectory<T>,
}

/// Particle runs, chart, training pairs and the test reference.
pub fn prepare_learned_burgers<T: Real>(
    cfg: &LearnedBurgersConfig,
    mut log: impl FnMut(&str),
) -> Result<BurgersData<T>> {
    let grid = cfg.grid::<T>()?;
    let mut runs = Vec::with_capacity(cfg.n_trajectories);
    for k in 0..cfg.n_trajectories as u64 {
        let ic = random_density(grid, cfg.ic_seed + k)?;
        runs.push(simulate_moments(
            &ic,
            &cfg.particles(PARTICLE_SEED_OFFSET + cfg.ic_seed + k),
            cfg.moment_order,
        )?);
        log(&format!(
            "particle trajectory {} of {}",
            k + 1,
            cfg.n_trajectories
        ));
    }
    let chart = MassChart::fit(&runs, &cfg.chart)?;
    let mut sets = Vec::with_capacity(runs.len());
    for run in &runs {
        let phi = moving_average(&chart.phi_trajectory(run)?, cfg.smoothing)?;
        sets.push(build_training_pairs(&phi, &FeatureSpec::burgers())?);
    }
    let training = TrainingSet::concat(&sets)?;
    log(&format!("{} training rows", training.len()));

    let test_ic = random_density(grid, cfg.test_seed)?;
    let ensemble = lift_density(
        &test_ic,
        T::lit(cfg.resolution),
        PARTICLE_SEED_OFFSET + cfg.test_seed,
    )?;
    let test_phi0 =
        chart.phi(ensemble_moments(&ensemble, cfg.n_boxes, cfg.moment_order)?.view())?;
    let reference = reference_density(
        &test_ic,
        T::lit(cfg.nu),
        T::lit(cfg.t_final),
        T::lit(cfg.dt),
        cfg.reference_refinement,
        T::lit(cfg.reference_dt),
    )?;
    Ok(BurgersData {
        chart,
        training,
        test_phi0,
        reference,
    })
}

/// Rolls `model` out from the test `φ₁`, maps back to density and compares
/// with the reference.
pub fn evaluate_learned_burgers<T: Real>(
    model: &Mlp<T>,
    data: &BurgersData<T>,
    cfg: &LearnedBurgersConfig,
) -> Result<(Trajectory<T>, f64)> {
    let rc = RolloutConfig {
        t0: T::zero(),
        dt: T::lit(cfg.dt),
        duration: T::lit(cfg.t_final),
        record_every: 1,
    };
    let grid = cfg.grid::<T>()?;
    let phi = rollout(
        model,
        &data.test_phi0,
        grid,
        Channels::Real,
        &FeatureSpec::burgers(),
        RolloutBoundary::Periodic,
        &rc,
    )?;
    let density = data.chart.density_trajectory(&phi)?;
    let err = rel_mse(&density, &data.reference)?;
    Ok((density, err))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LearnedBurgersReport {
    pub seeds: Vec<u64>,
    /// `None` where the rollout blew up.
    pub rel_mse: Vec<Option<f64>>,
    pub training_seconds: Vec<f64>,
}

impl LearnedBurgersReport {
    pub fn best(&self) -> Option<f64> {
        self.rel_mse
            .iter()
            .flatten()
            .copied()
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    }
}

/// Trains one network per seed on the same data and evaluates each.
pub fn run_learned_burgers<T: Real>(
    cfg: &LearnedBurgersConfig,
    seeds: &[u64],
    mut log: impl FnMut(&str),
) -> Result<LearnedBurgersReport> {
    let data = prepare_learned_burgers::<T>(cfg, &mut log)?;
    let mut report = LearnedBurgersReport {
        seeds: seeds.to_vec(),
        rel_mse: Vec::new(),
        training_seconds: Vec::new(),
    };
    for &seed in seeds {
        let start = std::time::Instant::now();
        let (model, _) = train_pde_rhs(
            &data.training,
            Architecture::burgers(),
            &TrainConfig {
                seed,
                ..cfg.train.clone()
            },
        )?;
        report.training_seconds.push(start.elapsed().as_secs_f64());
        let err = match evaluate_learned_burgers(&model, &data, cfg) {
            Ok((_, e)) => Some(e),
            Err(Error::BlowUp { .. }) => None,
            Err(e) => return Err(e),
        };
        log(&format!("seed {seed}: rel_mse {err:?}"));
        report.rel_mse.push(err);
    }
    Ok(report)
}
