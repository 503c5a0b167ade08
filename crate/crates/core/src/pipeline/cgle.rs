//! CGLE agents with hidden positions: an emergent coordinate from their time
//! series, and a neural PDE learned on that coordinate.
use serde::{Deserialize, Serialize};

use super::ics::{cgle_front, cgle_perturbed};
use crate::datastore::{Boundary, Channels, Grid, Trajectory};
use crate::emergent::{
    build_emergent_chart, resample_on_phi, scramble, verify_ordering, ChartConfig, EmergentChart,
    OrderingReport,
};
use crate::error::{Error, Result};
use crate::pde_net::{
    build_training_pairs, rel_mse, rollout, train_with, Architecture, FeatureSpec, Mlp,
    RolloutBoundary, RolloutConfig, TrainConfig, TrainingSet,
};
use crate::real::Real;
use crate::solvers::{simulate_cgle, CgleConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmergentCgleConfig {
    pub c1: f64,
    pub c2: f64,
    pub length: f64,
    pub n: usize,
    /// Seed of the agent relabeling shared by every trajectory.
    pub scramble_seed: u64,
    /// The chart is built from the front run over `[0, chart_window]`.
    pub chart_window: f64,
    /// Step of the run feeding the chart; every step is a sample.
    pub chart_dt: f64,
    pub chart: ChartConfig,
    pub n_grid: usize,
    pub n_transients: usize,
    /// Transient `k` starts from the perturbed front with seed `transient_seed + k`.
    pub transient_seed: u64,
    pub transient_duration: f64,
    pub dt: f64,
    /// Solver steps between training snapshots.
    pub sample_every: usize,
    pub train: TrainConfig,
    pub test_seed: u64,
    pub test_duration: f64,
    pub corridor: usize,
    /// Rollout steps between compared snapshots.
    pub record_every: usize,
}

impl Default for EmergentCgleConfig {
    fn default() -> Self {
        EmergentCgleConfig {
            c1: 1.0,
            c2: 2.0,
            length: 200.0,
            n: 128,
            scramble_seed: 7,
            chart_window: 1.0,
            chart_dt: 0.01,
            chart: ChartConfig::default(),
            n_grid: 128,
            n_transients: 5,
            transient_seed: 0,
            transient_duration: 20.0,
            dt: 1e-3,
            sample_every: 1,
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::cgle()
            },
            test_seed: 1000,
            test_duration: 10.0,
            corridor: 4,
            record_every: 100,
        }
    }
}

impl EmergentCgleConfig {
    fn solver(&self, dt: f64, t_final: f64, sample_every: usize) -> CgleConfig<f64> {
        CgleConfig {
            c1: self.c1,
            c2: self.c2,
            length: self.length,
            n: self.n,
            dt,
            t_final,
            sample_every,
        }
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::cell_centered(self.n, self.length, Boundary::ZeroFlux)
    }
}

/// Scrambles the front run and builds the chart. Returns the chart together
/// with the ordering report against the hidden positions.
pub fn cgle_chart(cfg: &EmergentCgleConfig) -> Result<(EmergentChart<f64>, OrderingReport)> {
    let grid = cfg.grid()?;
    let run = simulate_cgle(
        &cgle_front(grid, cfg.length)?,
        &cfg.solver(cfg.chart_dt, cfg.chart_window, 1),
    )?;
    let bundle = scramble(&run, cfg.scramble_seed)?;
    let chart = build_emergent_chart(&bundle, &cfg.chart)?;
    let truth: Vec<f64> = bundle
        .permutation
        .as_ref()
        .expect("scramble records the permutation")
        .iter()
        .map(|&g| grid.coord(g))
        .collect();
    let report = verify_ordering(&chart, &truth)?;
    Ok((chart, report))
}

/// Relabels a grid trajectory like the chart's agents and resamples it on
/// the emergent coordinate.
pub fn to_emergent<T: Real>(
    traj: &Trajectory<f64>,
    chart: &EmergentChart<f64>,
    cfg: &EmergentCgleConfig,
) -> Result<Trajectory<T>> {
    Ok(resample_on_phi(&scramble(traj, cfg.scramble_seed)?, chart, cfg.n_grid)?.cast())
}

pub struct EmergentPdeData<T> {
    pub training: TrainingSet<T>,
    pub snapshots: usize,
    /// Test run on the emergent grid at every solver step.
    pub test: Trajectory<T>,
}

pub fn prepare_emergent_pde<T: Real>(
    chart: &EmergentChart<f64>,
    cfg: &EmergentCgleConfig,
    mut log: impl FnMut(&str),
) -> Result<EmergentPdeData<T>> {
    let grid = cfg.grid()?;
    let mut sets = Vec::with_capacity(cfg.n_transients);
    let mut snapshots = 0;
    for k in 0..cfg.n_transients as u64 {
        let ic = cgle_perturbed(grid, cfg.length, cfg.transient_seed + k)?;
        let run = simulate_cgle(
            &ic,
            &cfg.solver(cfg.dt, cfg.transient_duration, cfg.sample_every),
        )?;
        let phi = to_emergent::<T>(&run, chart, cfg)?;
        snapshots += phi.n_snapshots();
        sets.push(build_training_pairs(&phi, &FeatureSpec::cgle())?);
        log(&format!("transient {} of {}", k + 1, cfg.n_transients));
    }
    let training = TrainingSet::concat(&sets)?;
    drop(sets);
    let ic = cgle_perturbed(grid, cfg.length, cfg.test_seed)?;
    let run = simulate_cgle(&ic, &cfg.solver(cfg.dt, cfg.test_duration, 1))?;
    let test = to_emergent::<T>(&run, chart, cfg)?;
    Ok(EmergentPdeData {
        training,
        snapshots,
        test,
    })
}

/// Corridor rollout of `model` from the first test snapshot, compared with
/// the test run every `record_every` steps.
pub fn evaluate_emergent_pde<T: Real>(
    model: &Mlp<T>,
    test: &Trajectory<T>,
    cfg: &EmergentCgleConfig,
) -> Result<(Trajectory<T>, f64)> {
    let rc = RolloutConfig {
        t0: test.t0,
        dt: T::lit(cfg.dt),
        duration: T::lit(cfg.test_duration),
        record_every: cfg.record_every,
    };
    let boundary = RolloutBoundary::Corridor {
        truth: test,
        width: cfg.corridor,
    };
    let out = rollout(
        model,
        test.snapshot(0),
        test.grid,
        Channels::Complex,
        &FeatureSpec::cgle(),
        boundary,
        &rc,
    )?;
    let err = rel_mse(&out, &test.subsample(cfg.record_every))?;
    Ok((out, err))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmergentPdeReport {
    pub ordering: OrderingReport,
    pub snapshots: usize,
    pub rel_mse: Option<f64>,
    /// Error of holding the initial test snapshot fixed.
    pub frozen_rel_mse: f64,
    pub loss: Vec<f64>,
    pub training_seconds: f64,
}

/// Chart, training data, training and corridor rollout in one pass.
pub fn run_emergent_pde<T: Real>(
    cfg: &EmergentCgleConfig,
    mut log: impl FnMut(&str),
) -> Result<(Mlp<T>, EmergentPdeReport)> {
    let (chart, ordering) = cgle_chart(cfg)?;
    log(&format!(
        "chart: spearman {:.6}, {} of {} agents in place",
        ordering.spearman, ordering.rank_matches, cfg.n
    ));
    let data = prepare_emergent_pde::<T>(&chart, cfg, &mut log)?;
    log(&format!(
        "{} snapshots, {} training rows",
        data.snapshots,
        data.training.len()
    ));
    let start = std::time::Instant::now();
    let (model, loss) = train_with(&data.training, Architecture::cgle(), &cfg.train, |e, l| {
        log(&format!("epoch {e}: loss {l:.4e}"))
    })?;
    let training_seconds = start.elapsed().as_secs_f64();
    let rel = match evaluate_emergent_pde(&model, &data.test, cfg) {
        Ok((_, e)) => Some(e),
        Err(Error::BlowUp { .. }) => None,
        Err(e) => return Err(e),
    };
    let sub = data.test.subsample(cfg.record_every);
    let mut frozen = Trajectory::new(sub.grid, sub.channels, sub.t0, sub.dt_sample)?;
    for _ in 0..sub.n_snapshots() {
        frozen.push(sub.snapshot(0))?;
    }
    let frozen_rel_mse = rel_mse(&frozen, &sub)?;
    Ok((
        model,
        EmergentPdeReport {
            ordering,
            snapshots: data.snapshots,
            rel_mse: rel,
            frozen_rel_mse,
            loss,
            training_seconds,
        },
    ))
}
