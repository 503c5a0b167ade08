//! Interacting-particle model whose coarse density obeys viscous Burgers.
//!
//! Each particle moves as `dZ = ½ ρ(Z, t) dt + √(2ν) dW` on the periodic
//! interval `[0, 2π)`, where `ρ` is the box-counted density of the whole
//! ensemble. Noise comes from counter-addressed ChaCha streams, one per
//! fixed-size block of particles and per step, so results do not depend on how
//! blocks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::datastore::{Boundary, Channels, Grid, ParticleEnsemble, ScalarField1D, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;

const BLOCK: usize = 4096;
const LIFT_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleSimConfig<T> {
    pub nu: T,
    pub dt: T,
    pub n_boxes: usize,
    /// Particles per unit mass, `R`.
    pub resolution: T,
    pub seed: u64,
    pub t_final: T,
    pub sample_every: usize,
}

impl<T: Real> Default for ParticleSimConfig<T> {
    fn default() -> Self {
        ParticleSimConfig {
            nu: T::lit(0.05),
            dt: T::lit(1e-3),
            n_boxes: 128,
            resolution: T::lit(4e4),
            seed: 0,
            t_final: T::lit(2.0),
            sample_every: 10,
        }
    }
}

impl<T: Real> ParticleSimConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !(self.nu >= T::zero()) || !(self.t_final >= T::zero()) {
            return Err(Error::invalid(
                "particle config needs dt > 0, nu >= 0, T >= 0",
            ));
        }
        if self.n_boxes < 2 || self.sample_every == 0 {
            return Err(Error::invalid(
                "particle config needs n_boxes >= 2 and sample_every >= 1",
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> Result<usize> {
        let steps = (self.t_final / self.dt).as_f64();
        let rounded = steps.round();
        if (steps - rounded).abs() > 1e-6 * rounded.max(1.0) {
            return Err(Error::invalid(format!(
                "T = {} is not a multiple of dt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(rounded as usize)
    }
}

/// Position in the counter space of the noise generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub step: u64,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream { seed, step: 0 }
    }

    fn block_rng(&self, block: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.step);
        rng.set_word_pos((block as u128) << 40);
        rng
    }
}

fn box_index<T: Real>(z: T, inv_width: T, n_boxes: usize) -> usize {
    // z is in [0, L); the min guards the last box against rounding
    (z * inv_width).to_usize().unwrap_or(0).min(n_boxes - 1)
}

/// Places `round(ρᵢ·w·R)` particles uniformly inside each cell of `field`.
pub fn lift_density<T: Real>(
    field: &ScalarField1D<T>,
    resolution: T,
    seed: u64,
) -> Result<ParticleEnsemble<T>> {
    if field.grid.boundary != Boundary::Periodic {
        return Err(Error::invalid("particle lifting needs a periodic field"));
    }
    if !(resolution > T::zero()) {
        return Err(Error::invalid("resolution factor must be positive"));
    }
    let w = field.grid.spacing;
    let l = field.grid.domain_length;
    let mut counts = Vec::with_capacity(field.len());
    for (index, &rho) in field.values.iter().enumerate() {
        if rho < T::zero() {
            return Err(Error::NegativeDensity {
                index,
                value: rho.as_f64(),
            });
        }
        counts.push((rho * w * resolution).as_f64().round_ties_even() as usize);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(LIFT_STREAM);
    let mut positions = Vec::with_capacity(counts.iter().sum());
    for (i, &c) in counts.iter().enumerate() {
        let left = w * T::lit(i as f64);
        for _ in 0..c {
            let u: f64 = rng.random();
            let mut z = left + w * T::lit(u);
            if z >= l {
                z -= l;
            }
            positions.push(z);
        }
    }
    ParticleEnsemble::new(positions, resolution, l)
}

fn box_counts<T: Real>(positions: &[T], domain_length: T, n_boxes: usize) -> Vec<usize> {
    let inv_w = T::lit(n_boxes as f64) / domain_length;
    let mut counts = vec![0usize; n_boxes];
    for &z in positions {
        counts[box_index(z, inv_w, n_boxes)] += 1;
    }
    counts
}

/// Box-count density `ρᵢ = nᵢ / (w R)` on `n_boxes` cells, nodes at the box
/// centers.
pub fn estimate_density<T: Real>(
    ensemble: &ParticleEnsemble<T>,
    n_boxes: usize,
) -> Result<ScalarField1D<T>> {
    // a field needs at least three nodes
    if n_boxes < 3 {
        return Err(Error::invalid(
            "density estimation needs at least three boxes",
        ));
    }
    let counts = box_counts(&ensemble.positions, ensemble.domain_length, n_boxes);
    let grid = Grid::cell_centered(n_boxes, ensemble.domain_length, Boundary::Periodic)?;
    let scale = T::one() / (grid.spacing * ensemble.resolution);
    let values = counts.iter().map(|&c| T::lit(c as f64) * scale).collect();
    ScalarField1D::new(grid, values)
}

/// One Euler–Maruyama step against a given piecewise-constant density
/// (`density[i]` on box `i`). Advances `noise` by one step.
pub fn drift_diffuse<T: Real>(
    positions: &mut [T],
    density: &[T],
    domain_length: T,
    dt: T,
    nu: T,
    noise: &mut NoiseStream,
) {
    let n_boxes = density.len();
    let inv_w = T::lit(n_boxes as f64) / domain_length;
    let half_dt = T::lit(0.5) * dt;
    let sigma = (T::lit(2.0) * nu * dt).sqrt();
    let stream = *noise;
    positions
        .par_chunks_mut(BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            let mut rng = stream.block_rng(block);
            for z in chunk.iter_mut() {
                let rho = density[box_index(*z, inv_w, n_boxes)];
                let mut next = *z + half_dt * rho;
                if sigma > T::zero() {
                    let xi: f64 = rng.sample(StandardNormal);
                    next += sigma * T::lit(xi);
                }
                let mut wrapped = next % domain_length;
                if wrapped < T::zero() {
                    wrapped += domain_length;
                }
                if wrapped >= domain_length {
                    wrapped = T::zero();
                }
                *z = wrapped;
            }
        });
    noise.step += 1;
}

/// Moves every particle by `½ρ dt + √(2ν dt) ξ`, with `ρ` the box density of
/// the ensemble at the start of the step (each particle counts itself).
pub fn step_euler_maruyama<T: Real>(
    ensemble: &mut ParticleEnsemble<T>,
    dt: T,
    nu: T,
    n_boxes: usize,
    noise: &mut NoiseStream,
) {
    let counts = box_counts(&ensemble.positions, ensemble.domain_length, n_boxes);
    let w = ensemble.domain_length / T::lit(n_boxes as f64);
    let scale = T::one() / (w * ensemble.resolution);
    let density: Vec<T> = counts.iter().map(|&c| T::lit(c as f64) * scale).collect();
    drift_diffuse(
        &mut ensemble.positions,
        &density,
        ensemble.domain_length,
        dt,
        nu,
        noise,
    );
}

/// Stepwise driver, for callers that observe the ensemble between steps.
pub struct ParticleSimulator<T> {
    cfg: ParticleSimConfig<T>,
    ensemble: ParticleEnsemble<T>,
    noise: NoiseStream,
    steps_taken: usize,
}

impl<T: Real> ParticleSimulator<T> {
    pub fn new(ic: &ScalarField1D<T>, cfg: ParticleSimConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if !ic.len().is_multiple_of(cfg.n_boxes) {
            return Err(Error::invalid(format!(
                "{} density boxes do not divide the {}-point initial grid",
                cfg.n_boxes,
                ic.len()
            )));
        }
        let ensemble = lift_density(ic, cfg.resolution, cfg.seed)?;
        Ok(ParticleSimulator {
            cfg,
            ensemble,
            noise: NoiseStream::new(cfg.seed),
            steps_taken: 0,
        })
    }

    pub fn ensemble(&self) -> &ParticleEnsemble<T> {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> ParticleEnsemble<T> {
        self.ensemble
    }

    pub fn time(&self) -> T {
        self.cfg.dt * T::lit(self.steps_taken as f64)
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn step(&mut self) {
        step_euler_maruyama(
            &mut self.ensemble,
            self.cfg.dt,
            self.cfg.nu,
            self.cfg.n_boxes,
            &mut self.noise,
        );
        self.steps_taken += 1;
    }

    pub fn density(&self) -> Result<ScalarField1D<T>> {
        estimate_density(&self.ensemble, self.cfg.n_boxes)
    }
}

/// Lifts `ic`, integrates to `t_final` and records the box density every
/// `sample_every` steps (the initial state included).
pub fn simulate_particles<T: Real>(
    ic: &ScalarField1D<T>,
    cfg: &ParticleSimConfig<T>,
) -> Result<(Trajectory<T>, ParticleEnsemble<T>)> {
    let n_steps = cfg.n_steps()?;
    let mut sim = ParticleSimulator::new(ic, *cfg)?;
    let first = sim.density()?;
    let mut traj = Trajectory::new(
        first.grid,
        Channels::Real,
        T::zero(),
        cfg.dt * T::lit(cfg.sample_every as f64),
    )?;
    traj.push(&first.values)?;
    for s in 1..=n_steps {
        sim.step();
        if s % cfg.sample_every == 0 {
            traj.push(&sim.density()?.values)?;
        }
    }
    Ok((traj, sim.into_ensemble()))
}
