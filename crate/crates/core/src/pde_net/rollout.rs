use ndarray::{Array2, ArrayView2};

use super::features::{DerivativeOperator, FeatureSpec};
use super::mlp::Mlp;
use crate::datastore::{Channels, Grid, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;

/// Pointwise right-hand side: one row of derivative features in, one row of
/// time derivatives (one per channel) out.
pub trait RhsModel<T: Real>: Sync {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn rhs(&self, features: ArrayView2<T>) -> Result<Array2<T>>;
}

impl<T: Real> RhsModel<T> for Mlp<T> {
    fn n_inputs(&self) -> usize {
        self.arch.n_inputs()
    }

    fn n_outputs(&self) -> usize {
        self.arch.n_outputs()
    }

    fn rhs(&self, features: ArrayView2<T>) -> Result<Array2<T>> {
        self.forward(features)
    }
}

/// A hand-written right-hand side acting row by row.
pub struct FnRhs<F> {
    pub inputs: usize,
    pub outputs: usize,
    pub f: F,
}

impl<T: Real, F> RhsModel<T> for FnRhs<F>
where
    F: Fn(&[T], &mut [T]) + Sync,
{
    fn n_inputs(&self) -> usize {
        self.inputs
    }

    fn n_outputs(&self) -> usize {
        self.outputs
    }

    fn rhs(&self, features: ArrayView2<T>) -> Result<Array2<T>> {
        let mut out = Array2::zeros((features.nrows(), self.outputs));
        let mut row_in = vec![T::zero(); self.inputs];
        for (i, row) in features.rows().into_iter().enumerate() {
            row_in.iter_mut().zip(row.iter()).for_each(|(d, s)| *d = *s);
            let slot = out
                .row_mut(i)
                .into_slice()
                .expect("row of a standard-layout array");
            (self.f)(&row_in, slot);
        }
        Ok(out)
    }
}

/// How the edges are closed during a rollout.
#[derive(Clone, Copy, Debug)]
pub enum RolloutBoundary<'a, T> {
    /// Derivatives wrap around.
    Periodic,
    /// The `width` outermost points at each edge are overwritten after every
    /// step with `truth`, linearly interpolated in time.
    Corridor {
        truth: &'a Trajectory<T>,
        width: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutConfig<T> {
    pub t0: T,
    pub dt: T,
    /// Integration length.
    pub duration: T,
    /// Steps between recorded snapshots.
    pub record_every: usize,
}

const BLOW_UP: f64 = 1e6;

fn truth_at<T: Real>(truth: &Trajectory<T>, t: T, out: &mut [T]) -> Result<()> {
    let s = ((t - truth.t0) / truth.dt_sample).as_f64();
    let last = truth.n_snapshots() - 1;
    if s < -1e-9 || s > last as f64 + 1e-9 {
        return Err(Error::invalid(format!(
            "corridor truth does not cover t = {t}"
        )));
    }
    let k = (s.floor().max(0.0) as usize).min(last.saturating_sub(1));
    let frac = T::lit((s - k as f64).clamp(0.0, 1.0));
    let a = truth.snapshot(k);
    let b = truth.snapshot((k + 1).min(last));
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x + frac * (y - x);
    }
    Ok(())
}

/// Forward-Euler integration of `u_t = model(features(u))`.
pub fn rollout<T: Real>(
    model: &dyn RhsModel<T>,
    ic: &[T],
    grid: Grid<T>,
    channels: Channels,
    spec: &FeatureSpec,
    boundary: RolloutBoundary<'_, T>,
    cfg: &RolloutConfig<T>,
) -> Result<Trajectory<T>> {
    let k = channels.count();
    let n = grid.n;
    if ic.len() != n * k {
        return Err(Error::shape(format!(
            "initial condition has {} values, grid needs {}",
            ic.len(),
            n * k
        )));
    }
    if model.n_inputs() != spec.n_features(k) || model.n_outputs() != k {
        return Err(Error::shape(
            "model inputs/outputs do not match the feature spec and channels",
        ));
    }
    if !(cfg.dt > T::zero()) || cfg.record_every == 0 {
        return Err(Error::invalid("rollout needs dt > 0 and record_every >= 1"));
    }
    let steps_f = (cfg.duration / cfg.dt).as_f64();
    let steps = steps_f.round() as usize;
    if (steps_f - steps as f64).abs() > 1e-6 * steps_f.max(1.0) {
        return Err(Error::invalid("rollout duration is not a multiple of dt"));
    }
    let mut corridor = None;
    if let RolloutBoundary::Corridor { truth, width } = boundary {
        if truth.grid.n != n || truth.channels != channels {
            return Err(Error::shape(
                "corridor truth does not match the rollout grid",
            ));
        }
        if 2 * width >= n {
            return Err(Error::invalid("corridors cover the whole domain"));
        }
        corridor = Some((truth, width, vec![T::zero(); n * k]));
    }

    let op = DerivativeOperator::new(spec, n, grid.spacing)?;
    let mut traj = Trajectory::new(
        grid,
        channels,
        cfg.t0,
        cfg.dt * T::lit(cfg.record_every as f64),
    )?;
    let mut u = ic.to_vec();
    traj.push(&u)?;
    let mut features = Array2::zeros((n, spec.n_features(k)));
    for s in 1..=steps {
        op.apply(&u, k, features.view_mut());
        let rate = model.rhs(features.view())?;
        for i in 0..n {
            for c in 0..k {
                u[i * k + c] += cfg.dt * rate[[i, c]];
            }
        }
        let t = cfg.t0 + cfg.dt * T::lit(s as f64);
        if let Some((truth, width, buf)) = corridor.as_mut() {
            truth_at(truth, t, buf)?;
            let w = *width * k;
            u[..w].copy_from_slice(&buf[..w]);
            u[n * k - w..].copy_from_slice(&buf[n * k - w..]);
        }
        if u.iter()
            .any(|v| !v.is_finite() || v.abs() > T::lit(BLOW_UP))
        {
            return Err(Error::BlowUp { time: t.as_f64() });
        }
        if s % cfg.record_every == 0 {
            traj.push(&u)?;
        }
    }
    Ok(traj)
}

/// Mean squared deviation over all times, points and channels, divided by
/// the mean square of the reference. For complex fields this is the squared
/// modulus of the difference over the mean squared modulus.
pub fn rel_mse<T: Real>(traj: &Trajectory<T>, reference: &Trajectory<T>) -> Result<f64> {
    if !traj.same_layout(reference) {
        return Err(Error::shape(format!(
            "trajectory {}x{}x{} vs reference {}x{}x{}",
            traj.n_snapshots(),
            traj.grid.n,
            traj.channels.count(),
            reference.n_snapshots(),
            reference.grid.n,
            reference.channels.count()
        )));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&a, &b) in traj.data().iter().zip(reference.data()) {
        let (a, b) = (a.as_f64(), b.as_f64());
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return Err(Error::invalid("reference trajectory is identically zero"));
    }
    Ok(num / den)
}
