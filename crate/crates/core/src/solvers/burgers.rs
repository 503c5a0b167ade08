use crate::datastore::{Boundary, Channels, ScalarField1D, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BurgersConfig<T> {
    pub nu: T,
    pub n_cells: usize,
    pub dt: T,
    pub t_final: T,
    pub sample_every: usize,
}

impl<T: Real> Default for BurgersConfig<T> {
    fn default() -> Self {
        BurgersConfig {
            nu: T::lit(0.05),
            n_cells: 128,
            dt: T::lit(1e-3),
            t_final: T::lit(2.0),
            sample_every: 10,
        }
    }
}

/// Largest admissible step: `0.4 · min(Δz / max|ρ|, Δz² / (2ν))`.
pub fn cfl_bound<T: Real>(nu: T, dz: T, max_abs: T) -> T {
    let advective = if max_abs > T::zero() {
        dz / max_abs
    } else {
        T::infinity()
    };
    let diffusive = if nu > T::zero() {
        dz * dz / (T::lit(2.0) * nu)
    } else {
        T::infinity()
    };
    T::lit(0.4) * advective.min(diffusive)
}

const WENO_EPS: f64 = 1e-6;

/// Fifth-order WENO value at the right face of the centre cell of
/// `(a, b, c, d, e)`, biased toward the left.
#[inline]
fn weno5<T: Real>(a: T, b: T, c: T, d: T, e: T) -> T {
    let two = T::lit(2.0);
    let sixth = T::lit(1.0 / 6.0);
    let q0 = (two * a - T::lit(7.0) * b + T::lit(11.0) * c) * sixth;
    let q1 = (-b + T::lit(5.0) * c + two * d) * sixth;
    let q2 = (two * c + T::lit(5.0) * d - e) * sixth;

    let k = T::lit(13.0 / 12.0);
    let quarter = T::lit(0.25);
    let s0 = a - two * b + c;
    let s1 = b - two * c + d;
    let s2 = c - two * d + e;
    let t0 = a - T::lit(4.0) * b + T::lit(3.0) * c;
    let t1 = b - d;
    let t2 = T::lit(3.0) * c - T::lit(4.0) * d + e;
    let b0 = k * s0 * s0 + quarter * t0 * t0;
    let b1 = k * s1 * s1 + quarter * t1 * t1;
    let b2 = k * s2 * s2 + quarter * t2 * t2;

    let eps = T::lit(WENO_EPS);
    let a0 = T::lit(0.1) / ((eps + b0) * (eps + b0));
    let a1 = T::lit(0.6) / ((eps + b1) * (eps + b1));
    let a2 = T::lit(0.3) / ((eps + b2) * (eps + b2));
    (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)
}

/// Semi-discrete right-hand side of `ρₜ = −(ρ²/2)_z + ν ρ_zz` for periodic
/// cell averages: WENO5 face states joined by a local Lax–Friedrichs flux,
/// fourth-order central differences for diffusion.
pub fn burgers_rhs<T: Real>(u: &[T], dz: T, nu: T, out: &mut [T]) {
    let n = u.len();
    let at = |i: isize| u[i.rem_euclid(n as isize) as usize];
    let half = T::lit(0.5);

    // Rusanov flux at i + 1/2 from reconstructed face states
    let mut faces = vec![T::zero(); n];
    for (i, face) in faces.iter_mut().enumerate() {
        let i = i as isize;
        let left = weno5(at(i - 2), at(i - 1), at(i), at(i + 1), at(i + 2));
        let right = weno5(at(i + 3), at(i + 2), at(i + 1), at(i), at(i - 1));
        let alpha = left.abs().max(right.abs());
        *face = half * (half * left * left + half * right * right) - half * alpha * (right - left);
    }

    let inv_dz = T::one() / dz;
    let diff = nu / (T::lit(12.0) * dz * dz);
    for i in 0..n {
        let ii = i as isize;
        let lap = -at(ii - 2) + T::lit(16.0) * at(ii - 1) - T::lit(30.0) * at(ii)
            + T::lit(16.0) * at(ii + 1)
            - at(ii + 2);
        let left = faces[(i + n - 1) % n];
        out[i] = -(faces[i] - left) * inv_dz + diff * lap;
    }
}

fn max_abs<T: Real>(u: &[T]) -> T {
    u.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Integrates viscous Burgers with SSP-RK3, recording cell averages every
/// `sample_every` steps. The CFL bound is checked before every step.
pub fn simulate_burgers_fv<T: Real>(
    ic: &ScalarField1D<T>,
    cfg: &BurgersConfig<T>,
) -> Result<Trajectory<T>> {
    if ic.grid.boundary != Boundary::Periodic {
        return Err(Error::invalid(
            "finite-volume Burgers needs a periodic initial condition",
        ));
    }
    if ic.len() != cfg.n_cells {
        return Err(Error::invalid(format!(
            "initial condition has {} cells, config {}",
            ic.len(),
            cfg.n_cells
        )));
    }
    if !(cfg.dt > T::zero()) || cfg.sample_every == 0 || !(cfg.nu >= T::zero()) {
        return Err(Error::invalid(
            "Burgers config needs dt > 0, nu >= 0, sample_every >= 1",
        ));
    }
    let steps = (cfg.t_final / cfg.dt).as_f64();
    let n_steps = steps.round() as usize;
    if (steps - n_steps as f64).abs() > 1e-6 * steps.max(1.0) {
        return Err(Error::invalid(format!(
            "T = {} is not a multiple of dt = {}",
            cfg.t_final, cfg.dt
        )));
    }

    let dz = ic.grid.spacing;
    let mut traj = Trajectory::new(
        ic.grid,
        Channels::Real,
        T::zero(),
        cfg.dt * T::lit(cfg.sample_every as f64),
    )?;
    let mut u = ic.values.clone();
    traj.push(&u)?;

    let n = u.len();
    let (mut k, mut u1, mut u2) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let dt = cfg.dt;
    let (q34, q14, q13, q23) = (
        T::lit(0.75),
        T::lit(0.25),
        T::lit(1.0 / 3.0),
        T::lit(2.0 / 3.0),
    );
    for s in 1..=n_steps {
        let bound = cfl_bound(cfg.nu, dz, max_abs(&u));
        if dt > bound {
            return Err(Error::Cfl {
                dt: dt.as_f64(),
                suggested: bound.as_f64(),
            });
        }
        burgers_rhs(&u, dz, cfg.nu, &mut k);
        for i in 0..n {
            u1[i] = u[i] + dt * k[i];
        }
        burgers_rhs(&u1, dz, cfg.nu, &mut k);
        for i in 0..n {
            u2[i] = q34 * u[i] + q14 * (u1[i] + dt * k[i]);
        }
        burgers_rhs(&u2, dz, cfg.nu, &mut k);
        for i in 0..n {
            u[i] = q13 * u[i] + q23 * (u2[i] + dt * k[i]);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                time: (dt * T::lit(s as f64)).as_f64(),
            });
        }
        if s % cfg.sample_every == 0 {
            traj.push(&u)?;
        }
    }
    Ok(traj)
}
