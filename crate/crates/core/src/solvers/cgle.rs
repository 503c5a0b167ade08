use ndarray::Array2;
use num_complex::Complex;

use super::cosine::CosineTransform;
use super::etdrk::{etdrk4_step, etdrk_coefficients, EtdCoefficients};
use crate::datastore::{Boundary, Channels, ComplexField1D, Grid, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;

/// `∂ₜW = W + (1 + i c₁) ΔW − (1 − i c₂)|W|²W` on `[0, L]` with zero flux.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgleConfig<T> {
    pub c1: T,
    pub c2: T,
    pub length: T,
    pub n: usize,
    pub dt: T,
    pub t_final: T,
    pub sample_every: usize,
}

impl<T: Real> Default for CgleConfig<T> {
    fn default() -> Self {
        CgleConfig {
            c1: T::one(),
            c2: T::lit(2.0),
            length: T::lit(200.0),
            n: 128,
            dt: T::lit(0.01),
            t_final: T::lit(100.0),
            sample_every: 10,
        }
    }
}

const BLOW_UP: f64 = 1e6;

/// Cosine-basis pseudo-spectral discretization advanced with ETDRK4. The
/// state is the vector of complex cosine coefficients.
#[derive(Clone, Debug)]
pub struct CgleSolver<T> {
    cfg: CgleConfig<T>,
    transform: CosineTransform<T>,
    coeffs: EtdCoefficients<T>,
    /// modes kept by the 2/3 rule
    keep: usize,
}

type Spectrum<T> = Vec<Complex<T>>;

impl<T: Real> CgleSolver<T> {
    pub fn new(cfg: CgleConfig<T>) -> Result<Self> {
        if cfg.n < 3 || !(cfg.dt > T::zero()) || !(cfg.length > T::zero()) || cfg.sample_every == 0
        {
            return Err(Error::invalid(
                "CGLE config needs n >= 3, dt > 0, L > 0, sample_every >= 1",
            ));
        }
        let transform = CosineTransform::new(cfg.n, cfg.length);
        let eigs: Vec<Complex<T>> = (0..cfg.n)
            .map(|k| {
                let kk = transform.wavenumber(k);
                Complex::new(T::one(), T::zero()) - Complex::new(T::one(), cfg.c1) * (kk * kk)
            })
            .collect();
        let coeffs = etdrk_coefficients(&eigs, cfg.dt);
        let keep = (2 * cfg.n).div_ceil(3);
        Ok(CgleSolver {
            cfg,
            transform,
            coeffs,
            keep,
        })
    }

    pub fn config(&self) -> &CgleConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> Grid<T> {
        Grid::cell_centered(self.cfg.n, self.cfg.length, Boundary::ZeroFlux)
            .expect("validated in new")
    }

    pub fn to_spectral(&self, field: &ComplexField1D<T>) -> Spectrum<T> {
        let n = self.cfg.n;
        let mut phys = Array2::zeros((n, 2));
        for j in 0..n {
            phys[[j, 0]] = field.re[j];
            phys[[j, 1]] = field.im[j];
        }
        let a = self.transform.forward(&phys);
        (0..n).map(|k| Complex::new(a[[k, 0]], a[[k, 1]])).collect()
    }

    fn physical(&self, spec: &[Complex<T>]) -> Array2<T> {
        let n = self.cfg.n;
        let mut a = Array2::zeros((n, 2));
        for (k, c) in spec.iter().enumerate() {
            a[[k, 0]] = c.re;
            a[[k, 1]] = c.im;
        }
        self.transform.inverse(&a)
    }

    /// Node values interleaved `(re, im)`.
    pub fn to_interleaved(&self, spec: &[Complex<T>]) -> Vec<T> {
        let p = self.physical(spec);
        p.rows().into_iter().flat_map(|r| [r[0], r[1]]).collect()
    }

    /// `−(1 − i c₂)|W|²W` in coefficient space, modes above 2n/3 removed.
    fn nonlinear(&self, spec: &[Complex<T>]) -> Spectrum<T> {
        let mut p = self.physical(spec);
        let g = Complex::new(-T::one(), self.cfg.c2);
        for mut row in p.rows_mut() {
            let w = Complex::new(row[0], row[1]);
            let v = g * w * w.norm_sqr();
            row[0] = v.re;
            row[1] = v.im;
        }
        let a = self.transform.forward(&p);
        (0..self.cfg.n)
            .map(|k| {
                if k < self.keep {
                    Complex::new(a[[k, 0]], a[[k, 1]])
                } else {
                    Complex::new(T::zero(), T::zero())
                }
            })
            .collect()
    }

    pub fn step(&self, v: &mut [Complex<T>]) {
        etdrk4_step(&self.coeffs, v, |w| self.nonlinear(w));
    }

    fn check(&self, v: &[Complex<T>], time: T) -> Result<()> {
        let bound = T::lit(BLOW_UP);
        if v.iter()
            .any(|c| !c.re.is_finite() || !c.im.is_finite() || c.norm() > bound)
        {
            return Err(Error::BlowUp {
                time: time.as_f64(),
            });
        }
        Ok(())
    }

    /// Integrates from `ic` (taken at `t0`) for `t_final` time units,
    /// recording every `sample_every` steps starting with the initial state.
    pub fn run(
        &self,
        ic: &ComplexField1D<T>,
        t0: T,
        t_final: T,
        sample_every: usize,
    ) -> Result<Trajectory<T>> {
        if ic.grid.n != self.cfg.n {
            return Err(Error::invalid(format!(
                "initial condition has {} points, solver {}",
                ic.grid.n, self.cfg.n
            )));
        }
        if ic.grid.boundary != Boundary::ZeroFlux {
            return Err(Error::invalid(
                "CGLE initial condition must be on a zero-flux grid",
            ));
        }
        if sample_every == 0 {
            return Err(Error::invalid("sample_every must be at least 1"));
        }
        let steps = (t_final / self.cfg.dt).as_f64();
        let n_steps = steps.round() as usize;
        if (steps - n_steps as f64).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::invalid(format!(
                "T = {t_final} is not a multiple of dt = {}",
                self.cfg.dt
            )));
        }
        let dt = self.cfg.dt;
        let mut traj = Trajectory::new(
            self.grid(),
            Channels::Complex,
            t0,
            dt * T::lit(sample_every as f64),
        )?;
        let mut v = self.to_spectral(ic);
        traj.push(&self.to_interleaved(&v))?;
        for s in 1..=n_steps {
            self.step(&mut v);
            if s % sample_every == 0 {
                self.check(&v, t0 + dt * T::lit(s as f64))?;
                traj.push(&self.to_interleaved(&v))?;
            }
        }
        self.check(&v, t0 + dt * T::lit(n_steps as f64))?;
        Ok(traj)
    }
}

pub fn simulate_cgle<T: Real>(
    ic: &ComplexField1D<T>,
    cfg: &CgleConfig<T>,
) -> Result<Trajectory<T>> {
    CgleSolver::new(*cfg)?.run(ic, T::zero(), cfg.t_final, cfg.sample_every)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(cfg: &CgleConfig<f64>, f: impl Fn(f64) -> (f64, f64)) -> ComplexField1D<f64> {
        let grid = Grid::cell_centered(cfg.n, cfg.length, Boundary::ZeroFlux).unwrap();
        let (re, im) = grid.coords().into_iter().map(f).unzip();
        ComplexField1D::new(grid, re, im).unwrap()
    }

    #[test]
    fn zero_is_fixed_point() {
        let cfg = CgleConfig {
            n: 32,
            t_final: 1.0,
            ..Default::default()
        };
        let traj = simulate_cgle(&field(&cfg, |_| (0.0, 0.0)), &cfg).unwrap();
        assert!(traj.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_field_stays_uniform() {
        let cfg = CgleConfig {
            n: 16,
            t_final: 1.0,
            sample_every: 100,
            ..Default::default()
        };
        let traj = simulate_cgle(&field(&cfg, |_| (0.5, 0.0)), &cfg).unwrap();
        let last = traj.complex_field(traj.n_snapshots() - 1).unwrap();
        for j in 1..16 {
            assert!((last.re[j] - last.re[0]).abs() < 1e-12);
            assert!((last.im[j] - last.im[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_periodic_ic() {
        let cfg = CgleConfig::<f64> {
            n: 8,
            ..Default::default()
        };
        let grid = Grid::cell_centered(8, 200.0, Boundary::Periodic).unwrap();
        let ic = ComplexField1D::new(grid, vec![0.0; 8], vec![0.0; 8]).unwrap();
        assert!(simulate_cgle(&ic, &cfg).is_err());
    }
}
