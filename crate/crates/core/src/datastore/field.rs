use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    ZeroFlux,
}

/// Uniform 1-D grid. Node `i` sits at `origin + i * spacing`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    pub n: usize,
    pub origin: T,
    pub spacing: T,
    pub domain_length: T,
    pub boundary: Boundary,
}

impl<T: Real> Grid<T> {
    /// `n` cells of width `domain_length / n` starting at zero, nodes at the
    /// cell centers. This is the layout of density boxes and of the cosine
    /// collocation points.
    pub fn cell_centered(n: usize, domain_length: T, boundary: Boundary) -> Result<Self> {
        let spacing = domain_length / T::lit(n as f64);
        let grid = Grid {
            n,
            origin: spacing * T::lit(0.5),
            spacing,
            domain_length,
            boundary,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// `n` nodes from `start` to `end` inclusive.
    pub fn nodal(n: usize, start: T, end: T, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("nodal grid needs at least two nodes"));
        }
        let spacing = (end - start) / T::lit((n - 1) as f64);
        let grid = Grid {
            n,
            origin: start,
            spacing,
            domain_length: end - start,
            boundary,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid(format!(
                "grid needs at least 3 points, got {}",
                self.n
            )));
        }
        if !(self.domain_length > T::zero()) || !self.domain_length.is_finite() {
            return Err(Error::invalid("domain length must be positive and finite"));
        }
        if !(self.spacing > T::zero()) || !self.origin.is_finite() {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn coord(&self, i: usize) -> T {
        self.origin + self.spacing * T::lit(i as f64)
    }

    pub fn cast<U: Real>(&self) -> Grid<U> {
        Grid {
            n: self.n,
            origin: U::lit(self.origin.as_f64()),
            spacing: U::lit(self.spacing.as_f64()),
            domain_length: U::lit(self.domain_length.as_f64()),
            boundary: self.boundary,
        }
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.n).map(|i| self.coord(i)).collect()
    }
}

fn check_finite<T: Real>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField1D<T> {
    pub grid: Grid<T>,
    pub values: Vec<T>,
}

impl<T: Real> ScalarField1D<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.n {
            return Err(Error::shape(format!(
                "{} values on a {}-point grid",
                values.len(),
                grid.n
            )));
        }
        check_finite(&values)?;
        Ok(ScalarField1D { grid, values })
    }

    /// Samples `f` at the grid nodes.
    pub fn from_fn(grid: Grid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.coords().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField1D<T> {
    pub grid: Grid<T>,
    pub re: Vec<T>,
    pub im: Vec<T>,
}

impl<T: Real> ComplexField1D<T> {
    pub fn new(grid: Grid<T>, re: Vec<T>, im: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if re.len() != grid.n || im.len() != grid.n {
            return Err(Error::shape(format!(
                "complex field parts of length {}/{} on a {}-point grid",
                re.len(),
                im.len(),
                grid.n
            )));
        }
        check_finite(&re)?;
        check_finite(&im)?;
        Ok(ComplexField1D { grid, re, im })
    }

    pub fn interleaved(&self) -> Vec<T> {
        self.re
            .iter()
            .zip(&self.im)
            .flat_map(|(&r, &i)| [r, i])
            .collect()
    }

    pub fn from_interleaved(grid: Grid<T>, data: &[T]) -> Result<Self> {
        if !data.len().is_multiple_of(2) {
            return Err(Error::shape("interleaved complex data has odd length"));
        }
        let re = data.iter().step_by(2).copied().collect();
        let im = data.iter().skip(1).step_by(2).copied().collect();
        Self::new(grid, re, im)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Channels {
    Real,
    Complex,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Real => 1,
            Channels::Complex => 2,
        }
    }
}

/// Uniformly sampled sequence of fields on a shared grid.
///
/// Snapshots are stored back to back; within a snapshot the layout is
/// point-major with channels interleaved, matching the binary format.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub grid: Grid<T>,
    pub channels: Channels,
    pub t0: T,
    pub dt_sample: T,
    data: Vec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(grid: Grid<T>, channels: Channels, t0: T, dt_sample: T) -> Result<Self> {
        grid.validate()?;
        if !(dt_sample > T::zero()) {
            return Err(Error::invalid("sampling interval must be positive"));
        }
        Ok(Trajectory {
            grid,
            channels,
            t0,
            dt_sample,
            data: Vec::new(),
        })
    }

    pub fn from_data(
        grid: Grid<T>,
        channels: Channels,
        t0: T,
        dt_sample: T,
        data: Vec<T>,
    ) -> Result<Self> {
        let mut traj = Self::new(grid, channels, t0, dt_sample)?;
        if !data.len().is_multiple_of(traj.snapshot_len()) {
            return Err(Error::shape(format!(
                "{} values is not a whole number of {}-value snapshots",
                data.len(),
                traj.snapshot_len()
            )));
        }
        check_finite(&data)?;
        traj.data = data;
        Ok(traj)
    }

    pub fn snapshot_len(&self) -> usize {
        self.grid.n * self.channels.count()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.len() / self.snapshot_len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.t0 + self.dt_sample * T::lit(i as f64)
    }

    pub fn snapshot(&self, i: usize) -> &[T] {
        let len = self.snapshot_len();
        &self.data[i * len..(i + 1) * len]
    }

    pub fn snapshot_mut(&mut self, i: usize) -> &mut [T] {
        let len = self.snapshot_len();
        &mut self.data[i * len..(i + 1) * len]
    }

    pub fn push(&mut self, snapshot: &[T]) -> Result<()> {
        if snapshot.len() != self.snapshot_len() {
            return Err(Error::shape(format!(
                "snapshot of length {} pushed onto trajectory expecting {}",
                snapshot.len(),
                self.snapshot_len()
            )));
        }
        check_finite(snapshot)?;
        self.data.extend_from_slice(snapshot);
        Ok(())
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    /// Values of one channel of snapshot `i`.
    pub fn channel(&self, i: usize, c: usize) -> Vec<T> {
        let k = self.channels.count();
        self.snapshot(i)
            .iter()
            .skip(c)
            .step_by(k)
            .copied()
            .collect()
    }

    pub fn scalar_field(&self, i: usize) -> Result<ScalarField1D<T>> {
        match self.channels {
            Channels::Real => ScalarField1D::new(self.grid, self.snapshot(i).to_vec()),
            Channels::Complex => Err(Error::invalid("trajectory is complex")),
        }
    }

    pub fn complex_field(&self, i: usize) -> Result<ComplexField1D<T>> {
        match self.channels {
            Channels::Complex => ComplexField1D::from_interleaved(self.grid, self.snapshot(i)),
            Channels::Real => Err(Error::invalid("trajectory is real")),
        }
    }

    /// Keeps snapshots `start..end`, re-basing `t0`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        let len = self.snapshot_len();
        Trajectory {
            grid: self.grid,
            channels: self.channels,
            t0: self.time(start),
            dt_sample: self.dt_sample,
            data: self.data[start * len..end * len].to_vec(),
        }
    }

    /// Keeps every `every`-th snapshot.
    pub fn subsample(&self, every: usize) -> Self {
        let every = every.max(1);
        let mut data = Vec::with_capacity(self.data.len() / every + self.snapshot_len());
        for i in (0..self.n_snapshots()).step_by(every) {
            data.extend_from_slice(self.snapshot(i));
        }
        Trajectory {
            grid: self.grid,
            channels: self.channels,
            t0: self.t0,
            dt_sample: self.dt_sample * T::lit(every as f64),
            data,
        }
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.grid.n == other.grid.n
            && self.channels == other.channels
            && self.n_snapshots() == other.n_snapshots()
    }

    /// The same trajectory in another precision.
    pub fn cast<U: Real>(&self) -> Trajectory<U> {
        Trajectory {
            grid: self.grid.cast(),
            channels: self.channels,
            t0: U::lit(self.t0.as_f64()),
            dt_sample: U::lit(self.dt_sample.as_f64()),
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Particle positions on a periodic interval `[0, domain_length)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble<T> {
    pub positions: Vec<T>,
    /// Particles per unit mass.
    pub resolution: T,
    pub domain_length: T,
}

impl<T: Real> ParticleEnsemble<T> {
    pub fn new(positions: Vec<T>, resolution: T, domain_length: T) -> Result<Self> {
        if !(resolution > T::zero()) {
            return Err(Error::invalid("resolution factor must be positive"));
        }
        if !(domain_length > T::zero()) {
            return Err(Error::invalid("domain length must be positive"));
        }
        if let Some(index) = positions
            .iter()
            .position(|&z| !(z >= T::zero() && z < domain_length))
        {
            return Err(Error::invalid(format!(
                "particle {index} at {} lies outside [0, {})",
                positions[index], domain_length
            )));
        }
        Ok(ParticleEnsemble {
            positions,
            resolution,
            domain_length,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Total mass, `count / R`.
    pub fn mass(&self) -> T {
        T::lit(self.positions.len() as f64) / self.resolution
    }
}
