#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datastore;
pub mod emergent;
pub mod error;
pub mod manifold;
pub mod particles;
pub mod pde_net;
pub mod pipeline;
pub mod real;
pub mod solvers;
pub mod stats;

mod linalg;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision instances of the generic core.
pub mod double {
    pub type Grid = crate::datastore::Grid<f64>;
    pub type Trajectory = crate::datastore::Trajectory<f64>;
    pub type ScalarField1D = crate::datastore::ScalarField1D<f64>;
    pub type ComplexField1D = crate::datastore::ComplexField1D<f64>;
    pub type ParticleEnsemble = crate::datastore::ParticleEnsemble<f64>;
    pub type Embedding = crate::manifold::Embedding<f64>;
    pub type Mlp = crate::pde_net::Mlp<f64>;
    pub type TrainingSet = crate::pde_net::TrainingSet<f64>;
    pub type EmergentChart = crate::emergent::EmergentChart<f64>;
}

/// Single-precision instances of the generic core.
pub mod single {
    pub type Grid = crate::datastore::Grid<f32>;
    pub type Trajectory = crate::datastore::Trajectory<f32>;
    pub type ScalarField1D = crate::datastore::ScalarField1D<f32>;
    pub type ComplexField1D = crate::datastore::ComplexField1D<f32>;
    pub type ParticleEnsemble = crate::datastore::ParticleEnsemble<f32>;
    pub type Embedding = crate::manifold::Embedding<f32>;
    pub type Mlp = crate::pde_net::Mlp<f32>;
    pub type TrainingSet = crate::pde_net::TrainingSet<f32>;
    pub type EmergentChart = crate::emergent::EmergentChart<f32>;
}
