//! Learning a pointwise right-hand side `u_t = f(u, u_z, u_zz, …)` from
//! trajectories, and integrating it forward.
mod adam;
mod features;
mod mlp;
mod rollout;
mod stencil;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use features::{build_training_pairs, DerivativeOperator, FeatureSpec, TrainingSet};
pub use mlp::{flatten, half_mse, Activation, Architecture, Layer, Mlp, Normalization};
pub use rollout::{rel_mse, rollout, FnRhs, RhsModel, RolloutBoundary, RolloutConfig};
pub use stencil::{fornberg_weights, offset_weights};
pub use train::{loss_is_settling, train_pde_rhs, train_with, LossHistory, TrainConfig};
