//! Local particle statistics, Diffusion Maps and function extension.
mod distance;
mod dmaps;
mod harmonics;
mod moments;

pub use distance::{cross_distances, pairwise_distances};
pub use dmaps::{
    diffusion_maps, diffusion_operator, kernel_epsilon, markov_matrix, nystrom_extend,
    regression_residual, select_independent_coords, DiffusionMapsConfig, Embedding, EpsilonRule,
    Extension,
};
pub use harmonics::GeometricHarmonics;
pub use moments::{box_moments, ensemble_moments};
