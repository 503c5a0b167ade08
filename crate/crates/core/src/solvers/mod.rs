//! Ground-truth integrators: finite-volume viscous Burgers and
//! cosine-pseudo-spectral complex Ginzburg–Landau with exponential time
//! differencing.

mod burgers;
mod cgle;
mod cosine;
mod etdrk;

pub use burgers::{burgers_rhs, cfl_bound, simulate_burgers_fv, BurgersConfig};
pub use cgle::{simulate_cgle, CgleConfig, CgleSolver};
pub use cosine::CosineTransform;
pub use etdrk::{etdrk4_step, etdrk_coefficients, phi_functions, EtdCoefficients, CONTOUR_POINTS};
