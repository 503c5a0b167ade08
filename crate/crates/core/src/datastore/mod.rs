//! Field and trajectory containers plus the on-disk dataset format.
//!
//! A dataset is a pair of files sharing a stem: `<stem>.json` holds the
//! [`DatasetManifest`], `<stem>.bin` the payload as raw little-endian `f64`
//! values in row-major order. Complex values are interleaved `(re, im)` per
//! grid point so a complex trajectory stays one contiguous block.

mod field;
mod format;

pub use field::{
    Boundary, Channels, ComplexField1D, Grid, ParticleEnsemble, ScalarField1D, Trajectory,
};
pub use format::{
    load_ensemble, load_matrix, load_trajectory, read_dataset, save_ensemble, save_matrix,
    save_trajectory, write_dataset, DatasetKind, DatasetManifest, Provenance,
};
