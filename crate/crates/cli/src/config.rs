//! Run configuration: defaults, overridden by a JSON file, overridden by flags.
use std::path::{Path, PathBuf};

use coarsen::datastore::Provenance;
use coarsen::pde_net::TrainConfig;
use coarsen::pipeline::burgers::{LearnedBurgersConfig, MassChartConfig};
use coarsen::pipeline::cgle::EmergentCgleConfig;
use coarsen::pipeline::ics::{RANDOM_DENSITY_FLOOR, RANDOM_DENSITY_OFFSET};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleSection {
    pub nu: f64,
    pub dt: f64,
    pub n_boxes: usize,
    pub resolution: f64,
    pub t_final: f64,
    pub sample_every: usize,
    pub n_traj: usize,
    /// Box moments recorded per snapshot (0 disables).
    pub moments: usize,
}

impl Default for ParticleSection {
    fn default() -> Self {
        ParticleSection {
            nu: 0.05,
            dt: 1e-3,
            n_boxes: 128,
            resolution: 4e4,
            t_final: 2.0,
            sample_every: 10,
            n_traj: 1,
            moments: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersSection {
    pub nu: f64,
    pub n_cells: usize,
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
    /// Average the output onto this many cells (0 keeps the solver grid).
    pub average_to: usize,
}

impl Default for BurgersSection {
    fn default() -> Self {
        BurgersSection {
            nu: 0.05,
            n_cells: 1024,
            dt: 1e-4,
            t_final: 2.0,
            sample_every: 100,
            average_to: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CgleSection {
    pub c1: f64,
    pub c2: f64,
    pub length: f64,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
}

impl Default for CgleSection {
    fn default() -> Self {
        CgleSection {
            c1: 1.0,
            c2: 2.0,
            length: 200.0,
            n: 128,
            dt: 0.01,
            t_final: 100.0,
            sample_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeseriesSection {
    pub subsample_every: usize,
    pub scramble_seed: u64,
    pub n_grid: usize,
}

impl Default for TimeseriesSection {
    fn default() -> Self {
        TimeseriesSection {
            subsample_every: 10,
            scramble_seed: 7,
            n_grid: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RolloutSection {
    pub dt: f64,
    pub duration: f64,
    pub record_every: usize,
    pub corridor: usize,
}

impl Default for RolloutSection {
    fn default() -> Self {
        RolloutSection {
            dt: 1e-3,
            duration: 2.0,
            record_every: 10,
            corridor: 4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub particles: ParticleSection,
    pub burgers: BurgersSection,
    pub cgle: CgleSection,
    pub embed: MassChartConfig,
    pub timeseries: TimeseriesSection,
    /// Absent means the defaults of the chosen preset.
    pub train: Option<TrainConfig>,
    pub rollout: RolloutSection,
    pub learned_burgers: LearnedBurgersConfig,
    pub emergent: EmergentCgleConfig,
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        if cfg.output_dir.as_os_str().is_empty() {
            cfg.output_dir = PathBuf::from("out");
        }
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn provenance(&self, command: &str) -> Provenance {
        let mut p = Provenance::new();
        p.insert("command".into(), json!(command));
        p.insert("config_sha256".into(), json!(self.hash()));
        p.insert("seed".into(), json!(self.seed));
        p.insert("coarsen_version".into(), json!(env!("CARGO_PKG_VERSION")));
        p.insert("random_density_offset".into(), json!(RANDOM_DENSITY_OFFSET));
        p.insert("random_density_floor".into(), json!(RANDOM_DENSITY_FLOOR));
        p
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

/// Assigns `$value` to `$target` when the flag was given.
macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}
pub(crate) use set;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"seed": 4, "particles": {"nu": 0.1}}"#).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.particles.nu, 0.1);
        assert_eq!(cfg.particles.resolution, 4e4);
        assert_eq!(cfg.cgle, CgleSection::default());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
