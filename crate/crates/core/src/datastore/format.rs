use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::field::{Boundary, Channels, Grid, ParticleEnsemble, Trajectory};
use crate::error::{Error, Result};
use crate::real::Real;

/// Free-form metadata recorded with every dataset (seed, config hash, tool
/// versions, choices such as initial-condition offsets).
pub type Provenance = BTreeMap<String, serde_json::Value>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    ScalarTraj,
    ComplexTraj,
    Ensemble,
    Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub shape: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_sample: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Boundary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl DatasetManifest {
    pub fn new(kind: DatasetKind, shape: Vec<usize>) -> Self {
        DatasetManifest {
            kind,
            shape,
            dt_sample: None,
            t0: None,
            domain_length: None,
            origin: None,
            spacing: None,
            boundary: None,
            resolution: None,
            seed: None,
            provenance: Provenance::new(),
        }
    }

    /// Number of `f64` values in the payload.
    pub fn float_count(&self) -> usize {
        let points: usize = self.shape.iter().product();
        match self.kind {
            DatasetKind::ComplexTraj => 2 * points,
            _ => points,
        }
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<stem>.json` and `<stem>.bin`. The payload is validated before
/// anything touches the filesystem.
pub fn write_dataset<T: Real>(
    stem: impl AsRef<Path>,
    manifest: &DatasetManifest,
    payload: &[T],
) -> Result<()> {
    let stem = stem.as_ref();
    if payload.len() != manifest.float_count() {
        return Err(Error::shape(format!(
            "payload has {} values but manifest shape {:?} ({:?}) needs {}",
            payload.len(),
            manifest.shape,
            manifest.kind,
            manifest.float_count()
        )));
    }
    if let Some(index) = payload.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }

    let json_path = with_ext(stem, "json");
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::Json {
        path: json_path.clone(),
        source: e,
    })?;
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;

    let bin_path = with_ext(stem, "bin");
    let file = fs::File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let mut out = BufWriter::new(file);
    for v in payload {
        out.write_all(&v.as_f64().to_le_bytes())
            .map_err(|e| Error::io(&bin_path, e))?;
    }
    out.flush().map_err(|e| Error::io(&bin_path, e))?;
    Ok(())
}

pub fn read_dataset(stem: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<f64>)> {
    let stem = stem.as_ref();
    let json_path = with_ext(stem, "json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: json_path.clone(),
        source: e,
    })?;

    let bin_path = with_ext(stem, "bin");
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::shape(format!(
            "{} is {} bytes, not a whole number of f64",
            bin_path.display(),
            bytes.len()
        )));
    }
    let count = bytes.len() / 8;
    if manifest.kind == DatasetKind::ComplexTraj && count % 2 != 0 {
        return Err(Error::shape(format!(
            "complex payload has an odd number of values ({count})"
        )));
    }
    if count != manifest.float_count() {
        return Err(Error::shape(format!(
            "payload has {count} values but manifest shape {:?} needs {}",
            manifest.shape,
            manifest.float_count()
        )));
    }
    let payload: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if let Some(index) = payload.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok((manifest, payload))
}

fn convert<T: Real>(values: Vec<f64>) -> Vec<T> {
    values.into_iter().map(T::lit).collect()
}

pub fn save_trajectory<T: Real>(
    stem: impl AsRef<Path>,
    traj: &Trajectory<T>,
    provenance: &Provenance,
) -> Result<()> {
    let kind = match traj.channels {
        Channels::Real => DatasetKind::ScalarTraj,
        Channels::Complex => DatasetKind::ComplexTraj,
    };
    let mut m = DatasetManifest::new(kind, vec![traj.n_snapshots(), traj.grid.n]);
    m.dt_sample = Some(traj.dt_sample.as_f64());
    m.t0 = Some(traj.t0.as_f64());
    m.domain_length = Some(traj.grid.domain_length.as_f64());
    m.origin = Some(traj.grid.origin.as_f64());
    m.spacing = Some(traj.grid.spacing.as_f64());
    m.boundary = Some(traj.grid.boundary);
    m.seed = provenance.get("seed").and_then(|v| v.as_u64());
    m.provenance = provenance.clone();
    write_dataset(stem, &m, traj.data())
}

pub fn load_trajectory<T: Real>(
    stem: impl AsRef<Path>,
) -> Result<(Trajectory<T>, DatasetManifest)> {
    let (m, payload) = read_dataset(stem)?;
    let channels = match m.kind {
        DatasetKind::ScalarTraj => Channels::Real,
        DatasetKind::ComplexTraj => Channels::Complex,
        other => {
            return Err(Error::invalid(format!(
                "dataset holds {other:?}, not a trajectory"
            )))
        }
    };
    let &[_, n] = m.shape.as_slice() else {
        return Err(Error::shape(format!(
            "trajectory shape must be [snapshots, points], got {:?}",
            m.shape
        )));
    };
    let missing = |f: &str| Error::invalid(format!("trajectory manifest lacks {f}"));
    let grid = Grid {
        n,
        origin: T::lit(m.origin.ok_or_else(|| missing("origin"))?),
        spacing: T::lit(m.spacing.ok_or_else(|| missing("spacing"))?),
        domain_length: T::lit(m.domain_length.ok_or_else(|| missing("domain_length"))?),
        boundary: m.boundary.ok_or_else(|| missing("boundary"))?,
    };
    let traj = Trajectory::from_data(
        grid,
        channels,
        T::lit(m.t0.unwrap_or(0.0)),
        T::lit(m.dt_sample.ok_or_else(|| missing("dt_sample"))?),
        convert(payload),
    )?;
    Ok((traj, m))
}

pub fn save_matrix<T: Real>(
    stem: impl AsRef<Path>,
    matrix: &Array2<T>,
    provenance: &Provenance,
) -> Result<()> {
    let mut m = DatasetManifest::new(DatasetKind::Matrix, vec![matrix.nrows(), matrix.ncols()]);
    m.seed = provenance.get("seed").and_then(|v| v.as_u64());
    m.provenance = provenance.clone();
    let data: Vec<T> = matrix.iter().copied().collect();
    write_dataset(stem, &m, &data)
}

pub fn load_matrix<T: Real>(stem: impl AsRef<Path>) -> Result<(Array2<T>, DatasetManifest)> {
    let (m, payload) = read_dataset(stem)?;
    if m.kind != DatasetKind::Matrix {
        return Err(Error::invalid(format!(
            "dataset holds {:?}, not a matrix",
            m.kind
        )));
    }
    let (rows, cols) = match m.shape.as_slice() {
        &[r, c] => (r, c),
        &[r] => (r, 1),
        s => {
            return Err(Error::shape(format!(
                "matrix shape must be 1-D or 2-D, got {s:?}"
            )))
        }
    };
    let a = Array2::from_shape_vec((rows, cols), convert(payload))
        .map_err(|e| Error::shape(e.to_string()))?;
    Ok((a, m))
}

pub fn save_ensemble<T: Real>(
    stem: impl AsRef<Path>,
    ens: &ParticleEnsemble<T>,
    provenance: &Provenance,
) -> Result<()> {
    let mut m = DatasetManifest::new(DatasetKind::Ensemble, vec![ens.len()]);
    m.domain_length = Some(ens.domain_length.as_f64());
    m.resolution = Some(ens.resolution.as_f64());
    m.boundary = Some(Boundary::Periodic);
    m.seed = provenance.get("seed").and_then(|v| v.as_u64());
    m.provenance = provenance.clone();
    write_dataset(stem, &m, &ens.positions)
}

pub fn load_ensemble<T: Real>(
    stem: impl AsRef<Path>,
) -> Result<(ParticleEnsemble<T>, DatasetManifest)> {
    let (m, payload) = read_dataset(stem)?;
    if m.kind != DatasetKind::Ensemble {
        return Err(Error::invalid(format!(
            "dataset holds {:?}, not an ensemble",
            m.kind
        )));
    }
    let r = m
        .resolution
        .ok_or_else(|| Error::invalid("ensemble manifest lacks resolution"))?;
    let l = m
        .domain_length
        .ok_or_else(|| Error::invalid("ensemble manifest lacks domain_length"))?;
    let ens = ParticleEnsemble::new(convert(payload), T::lit(r), T::lit(l))?;
    Ok((ens, m))
}
