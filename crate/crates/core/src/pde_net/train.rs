use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::features::TrainingSet;
use super::mlp::{Architecture, Mlp};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 128,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Defaults for the ReLU Burgers network.
    pub fn burgers() -> Self {
        TrainConfig {
            epochs: 500,
            ..TrainConfig::default()
        }
    }

    /// Defaults for the tanh CGLE network.
    pub fn cgle() -> Self {
        TrainConfig::default()
    }
}

/// Mean mini-batch loss per epoch, on the standardized scale.
pub type LossHistory = Vec<f64>;

/// Shuffled mini-batch Adam on `½·mean‖f(x) − y‖²` after standardizing
/// features and targets with constants stored in the returned model.
pub fn train_pde_rhs<T: Real>(
    data: &TrainingSet<T>,
    arch: Architecture,
    cfg: &TrainConfig,
) -> Result<(Mlp<T>, LossHistory)> {
    train_with(data, arch, cfg, |_, _| {})
}

/// As [`train_pde_rhs`], calling `on_epoch(epoch, mean_loss)` after every epoch.
pub fn train_with<T: Real>(
    data: &TrainingSet<T>,
    arch: Architecture,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(Mlp<T>, LossHistory)> {
    if data.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut model = Mlp::init(arch, cfg.seed)?;
    if data.features.ncols() != model.arch.n_inputs()
        || data.targets.ncols() != model.arch.n_outputs()
    {
        return Err(Error::shape(format!(
            "data has {} features / {} targets, model expects {} / {}",
            data.features.ncols(),
            data.targets.ncols(),
            model.arch.n_inputs(),
            model.arch.n_outputs()
        )));
    }
    model.fit_normalization(data.features.view(), data.targets.view());
    let x = model.input.forward(data.features.view());
    let y = model.output.forward(data.targets.view());

    let mut adam = AdamState::new(&model.layers, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x05ee_d0fb_a7c4);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut bx = Array2::zeros((0, 0));
    let mut by = Array2::zeros((0, 0));
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            gather(&x, idx, &mut bx);
            gather(&y, idx, &mut by);
            let (loss, grads) = model.loss_and_gradient_standardized(bx.view(), by.view());
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            adam.update(&mut model.layers, &grads)?;
            total += loss.as_f64();
            batches += 1;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.6e}");
        on_epoch(epoch, mean);
        history.push(mean);
    }
    Ok((model, history))
}

fn gather<T: Real>(src: &Array2<T>, rows: &[usize], dst: &mut Array2<T>) {
    if dst.dim() != (rows.len(), src.ncols()) {
        *dst = Array2::zeros((rows.len(), src.ncols()));
    }
    for (mut out, &r) in dst.axis_iter_mut(Axis(0)).zip(rows) {
        out.assign(&src.row(r));
    }
}

/// `true` when the window-`window` running mean of the loss never rises
/// by more than `tolerance` (relative) from one epoch to the next.
pub fn loss_is_settling(history: &[f64], window: usize, tolerance: f64) -> bool {
    let window = window.max(1);
    if history.len() <= window {
        return true;
    }
    let means: Vec<f64> = history
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect();
    means.windows(2).all(|p| p[1] <= p[0] * (1.0 + tolerance))
}
