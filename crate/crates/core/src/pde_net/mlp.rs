use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::{load_matrix, save_matrix, Provenance};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => x.max(T::zero()),
            Activation::Tanh => {
                // several times cheaper than libm tanh; saturates correctly when exp overflows
                let two = T::one() + T::one();
                T::one() - two / ((x + x).exp() + T::one())
            }
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation output `a`.
    #[inline]
    fn slope<T: Real>(self, a: T) -> T {
        match self {
            Activation::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - a * a,
            Activation::Linear => T::one(),
        }
    }
}

/// Layer widths from input to output, and one activation per hidden layer.
/// The output layer is always linear.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Architecture {
    /// Three hidden layers of 32; ReLU after the first two.
    pub fn burgers() -> Self {
        Architecture {
            layer_sizes: vec![3, 32, 32, 32, 1],
            activations: vec![Activation::Relu, Activation::Relu, Activation::Linear],
        }
    }

    /// Four tanh hidden layers of 96 on four derivative orders of a complex field.
    pub fn cgle() -> Self {
        Architecture {
            layer_sizes: vec![8, 96, 96, 96, 96, 2],
            activations: vec![Activation::Tanh; 4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(Error::invalid(
                "an architecture needs at least two nonzero layer sizes",
            ));
        }
        if self.activations.len() != self.layer_sizes.len() - 2 {
            return Err(Error::invalid(format!(
                "{} hidden layers but {} activations",
                self.layer_sizes.len() - 2,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.layer_sizes.last().expect("validated architecture")
    }

    fn activation(&self, layer: usize) -> Activation {
        self.activations
            .get(layer)
            .copied()
            .unwrap_or(Activation::Linear)
    }
}

/// Affine map `x ↦ x W + b` with `W` stored input-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Layer<T> {
    fn zeros_like(&self) -> Self {
        Layer {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }
}

/// Per-feature affine standardization `(x − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(n: usize) -> Self {
        Normalization {
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    /// Column means and population standard deviations; constant columns get scale 1.
    pub fn fit<T: Real>(data: ArrayView2<T>) -> Self {
        let rows = data.nrows().max(1) as f64;
        let mut mean = vec![0.0; data.ncols()];
        let mut scale = vec![0.0; data.ncols()];
        for (c, col) in data.axis_iter(Axis(1)).enumerate() {
            let m = col.iter().map(|v| v.as_f64()).sum::<f64>() / rows;
            let var = col.iter().map(|v| (v.as_f64() - m).powi(2)).sum::<f64>() / rows;
            mean[c] = m;
            scale[c] = if var.sqrt() > 1e-12 * (1.0 + m.abs()) {
                var.sqrt()
            } else {
                1.0
            };
        }
        Normalization { mean, scale }
    }

    pub fn forward<T: Real>(&self, data: ArrayView2<T>) -> Array2<T> {
        let mut out = data.to_owned();
        for (c, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (T::lit(self.mean[c]), T::lit(1.0 / self.scale[c]));
            col.mapv_inplace(|v| (v - m) * s);
        }
        out
    }

    pub fn inverse<T: Real>(&self, data: &mut Array2<T>) {
        for (c, mut col) in data.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (T::lit(self.mean[c]), T::lit(self.scale[c]));
            col.mapv_inplace(|v| v * s + m);
        }
    }
}

/// Fully connected network with standardization of inputs and outputs
/// folded in.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub arch: Architecture,
    pub layers: Vec<Layer<T>>,
    pub input: Normalization,
    pub output: Normalization,
}

/// Rows per independent gradient chunk; partial sums are added in chunk
/// order so results do not depend on the thread count.
const CHUNK_ROWS: usize = 512;

impl<T: Real> Mlp<T> {
    /// Weights and biases uniform in `±1/√fan_in`, identity normalization.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_sizes
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                let mut draw = || T::lit(rng.random_range(-bound..bound));
                let weight = Array2::from_shape_fn((w[0], w[1]), |_| draw());
                let bias = Array1::from_shape_fn(w[1], |_| draw());
                Layer { weight, bias }
            })
            .collect();
        let (i, o) = (arch.n_inputs(), arch.n_outputs());
        Ok(Mlp {
            arch,
            layers,
            input: Normalization::identity(i),
            output: Normalization::identity(o),
        })
    }

    pub fn from_layers(arch: Architecture, layers: Vec<Layer<T>>) -> Result<Self> {
        arch.validate()?;
        if layers.len() != arch.layer_sizes.len() - 1 {
            return Err(Error::shape(format!(
                "{} layers for a {}-layer architecture",
                layers.len(),
                arch.layer_sizes.len() - 1
            )));
        }
        for (l, (layer, w)) in layers.iter().zip(arch.layer_sizes.windows(2)).enumerate() {
            if layer.weight.dim() != (w[0], w[1]) || layer.bias.len() != w[1] {
                return Err(Error::shape(format!(
                    "layer {l} does not match {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let (i, o) = (arch.n_inputs(), arch.n_outputs());
        Ok(Mlp {
            arch,
            layers,
            input: Normalization::identity(i),
            output: Normalization::identity(o),
        })
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Sets input and output standardization from a data set.
    pub fn fit_normalization(&mut self, features: ArrayView2<T>, targets: ArrayView2<T>) {
        self.input = Normalization::fit(features);
        self.output = Normalization::fit(targets);
    }

    fn check_inputs(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.arch.n_inputs() {
            return Err(Error::shape(format!(
                "{} features for a {}-input model",
                x.ncols(),
                self.arch.n_inputs()
            )));
        }
        Ok(())
    }

    /// Prediction in physical units.
    pub fn forward(&self, features: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_inputs(&features)?;
        let x = self.input.forward(features);
        let mut y = self.forward_standardized(x.view());
        self.output.inverse(&mut y);
        Ok(y)
    }

    /// Prediction on the standardized scale for standardized inputs.
    pub fn forward_standardized(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut a = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight);
            z += &layer.bias;
            let act = self.arch.activation(l);
            if act != Activation::Linear {
                z.mapv_inplace(|v| act.apply(v));
            }
            a = z;
        }
        a
    }

    fn chunk_gradient(&self, x: ArrayView2<T>, y: ArrayView2<T>, grads: &mut [Layer<T>]) -> T {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.weight);
            z += &layer.bias;
            let act = self.arch.activation(l);
            if act != Activation::Linear {
                z.mapv_inplace(|v| act.apply(v));
            }
            acts.push(z);
        }
        let mut delta = acts.pop().expect("output layer") - y;
        let loss = delta.iter().map(|&d| d * d).sum::<T>() * T::lit(0.5);
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            grads[l].weight += &input.t().dot(&delta);
            grads[l].bias += &delta.sum_axis(Axis(0));
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weight.t());
                let act = self.arch.activation(l - 1);
                if act != Activation::Linear {
                    ndarray::Zip::from(&mut back)
                        .and(input)
                        .for_each(|b, &a| *b *= act.slope(a));
                }
                delta = back;
            }
        }
        loss
    }

    /// Loss `½·mean_rows ‖pred − y‖²` and its parameter gradients, for
    /// inputs and targets already on the standardized scale.
    pub fn loss_and_gradient_standardized(
        &self,
        x: ArrayView2<T>,
        y: ArrayView2<T>,
    ) -> (T, Vec<Layer<T>>) {
        let rows = x.nrows();
        let zero: Vec<Layer<T>> = self.layers.iter().map(Layer::zeros_like).collect();
        let parts: Vec<(T, Vec<Layer<T>>)> = if rows <= CHUNK_ROWS {
            let mut g = zero.clone();
            let loss = self.chunk_gradient(x, y, &mut g);
            vec![(loss, g)]
        } else {
            let starts: Vec<usize> = (0..rows).step_by(CHUNK_ROWS).collect();
            starts
                .into_par_iter()
                .map(|s| {
                    let e = (s + CHUNK_ROWS).min(rows);
                    let mut g = zero.clone();
                    let loss = self.chunk_gradient(
                        x.slice(ndarray::s![s..e, ..]),
                        y.slice(ndarray::s![s..e, ..]),
                        &mut g,
                    );
                    (loss, g)
                })
                .collect()
        };
        let inv = T::one() / T::lit(rows.max(1) as f64);
        let mut iter = parts.into_iter();
        let (mut loss, mut total) = iter.next().expect("at least one chunk");
        for (l, g) in iter {
            loss += l;
            for (t, p) in total.iter_mut().zip(&g) {
                t.weight += &p.weight;
                t.bias += &p.bias;
            }
        }
        for t in &mut total {
            t.weight.mapv_inplace(|v| v * inv);
            t.bias.mapv_inplace(|v| v * inv);
        }
        (loss * inv, total)
    }

    /// Loss and gradients for raw features and targets, standardized with
    /// the model's stored constants.
    pub fn loss_and_gradient(
        &self,
        features: ArrayView2<T>,
        targets: ArrayView2<T>,
    ) -> Result<(T, Vec<Layer<T>>)> {
        self.check_inputs(&features)?;
        if targets.ncols() != self.arch.n_outputs() || targets.nrows() != features.nrows() {
            return Err(Error::shape(
                "targets do not match features and model outputs",
            ));
        }
        if features.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let x = self.input.forward(features);
        let y = self.output.forward(targets);
        Ok(self.loss_and_gradient_standardized(x.view(), y.view()))
    }

    /// Writes `<stem>.json` (architecture and normalization) and one
    /// matrix dataset per weight and bias.
    pub fn save(&self, stem: impl AsRef<Path>, provenance: &Provenance) -> Result<()> {
        let stem = stem.as_ref();
        let meta = ModelFile {
            arch: self.arch.clone(),
            input: self.input.clone(),
            output: self.output.clone(),
        };
        let path = stem.with_extension("json");
        let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        for (l, layer) in self.layers.iter().enumerate() {
            save_matrix(layer_stem(stem, l, "weight"), &layer.weight, provenance)?;
            let bias = layer.bias.clone().insert_axis(Axis(0));
            save_matrix(layer_stem(stem, l, "bias"), &bias, provenance)?;
        }
        Ok(())
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let path = stem.with_extension("json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: ModelFile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.clone(),
            source: e,
        })?;
        let mut layers = Vec::new();
        for l in 0..meta.arch.layer_sizes.len().saturating_sub(1) {
            let (weight, _) = load_matrix::<T>(layer_stem(stem, l, "weight"))?;
            let (bias, _) = load_matrix::<T>(layer_stem(stem, l, "bias"))?;
            layers.push(Layer {
                weight,
                bias: bias.row(0).to_owned(),
            });
        }
        let mut model = Mlp::from_layers(meta.arch, layers)?;
        model.input = meta.input;
        model.output = meta.output;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    arch: Architecture,
    input: Normalization,
    output: Normalization,
}

fn layer_stem(stem: &Path, l: usize, part: &str) -> std::path::PathBuf {
    let name = stem
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.with_file_name(format!("{name}.layer{l}.{part}"))
}

/// Half mean squared error of `pred` against `target`, summed over outputs.
pub fn half_mse<T: Real>(pred: ArrayView2<T>, target: ArrayView2<T>) -> T {
    let rows = T::lit(pred.nrows().max(1) as f64);
    pred.iter()
        .zip(target.iter())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum::<T>()
        * T::lit(0.5)
        / rows
}

/// Flattens layer parameters in a fixed order (weights row-major, then bias).
pub fn flatten<T: Real>(layers: &[Layer<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for l in layers {
        out.extend(l.weight.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}
