use serde::{Deserialize, Serialize};

use super::mlp::Layer;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates shaped like the parameters.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Layer<T>>,
    v: Vec<Layer<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &[Layer<T>], config: AdamConfig) -> Self {
        let zeros: Vec<Layer<T>> = params
            .iter()
            .map(|l| Layer {
                weight: ndarray::Array2::zeros(l.weight.raw_dim()),
                bias: ndarray::Array1::zeros(l.bias.len()),
            })
            .collect();
        AdamState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn update(&mut self, params: &mut [Layer<T>], grads: &[Layer<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::shape(
                "Adam state, parameters and gradients differ in layer count",
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.weight.dim() != g.weight.dim()
                || p.weight.dim() != m.weight.dim()
                || p.bias.len() != g.bias.len()
            {
                return Err(Error::shape(
                    "Adam state, parameters and gradients differ in layer shape",
                ));
            }
        }
        self.step += 1;
        let c = self.config;
        let t = self.step as i32;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::one() - b1, T::one() - b2);
        // lr·m̂/(√v̂+ε) with the corrections folded into two scalars
        let step = T::lit(c.lr / (1.0 - c.beta1.powi(t)));
        let vhat = T::lit(1.0 / (1.0 - c.beta2.powi(t)));
        let eps = T::lit(c.eps);
        let kernel = |p: &mut T, g: T, m: &mut T, v: &mut T| {
            *m = b1 * *m + one_b1 * g;
            *v = b2 * *v + one_b2 * g * g;
            *p -= step * *m / ((*v * vhat).sqrt() + eps);
        };
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            ndarray::Zip::from(&mut p.weight)
                .and(&g.weight)
                .and(&mut m.weight)
                .and(&mut v.weight)
                .for_each(|p, &g, m, v| kernel(p, g, m, v));
            ndarray::Zip::from(&mut p.bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| kernel(p, g, m, v));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};

    fn single(w: Array2<f64>, b: Array1<f64>) -> Vec<Layer<f64>> {
        vec![Layer { weight: w, bias: b }]
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = single(array![[1.0, -2.0]], array![0.5, 0.25]);
        let before = p.clone();
        let g = single(Array2::zeros((1, 2)), Array1::zeros(2));
        let mut s = AdamState::new(&p, AdamConfig::default());
        for _ in 0..5 {
            s.update(&mut p, &g).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = single(array![[0.0, 0.0]], array![0.0, 0.0]);
        let g = single(array![[3.0, -1e-3]], array![0.2, -7.0]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        s.update(&mut p, &g).unwrap();
        for (v, gv) in p[0]
            .weight
            .iter()
            .chain(&p[0].bias)
            .zip(g[0].weight.iter().chain(&g[0].bias))
        {
            assert!((v + 1e-3 * gv.signum()).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = single(array![[0.0, 0.0]], array![0.0, 0.0]);
        let g = single(array![[0.0]], array![0.0]);
        let mut s = AdamState::new(&p, AdamConfig::default());
        assert!(s.update(&mut p, &g).is_err());
    }
}
