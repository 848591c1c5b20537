use ndarray::{Array1, Array2, Dimension, Zip};
use serde::{Deserialize, Serialize};

use super::network::{DenseGrad, Gradients, Layer, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adam {
        #[serde(default = "default_lr")]
        learning_rate: f64,
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_eps")]
        epsilon: f64,
    },
    Sgd {
        learning_rate: f64,
    },
}

fn default_lr() -> f64 {
    1e-3
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::adam(default_lr())
    }
}

impl OptimizerConfig {
    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig::Adam {
            learning_rate,
            beta1: default_beta1(),
            beta2: default_beta2(),
            epsilon: default_eps(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Adam { learning_rate, .. }
            | OptimizerConfig::Sgd { learning_rate } => learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if let OptimizerConfig::Adam {
            beta1,
            beta2,
            epsilon,
            ..
        } = *self
        {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
                return Err(Error::Parameter(format!(
                    "Adam needs beta1, beta2 in [0, 1) and epsilon > 0 (got {beta1}, {beta2}, {epsilon})"
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self, net: &Network) -> OptimizerState {
        match *self {
            OptimizerConfig::Adam {
                learning_rate,
                beta1,
                beta2,
                epsilon,
            } => OptimizerState::Adam(AdamState::new(net, learning_rate, beta1, beta2, epsilon)),
            OptimizerConfig::Sgd { learning_rate } => {
                OptimizerState::Sgd(SgdState { learning_rate })
            }
        }
    }
}

/// Bias-corrected Adam with per-parameter first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    first: Vec<Option<DenseGrad>>,
    second: Vec<Option<DenseGrad>>,
}

fn zeros_like(net: &Network) -> Vec<Option<DenseGrad>> {
    net.layers()
        .iter()
        .map(|l| match l {
            Layer::Dense { weights, bias, .. } => Some(DenseGrad {
                weights: Array2::zeros(weights.dim()),
                bias: Array1::zeros(bias.len()),
            }),
            Layer::Dropout { .. } => None,
        })
        .collect()
}

fn check_grads(net: &Network, grads: &Gradients) -> Result<()> {
    if grads.layers.len() != net.layers().len() {
        return Err(Error::Evaluation(
            "gradients do not match network layers".into(),
        ));
    }
    if !grads.is_finite() {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    Ok(())
}

impl AdamState {
    pub fn new(net: &Network, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Self {
            step: 0,
            learning_rate,
            beta1,
            beta2,
            epsilon,
            first: zeros_like(net),
            second: zeros_like(net),
        }
    }

    pub fn with_defaults(net: &Network) -> Self {
        Self::new(
            net,
            default_lr(),
            default_beta1(),
            default_beta2(),
            default_eps(),
        )
    }

    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        check_grads(net, grads)?;
        if self.first.len() != net.layers().len() {
            return Err(Error::Evaluation(
                "optimizer state built for another network".into(),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let lr = self.learning_rate;
        let iter = net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()));
        for ((layer, g), (m, v)) in iter {
            if let (Layer::Dense { weights, bias, .. }, Some(g), Some(m), Some(v)) =
                (layer, g, m, v)
            {
                adam_update(
                    weights,
                    &g.weights,
                    &mut m.weights,
                    &mut v.weights,
                    lr,
                    b1,
                    b2,
                    eps,
                    c1,
                    c2,
                );
                adam_update(
                    bias,
                    &g.bias,
                    &mut m.bias,
                    &mut v.bias,
                    lr,
                    b1,
                    b2,
                    eps,
                    c1,
                    c2,
                );
            }
        }
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn adam_update<D: Dimension>(
    p: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    m: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    c1: f64,
    c2: f64,
) {
    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    });
}

/// Plain gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdState {
    pub learning_rate: f64,
}

impl SgdState {
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        check_grads(net, grads)?;
        let lr = self.learning_rate;
        for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
            if let (Layer::Dense { weights, bias, .. }, Some(g)) = (layer, g) {
                weights.scaled_add(-lr, &g.weights);
                bias.scaled_add(-lr, &g.bias);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerState {
    Adam(AdamState),
    Sgd(SgdState),
}

impl OptimizerState {
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        match self {
            OptimizerState::Adam(s) => s.step(net, grads),
            OptimizerState::Sgd(s) => s.step(net, grads),
        }
    }
}
