use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
}

impl Activation {
    pub const ALL: [Activation; 5] = [
        Activation::Linear,
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Softmax,
    ];

    pub(crate) fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Relu => z.mapv_inplace(|v| v.max(0.0)),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Softmax => {
                for mut row in z.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }

    /// Maps the gradient w.r.t. the activation output `y` to the gradient
    /// w.r.t. the pre-activation, in place.
    pub(crate) fn backprop(self, y: &Array2<f64>, grad: &mut Array2<f64>) {
        match self {
            Activation::Linear => {}
            Activation::Relu => Zip::from(grad).and(y).for_each(|g, &y| {
                if y <= 0.0 {
                    *g = 0.0;
                }
            }),
            Activation::Tanh => Zip::from(grad).and(y).for_each(|g, &y| *g *= 1.0 - y * y),
            Activation::Sigmoid => Zip::from(grad).and(y).for_each(|g, &y| *g *= y * (1.0 - y)),
            Activation::Softmax => {
                let dot = (&*grad * y).sum_axis(Axis(1));
                for ((mut g, s), d) in grad.rows_mut().into_iter().zip(y.rows()).zip(dot.iter()) {
                    Zip::from(&mut g)
                        .and(&s)
                        .for_each(|g, &s| *g = s * (*g - d));
                }
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Softmax => "softmax",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parameter(format!("unknown activation '{s}'")))
    }
}

/// Layer types a template may name. Only `Dense` and `Dropout` are trainable
/// here; the others parse but are rejected when a network is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Convolutional,
    Gru,
    Lstm,
    Dropout,
}

impl LayerKind {
    pub fn is_implemented(self) -> bool {
        matches!(self, LayerKind::Dense | LayerKind::Dropout)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LayerKind::Dense => "Dense",
            LayerKind::Convolutional => "Convolutional",
            LayerKind::Gru => "GRU",
            LayerKind::Lstm => "LSTM",
            LayerKind::Dropout => "Dropout",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub kind: LayerKind,
    #[serde(default = "linear")]
    pub activation: Activation,
    /// Output units for Dense layers.
    #[serde(default)]
    pub units: usize,
    /// Drop probability for Dropout layers.
    #[serde(default)]
    pub rate: f64,
}

fn linear() -> Activation {
    Activation::Linear
}

impl LayerConfig {
    pub fn dense(units: usize, activation: Activation) -> Self {
        Self {
            kind: LayerKind::Dense,
            activation,
            units,
            rate: 0.0,
        }
    }

    pub fn dropout(rate: f64) -> Self {
        Self {
            kind: LayerKind::Dropout,
            activation: Activation::Linear,
            units: 0,
            rate,
        }
    }
}

/// Weight initialisation for Dense layers; biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initializer {
    /// `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    #[default]
    GlorotUniform,
    /// `U(-a, a)` with `a = sqrt(6 / fan_in)`.
    HeUniform,
}

impl Initializer {
    pub(crate) fn limit(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            Initializer::GlorotUniform => (6.0 / (fan_in + fan_out) as f64).sqrt(),
            Initializer::HeUniform => (6.0 / fan_in as f64).sqrt(),
        }
    }
}
