use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;

use super::layer::{Activation, Initializer, LayerConfig, LayerKind};
use super::loss::mse_loss;
use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `y = act(x · W + b)` with `W` shaped `(inputs, units)`.
    Dense {
        weights: Array2<f64>,
        bias: Array1<f64>,
        activation: Activation,
    },
    /// Inverted dropout: active only in training passes.
    Dropout { rate: f64 },
}

impl Layer {
    pub fn config(&self) -> LayerConfig {
        match self {
            Layer::Dense {
                bias, activation, ..
            } => LayerConfig::dense(bias.len(), *activation),
            Layer::Dropout { rate } => LayerConfig::dropout(*rate),
        }
    }
}

/// A dense forecaster mapping a flattened `(L, m)` window to a flattened
/// `(L̃, m)` forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dims: (usize, usize),
    output_dims: (usize, usize),
    layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Gradients aligned with [`Network::layers`]; `None` for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Option<DenseGrad>>,
}

impl Gradients {
    /// Flattened in [`Network::parameters`] order.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flatten()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()))
    }
}

struct Trace {
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Matrix>,
    masks: Vec<Option<Matrix>>,
}

pub fn init_network(
    configs: &[LayerConfig],
    input_dims: (usize, usize),
    output_dims: (usize, usize),
    seed: u64,
) -> Result<Network> {
    init_network_with(
        configs,
        input_dims,
        output_dims,
        Initializer::default(),
        seed,
    )
}

pub fn init_network_with(
    configs: &[LayerConfig],
    input_dims: (usize, usize),
    output_dims: (usize, usize),
    initializer: Initializer,
    seed: u64,
) -> Result<Network> {
    let n_in = input_dims.0 * input_dims.1;
    let n_out = output_dims.0 * output_dims.1;
    if n_in == 0 || n_out == 0 {
        return Err(Error::Construction {
            layer: 0,
            message: format!("input {input_dims:?} and output {output_dims:?} must be non-empty"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut width = n_in;
    let mut layers = Vec::with_capacity(configs.len());
    let mut last_dense = None;
    for (idx, cfg) in configs.iter().enumerate() {
        if !cfg.kind.is_implemented() {
            return Err(Error::UnimplementedLayer {
                layer: idx,
                kind: cfg.kind.to_string(),
            });
        }
        match cfg.kind {
            LayerKind::Dense => {
                if cfg.units == 0 {
                    return Err(Error::Construction {
                        layer: idx,
                        message: "Dense layer needs at least one unit".into(),
                    });
                }
                let limit = initializer.limit(width, cfg.units);
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
                let weights = Array2::from_shape_simple_fn((width, cfg.units), || rng.sample(dist));
                layers.push(Layer::Dense {
                    weights,
                    bias: Array1::zeros(cfg.units),
                    activation: cfg.activation,
                });
                width = cfg.units;
                last_dense = Some(idx);
            }
            LayerKind::Dropout => {
                if !(cfg.rate > 0.0 && cfg.rate < 1.0) {
                    return Err(Error::Construction {
                        layer: idx,
                        message: format!("dropout rate {} outside (0, 1)", cfg.rate),
                    });
                }
                layers.push(Layer::Dropout { rate: cfg.rate });
            }
            _ => unreachable!("unimplemented kinds rejected above"),
        }
    }
    let Some(last) = last_dense else {
        return Err(Error::Construction {
            layer: configs.len(),
            message: "network needs at least one Dense layer".into(),
        });
    };
    if width != n_out {
        return Err(Error::Construction {
            layer: last,
            message: format!(
                "emits {width} values but the forecast window {output_dims:?} needs {n_out}"
            ),
        });
    }
    Ok(Network {
        input_dims,
        output_dims,
        layers,
    })
}

impl Network {
    /// Assembles a network from already materialised layers, checking the chain.
    pub fn from_layers(
        input_dims: (usize, usize),
        output_dims: (usize, usize),
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let mut width = input_dims.0 * input_dims.1;
        for (idx, layer) in layers.iter().enumerate() {
            match layer {
                Layer::Dense { weights, bias, .. } => {
                    if weights.nrows() != width || weights.ncols() != bias.len() || bias.is_empty()
                    {
                        return Err(Error::Construction {
                            layer: idx,
                            message: format!(
                                "weights {:?} / bias {} do not chain from width {width}",
                                weights.dim(),
                                bias.len()
                            ),
                        });
                    }
                    width = bias.len();
                }
                Layer::Dropout { rate } => {
                    if !(*rate > 0.0 && *rate < 1.0) {
                        return Err(Error::Construction {
                            layer: idx,
                            message: format!("dropout rate {rate} outside (0, 1)"),
                        });
                    }
                }
            }
        }
        if width != output_dims.0 * output_dims.1 {
            return Err(Error::Construction {
                layer: layers.len().saturating_sub(1),
                message: format!("final width {width} does not match output {output_dims:?}"),
            });
        }
        Ok(Self {
            input_dims,
            output_dims,
            layers,
        })
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.input_dims
    }

    pub fn output_dims(&self) -> (usize, usize) {
        self.output_dims
    }

    pub fn input_width(&self) -> usize {
        self.input_dims.0 * self.input_dims.1
    }

    pub fn output_width(&self) -> usize {
        self.output_dims.0 * self.output_dims.1
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn configs(&self) -> Vec<LayerConfig> {
        self.layers.iter().map(Layer::config).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense { weights, bias, .. } => weights.len() + bias.len(),
                Layer::Dropout { .. } => 0,
            })
            .sum()
    }

    /// All parameters: per Dense layer, weights row-major then bias.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Dense { weights, bias, .. } => Some(weights.iter().chain(bias.iter())),
                Layer::Dropout { .. } => None,
            })
            .flatten()
            .copied()
            .collect()
    }

    /// Inverse of [`Network::parameters`].
    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Evaluation(format!(
                "{} parameters supplied for a network with {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            if let Layer::Dense { weights, bias, .. } = layer {
                weights
                    .iter_mut()
                    .chain(bias.iter_mut())
                    .for_each(|p| *p = it.next().unwrap());
            }
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Matrix) -> Result<()> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Evaluation(format!(
                "batch has {} features, network expects {} (L·m for {:?})",
                batch.ncols(),
                self.input_width(),
                self.input_dims
            )));
        }
        Ok(())
    }

    fn trace(&self, batch: &Matrix, mut rng: Option<&mut dyn RngCore>) -> Result<Trace> {
        self.check_batch(batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut masks = Vec::with_capacity(self.layers.len());
        activations.push(batch.clone());
        for layer in &self.layers {
            let x = activations.last().expect("input pushed");
            let (y, mask) = match layer {
                Layer::Dense {
                    weights,
                    bias,
                    activation,
                } => {
                    let mut z = x.dot(weights);
                    z += bias;
                    activation.apply(&mut z);
                    (z, None)
                }
                Layer::Dropout { rate } => match rng.as_deref_mut() {
                    Some(r) => {
                        let keep = 1.0 - rate;
                        let mask = Array2::from_shape_simple_fn(x.dim(), || {
                            if r.random::<f64>() < keep {
                                1.0 / keep
                            } else {
                                0.0
                            }
                        });
                        (x * &mask, Some(mask))
                    }
                    None => (x.clone(), None),
                },
            };
            activations.push(y);
            masks.push(mask);
        }
        Ok(Trace { activations, masks })
    }

    fn backprop(&self, trace: &Trace, upstream: Matrix) -> Gradients {
        let mut grad = upstream;
        let mut out = vec![None; self.layers.len()];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            match layer {
                Layer::Dense {
                    weights,
                    activation,
                    ..
                } => {
                    activation.backprop(&trace.activations[l + 1], &mut grad);
                    let x = &trace.activations[l];
                    out[l] = Some(DenseGrad {
                        weights: x.t().dot(&grad),
                        bias: grad.sum_axis(Axis(0)),
                    });
                    if l > 0 {
                        grad = grad.dot(&weights.t());
                    }
                }
                Layer::Dropout { .. } => {
                    if let Some(mask) = &trace.masks[l] {
                        grad *= mask;
                    }
                }
            }
        }
        Gradients { layers: out }
    }

    /// Inference pass; dropout is the identity.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.trace(batch, None)?.activations.pop().expect("output"))
    }

    /// Training pass with dropout masks drawn from `rng`.
    pub fn forward_train(&self, batch: &Matrix, rng: &mut dyn RngCore) -> Result<Matrix> {
        Ok(self
            .trace(batch, Some(rng))?
            .activations
            .pop()
            .expect("output"))
    }

    /// MSE loss against `target` and its parameter gradients (inference mode).
    pub fn backward(&self, batch: &Matrix, target: &Matrix) -> Result<(f64, Gradients)> {
        let trace = self.trace(batch, None)?;
        let (loss, upstream) = mse_loss(trace.activations.last().expect("output"), target)?;
        Ok((loss, self.backprop(&trace, upstream)))
    }

    /// Like [`Network::backward`] but with dropout active.
    pub fn backward_train(
        &self,
        batch: &Matrix,
        target: &Matrix,
        rng: &mut dyn RngCore,
    ) -> Result<(f64, Gradients)> {
        let trace = self.trace(batch, Some(rng))?;
        let (loss, upstream) = mse_loss(trace.activations.last().expect("output"), target)?;
        Ok((loss, self.backprop(&trace, upstream)))
    }

    /// Parameter gradients for an arbitrary gradient w.r.t. the output.
    pub fn backward_upstream(&self, batch: &Matrix, upstream: &Matrix) -> Result<Gradients> {
        let trace = self.trace(batch, None)?;
        if upstream.dim() != trace.activations.last().expect("output").dim() {
            return Err(Error::Evaluation(format!(
                "upstream gradient {:?} does not match output shape",
                upstream.dim()
            )));
        }
        Ok(self.backprop(&trace, upstream.clone()))
    }

    /// Layer table: index, type, activation, output shape, parameter count.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6}{:<10}{:<12}{:<16}{:>10}",
            "Layer", "Type", "Activation", "Output Shape", "Params"
        );
        let mut width = self.input_width();
        let n_dense = self
            .layers
            .iter()
            .filter(|l| matches!(l, Layer::Dense { .. }))
            .count();
        let mut seen_dense = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            let (kind, act, params) = match layer {
                Layer::Dense {
                    weights,
                    bias,
                    activation,
                } => {
                    width = bias.len();
                    seen_dense += 1;
                    ("Dense", activation.to_string(), weights.len() + bias.len())
                }
                Layer::Dropout { .. } => ("Dropout", "-".to_string(), 0),
            };
            let shape = if seen_dense == n_dense && matches!(layer, Layer::Dense { .. }) {
                format!("({}, {})", self.output_dims.0, self.output_dims.1)
            } else {
                width.to_string()
            };
            let _ = writeln!(
                s,
                "{:<6}{:<10}{:<12}{:<16}{:>10}",
                i + 1,
                kind,
                act,
                shape,
                params
            );
        }
        let _ = writeln!(s, "total parameters: {}", self.parameter_count());
        s
    }
}
