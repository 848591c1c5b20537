use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::Network;
use super::optim::OptimizerConfig;
use crate::dataset::{make_windows, TimeSeriesFrame, WindowDataset, WindowSpec};
use crate::derive_seed;
use crate::error::{Error, Result};

/// Mini-batch MSE training settings. The loss is fixed to MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Parameter("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

fn check_dims(net: &Network, spec: &WindowSpec, n_tags: usize) -> Result<()> {
    let want_in = (spec.input_len, n_tags);
    let want_out = (spec.forecast_len, n_tags);
    if net.input_dims() != want_in || net.output_dims() != want_out {
        return Err(Error::Evaluation(format!(
            "network maps {:?} -> {:?} but the data needs {want_in:?} -> {want_out:?}",
            net.input_dims(),
            net.output_dims()
        )));
    }
    Ok(())
}

/// Trains in place for `config.epochs` passes over shuffled mini-batches (the
/// last short batch is kept). Returns the mean training loss of every epoch.
pub fn train(net: &mut Network, data: &WindowDataset, config: &TrainConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("no training windows".into()));
    }
    check_dims(net, &data.spec, data.n_tags)?;
    let mut optimizer = config.optimizer.build(net);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[0]));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[1]));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let x = data.x.select(Axis(0), batch);
            let y = data.y.select(Axis(0), batch);
            let (loss, grads) = net.backward_train(&x, &y, &mut dropout_rng)?;
            if !loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "loss became {loss} in epoch {epoch}"
                )));
            }
            optimizer.step(net, &grads)?;
            total += loss * batch.len() as f64;
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged(format!("epoch {epoch} mean loss {mean}")));
        }
        history.push(mean);
    }
    Ok(history)
}

/// Mean squared error of the network on a window dataset (inference mode).
pub fn evaluate_mse(net: &Network, data: &WindowDataset) -> Result<f64> {
    check_dims(net, &data.spec, data.n_tags)?;
    let mut total = 0.0;
    let n = data.len();
    for start in (0..n).step_by(1024) {
        let end = (start + 1024).min(n);
        let pred = net.forward(&data.x.slice(s![start..end, ..]).to_owned())?;
        let diff = &pred - &data.y.slice(s![start..end, ..]);
        total += diff.iter().map(|d| d * d).sum::<f64>();
    }
    Ok(total / (n * data.y.ncols()) as f64)
}

/// Forecast matrix `S × m`: every target window holds the network's forecast,
/// the first `L + h` rows and any rows after the last complete window are
/// copied from the actual values.
pub fn predict_frame(
    net: &Network,
    frame: &TimeSeriesFrame,
    spec: &WindowSpec,
) -> Result<Array2<f64>> {
    let m = frame.n_tags();
    check_dims(net, spec, m)?;
    let pairs = make_windows(frame.len(), spec)?;
    let values = frame.values();
    let mut out = values.to_owned();
    for chunk in pairs.chunks(512) {
        let mut x = Array2::zeros((chunk.len(), spec.input_len * m));
        for (row, p) in chunk.iter().enumerate() {
            let src = values.slice(s![p.input.clone(), ..]);
            x.row_mut(row)
                .iter_mut()
                .zip(src.iter())
                .for_each(|(d, s)| *d = *s);
        }
        let pred = net.forward(&x)?;
        for (row, p) in chunk.iter().enumerate() {
            let mut dst = out.slice_mut(s![p.target.clone(), ..]);
            dst.iter_mut()
                .zip(pred.row(row).iter())
                .for_each(|(d, s)| *d = *s);
        }
    }
    Ok(out)
}
