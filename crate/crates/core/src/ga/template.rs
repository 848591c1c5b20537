use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Initializer, LayerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// `steps` log-spaced values from `min` to `max` inclusive. Genomes store the
/// grid index so numeric crossover can vote on integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub steps: u32,
}

impl LogGrid {
    pub fn value(&self, index: u32) -> f64 {
        if self.steps <= 1 {
            return self.min;
        }
        let frac = f64::from(index.min(self.steps - 1)) / f64::from(self.steps - 1);
        self.min * (self.max / self.min).powf(frac)
    }

    fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) || self.steps == 0 {
            return Err(Error::Config(format!(
                "learning-rate grid needs 0 < min <= max and steps >= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpace {
    #[serde(default = "default_optimizers")]
    pub kinds: Vec<OptimizerKind>,
    #[serde(default = "default_lr_grid")]
    pub learning_rate: LogGrid,
}

fn default_optimizers() -> Vec<OptimizerKind> {
    vec![OptimizerKind::Adam]
}

fn default_lr_grid() -> LogGrid {
    LogGrid {
        min: 1e-3,
        max: 1e-3,
        steps: 1,
    }
}

impl Default for OptimizerSpace {
    fn default() -> Self {
        Self {
            kinds: default_optimizers(),
            learning_rate: default_lr_grid(),
        }
    }
}

/// Admissible layer sizes: an inclusive integer range or a discrete
/// distribution over listed sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeSpec {
    Range {
        min: u32,
        max: u32,
    },
    Choices {
        choices: Vec<u32>,
        #[serde(default)]
        weights: Vec<f64>,
    },
}

impl SizeSpec {
    pub fn admits(&self, size: u32) -> bool {
        match self {
            SizeSpec::Range { min, max } => (*min..=*max).contains(&size),
            SizeSpec::Choices { choices, .. } => choices.contains(&size),
        }
    }

    /// Nearest admissible size (ties go to the smaller).
    pub fn clamp(&self, size: u32) -> u32 {
        match self {
            SizeSpec::Range { min, max } => size.clamp(*min, *max),
            SizeSpec::Choices { choices, .. } => *choices
                .iter()
                .min_by_key(|&&c| (c.abs_diff(size), c))
                .expect("validated non-empty"),
        }
    }

    fn validate(&self, slot: usize) -> Result<()> {
        match self {
            SizeSpec::Range { min, max } if *min == 0 || min > max => Err(Error::Config(format!(
                "layers[{slot}].units range [{min}, {max}] is empty or includes 0"
            ))),
            SizeSpec::Choices { choices, weights } => {
                if choices.is_empty() || choices.contains(&0) {
                    return Err(Error::Config(format!(
                        "layers[{slot}].units choices must be non-empty and positive"
                    )));
                }
                if !weights.is_empty()
                    && (weights.len() != choices.len()
                        || weights.iter().any(|w| !(*w >= 0.0))
                        || weights.iter().sum::<f64>() <= 0.0)
                {
                    return Err(Error::Config(format!(
                        "layers[{slot}].units weights must match choices and be non-negative"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSlot {
    pub kinds: Vec<LayerKind>,
    pub activations: Vec<Activation>,
    pub units: SizeSpec,
    #[serde(default)]
    pub dropout_rates: Vec<f64>,
}

/// Architecture template. Slot `i` governs hidden layer `i`; layers past the
/// last slot reuse it. A linear decoder emitting the forecast window is always
/// appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchTemplate {
    pub max_layers: usize,
    #[serde(default)]
    pub optimizer: OptimizerSpace,
    #[serde(default = "default_initializers")]
    pub initializers: Vec<Initializer>,
    #[serde(default = "default_output_activation")]
    pub output_activation: Activation,
    pub layers: Vec<LayerSlot>,
}

fn default_initializers() -> Vec<Initializer> {
    vec![Initializer::GlorotUniform]
}

fn default_output_activation() -> Activation {
    Activation::Linear
}

impl ArchTemplate {
    pub fn slot(&self, index: usize) -> &LayerSlot {
        &self.layers[index.min(self.layers.len() - 1)]
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_layers == 0 {
            return Err(Error::Config(
                "template max_layers must be at least 1".into(),
            ));
        }
        if self.layers.is_empty() {
            return Err(Error::Config(
                "template needs at least one layer slot".into(),
            ));
        }
        if self.layers.len() > self.max_layers {
            return Err(Error::Config(format!(
                "template has {} slots but max_layers = {}",
                self.layers.len(),
                self.max_layers
            )));
        }
        if self.optimizer.kinds.is_empty() {
            return Err(Error::Config("template optimizer.kinds is empty".into()));
        }
        self.optimizer.learning_rate.validate()?;
        if self.initializers.is_empty() {
            return Err(Error::Config("template initializers is empty".into()));
        }
        for (i, slot) in self.layers.iter().enumerate() {
            if slot.kinds.is_empty() || slot.activations.is_empty() {
                return Err(Error::Config(format!(
                    "layers[{i}] needs kinds and activations"
                )));
            }
            slot.units.validate(i)?;
            if slot.kinds.contains(&LayerKind::Dropout)
                && (slot.dropout_rates.is_empty()
                    || slot.dropout_rates.iter().any(|r| !(*r > 0.0 && *r < 1.0)))
            {
                return Err(Error::Config(format!(
                    "layers[{i}] allows Dropout but dropout_rates is empty or outside (0, 1)"
                )));
            }
        }
        Ok(())
    }
}
