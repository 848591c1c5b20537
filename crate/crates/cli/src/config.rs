use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tagwatch::dataset::{ColumnSchema, SynthConfig, WindowSpec};
use tagwatch::detector::ErrorConfig;
use tagwatch::ga::{ArchTemplate, EvolutionConfig};
use tagwatch::metrics::NabProfile;
use tagwatch::nn::{Activation, LayerConfig, OptimizerConfig, TrainConfig};

use crate::CliError;

/// Complete run configuration. Every section is optional and falls back to
/// the documented defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub metrics: NabProfile,
}

fn default_out() -> PathBuf {
    PathBuf::from("tagwatch-out")
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Normal-operation CSV. Defaults to `<out_dir>/data/train.csv`.
    pub train: Option<PathBuf>,
    /// Labelled CSV to run detection on. Defaults to `<out_dir>/data/test.csv`.
    pub test: Option<PathBuf>,
    /// Attack list written by `generate` (attack, start, end, targets).
    pub attacks: Option<PathBuf>,
    #[serde(default)]
    pub schema: ColumnSchema,
    /// Rows dropped from the start of the training file.
    #[serde(default)]
    pub head_trim: usize,
    /// Resample both files onto this step (seconds) before use.
    pub resample_step: Option<f64>,
    /// Generator settings for `generate`; the built-in demo plant when absent.
    pub synthetic: Option<SynthConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSection {
    #[serde(default = "default_input_len")]
    pub input_len: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_forecast_len")]
    pub forecast_len: usize,
}

fn default_input_len() -> usize {
    50
}
fn default_horizon() -> usize {
    10
}
fn default_forecast_len() -> usize {
    4
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            input_len: 50,
            horizon: 10,
            forecast_len: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Hidden layers for `train`; a linear decoder is appended.
    pub layers: Option<Vec<LayerConfig>>,
    /// Architecture template for `search`.
    pub template: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

fn default_epochs() -> usize {
    10
}
fn default_batch() -> usize {
    32
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    #[serde(default = "default_power")]
    pub power: f64,
    /// EWMA half-life; defaults to the forecast length.
    pub half_life: Option<usize>,
    #[serde(default = "default_true")]
    pub smoothing: bool,
    #[serde(default = "default_true")]
    pub use_weights: bool,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    /// Also render the error series as SVG.
    #[serde(default)]
    pub svg: bool,
}

fn default_power() -> f64 {
    6.0
}
fn default_true() -> bool {
    true
}
fn default_top_k() -> usize {
    5
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            power: 6.0,
            half_life: None,
            smoothing: true,
            use_weights: true,
            top_k: 5,
            svg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    #[serde(default = "default_population")]
    pub population: usize,
    #[serde(default = "default_death_age")]
    pub death_age: u32,
    #[serde(default = "default_parents")]
    pub parents: usize,
    #[serde(default = "default_generations")]
    pub generations: usize,
    #[serde(default = "default_true")]
    pub elitism: bool,
    #[serde(default = "default_search_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub holdout_fraction: f64,
}

fn default_population() -> usize {
    10
}
fn default_death_age() -> u32 {
    3
}
fn default_parents() -> usize {
    3
}
fn default_generations() -> usize {
    5
}
fn default_search_epochs() -> usize {
    5
}

impl Default for SearchSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults deserialize")
    }
}

impl RunConfig {
    /// Reads a TOML file (or the defaults), applies `key=value` overrides and
    /// the global flags, then validates.
    pub fn load(
        path: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
        out: Option<&Path>,
    ) -> Result<Self, CliError> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for raw in overrides {
            apply_override(&mut table, raw)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.out_dir = o.to_path_buf();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |key: &str, e: tagwatch::Error| CliError::Config(format!("{key}: {e}"));
        self.window_spec().map_err(|e| cfg_err("window", e))?;
        self.train_config()
            .validate()
            .map_err(|e| cfg_err("train", e))?;
        self.error_config()
            .validate()
            .map_err(|e| cfg_err("detector", e))?;
        if self.detector.top_k == 0 {
            return Err(CliError::Config(
                "detector.top_k: must be at least 1".into(),
            ));
        }
        self.metrics.validate().map_err(|e| cfg_err("metrics", e))?;
        self.evolution_config()
            .validate()
            .map_err(|e| cfg_err("search", e))?;
        if let Some(syn) = &self.dataset.synthetic {
            syn.validate()
                .map_err(|e| cfg_err("dataset.synthetic", e))?;
        }
        if let Some(step) = self.dataset.resample_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(CliError::Config(format!(
                    "dataset.resample_step: must be positive, got {step}"
                )));
            }
        }
        if let Some(layers) = &self.model.layers {
            if layers.is_empty() {
                return Err(CliError::Config("model.layers: list is empty".into()));
            }
        }
        Ok(())
    }

    pub fn window_spec(&self) -> tagwatch::Result<WindowSpec> {
        WindowSpec::new(
            self.window.input_len,
            self.window.horizon,
            self.window.forecast_len,
        )
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            seed: self.seed,
            optimizer: self.train.optimizer,
        }
    }

    pub fn error_config(&self) -> ErrorConfig {
        let half_life = self
            .detector
            .smoothing
            .then(|| self.detector.half_life.unwrap_or(self.window.forecast_len));
        ErrorConfig {
            power: self.detector.power,
            half_life,
            use_weights: self.detector.use_weights,
        }
    }

    pub fn evolution_config(&self) -> EvolutionConfig {
        let s = &self.search;
        EvolutionConfig {
            population: s.population,
            death_age: s.death_age,
            parents: s.parents,
            generations: s.generations,
            seed: self.seed,
            elitism: s.elitism,
            epochs: s.epochs,
            batch_size: s.batch_size,
            holdout_fraction: s.holdout_fraction,
        }
    }

    pub fn hidden_layers(&self) -> Vec<LayerConfig> {
        self.model.layers.clone().unwrap_or_else(|| {
            vec![
                LayerConfig::dense(64, Activation::Relu),
                LayerConfig::dense(64, Activation::Relu),
            ]
        })
    }

    pub fn synth_config(&self) -> SynthConfig {
        self.dataset
            .synthetic
            .clone()
            .unwrap_or_else(SynthConfig::demo)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.out_dir.join("data")
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.out_dir.join("bundle")
    }

    /// Configured path, or the file `generate` would have written.
    pub fn train_path(&self) -> PathBuf {
        self.dataset
            .train
            .clone()
            .unwrap_or_else(|| self.data_dir().join("train.csv"))
    }

    pub fn test_path(&self) -> PathBuf {
        self.dataset
            .test
            .clone()
            .unwrap_or_else(|| self.data_dir().join("test.csv"))
    }

    pub fn attacks_path(&self) -> PathBuf {
        self.dataset
            .attacks
            .clone()
            .unwrap_or_else(|| self.data_dir().join("attacks.csv"))
    }

    pub fn template(&self) -> Result<ArchTemplate, CliError> {
        let path = self
            .model
            .template
            .as_ref()
            .ok_or_else(|| CliError::Config("model.template: required for search".into()))?;
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("model.template: {}: {e}", path.display())))?;
        let template: ArchTemplate = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("model.template: {}: {e}", path.display())))?;
        template
            .validate()
            .map_err(|e| CliError::Config(format!("model.template: {e}")))?;
        Ok(template)
    }

    /// Resolved configuration as TOML; feeding it back reproduces the run.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Requires `path` to exist, naming `key` otherwise.
pub fn require_file(key: &str, path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{key}: file not found: {}",
            path.display()
        )))
    }
}

fn apply_override(table: &mut toml::Table, raw: &str) -> Result<(), CliError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{raw}' is not KEY=VALUE")))?;
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, sections) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for part in sections {
        cur = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| {
                CliError::Config(format!("override '{key}': '{part}' is not a section"))
            })?;
    }
    cur.insert(last.to_string(), parsed);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.window.input_len, 50);
        assert_eq!(c.error_config().half_life, Some(4));
        assert_eq!(c.search.population, 10);
        assert_eq!(c.metrics, NabProfile::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        let e = toml::from_str::<RunConfig>("[window]\ninput_length = 3").unwrap_err();
        assert!(e.to_string().contains("input_length"));
    }

    #[test]
    fn overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        fs::write(&p, "seed = 1\n[window]\nhorizon = 0\n").unwrap();
        let c = RunConfig::load(
            Some(&p),
            &[
                "window.forecast_len=2".into(),
                "detector.use_weights=false".into(),
            ],
            Some(9),
            None,
        )
        .unwrap();
        assert_eq!((c.seed, c.window.horizon, c.window.forecast_len), (9, 0, 2));
        assert!(!c.detector.use_weights);
    }

    #[test]
    fn round_trip_toml() {
        let mut c = RunConfig::default();
        c.model.layers = Some(vec![LayerConfig::dense(8, Activation::Tanh)]);
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(
            RunConfig::load(None, &["detector.power=0.5".into()], None, None),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            RunConfig::load(None, &["window.input_len=0".into()], None, None),
            Err(CliError::Config(_))
        ));
    }
}
