//! Detector bundle: a trained forecaster together with its calibration
//! (scaler, tag weights, threshold), plus the analysis of a test frame.

use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    apply_scaler, fit_scaler, ScalingStats, TimeSeriesFrame, WindowDataset, WindowSpec,
};
use crate::detector::{
    detect, diagnose, event_flags, fit_threshold, residuals, subprocess_group, tag_weights,
    AnomalyEvent, Diagnosis, ErrorConfig, ErrorSeries, ResidualMatrix, TagWeights,
};
use crate::error::{Error, Result};
use crate::metrics::{DetectionSet, GroundTruth};
use crate::nn::{
    init_network, load_model, predict_frame, save_model, train, Activation, LayerConfig, Network,
    TrainConfig,
};

pub const MODEL_FILE: &str = "model.bin";
pub const CALIBRATION_FILE: &str = "calibration.json";

/// Everything needed to turn raw tag values into events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub tag_names: Vec<String>,
    pub spec: WindowSpec,
    pub scaler: ScalingStats,
    pub error: ErrorConfig,
    pub weights: TagWeights,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct DetectorBundle {
    pub network: Network,
    pub calibration: Calibration,
}

/// Result of running a bundle over one frame.
#[derive(Debug, Clone)]
pub struct Analysis {
    /// Rows whose forecasts come from the network.
    pub scored: Range<usize>,
    pub residuals: ResidualMatrix,
    pub series: ErrorSeries,
    pub threshold: f64,
    pub events: Vec<AnomalyEvent>,
    pub diagnoses: Vec<Diagnosis>,
    pub flags: Vec<bool>,
}

/// Hidden layers followed by the linear decoder onto the forecast window.
pub fn with_decoder(hidden: &[LayerConfig], spec: &WindowSpec, n_tags: usize) -> Vec<LayerConfig> {
    let mut layers = hidden.to_vec();
    layers.push(LayerConfig::dense(
        spec.forecast_len * n_tags,
        Activation::Linear,
    ));
    layers
}

/// Trains `hidden` plus a linear decoder on the (unscaled) training frame and
/// calibrates it. Returns the bundle and the per-epoch training loss.
pub fn fit_detector(
    train_frame: &TimeSeriesFrame,
    spec: WindowSpec,
    hidden: &[LayerConfig],
    train_config: &TrainConfig,
    error: ErrorConfig,
) -> Result<(DetectorBundle, Vec<f64>)> {
    spec.validate()?;
    train_config.validate()?;
    error.validate()?;
    let scaler = fit_scaler(train_frame)?;
    let scaled = apply_scaler(train_frame, &scaler)?;
    let data = WindowDataset::from_frame(&scaled, &spec)?;
    let m = train_frame.n_tags();
    let mut network = init_network(
        &with_decoder(hidden, &spec, m),
        (spec.input_len, m),
        (spec.forecast_len, m),
        crate::derive_seed(train_config.seed, &[7]),
    )?;
    let losses = train(&mut network, &data, train_config)?;
    let bundle = DetectorBundle::calibrate(network, train_frame, spec, scaler, error)?;
    Ok((bundle, losses))
}

impl DetectorBundle {
    /// Fits tag weights and the threshold on the training frame's scored rows.
    pub fn calibrate(
        network: Network,
        train_frame: &TimeSeriesFrame,
        spec: WindowSpec,
        scaler: ScalingStats,
        error: ErrorConfig,
    ) -> Result<Self> {
        error.validate()?;
        let scaled = apply_scaler(train_frame, &scaler)?;
        let forecast = predict_frame(&network, &scaled, &spec)?;
        let e = residuals(scaled.values(), forecast.view())?;
        let scored = spec.scored_range(e.len());
        let weights = if error.use_weights {
            tag_weights(&e.rows(scored.clone())?)?
        } else {
            TagWeights::ones(e.n_tags())
        };
        let series = error.process(&e, &weights)?;
        let threshold = fit_threshold(&series.slice(scored))?;
        let calibration = Calibration {
            tag_names: train_frame.tag_names().to_vec(),
            spec,
            scaler,
            error,
            weights,
            threshold,
        };
        Ok(Self {
            network,
            calibration,
        })
    }

    /// Residuals, error series, events and diagnoses for a raw frame.
    pub fn analyze(&self, frame: &TimeSeriesFrame, top_k: usize) -> Result<Analysis> {
        let cal = &self.calibration;
        if frame.tag_names() != cal.tag_names.as_slice() {
            return Err(Error::Schema(
                "frame tags differ from the calibrated tags".into(),
            ));
        }
        let scaled = apply_scaler(frame, &cal.scaler)?;
        let forecast = predict_frame(&self.network, &scaled, &cal.spec)?;
        let e = residuals(scaled.values(), forecast.view())?;
        let series = cal.error.process(&e, &cal.weights)?;
        let scored = cal.spec.scored_range(e.len());
        let events: Vec<AnomalyEvent> = detect(&series.values[scored.clone()], cal.threshold)
            .into_iter()
            .map(|ev| AnomalyEvent {
                start: ev.start + scored.start,
                end: ev.end + scored.start,
                peak_time: ev.peak_time + scored.start,
                ..ev
            })
            .collect();
        let diag_weights = if cal.error.use_weights {
            cal.weights.clone()
        } else {
            TagWeights::ones(e.n_tags())
        };
        let diagnoses = diagnose(
            &e,
            &diag_weights,
            cal.error.power,
            &events,
            top_k.min(e.n_tags()).max(1),
        )?;
        let flags = event_flags(&events, e.len());
        Ok(Analysis {
            scored,
            residuals: e,
            series,
            threshold: cal.threshold,
            events,
            diagnoses,
            flags,
        })
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_model(&self.network, dir.join(MODEL_FILE))?;
        let path = dir.join(CALIBRATION_FILE);
        let json = serde_json::to_string_pretty(&self.calibration)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let network = load_model(dir.join(MODEL_FILE))?;
        let path = dir.join(CALIBRATION_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let calibration: Calibration = serde_json::from_str(&text)
            .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
        let m = calibration.tag_names.len();
        if network.input_dims() != (calibration.spec.input_len, m)
            || network.output_dims() != (calibration.spec.forecast_len, m)
        {
            return Err(Error::ModelFormat(
                "model shape disagrees with its calibration".into(),
            ));
        }
        Ok(Self {
            network,
            calibration,
        })
    }
}

impl Analysis {
    /// Residual of `tag` at `t` in the frame's original units.
    pub fn unscaled_residual(&self, scaler: &ScalingStats, tag: usize, t: usize) -> f64 {
        self.residuals.values()[[t, tag]] * scaler.std[tag]
    }

    pub fn detections(&self, truth: &GroundTruth) -> Result<DetectionSet> {
        DetectionSet::from_events(&self.events, truth.len())
    }
}

/// One row of the per-attack table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub attack: usize,
    pub start: usize,
    pub end: usize,
    pub targets: Vec<String>,
    /// Suspects of the first event overlapping the attack.
    pub detected_tags: Vec<String>,
    pub delay_seconds: Option<f64>,
    pub pointwise_recall: f64,
}

impl AttackRow {
    pub fn target_hit(&self) -> bool {
        self.targets.iter().any(|t| self.detected_tags.contains(t))
    }
}

/// An attack to report on: inclusive bounds and target tag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpan {
    pub start: usize,
    pub end: usize,
    pub targets: Vec<String>,
}

/// Per-attack rows from events (inclusive bounds), each event's suspect tag
/// names, and per-timepoint flags.
pub fn attack_rows(
    attacks: &[AttackSpan],
    events: &[(usize, usize)],
    suspects: &[Vec<String>],
    flags: &[bool],
    step_seconds: f64,
) -> Vec<AttackRow> {
    attacks
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let first = events.iter().position(|&(s, e)| s <= a.end && a.start <= e);
            let end = a.end.min(flags.len().saturating_sub(1));
            let hits = flags
                .get(a.start..=end)
                .map_or(0, |f| f.iter().filter(|&&x| x).count());
            AttackRow {
                attack: i + 1,
                start: a.start,
                end: a.end,
                targets: a.targets.clone(),
                detected_tags: first.map(|k| suspects[k].clone()).unwrap_or_default(),
                delay_seconds: first
                    .map(|k| (events[k].0.max(a.start) - a.start) as f64 * step_seconds),
                pointwise_recall: hits as f64 / (a.end - a.start + 1) as f64,
            }
        })
        .collect()
}

/// Per-attack summary for a labelled frame.
pub fn attack_table(frame: &TimeSeriesFrame, analysis: &Analysis) -> Vec<AttackRow> {
    let names = frame.tag_names();
    let attacks: Vec<AttackSpan> = frame
        .attack_intervals()
        .iter()
        .map(|a| AttackSpan {
            start: a.start,
            end: a.end,
            targets: a.targets.iter().map(|&t| names[t].clone()).collect(),
        })
        .collect();
    let events: Vec<(usize, usize)> = analysis.events.iter().map(|e| (e.start, e.end)).collect();
    let suspects: Vec<Vec<String>> = analysis
        .diagnoses
        .iter()
        .map(|d| d.suspects.iter().map(|s| names[s.tag].clone()).collect())
        .collect();
    attack_rows(
        &attacks,
        &events,
        &suspects,
        &analysis.flags,
        frame.uniform_step().unwrap_or(1.0),
    )
}

/// Tag name decorated with its subprocess group, e.g. `LIT301 (3)`.
pub fn tag_label(name: &str) -> String {
    match subprocess_group(name) {
        Some(g) => format!("{name} ({g})"),
        None => name.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate_split, SynthConfig};

    fn small() -> (TimeSeriesFrame, TimeSeriesFrame) {
        let mut cfg = SynthConfig::demo();
        cfg.length = 1500;
        cfg.train_length = 800;
        cfg.injections.retain(|i| i.end <= 1500);
        synth_generate_split(&cfg, 5).unwrap()
    }

    fn fitted() -> (DetectorBundle, TimeSeriesFrame) {
        let (train_f, test_f) = small();
        let spec = WindowSpec::new(10, 2, 2).unwrap();
        let layers = [LayerConfig::dense(16, Activation::Relu)];
        let tc = TrainConfig {
            epochs: 3,
            batch_size: 32,
            seed: 1,
            ..TrainConfig::default()
        };
        let (b, losses) =
            fit_detector(&train_f, spec, &layers, &tc, ErrorConfig::recommended(2)).unwrap();
        assert_eq!(losses.len(), 3);
        (b, test_f)
    }

    #[test]
    fn bundle_round_trip() {
        let (b, test_f) = fitted();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let back = DetectorBundle::load(dir.path()).unwrap();
        assert_eq!(back.calibration, b.calibration);
        let a1 = b.analyze(&test_f, 5).unwrap();
        let a2 = back.analyze(&test_f, 5).unwrap();
        assert_eq!(a1.series, a2.series);
        assert_eq!(a1.events, a2.events);
    }

    #[test]
    fn events_stay_in_scored_range() {
        let (b, test_f) = fitted();
        let a = b.analyze(&test_f, 3).unwrap();
        assert!(a
            .events
            .iter()
            .all(|e| e.start >= a.scored.start && e.end < a.scored.end));
        assert_eq!(a.diagnoses.len(), a.events.len());
        let rows = attack_table(&test_f, &a);
        assert_eq!(rows.len(), test_f.attack_intervals().len());
    }

    #[test]
    fn tag_mismatch_rejected() {
        let (b, test_f) = fitted();
        let renamed = TimeSeriesFrame::new(
            test_f.timestamps().to_vec(),
            test_f.values().to_owned(),
            (0..test_f.n_tags()).map(|i| format!("X{i}")).collect(),
        )
        .unwrap();
        assert!(matches!(b.analyze(&renamed, 3), Err(Error::Schema(_))));
    }

    #[test]
    fn labels() {
        assert_eq!(tag_label("LIT301"), "LIT301 (3)");
        assert_eq!(tag_label("flow"), "flow");
    }
}
