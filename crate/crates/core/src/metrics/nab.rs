use serde::{Deserialize, Serialize};

use super::truth::{DetectionSet, GroundTruth};
use crate::error::{Error, Result};

/// NAB application weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NabProfile {
    pub a_tp: f64,
    pub a_fp: f64,
    pub a_fn: f64,
}

impl Default for NabProfile {
    /// The NAB standard profile.
    fn default() -> Self {
        Self {
            a_tp: 1.0,
            a_fp: 0.11,
            a_fn: 1.0,
        }
    }
}

impl NabProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(self.a_tp > 0.0 && self.a_tp.is_finite()) || !ok(self.a_fp) || !ok(self.a_fn) {
            return Err(Error::Parameter(format!(
                "NAB weights need a_tp > 0 and a_fp, a_fn >= 0 (got {}, {}, {})",
                self.a_tp, self.a_fp, self.a_fn
            )));
        }
        Ok(())
    }
}

/// `2 / (1 + e^{5y}) - 1`: about 0.987 at `y = -1`, 0 at `y = 0`, tending to -1.
pub fn scaled_sigmoid(y: f64) -> f64 {
    2.0 / (1.0 + (5.0 * y).exp()) - 1.0
}

fn window_position(t: usize, (start, end): (usize, usize)) -> f64 {
    let n = (end - start + 1) as f64;
    (t as f64 - end as f64 - 1.0) / n
}

fn raw_score(truth: &GroundTruth, detections: &DetectionSet, p: &NabProfile) -> f64 {
    let mut tp = 0.0;
    let mut missed = 0usize;
    for &w in truth.windows() {
        match detections.first_in(w.0, w.1) {
            Some(t) => tp += p.a_tp * scaled_sigmoid(window_position(t, w)),
            None => missed += 1,
        }
    }
    let mut fp = 0.0;
    for &t in detections.points() {
        if truth.window_of(t).is_some() {
            continue;
        }
        fp += match truth.preceding_window(t) {
            Some(i) => {
                let (s, e) = truth.windows()[i];
                p.a_fp * scaled_sigmoid((t - e) as f64 / (e - s + 1) as f64)
            }
            None => -p.a_fp,
        };
    }
    tp + fp - p.a_fn * missed as f64
}

/// Normalised NAB score: 0 for no detections, 100 for one detection at each
/// window start. Without labelled windows the raw score is reported in units
/// of `a_tp` times 100.
pub fn nab_score(
    truth: &GroundTruth,
    detections: &DetectionSet,
    profile: &NabProfile,
) -> Result<f64> {
    profile.validate()?;
    if detections
        .points()
        .last()
        .is_some_and(|&t| t >= truth.len())
    {
        return Err(Error::Data(
            "detections extend past the truth series".into(),
        ));
    }
    let raw = raw_score(truth, detections, profile);
    if truth.windows().is_empty() {
        return Ok(100.0 * raw / profile.a_tp);
    }
    let null = raw_score(truth, &DetectionSet::empty(), profile);
    let onsets = DetectionSet::new(truth.windows().iter().map(|w| w.0).collect(), truth.len())?;
    let perfect = raw_score(truth, &onsets, profile);
    Ok(100.0 * (raw - null) / (perfect - null))
}
