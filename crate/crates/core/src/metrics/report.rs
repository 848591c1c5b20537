use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::delay::{detection_delay, DelaySummary};
use super::nab::{nab_score, NabProfile};
use super::pointwise::{
    anomalous_time_coverage, pointwise_confusion, window_recall, PointwiseScores,
};
use super::truth::{DetectionSet, GroundTruth};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub nab: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Windows with at least one detection.
    pub tp: usize,
    /// Detection points outside every window.
    pub fp: usize,
    /// Missed windows.
    pub fn_: usize,
    pub pointwise: PointwiseScores,
    pub anomalous_time_coverage: f64,
    pub window_recall: f64,
    pub delay: DelaySummary,
}

/// Scores a detector given its detection points and per-timepoint flags.
pub fn score(
    truth: &GroundTruth,
    detections: &DetectionSet,
    flags: &[bool],
    profile: &NabProfile,
) -> Result<ScoreReport> {
    let nab = nab_score(truth, detections, profile)?;
    let pointwise = pointwise_confusion(truth, flags)?;
    let delay = detection_delay(truth, detections);
    let tp = delay.detected;
    let fp = detections
        .points()
        .iter()
        .filter(|&&t| truth.window_of(t).is_none())
        .count();
    Ok(ScoreReport {
        nab,
        precision: pointwise.precision,
        recall: pointwise.recall,
        f1: pointwise.f1,
        tp,
        fp,
        fn_: truth.windows().len() - tp,
        pointwise,
        anomalous_time_coverage: anomalous_time_coverage(truth, flags)?,
        window_recall: window_recall(truth, detections),
        delay,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

impl ScoreReport {
    pub const CSV_HEADER: &'static str =
        "nab,precision,recall,f1,tp,fp,fn,mean_delay_s,mean_delay_ratio";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.6},{:.6},{:.6},{:.6},{},{},{},{},{}",
            self.nab,
            self.precision,
            self.recall,
            self.f1,
            self.tp,
            self.fp,
            self.fn_,
            opt(self.delay.mean_delay_seconds),
            opt(self.delay.mean_ratio)
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }

    /// Indented plain-text tree.
    pub fn to_text(&self) -> String {
        let p = &self.pointwise;
        let mut s = String::from("score\n");
        let _ = writeln!(s, "  nab: {:.3}", self.nab);
        let _ = writeln!(s, "  pointwise");
        let _ = writeln!(s, "    precision: {:.4}", self.precision);
        let _ = writeln!(s, "    recall: {:.4}", self.recall);
        let _ = writeln!(s, "    f1: {:.4}", self.f1);
        let _ = writeln!(
            s,
            "    counts: tp={} fp={} fn={} tn={}",
            p.tp, p.fp, p.fn_, p.tn
        );
        let _ = writeln!(
            s,
            "    anomalous_time_coverage: {:.4}",
            self.anomalous_time_coverage
        );
        let _ = writeln!(s, "  windows");
        let _ = writeln!(s, "    detected: {} of {}", self.tp, self.tp + self.fn_);
        let _ = writeln!(s, "    false_positive_detections: {}", self.fp);
        let _ = writeln!(s, "    window_recall: {:.4}", self.window_recall);
        let _ = writeln!(s, "  delay");
        if self.delay.no_detections() {
            let _ = writeln!(s, "    no detections");
        } else {
            let _ = writeln!(
                s,
                "    mean_seconds: {}",
                opt(self.delay.mean_delay_seconds)
            );
            let _ = writeln!(s, "    mean_ratio: {}", opt(self.delay.mean_ratio));
        }
        for w in &self.delay.windows {
            match w.delay_seconds {
                Some(d) => {
                    let _ = writeln!(s, "    window {}: {d} s", w.window);
                }
                None => {
                    let _ = writeln!(s, "    window {}: missed", w.window);
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_empty_reports() {
        let g = GroundTruth::new(100, vec![(10, 19), (50, 59)], 1.0).unwrap();
        let on = DetectionSet::new(vec![10, 50], 100).unwrap();
        let r = score(&g, &on, &g.flags(), &NabProfile::default()).unwrap();
        assert_eq!(r.nab, 100.0);
        assert_eq!((r.tp, r.fp, r.fn_), (2, 0, 0));
        assert_eq!(r.f1, 1.0);
        let r = score(
            &g,
            &DetectionSet::empty(),
            &[false; 100],
            &NabProfile::default(),
        )
        .unwrap();
        assert_eq!((r.nab, r.f1), (0.0, 0.0));
        assert!(r.to_text().contains("no detections"));
        assert_eq!(r.to_csv().lines().count(), 2);
    }
}
