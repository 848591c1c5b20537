use serde::{Deserialize, Serialize};

use super::truth::{DetectionSet, GroundTruth};
use crate::error::{Error, Result};

/// Per-timepoint confusion counts and derived rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseScores {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn pointwise_confusion(truth: &GroundTruth, flags: &[bool]) -> Result<PointwiseScores> {
    if flags.len() != truth.len() {
        return Err(Error::Data(format!(
            "{} flags for a truth series of length {}",
            flags.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&actual, &flag) in truth.flags().iter().zip(flags) {
        match (actual, flag) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if tp == 0 && fn_ + fp > 0 {
        0.0
    } else if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(PointwiseScores {
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        f1,
    })
}

/// Fraction of labelled anomalous time that is flagged.
pub fn anomalous_time_coverage(truth: &GroundTruth, flags: &[bool]) -> Result<f64> {
    let s = pointwise_confusion(truth, flags)?;
    Ok(s.recall)
}

/// Fraction of windows containing at least one detection.
pub fn window_recall(truth: &GroundTruth, detections: &DetectionSet) -> f64 {
    if truth.windows().is_empty() {
        return 1.0;
    }
    let hit = truth
        .windows()
        .iter()
        .filter(|&&(s, e)| detections.first_in(s, e).is_some())
        .count();
    hit as f64 / truth.windows().len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_perfect() {
        let g = GroundTruth::new(20, vec![(2, 5), (10, 12)], 1.0).unwrap();
        let s = pointwise_confusion(&g, &g.flags()).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn silent_detector() {
        let g = GroundTruth::new(20, vec![(2, 5)], 1.0).unwrap();
        let s = pointwise_confusion(&g, &[false; 20]).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn length_mismatch() {
        let g = GroundTruth::new(20, vec![], 1.0).unwrap();
        assert!(pointwise_confusion(&g, &[false; 19]).is_err());
    }

    #[test]
    fn long_window_pathology() {
        // one 3600 s window, ten 60 s windows, 1 s steps; only the long one is flagged
        let mut windows = vec![(1000, 4599)];
        for k in 0..10 {
            let s = 6000 + k * 200;
            windows.push((s, s + 59));
        }
        let g = GroundTruth::new(9000, windows, 1.0).unwrap();
        let mut flags = vec![false; 9000];
        flags[1000..4600].iter_mut().for_each(|f| *f = true);
        let cov = anomalous_time_coverage(&g, &flags).unwrap();
        assert!((cov - 3600.0 / 4200.0).abs() < 1e-12);
        let det = DetectionSet::from_flags(&flags);
        assert!((window_recall(&g, &det) - 1.0 / 11.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn shift_invariant(
            flags in proptest::collection::vec(any::<bool>(), 1..100),
            truth_flags in proptest::collection::vec(any::<bool>(), 1..100),
            shift in 0usize..50,
        ) {
            let n = flags.len().min(truth_flags.len());
            let g = GroundTruth::from_flags(&truth_flags[..n], 1.0).unwrap();
            let a = pointwise_confusion(&g, &flags[..n]).unwrap();
            let mut tf = vec![false; shift];
            tf.extend_from_slice(&truth_flags[..n]);
            let mut ff = vec![false; shift];
            ff.extend_from_slice(&flags[..n]);
            let b = pointwise_confusion(&GroundTruth::from_flags(&tf, 1.0).unwrap(), &ff).unwrap();
            prop_assert_eq!((a.tp, a.fp, a.fn_), (b.tp, b.fp, b.fn_));
            prop_assert_eq!((a.precision, a.recall, a.f1), (b.precision, b.recall, b.f1));
        }

        #[test]
        fn f1_is_harmonic_mean(
            flags in proptest::collection::vec(any::<bool>(), 1..100),
            truth_flags in proptest::collection::vec(any::<bool>(), 1..100),
        ) {
            let n = flags.len().min(truth_flags.len());
            let s = pointwise_confusion(&GroundTruth::from_flags(&truth_flags[..n], 1.0).unwrap(), &flags[..n]).unwrap();
            if s.tp > 0 {
                prop_assert!((s.f1 - 2.0 * s.precision * s.recall / (s.precision + s.recall)).abs() < 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&s.f1));
        }
    }
}
