//! Detection scoring: NAB, pointwise precision/recall/F1, detection delay.

mod delay;
mod nab;
mod pointwise;
mod report;
mod truth;

pub use delay::{detection_delay, DelaySummary, WindowDelay};
pub use nab::{nab_score, scaled_sigmoid, NabProfile};
pub use pointwise::{anomalous_time_coverage, pointwise_confusion, window_recall, PointwiseScores};
pub use report::{score, ScoreReport};
pub use truth::{DetectionSet, GroundTruth};
