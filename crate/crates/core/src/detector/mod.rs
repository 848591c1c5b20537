//! From forecasts to decisions: residuals, tag weights, processed error series,
//! thresholds, events and per-event tag diagnosis.

mod diagnose;
mod events;
mod residual;
mod series;
mod weights;

pub use diagnose::{diagnose, subprocess_group, Diagnosis, SuspectTag};
pub use events::{detect, event_flags, AnomalyEvent};
pub use residual::{residuals, ResidualMatrix};
pub use series::{error_series, ewma, ewma_alpha, fit_threshold, ErrorConfig, ErrorSeries};
pub use weights::{tag_weights, TagWeights};

/// 99th percentile, used for both the tag weights and the threshold.
pub const THRESHOLD_PERCENTILE: f64 = 99.0;
