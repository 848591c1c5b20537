//! Forecast-residual anomaly detection for multivariate industrial time series.
//!
//! The crate is organised around the detection pipeline:
//!
//! * [`dataset`] loads, resamples, scales and windows tag data, and can synthesise
//!   plant-like series with injected attacks.
//! * [`nn`] is a small dense network engine (backprop, Adam, model files).
//! * [`ga`] searches network architectures inside a user-written template.
//! * [`detector`] turns forecasts into residuals, processed error series,
//!   thresholds, events and per-event tag diagnoses.
//! * [`metrics`] scores detections (NAB, pointwise F1, detection delay).
//! * [`pipeline`] ties a trained network and its calibration together.

pub mod dataset;
pub mod detector;
pub mod error;
pub mod ga;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod stats;

pub use error::{Error, Result};

/// Mixes a base seed with stream identifiers (splitmix64 finaliser).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut state = base ^ 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        state = state.wrapping_add(p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    }
    state
}
