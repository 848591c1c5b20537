use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeriesFrame;
use crate::detector::AnomalyEvent;
use crate::error::{Error, Result};

/// Labelled anomaly windows over a series of `len` timepoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    len: usize,
    windows: Vec<(usize, usize)>,
    step_seconds: f64,
}

impl GroundTruth {
    /// `windows` are inclusive `(start, end)` pairs, sorted and disjoint.
    pub fn new(len: usize, windows: Vec<(usize, usize)>, step_seconds: f64) -> Result<Self> {
        if !(step_seconds > 0.0 && step_seconds.is_finite()) {
            return Err(Error::Parameter(format!(
                "step must be positive, got {step_seconds}"
            )));
        }
        for (i, &(s, e)) in windows.iter().enumerate() {
            if s > e || e >= len {
                return Err(Error::Data(format!(
                    "window [{s}, {e}] invalid for length {len}"
                )));
            }
            if i > 0 && s <= windows[i - 1].1 {
                return Err(Error::Data(format!(
                    "window [{s}, {e}] overlaps or precedes its predecessor"
                )));
            }
        }
        Ok(Self {
            len,
            windows,
            step_seconds,
        })
    }

    /// Windows from the frame's attack intervals; step from its timestamps (1 s if irregular).
    pub fn from_frame(frame: &TimeSeriesFrame) -> Result<Self> {
        let windows = frame
            .attack_intervals()
            .iter()
            .map(|a| (a.start, a.end))
            .collect();
        Self::new(frame.len(), windows, frame.uniform_step().unwrap_or(1.0))
    }

    /// Maximal runs of `true` become windows.
    pub fn from_flags(flags: &[bool], step_seconds: f64) -> Result<Self> {
        Self::new(flags.len(), crate::dataset::runs_of(flags), step_seconds)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn windows(&self) -> &[(usize, usize)] {
        &self.windows
    }

    pub fn step_seconds(&self) -> f64 {
        self.step_seconds
    }

    pub fn flags(&self) -> Vec<bool> {
        let mut f = vec![false; self.len];
        for &(s, e) in &self.windows {
            f[s..=e].iter_mut().for_each(|x| *x = true);
        }
        f
    }

    /// Index of the window containing `t`.
    pub fn window_of(&self, t: usize) -> Option<usize> {
        let i = self.windows.partition_point(|&(_, e)| e < t);
        (i < self.windows.len() && self.windows[i].0 <= t).then_some(i)
    }

    /// Index of the last window ending before `t`.
    pub fn preceding_window(&self, t: usize) -> Option<usize> {
        let i = self.windows.partition_point(|&(_, e)| e < t);
        i.checked_sub(1)
    }
}

/// Strictly increasing detection timepoints.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionSet {
    points: Vec<usize>,
}

impl DetectionSet {
    pub fn new(points: Vec<usize>, len: usize) -> Result<Self> {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(
                "detection points must be strictly increasing".into(),
            ));
        }
        if points.last().is_some_and(|&p| p >= len) {
            return Err(Error::Data(format!(
                "detection point outside series of length {len}"
            )));
        }
        Ok(Self { points })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One detection per event, at its onset. An event that starts before a
    /// window and runs into it is a false positive, not a detection of that window.
    pub fn from_events(events: &[AnomalyEvent], len: usize) -> Result<Self> {
        let mut points: Vec<usize> = events.iter().map(|ev| ev.start).collect();
        points.sort_unstable();
        points.dedup();
        Self::new(points, len)
    }

    /// Every flagged timepoint is a detection.
    pub fn from_flags(flags: &[bool]) -> Self {
        Self {
            points: flags
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(t, _)| t)
                .collect(),
        }
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Earliest detection inside `[start, end]`.
    pub fn first_in(&self, start: usize, end: usize) -> Option<usize> {
        let i = self.points.partition_point(|&p| p < start);
        self.points.get(i).copied().filter(|&p| p <= end)
    }
}
