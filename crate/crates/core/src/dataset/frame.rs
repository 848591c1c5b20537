use ndarray::{s, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An inclusive `[start, end]` range of timepoints under attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackInterval {
    pub start: usize,
    pub end: usize,
    /// Indices of the targeted tags; empty when the source only carried labels.
    #[serde(default)]
    pub targets: Vec<usize>,
}

impl AttackInterval {
    /// Number of timepoints covered (inclusive bounds).
    pub fn duration(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }
}

/// Multivariate series: `S` timepoints by `m` tags.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    timestamps: Vec<f64>,
    values: Array2<f64>,
    tag_names: Vec<String>,
    labels: Option<Vec<bool>>,
    attack_intervals: Vec<AttackInterval>,
}

impl TimeSeriesFrame {
    pub fn new(timestamps: Vec<f64>, values: Array2<f64>, tag_names: Vec<String>) -> Result<Self> {
        Self::with_labels(timestamps, values, tag_names, None, Vec::new())
    }

    pub fn with_labels(
        timestamps: Vec<f64>,
        values: Array2<f64>,
        tag_names: Vec<String>,
        labels: Option<Vec<bool>>,
        attack_intervals: Vec<AttackInterval>,
    ) -> Result<Self> {
        let (rows, cols) = values.dim();
        if timestamps.len() != rows {
            return Err(Error::Data(format!(
                "{} timestamps for {rows} rows",
                timestamps.len()
            )));
        }
        if tag_names.len() != cols {
            return Err(Error::Data(format!(
                "{} tag names for {cols} columns",
                tag_names.len()
            )));
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Data(format!(
                "timestamps not strictly increasing at row {}",
                i + 1
            )));
        }
        if let Some(((t, i), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at row {t}, tag {i}")));
        }
        if let Some(l) = &labels {
            if l.len() != rows {
                return Err(Error::Data(format!("{} labels for {rows} rows", l.len())));
            }
        }
        for iv in &attack_intervals {
            if iv.start > iv.end || iv.end >= rows {
                return Err(Error::Data(format!(
                    "attack interval [{}, {}] outside [0, {rows})",
                    iv.start, iv.end
                )));
            }
            if let Some(&bad) = iv.targets.iter().find(|&&j| j >= cols) {
                return Err(Error::Data(format!("attack target tag {bad} out of range")));
            }
        }
        Ok(Self {
            timestamps,
            values,
            tag_names,
            labels,
            attack_intervals,
        })
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_tags(&self) -> usize {
        self.values.ncols()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn tag(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.column(i)
    }

    pub fn tag_names(&self) -> &[String] {
        &self.tag_names
    }

    pub fn tag_index(&self, name: &str) -> Option<usize> {
        self.tag_names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> Option<&[bool]> {
        self.labels.as_deref()
    }

    pub fn attack_intervals(&self) -> &[AttackInterval] {
        &self.attack_intervals
    }

    /// Per-timepoint anomaly flags: explicit labels when present, otherwise
    /// membership in any attack interval.
    pub fn anomaly_flags(&self) -> Vec<bool> {
        if let Some(l) = &self.labels {
            return l.clone();
        }
        let mut flags = vec![false; self.len()];
        for iv in &self.attack_intervals {
            flags[iv.start..=iv.end].iter_mut().for_each(|f| *f = true);
        }
        flags
    }

    /// Sampling step if the grid is uniform (within a relative 1e-9).
    pub fn uniform_step(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let step = self.timestamps[1] - self.timestamps[0];
        let uniform = self
            .timestamps
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
        uniform.then_some(step)
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Replaces the value matrix, keeping everything else.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        if values.dim() != self.values.dim() {
            return Err(Error::Data(format!(
                "replacement values {:?} do not match frame {:?}",
                values.dim(),
                self.values.dim()
            )));
        }
        Self::with_labels(
            self.timestamps.clone(),
            values,
            self.tag_names.clone(),
            self.labels.clone(),
            self.attack_intervals.clone(),
        )
    }

    /// Rows `[start, end)`; attack intervals are clipped and re-based.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::Parameter(format!(
                "slice [{start}, {end}) of a {}-row frame",
                self.len()
            )));
        }
        let intervals = self
            .attack_intervals
            .iter()
            .filter(|iv| iv.end >= start && iv.start < end)
            .map(|iv| AttackInterval {
                start: iv.start.max(start) - start,
                end: iv.end.min(end - 1) - start,
                targets: iv.targets.clone(),
            })
            .collect();
        Self::with_labels(
            self.timestamps[start..end].to_vec(),
            self.values.slice(s![start..end, ..]).to_owned(),
            self.tag_names.clone(),
            self.labels.as_ref().map(|l| l[start..end].to_vec()),
            intervals,
        )
    }

    /// Drops the first `rows` timepoints (plant warm-up).
    pub fn trim_head(&self, rows: usize) -> Result<Self> {
        if rows == 0 {
            return Ok(self.clone());
        }
        self.slice(rows, self.len())
    }
}

/// Collapses runs of `true` into inclusive intervals.
pub(crate) fn runs_of(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (t, &f) in flags.iter().enumerate() {
        match (f, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                runs.push((s, t - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, flags.len() - 1));
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn frame() -> TimeSeriesFrame {
        TimeSeriesFrame::with_labels(
            vec![0.0, 1.0, 2.0, 3.0],
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]],
            vec!["a".into(), "b".into()],
            None,
            vec![AttackInterval {
                start: 1,
                end: 2,
                targets: vec![1],
            }],
        )
        .unwrap()
    }

    #[test]
    fn rejects_non_increasing_timestamps() {
        let err = TimeSeriesFrame::new(vec![0.0, 0.0], array![[1.0], [2.0]], vec!["a".into()]);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn rejects_out_of_range_interval() {
        let err = TimeSeriesFrame::with_labels(
            vec![0.0, 1.0],
            array![[1.0], [2.0]],
            vec!["a".into()],
            None,
            vec![AttackInterval {
                start: 1,
                end: 2,
                targets: vec![],
            }],
        );
        assert!(err.is_err());
    }

    #[test]
    fn slice_rebases_intervals() {
        let f = frame().slice(2, 4).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(
            f.attack_intervals(),
            &[AttackInterval {
                start: 0,
                end: 0,
                targets: vec![1]
            }]
        );
        assert_eq!(f.anomaly_flags(), vec![true, false]);
    }

    #[test]
    fn runs() {
        assert_eq!(
            runs_of(&[false, true, true, false, true]),
            vec![(1, 2), (4, 4)]
        );
        assert!(runs_of(&[false, false]).is_empty());
    }
}
