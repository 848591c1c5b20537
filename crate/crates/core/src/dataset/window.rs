use std::ops::Range;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use super::frame::TimeSeriesFrame;
use crate::error::{Error, Result};

/// Geometry of the forecasting task: `input_len` points in, a gap of
/// `horizon` points, then `forecast_len` points out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub input_len: usize,
    pub horizon: usize,
    pub forecast_len: usize,
}

impl WindowSpec {
    pub fn new(input_len: usize, horizon: usize, forecast_len: usize) -> Result<Self> {
        let spec = Self {
            input_len,
            horizon,
            forecast_len,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_len == 0 || self.forecast_len == 0 {
            return Err(Error::Parameter(format!(
                "window lengths must be positive (input_len={}, forecast_len={})",
                self.input_len, self.forecast_len
            )));
        }
        Ok(())
    }

    /// Leading timepoints without a forecast (`L + h`).
    pub fn lead(&self) -> usize {
        self.input_len + self.horizon
    }

    pub fn min_len(&self) -> usize {
        self.lead() + self.forecast_len
    }

    /// Number of windows `K = floor((S - L - h) / L̃)` for a series of length `s`.
    pub fn count(&self, s: usize) -> usize {
        s.saturating_sub(self.lead()) / self.forecast_len
    }

    /// Timepoints covered by some forecast window: `[L + h, L + h + K·L̃)`.
    pub fn scored_range(&self, s: usize) -> Range<usize> {
        self.lead()..self.lead() + self.count(s) * self.forecast_len
    }
}

/// Concrete index ranges of the `k`-th input/forecast window pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowPair {
    pub k: usize,
    pub input: Range<usize>,
    pub target: Range<usize>,
}

pub fn make_windows(series_len: usize, spec: &WindowSpec) -> Result<Vec<WindowPair>> {
    spec.validate()?;
    let k_count = spec.count(series_len);
    if k_count < 1 {
        return Err(Error::SeriesTooShort {
            len: series_len,
            min_len: spec.min_len(),
        });
    }
    Ok((0..k_count)
        .map(|k| {
            let t = k * spec.forecast_len;
            let tt = spec.lead() + t;
            WindowPair {
                k,
                input: t..t + spec.input_len,
                target: tt..tt + spec.forecast_len,
            }
        })
        .collect())
}

/// Windows materialised as flattened row-major matrices: `x` is `K × (L·m)`,
/// `y` is `K × (L̃·m)`.
#[derive(Debug, Clone)]
pub struct WindowDataset {
    pub spec: WindowSpec,
    pub n_tags: usize,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
}

impl WindowDataset {
    pub fn from_frame(frame: &TimeSeriesFrame, spec: &WindowSpec) -> Result<Self> {
        let pairs = make_windows(frame.len(), spec)?;
        let m = frame.n_tags();
        let values = frame.values();
        let mut x = Array2::zeros((pairs.len(), spec.input_len * m));
        let mut y = Array2::zeros((pairs.len(), spec.forecast_len * m));
        for p in &pairs {
            let src = values.slice(s![p.input.clone(), ..]);
            x.row_mut(p.k)
                .iter_mut()
                .zip(src.iter())
                .for_each(|(d, s)| *d = *s);
            let dst = values.slice(s![p.target.clone(), ..]);
            y.row_mut(p.k)
                .iter_mut()
                .zip(dst.iter())
                .for_each(|(d, s)| *d = *s);
        }
        Ok(Self {
            spec: *spec,
            n_tags: m,
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows `[start, end)` as a new dataset.
    pub fn subset(&self, start: usize, end: usize) -> Self {
        Self {
            spec: self.spec,
            n_tags: self.n_tags,
            x: self.x.slice(s![start..end, ..]).to_owned(),
            y: self.y.slice(s![start..end, ..]).to_owned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_geometry() {
        let spec = WindowSpec::new(150, 150, 50).unwrap();
        let w = make_windows(1000, &spec).unwrap();
        assert_eq!(w.len(), 14);
        assert_eq!(w[0].input, 0..150);
        assert_eq!(w[0].target, 300..350);
    }

    #[test]
    fn exact_minimum_length() {
        let spec = WindowSpec::new(7, 3, 2).unwrap();
        assert_eq!(make_windows(12, &spec).unwrap().len(), 1);
        assert!(matches!(
            make_windows(11, &spec),
            Err(Error::SeriesTooShort {
                len: 11,
                min_len: 12
            })
        ));
    }

    #[test]
    fn full_scale_count() {
        let spec = WindowSpec::new(200, 50, 4).unwrap();
        // (105527 - 250) / 4 = 26319.25
        assert_eq!(spec.count(105_527), 26_319);
    }

    #[test]
    fn zero_lengths_rejected() {
        assert!(WindowSpec::new(0, 1, 1).is_err());
        assert!(WindowSpec::new(1, 0, 0).is_err());
        assert!(WindowSpec::new(1, 0, 1).is_ok());
    }

    #[test]
    fn dataset_flattening() {
        let ts: Vec<f64> = (0..6).map(f64::from).collect();
        let v = Array2::from_shape_fn((6, 2), |(t, i)| (10 * t + i) as f64);
        let frame = TimeSeriesFrame::new(ts, v, vec!["a".into(), "b".into()]).unwrap();
        let ds = WindowDataset::from_frame(&frame, &WindowSpec::new(2, 1, 1).unwrap()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.x.row(1).to_vec(), vec![10.0, 11.0, 20.0, 21.0]);
        assert_eq!(ds.y.row(1).to_vec(), vec![40.0, 41.0]);
    }

    proptest! {
        #[test]
        fn targets_tile_the_scored_range(l in 1usize..20, h in 0usize..20, lt in 1usize..10, extra in 0usize..200) {
            let spec = WindowSpec::new(l, h, lt).unwrap();
            let s = spec.min_len() + extra;
            let w = make_windows(s, &spec).unwrap();
            let mut covered = vec![0u32; s];
            for p in &w {
                prop_assert!(p.input.end <= s && p.target.end <= s);
                for t in p.target.clone() { covered[t] += 1; }
            }
            let range = spec.scored_range(s);
            prop_assert_eq!(range.end, l + h + w.len() * lt);
            for (t, &c) in covered.iter().enumerate() {
                prop_assert_eq!(c, u32::from(range.contains(&t)));
            }
            for pair in w.windows(2) {
                prop_assert_eq!(pair[1].target.start, pair[0].target.end);
            }
        }
    }
}
