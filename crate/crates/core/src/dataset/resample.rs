use ndarray::Array2;

use super::frame::{runs_of, AttackInterval, TimeSeriesFrame};
use crate::error::{Error, Result};

/// Re-interpolates every tag onto the grid `t0, t0 + step, ...` spanning the
/// input range. Values are linear per tag; labels take the nearest sample.
pub fn resample_uniform(frame: &TimeSeriesFrame, step: f64) -> Result<TimeSeriesFrame> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::Parameter(format!(
            "resample step must be > 0, got {step}"
        )));
    }
    if frame.len() < 2 {
        return Err(Error::InsufficientData(
            "resampling needs at least 2 timepoints".into(),
        ));
    }
    let ts = frame.timestamps();
    let (t0, t_last) = (ts[0], ts[ts.len() - 1]);
    let n = ((t_last - t0) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| t0 + k as f64 * step).collect();

    let m = frame.n_tags();
    let values = frame.values();
    let mut out = Array2::<f64>::zeros((n, m));
    // index of the source sample at or before each grid point
    let mut lower = Vec::with_capacity(n);
    let mut j = 0usize;
    for &t in &grid {
        while j + 1 < ts.len() && ts[j + 1] <= t {
            j += 1;
        }
        lower.push(j);
    }
    for (k, (&t, &j)) in grid.iter().zip(&lower).enumerate() {
        for i in 0..m {
            let v0 = values[[j, i]];
            out[[k, i]] = if t == ts[j] || j + 1 == ts.len() {
                v0
            } else {
                let frac = (t - ts[j]) / (ts[j + 1] - ts[j]);
                v0 + frac * (values[[j + 1, i]] - v0)
            };
        }
    }

    let nearest = |k: usize| -> usize {
        let j = lower[k];
        if j + 1 < ts.len() && (ts[j + 1] - grid[k]) < (grid[k] - ts[j]) {
            j + 1
        } else {
            j
        }
    };
    let labels = frame
        .labels()
        .map(|l| (0..n).map(|k| l[nearest(k)]).collect::<Vec<_>>());

    // Source intervals map onto the grid points whose nearest sample they cover.
    let mut intervals = Vec::new();
    for iv in frame.attack_intervals() {
        let flags: Vec<bool> = (0..n).map(|k| iv.contains(nearest(k))).collect();
        intervals.extend(
            runs_of(&flags)
                .into_iter()
                .map(|(start, end)| AttackInterval {
                    start,
                    end,
                    targets: iv.targets.clone(),
                }),
        );
    }

    TimeSeriesFrame::with_labels(grid, out, frame.tag_names().to_vec(), labels, intervals)
}
