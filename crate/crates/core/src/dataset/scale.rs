use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::frame::TimeSeriesFrame;
use crate::error::{Error, Result};

/// Per-tag mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub mean: Vec<f64>,
    /// Always positive; constant tags store 1.
    pub std: Vec<f64>,
}

impl ScalingStats {
    pub fn scale(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(values.ncols())?;
        let mut out = values.clone();
        for (mut col, (&mu, &sd)) in out
            .columns_mut()
            .into_iter()
            .zip(self.mean.iter().zip(&self.std))
        {
            col.mapv_inplace(|x| (x - mu) / sd);
        }
        Ok(out)
    }

    pub fn unscale(&self, values: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(values.ncols())?;
        let mut out = values.clone();
        for (mut col, (&mu, &sd)) in out
            .columns_mut()
            .into_iter()
            .zip(self.mean.iter().zip(&self.std))
        {
            col.mapv_inplace(|x| x * sd + mu);
        }
        Ok(out)
    }

    fn check(&self, m: usize) -> Result<()> {
        if m != self.mean.len() {
            return Err(Error::Data(format!(
                "scaler fitted on {} tags applied to {m}",
                self.mean.len()
            )));
        }
        Ok(())
    }
}

/// Fits per-tag statistics. Call on normal-operation (training) data only.
pub fn fit_scaler(frame: &TimeSeriesFrame) -> Result<ScalingStats> {
    if frame.is_empty() {
        return Err(Error::InsufficientData(
            "cannot fit a scaler on zero rows".into(),
        ));
    }
    let values = frame.values();
    let n = values.nrows() as f64;
    let mean: Vec<f64> = values.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
    let std = values
        .columns()
        .into_iter()
        .zip(&mean)
        .map(|(col, &mu)| {
            let var = col.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(ScalingStats { mean, std })
}

pub fn apply_scaler(frame: &TimeSeriesFrame, stats: &ScalingStats) -> Result<TimeSeriesFrame> {
    frame.with_values(stats.scale(&frame.values().to_owned())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn frame(v: Array2<f64>) -> TimeSeriesFrame {
        let ts = (0..v.nrows()).map(|t| t as f64).collect();
        let names = (0..v.ncols()).map(|i| format!("t{i}")).collect();
        TimeSeriesFrame::new(ts, v, names).unwrap()
    }

    #[test]
    fn constant_tag() {
        let f = frame(array![[1.0], [1.0], [1.0]]);
        let s = fit_scaler(&f).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
        assert_eq!(apply_scaler(&f, &s).unwrap().tag(0).to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn two_points() {
        let f = frame(array![[0.0], [2.0]]);
        let s = fit_scaler(&f).unwrap();
        assert_eq!((s.mean[0], s.std[0]), (1.0, 1.0));
        assert_eq!(
            apply_scaler(&f, &s).unwrap().tag(0).to_vec(),
            vec![-1.0, 1.0]
        );
    }

    #[test]
    fn moments_of_scaled_output() {
        let f = frame(array![[1.0], [2.0], [3.0], [4.0]]);
        let scaled = apply_scaler(&f, &fit_scaler(&f).unwrap()).unwrap();
        let v = scaled.tag(0).to_vec();
        let mean = v.iter().sum::<f64>() / 4.0;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tag_count_mismatch() {
        let s = fit_scaler(&frame(array![[1.0, 2.0], [3.0, 5.0]])).unwrap();
        assert!(apply_scaler(&frame(array![[1.0], [2.0]]), &s).is_err());
    }
}
