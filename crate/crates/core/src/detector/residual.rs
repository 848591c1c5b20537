use std::ops::Range;

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// `E[t, i] = |forecast[t, i] - actual[t, i]|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    values: Array2<f64>,
}

impl ResidualMatrix {
    /// Wraps an existing non-negative matrix.
    pub fn from_matrix(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(
                "residuals must be finite and non-negative".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
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

    /// Rows in `range`, e.g. the scored range of a window spec.
    pub fn rows(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.len() {
            return Err(Error::Parameter(format!(
                "row range {range:?} outside {} rows",
                self.len()
            )));
        }
        Ok(Self {
            values: self.values.slice(s![range, ..]).to_owned(),
        })
    }

    /// Multiplies every entry (used for scale-invariance checks).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_matrix(&self.values * factor)
    }
}

pub fn residuals(
    actual: ArrayView2<'_, f64>,
    forecast: ArrayView2<'_, f64>,
) -> Result<ResidualMatrix> {
    if actual.dim() != forecast.dim() {
        return Err(Error::Evaluation(format!(
            "actual {:?} and forecast {:?} differ in shape",
            actual.dim(),
            forecast.dim()
        )));
    }
    Ok(ResidualMatrix {
        values: (&forecast - &actual).mapv(f64::abs),
    })
}
