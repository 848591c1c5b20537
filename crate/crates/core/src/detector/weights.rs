use serde::{Deserialize, Serialize};

use super::residual::ResidualMatrix;
use super::THRESHOLD_PERCENTILE;
use crate::error::{Error, Result};
use crate::stats::percentile;

const FLOOR: f64 = 1e-8;

/// Per-tag weights, positive and summing to one. Predictable tags (small
/// typical error relative to the worst error seen) weigh more.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagWeights {
    pub w: Vec<f64>,
}

impl TagWeights {
    /// All ones: the unweighted error series.
    pub fn ones(m: usize) -> Self {
        Self { w: vec![1.0; m] }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Weight calculation on training residuals (rows after the lead-in only):
///
/// 1. `eps_i` = 99th percentile of tag `i`'s residuals
/// 2. `E = max(max_{t,i} E_ti, 1e-8)`
/// 3. `eps_hat_i = max(eps_i / E, 1e-8)`
/// 4. `w_hat_i = max(-ln eps_hat_i, 1e-8)`
/// 5. `w_i = w_hat_i / sum_j w_hat_j`
///
/// The floor in step 4 keeps a tag whose percentile equals the global maximum
/// (`eps_hat_i = 1`) strictly positive and keeps the sum non-zero.
pub fn tag_weights(train_residuals: &ResidualMatrix) -> Result<TagWeights> {
    if train_residuals.is_empty() || train_residuals.n_tags() == 0 {
        return Err(Error::InsufficientData(
            "tag weights need residual rows".into(),
        ));
    }
    let values = train_residuals.values();
    let max_err = values.iter().fold(0.0f64, |a, &b| a.max(b)).max(FLOOR);
    let raw = values
        .columns()
        .into_iter()
        .map(|col| {
            let eps = percentile(&col.to_vec(), THRESHOLD_PERCENTILE)?;
            let eps_hat = (eps / max_err).max(FLOOR);
            Ok((-eps_hat.ln()).max(FLOOR))
        })
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = raw.iter().sum();
    Ok(TagWeights {
        w: raw.iter().map(|r| r / total).collect(),
    })
}
