use serde::{Deserialize, Serialize};

use super::residual::ResidualMatrix;
use super::weights::TagWeights;
use super::THRESHOLD_PERCENTILE;
use crate::error::{Error, Result};
use crate::stats::percentile;

/// Error-processing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorConfig {
    /// Exponent applied to each residual (1 = mean absolute error).
    pub power: f64,
    /// EWMA half-life in timepoints; `None` disables smoothing.
    pub half_life: Option<usize>,
    pub use_weights: bool,
}

impl ErrorConfig {
    /// p = 6, weights on, half-life equal to the forecast length.
    pub fn recommended(forecast_len: usize) -> Self {
        Self {
            power: 6.0,
            half_life: Some(forecast_len),
            use_weights: true,
        }
    }

    /// Plain mean absolute error, no weights, no smoothing.
    pub fn plain() -> Self {
        Self {
            power: 1.0,
            half_life: None,
            use_weights: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power >= 1.0 && self.power.is_finite()) {
            return Err(Error::Parameter(format!(
                "power must be >= 1, got {}",
                self.power
            )));
        }
        if self.half_life == Some(0) {
            return Err(Error::Parameter("half_life must be >= 1".into()));
        }
        Ok(())
    }

    /// Weighted p-powered mean error, then EWMA smoothing when configured.
    pub fn process(&self, e: &ResidualMatrix, weights: &TagWeights) -> Result<ErrorSeries> {
        self.validate()?;
        let ones;
        let w = if self.use_weights {
            weights
        } else {
            ones = TagWeights::ones(e.n_tags());
            &ones
        };
        let raw = error_series(e, w, self.power)?;
        Ok(match self.half_life {
            Some(h) => ewma(&raw, h)?,
            None => raw,
        })
    }
}

/// Per-timepoint scalar error `M_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSeries {
    pub values: Vec<f64>,
}

impl ErrorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> ErrorSeries {
        ErrorSeries {
            values: self.values[range].to_vec(),
        }
    }
}

pub(crate) fn pow(x: f64, p: f64) -> f64 {
    if p.fract() == 0.0 && p <= 64.0 {
        x.powi(p as i32)
    } else {
        x.powf(p)
    }
}

/// `M_t = (1/m) Σ_i w_i · E_ti^p`. Unit weights with `p = 1` give the plain
/// mean absolute error.
pub fn error_series(e: &ResidualMatrix, weights: &TagWeights, power: f64) -> Result<ErrorSeries> {
    if weights.len() != e.n_tags() {
        return Err(Error::Data(format!(
            "{} weights for {} tags",
            weights.len(),
            e.n_tags()
        )));
    }
    if !(power >= 1.0) {
        return Err(Error::Parameter(format!("power must be >= 1, got {power}")));
    }
    let m = e.n_tags() as f64;
    let values = e
        .values()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&weights.w)
                .map(|(&x, &w)| w * pow(x, power))
                .sum::<f64>()
                / m
        })
        .collect();
    Ok(ErrorSeries { values })
}

/// Smoothing factor for half-life `h`: `1 - exp(ln 0.5 / h)`.
pub fn ewma_alpha(half_life: usize) -> f64 {
    1.0 - (0.5f64.ln() / half_life as f64).exp()
}

/// `out[0] = 0`, `out[t] = α·in[t] + (1 - α)·out[t-1]`.
pub fn ewma(series: &ErrorSeries, half_life: usize) -> Result<ErrorSeries> {
    if half_life == 0 {
        return Err(Error::Parameter("half_life must be >= 1".into()));
    }
    let alpha = ewma_alpha(half_life);
    let mut prev = 0.0;
    let values = series
        .values
        .iter()
        .enumerate()
        .map(|(t, &x)| {
            if t > 0 {
                prev = alpha * x + (1.0 - alpha) * prev;
            }
            prev
        })
        .collect();
    Ok(ErrorSeries { values })
}

/// 99th percentile (linear interpolation) of a training-split series.
pub fn fit_threshold(train_series: &ErrorSeries) -> Result<f64> {
    if train_series.is_empty() {
        return Err(Error::InsufficientData(
            "threshold needs a non-empty series".into(),
        ));
    }
    percentile(&train_series.values, THRESHOLD_PERCENTILE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn e(m: Array2<f64>) -> ResidualMatrix {
        ResidualMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn plain_mean() {
        let s = error_series(&e(array![[1.0, 3.0]]), &TagWeights::ones(2), 1.0).unwrap();
        assert_eq!(s.values, vec![2.0]);
    }

    #[test]
    fn squared_power_is_mse() {
        let s = error_series(
            &e(array![[1.0, 3.0], [0.5, 0.5]]),
            &TagWeights::ones(2),
            2.0,
        )
        .unwrap();
        assert_eq!(s.values, vec![5.0, 0.25]);
    }

    #[test]
    fn sixth_power_amplifies_single_outlier() {
        // m = 51: one residual of 2 versus all residuals equal to 1
        let mut spike = Array2::zeros((1, 51));
        spike[[0, 0]] = 2.0;
        let flat = Array2::from_elem((1, 51), 1.0);
        let ones = TagWeights::ones(51);
        let s6 = error_series(&e(spike.clone()), &ones, 6.0).unwrap().values[0];
        let f6 = error_series(&e(flat.clone()), &ones, 6.0).unwrap().values[0];
        let s1 = error_series(&e(spike), &ones, 1.0).unwrap().values[0];
        let f1 = error_series(&e(flat), &ones, 1.0).unwrap().values[0];
        assert!((s6 - 64.0 / 51.0).abs() < 1e-15);
        assert_eq!(f6, 1.0);
        assert!((s1 - 2.0 / 51.0).abs() < 1e-15);
        assert_eq!(f1, 1.0);
        assert!((s6 / f6 - 64.0 / 51.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_for_half_life_ten() {
        assert!((ewma_alpha(10) - 0.0670).abs() < 1e-3);
        assert!((ewma_alpha(10) - 0.066_967_008_463_192_6).abs() < 1e-15);
    }

    #[test]
    fn constant_input_geometric_sum() {
        let h = 7;
        let a = ewma_alpha(h);
        let c = 2.5;
        let out = ewma(
            &ErrorSeries {
                values: vec![c; 200],
            },
            h,
        )
        .unwrap();
        for (t, &v) in out.values.iter().enumerate() {
            assert!((v - c * (1.0 - (1.0 - a).powi(t as i32))).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_halves_every_half_life() {
        let h = 10;
        let mut x = vec![0.0; 100];
        x[5] = 1.0;
        let out = ewma(&ErrorSeries { values: x }, h).unwrap();
        for k in 0..8 {
            let ratio = out.values[5 + (k + 1) * h] / out.values[5 + k * h];
            assert!((ratio - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn threshold_cases() {
        assert_eq!(
            fit_threshold(&ErrorSeries {
                values: vec![0.7; 30]
            })
            .unwrap(),
            0.7
        );
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((fit_threshold(&ErrorSeries { values: v }).unwrap() - 99.01).abs() < 1e-12);
        assert!(fit_threshold(&ErrorSeries { values: vec![] }).is_err());
    }

    #[test]
    fn plain_config_is_mean_absolute_error() {
        let m = e(array![[1.0, 2.0, 6.0], [0.0, 0.0, 3.0]]);
        let s = ErrorConfig::plain()
            .process(
                &m,
                &TagWeights {
                    w: vec![0.2, 0.3, 0.5],
                },
            )
            .unwrap();
        assert_eq!(s.values, vec![3.0, 1.0]);
    }

    #[test]
    fn longer_half_life_lowers_variance() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..20_000).map(|_| noise.sample(&mut rng)).collect();
        let var = |h: usize| {
            let s = ewma(&ErrorSeries { values: x.clone() }, h).unwrap().values;
            let tail = &s[1000..];
            let m = crate::stats::mean(tail);
            tail.iter().map(|v| (v - m).powi(2)).sum::<f64>() / tail.len() as f64
        };
        let mut prev = var(1);
        for h in [2, 4, 8, 16] {
            let v = var(h);
            assert!(v < prev);
            prev = v;
        }
    }

    proptest! {
        #[test]
        fn threshold_permutation_invariant(mut v in proptest::collection::vec(0.0f64..10.0, 1..200), seed in any::<u64>()) {
            let t1 = fit_threshold(&ErrorSeries { values: v.clone() }).unwrap();
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            v.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(t1, fit_threshold(&ErrorSeries { values: v }).unwrap());
        }

        #[test]
        fn ewma_is_a_contraction(v in proptest::collection::vec(0.0f64..5.0, 1..300), h in 1usize..30) {
            let out = ewma(&ErrorSeries { values: v.clone() }, h).unwrap();
            let max = v.iter().cloned().fold(0.0, f64::max);
            prop_assert!(out.values.iter().all(|&x| (0.0..=max + 1e-12).contains(&x)));
        }

        #[test]
        fn residual_increase_is_monotone(
            rows in proptest::collection::vec(proptest::collection::vec(0.0f64..2.0, 3), 2..40),
            which in any::<proptest::sample::Index>(),
            bump in 0.0f64..3.0,
        ) {
            let n = rows.len();
            let base = Array2::from_shape_fn((n, 3), |(t, i)| rows[t][i]);
            let mut bumped = base.clone();
            let idx = which.index(n * 3);
            bumped[[idx / 3, idx % 3]] += bump;
            let cfg = ErrorConfig { power: 3.0, half_life: Some(4), use_weights: true };
            let w = TagWeights { w: vec![0.5, 0.3, 0.2] };
            let a = cfg.process(&e(base), &w).unwrap();
            let b = cfg.process(&e(bumped), &w).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!(y >= x);
            }
        }
    }
}
