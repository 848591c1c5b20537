//! Small order-statistics helpers shared by the detector and the weight computation.

use crate::error::{Error, Result};

/// Percentile with linear interpolation between order statistics.
///
/// `q` is in percent (`0..=100`). For sorted values `v` of length `n` the rank is
/// `q / 100 * (n - 1)` and the result interpolates between the two neighbouring
/// order statistics.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::Parameter(format!("percentile {q} outside [0, 100]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = q / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = rank - lo as f64;
    if frac == 0.0 || lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_interpolation_convention() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&v, 99.0).unwrap() - 99.01).abs() < 1e-12);
        assert_eq!(percentile(&v, 100.0).unwrap(), 100.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn constant_and_singleton() {
        assert_eq!(percentile(&[3.5; 17], 99.0).unwrap(), 3.5);
        assert_eq!(percentile(&[2.0], 99.0).unwrap(), 2.0);
        assert!(percentile(&[], 50.0).is_err());
    }
}
