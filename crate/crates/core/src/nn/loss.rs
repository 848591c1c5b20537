use super::Matrix;
use crate::error::{Error, Result};

/// Mean over all elements of `(pred - target)²`, with its gradient
/// `2 (pred - target) / count`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.dim() != target.dim() {
        return Err(Error::Evaluation(format!(
            "prediction shape {:?} does not match target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let count = pred.len().max(1) as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff * (2.0 / count)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_inputs() {
        let a = array![[1.0, -2.0], [0.5, 3.0]];
        let (loss, grad) = mse_loss(&a, &a).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hand_value() {
        let (loss, _) = mse_loss(&array![[1.0, 1.0]], &array![[0.0, 2.0]]).unwrap();
        assert_eq!(loss, 1.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(mse_loss(&array![[1.0]], &array![[1.0, 2.0]]).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pred = Array2::from_shape_fn((3, 4), |_| rng.random_range(-2.0..2.0));
        let target = Array2::from_shape_fn((3, 4), |_| rng.random_range(-2.0..2.0));
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let h = 1e-5;
        for idx in 0..pred.len() {
            let (r, c) = (idx / 4, idx % 4);
            let mut plus = pred.clone();
            plus[[r, c]] += h;
            let mut minus = pred.clone();
            minus[[r, c]] -= h;
            let fd = (mse_loss(&plus, &target).unwrap().0 - mse_loss(&minus, &target).unwrap().0)
                / (2.0 * h);
            let rel = (fd - grad[[r, c]]).abs() / fd.abs().max(grad[[r, c]].abs()).max(1e-12);
            assert!(
                rel < 1e-6,
                "element {idx}: fd {fd} vs analytic {}",
                grad[[r, c]]
            );
        }
    }
}
