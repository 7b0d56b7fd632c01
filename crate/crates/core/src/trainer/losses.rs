//! Scalar losses and their gradients with respect to the network outputs.
//! Gradient tensors have the same `[batch, 1]` shape as the scores.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numcore::Tensor;
use crate::{Error, Result};

/// Target deviation of the re-identification adversarial term.
pub const REID_TARGET_DEVIATION: f64 = 0.25;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_pair(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("loss batch"));
    }
    Ok(())
}

/// Wasserstein critic loss `mean(fake) - mean(real)`; the critic minimizes it.
pub fn critic_loss(scores_real: &Tensor, scores_fake: &Tensor) -> Result<f64> {
    if scores_real.is_empty() || scores_fake.is_empty() {
        return Err(Error::Empty("critic scores"));
    }
    Ok(mean(scores_fake.data()) - mean(scores_real.data()))
}

/// Gradients of [`critic_loss`] with respect to the real and fake scores.
pub fn critic_loss_grads(scores_real: &Tensor, scores_fake: &Tensor) -> (Tensor, Tensor) {
    let nr = scores_real.len() as f64;
    let nf = scores_fake.len() as f64;
    (
        Tensor::filled(scores_real.shape(), -1.0 / nr),
        Tensor::filled(scores_fake.shape(), 1.0 / nf),
    )
}

/// The generator's realism term `-mean(critic(fake))`.
pub fn generator_realism_loss(scores_fake: &Tensor) -> Result<f64> {
    if scores_fake.is_empty() {
        return Err(Error::Empty("critic scores"));
    }
    Ok(-mean(scores_fake.data()))
}

pub fn generator_realism_grad(scores_fake: &Tensor) -> Tensor {
    Tensor::filled(scores_fake.shape(), -1.0 / scores_fake.len() as f64)
}

/// Mean squared error of the re-identification net on real rows.
pub fn reid_fit_loss(y_true: &Tensor, y_pred: &Tensor) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let se: Vec<f64> = y_true
        .data()
        .iter()
        .zip(y_pred.data())
        .map(|(t, p)| (t - p) * (t - p))
        .collect();
    Ok(mean(&se))
}

/// Gradient of [`reid_fit_loss`] with respect to `y_pred`.
pub fn reid_fit_grad(y_true: &Tensor, y_pred: &Tensor) -> Result<Tensor> {
    check_pair(y_true, y_pred)?;
    let n = y_pred.len() as f64;
    let g = y_true
        .data()
        .iter()
        .zip(y_pred.data())
        .map(|(t, p)| 2.0 * (p - t) / n)
        .collect();
    Tensor::new(y_pred.shape().to_vec(), g)
}

/// `mean((|y_true - y_pred| - 0.25)^2)`: smallest when the re-identification
/// guess misses the generated sensitive value by exactly 0.25.
pub fn reid_adversarial_loss(y_true: &Tensor, y_pred: &Tensor) -> Result<f64> {
    check_pair(y_true, y_pred)?;
    let terms: Vec<f64> = y_true
        .data()
        .iter()
        .zip(y_pred.data())
        .map(|(t, p)| {
            let d = (t - p).abs() - REID_TARGET_DEVIATION;
            d * d
        })
        .collect();
    Ok(mean(&terms))
}

/// Gradients of [`reid_adversarial_loss`] with respect to `y_true` and
/// `y_pred`. Both depend on the generator when it is evaluated on fake rows.
/// At `y_true == y_pred` the subgradient 0 is used.
pub fn reid_adversarial_grads(y_true: &Tensor, y_pred: &Tensor) -> Result<(Tensor, Tensor)> {
    check_pair(y_true, y_pred)?;
    let n = y_pred.len() as f64;
    let mut gt = Vec::with_capacity(y_true.len());
    let mut gp = Vec::with_capacity(y_true.len());
    for (t, p) in y_true.data().iter().zip(y_pred.data()) {
        let diff = t - p;
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        let g = 2.0 * (diff.abs() - REID_TARGET_DEVIATION) * sign / n;
        gt.push(g);
        gp.push(-g);
    }
    Ok((
        Tensor::new(y_true.shape().to_vec(), gt)?,
        Tensor::new(y_pred.shape().to_vec(), gp)?,
    ))
}

/// One discriminator's loss plus the summed losses of all the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedLossBreakdown {
    pub own: f64,
    pub lambda_sum: f64,
    pub total: f64,
}

pub fn combined_loss(own: f64, others: &[f64]) -> CombinedLossBreakdown {
    let lambda_sum = others.iter().sum::<f64>();
    CombinedLossBreakdown {
        own,
        lambda_sum,
        total: own + lambda_sum,
    }
}

/// Combined losses for every discriminator given all their own losses.
pub fn combined_losses(own: &[f64]) -> Vec<CombinedLossBreakdown> {
    (0..own.len())
        .map(|j| {
            let others: Vec<f64> = own
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &v)| v)
                .collect();
            combined_loss(own[j], &others)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::matrix(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn critic_examples() {
        assert_eq!(critic_loss(&col(&[0.3, 0.7]), &col(&[0.7, 0.3])).unwrap(), 0.0);
        assert_eq!(critic_loss(&col(&[1.0, 1.0]), &col(&[0.0, 0.0])).unwrap(), -1.0);
        assert_eq!(critic_loss(&col(&[0.0]), &col(&[1.0])).unwrap(), 1.0);
    }

    #[test]
    fn reid_fit_examples() {
        assert_eq!(reid_fit_loss(&col(&[0.4]), &col(&[0.4])).unwrap(), 0.0);
        assert_eq!(reid_fit_loss(&col(&[1.0]), &col(&[0.0])).unwrap(), 1.0);
        let v = reid_fit_loss(&col(&[0.2, 0.8]), &col(&[0.4, 0.4])).unwrap();
        assert!((v - 0.10).abs() < 1e-15);
        assert!(reid_fit_loss(&col(&[1.0]), &col(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn reid_adversarial_examples() {
        assert_eq!(reid_adversarial_loss(&col(&[0.5]), &col(&[0.5])).unwrap(), 0.0625);
        assert_eq!(reid_adversarial_loss(&col(&[0.5]), &col(&[0.25])).unwrap(), 0.0);
        assert_eq!(reid_adversarial_loss(&col(&[1.0]), &col(&[0.0])).unwrap(), 0.5625);
    }

    #[test]
    fn combined_examples() {
        let c = combined_loss(0.5, &[0.2, 0.3]);
        assert_eq!(c.total, 1.0);
        assert_eq!(combined_loss(0.7, &[]).total, 0.7);
        assert_eq!(combined_loss(0.0, &[0.0, 0.0]).total, 0.0);
        let all = combined_losses(&[1.0, 2.0, 4.0]);
        assert_eq!(all[1].lambda_sum, 5.0);
        assert_eq!(all[1].total, 7.0);
    }

    fn fd(f: impl Fn(&Tensor) -> f64, x: &Tensor, i: usize) -> f64 {
        let h = 1e-6;
        let mut a = x.clone();
        a.data_mut()[i] += h;
        let mut b = x.clone();
        b.data_mut()[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn combined_identity(own in -10.0f64..10.0, others in proptest::collection::vec(-10.0f64..10.0, 0..8)) {
            let c = combined_loss(own, &others);
            prop_assert_eq!(c.total, c.own + c.lambda_sum);
        }

        #[test]
        fn adversarial_grads_match_differences(
            pairs in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..8)
        ) {
            // Stay clear of the kinks at |t - p| == 0.
            prop_assume!(pairs.iter().all(|(t, p)| (t - p).abs() > 1e-3));
            let t = col(&pairs.iter().map(|x| x.0).collect::<Vec<_>>());
            let p = col(&pairs.iter().map(|x| x.1).collect::<Vec<_>>());
            let (gt, gp) = reid_adversarial_grads(&t, &p).unwrap();
            for i in 0..t.len() {
                let nt = fd(|x| reid_adversarial_loss(x, &p).unwrap(), &t, i);
                let np = fd(|x| reid_adversarial_loss(&t, x).unwrap(), &p, i);
                prop_assert!((gt.data()[i] - nt).abs() < 1e-6);
                prop_assert!((gp.data()[i] - np).abs() < 1e-6);
            }
            let g = reid_fit_grad(&t, &p).unwrap();
            for i in 0..t.len() {
                let n = fd(|x| reid_fit_loss(&t, x).unwrap(), &p, i);
                prop_assert!((g.data()[i] - n).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn critic_grads_shape() {
        let (gr, gf) = critic_loss_grads(&col(&[1.0, 2.0]), &col(&[3.0, 4.0, 5.0, 6.0]));
        assert_eq!(gr.data(), &vec![-0.5, -0.5][..]);
        assert_eq!(gf.data(), &vec![0.25; 4][..]);
    }
}
