//! Regression losses.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// Squared Euclidean distance ||pred - target||^2 per sample.
    #[serde(rename = "l2")]
    SquaredL2,
    /// Huber-style smooth L1 with beta = 1, averaged over coordinates:
    /// 0.5 z^2 for |z| < 1, |z| - 0.5 otherwise.
    #[serde(rename = "smooth-l1")]
    SmoothL1,
}

pub const SMOOTH_L1_BETA: f64 = 1.0;

pub fn loss_value(kind: LossKind, pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "loss shape mismatch");
    match kind {
        LossKind::SquaredL2 => {
            pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>()
        }
        LossKind::SmoothL1 => {
            let d = pred.len() as f64;
            pred.iter()
                .zip(target)
                .map(|(p, t)| {
                    let z = (p - t).abs();
                    if z < SMOOTH_L1_BETA {
                        0.5 * z * z / SMOOTH_L1_BETA
                    } else {
                        z - 0.5 * SMOOTH_L1_BETA
                    }
                })
                .sum::<f64>()
                / d
        }
    }
}

/// d loss / d pred, written into `out`.
pub fn loss_grad_into(kind: LossKind, pred: &[f64], target: &[f64], out: &mut [f64]) {
    assert_eq!(pred.len(), target.len(), "loss shape mismatch");
    match kind {
        LossKind::SquaredL2 => {
            for ((o, p), t) in out.iter_mut().zip(pred).zip(target) {
                *o = 2.0 * (p - t);
            }
        }
        LossKind::SmoothL1 => {
            let inv_d = 1.0 / pred.len() as f64;
            for ((o, p), t) in out.iter_mut().zip(pred).zip(target) {
                let z = p - t;
                *o = if z.abs() < SMOOTH_L1_BETA {
                    z / SMOOTH_L1_BETA
                } else {
                    z.signum()
                } * inv_d;
            }
        }
    }
}
