use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    SmoothL1,
}

/// What a prediction is compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target<'a> {
    /// Class index for cross-entropy.
    Class(usize),
    /// Full regression target, same length as the prediction.
    Dense(&'a [f64]),
    /// Regression on a single output (Q-learning): other outputs get no gradient.
    Action { index: usize, value: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("class index {index} out of range for {outputs} outputs")]
    BadClass { index: usize, outputs: usize },
    #[error("target length {target} does not match prediction length {prediction}")]
    Shape { prediction: usize, target: usize },
    #[error("{0:?} target is not usable with {1:?} loss")]
    Mismatch(&'static str, LossKind),
}

fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

pub fn loss(prediction: &[f64], target: Target<'_>, kind: LossKind) -> Result<f64, LossError> {
    let mut scratch = vec![0.0; prediction.len()];
    loss_and_grad(prediction, target, kind, &mut scratch)
}

/// Loss value, with its gradient w.r.t. `prediction` written to `grad`.
pub fn loss_and_grad(
    prediction: &[f64],
    target: Target<'_>,
    kind: LossKind,
    grad: &mut [f64],
) -> Result<f64, LossError> {
    grad.fill(0.0);
    match (kind, target) {
        (LossKind::CrossEntropy, Target::Class(t)) => {
            if t >= prediction.len() {
                return Err(LossError::BadClass { index: t, outputs: prediction.len() });
            }
            let m = prediction.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = prediction.iter().map(|p| (p - m).exp()).sum();
            let lse = m + sum.ln();
            for (g, p) in grad.iter_mut().zip(prediction) {
                *g = (p - lse).exp();
            }
            grad[t] -= 1.0;
            Ok(lse - prediction[t])
        }
        (LossKind::SmoothL1, Target::Dense(y)) => {
            if y.len() != prediction.len() {
                return Err(LossError::Shape { prediction: prediction.len(), target: y.len() });
            }
            let n = y.len() as f64;
            let mut total = 0.0;
            for ((g, p), t) in grad.iter_mut().zip(prediction).zip(y) {
                let (l, d) = smooth_l1(p - t);
                total += l;
                *g = d / n;
            }
            Ok(total / n)
        }
        (LossKind::SmoothL1, Target::Action { index, value }) => {
            if index >= prediction.len() {
                return Err(LossError::BadClass { index, outputs: prediction.len() });
            }
            let (l, d) = smooth_l1(prediction[index] - value);
            grad[index] = d;
            Ok(l)
        }
        (LossKind::CrossEntropy, Target::Dense(_)) => Err(LossError::Mismatch("dense", kind)),
        (LossKind::CrossEntropy, Target::Action { .. }) => Err(LossError::Mismatch("action", kind)),
        (LossKind::SmoothL1, Target::Class(_)) => Err(LossError::Mismatch("class", kind)),
    }
}
