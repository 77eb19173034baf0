use thiserror::Error;

use super::{loss_and_grad, CompiledNetwork, ExecError, LossError, LossKind, OptimizerState, Target};

/// One training example.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub input: &'a [f64],
    pub target: Target<'a>,
    /// Zero the network memory before evaluating this sample.
    pub reset_memory: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("non-finite loss {loss} at sample {sample}")]
    NonFinite { loss: f64, sample: usize },
}

/// Mean loss over `batch` and its gradient (left in the network's scratch).
///
/// Samples are evaluated in order so memory carries over between them. The
/// network memory after the call is the one left by the last sample.
pub fn batch_gradient(net: &mut CompiledNetwork, batch: &[Sample<'_>], kind: LossKind) -> Result<f64, TrainError> {
    batch_gradient_observed(net, batch, kind, &mut |_, _| {})
}

/// [`batch_gradient`], also handing each sample's output to `observe`.
pub fn batch_gradient_observed(
    net: &mut CompiledNetwork,
    batch: &[Sample<'_>],
    kind: LossKind,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let scale = 1.0 / batch.len() as f64;
    net.grad_scratch.fill(0.0);
    let mut d_out = vec![0.0; net.num_outputs()];
    let mut total = 0.0;
    for (k, s) in batch.iter().enumerate() {
        if s.reset_memory {
            net.reset_memory();
        }
        let out = net.forward(s.input)?;
        observe(k, out);
        let l = loss_and_grad(out, s.target, kind, &mut d_out)?;
        if !l.is_finite() {
            return Err(TrainError::NonFinite { loss: l, sample: k });
        }
        total += l;
        d_out.iter_mut().for_each(|d| *d *= scale);
        net.backward_last(s.input, &d_out);
    }
    Ok(total * scale)
}

impl CompiledNetwork {
    /// Gradient from the last [`batch_gradient`] call.
    pub fn last_gradient(&self) -> &[f64] {
        &self.grad_scratch
    }
}

/// One Adam step on the mean batch loss; returns the loss before the update.
/// On a non-finite loss nothing is updated and the memory is restored.
pub fn train_step(
    net: &mut CompiledNetwork,
    batch: &[Sample<'_>],
    kind: LossKind,
    opt: &mut OptimizerState,
) -> Result<f64, TrainError> {
    train_step_observed(net, batch, kind, opt, &mut |_, _| {})
}

/// [`train_step`] with a per-sample view of the pre-update outputs.
pub fn train_step_observed(
    net: &mut CompiledNetwork,
    batch: &[Sample<'_>],
    kind: LossKind,
    opt: &mut OptimizerState,
    observe: &mut dyn FnMut(usize, &[f64]),
) -> Result<f64, TrainError> {
    let saved = net.memory.clone();
    match batch_gradient_observed(net, batch, kind, observe) {
        Ok(l) => {
            let CompiledNetwork { params, grad_scratch, .. } = net;
            opt.apply(params, grad_scratch);
            Ok(l)
        }
        Err(e) => {
            net.memory.copy_from_slice(&saved);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::random_genome;
    use crate::netexec::AdamConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn loss_decreases_on_separable_toy_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_genome(2, 2, &mut rng);
        let mut net = CompiledNetwork::compile(&g, &mut rng).unwrap();
        let mut opt = OptimizerState::new(net.param_count(), AdamConfig { lr: 1e-2, ..Default::default() });
        let xs: Vec<[f64; 2]> = (0..32).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let batch: Vec<Sample> = xs
            .iter()
            .map(|x| Sample {
                input: x,
                target: Target::Class(usize::from(x[0] > x[1])),
                reset_memory: true,
            })
            .collect();
        let first = train_step(&mut net, &batch, LossKind::CrossEntropy, &mut opt).unwrap();
        let mut last = first;
        for _ in 0..99 {
            last = train_step(&mut net, &batch, LossKind::CrossEntropy, &mut opt).unwrap();
        }
        assert!(last < first, "{last} !< {first}");
    }

    #[test]
    fn non_finite_loss_aborts_without_update() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_genome(2, 1, &mut rng);
        let mut net = CompiledNetwork::compile(&g, &mut rng).unwrap();
        let before = net.params().to_vec();
        let mut opt = OptimizerState::new(net.param_count(), AdamConfig::default());
        let batch = [Sample { input: &[1.0, 1.0], target: Target::Dense(&[f64::INFINITY]), reset_memory: true }];
        assert!(matches!(
            train_step(&mut net, &batch, LossKind::SmoothL1, &mut opt),
            Err(TrainError::NonFinite { .. })
        ));
        assert_eq!(net.params(), before.as_slice());
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn empty_batch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = CompiledNetwork::compile(&random_genome(2, 1, &mut rng), &mut rng).unwrap();
        let mut opt = OptimizerState::new(net.param_count(), AdamConfig::default());
        assert_eq!(train_step(&mut net, &[], LossKind::SmoothL1, &mut opt), Err(TrainError::EmptyBatch));
    }
}
