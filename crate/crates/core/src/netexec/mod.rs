//! Executable networks compiled from genomes.
//!
//! Each network input passes through its own affine map and a ReLU (a grouped
//! convolution with kernel size one). Layers are then evaluated in position
//! order: the connectors of a layer are gathered into one vector and fed to a
//! dense `neurons × fan_in` weight matrix. Hidden layers apply ReLU, the
//! output layer is linear. A connector that reads a layer at the same or a
//! later position takes that layer's output from the previous call, kept in
//! the network's memory.

mod checkpoint;
mod loss;
mod optim;
mod train;

use rand::Rng;
use thiserror::Error;

use crate::genome::{validate, Genome, NodeRef, Violation};

pub use checkpoint::CheckpointError;
pub use loss::{loss, loss_and_grad, LossError, LossKind, Target};
pub use optim::{AdamConfig, OptimizerState};
pub use train::{batch_gradient, batch_gradient_observed, train_step, train_step_observed, Sample, TrainError};

#[derive(Debug, Error, PartialEq)]
pub enum ExecError {
    #[error("genome is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("expected {expected} inputs, got {found}")]
    InputLength { expected: usize, found: usize },
}

/// Where a connector reads its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Post-activation value of a network input.
    Input(usize),
    /// A neuron computed earlier in the same step (global neuron index).
    Current(usize),
    /// A neuron's output from the previous step.
    Memory(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerOp {
    pub neurons: usize,
    pub slots: Vec<Slot>,
    /// Offset of the row-major weight matrix in the parameter store.
    pub weights: usize,
    pub bias: usize,
    /// Global index of this layer's first neuron.
    pub first_neuron: usize,
    /// Offset of this layer's gathered inputs in the gather buffer.
    pub gather: usize,
    pub hidden: bool,
}

impl LayerOp {
    pub fn fan_in(&self) -> usize {
        self.slots.len()
    }
}

#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    num_inputs: usize,
    num_outputs: usize,
    plan: Vec<LayerOp>,
    params: Vec<f64>,
    memory: Vec<f64>,
    /// Inputs after their affine + ReLU, followed by every neuron output.
    acts: Vec<f64>,
    gathered: Vec<f64>,
    digest: [u8; 32],
    grad_scratch: Vec<f64>,
    dacts_scratch: Vec<f64>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

impl CompiledNetwork {
    /// Build the evaluation plan for a valid genome and initialise parameters.
    pub fn compile<R: Rng + ?Sized>(genome: &Genome, rng: &mut R) -> Result<Self, ExecError> {
        let violations = validate(genome);
        if !violations.is_empty() {
            return Err(ExecError::Invalid(violations));
        }

        let mut first = Vec::with_capacity(genome.layers.len());
        let mut total = 0;
        for l in &genome.layers {
            first.push(total);
            total += l.neurons;
        }

        let ni = genome.num_inputs;
        let mut offset = 2 * ni;
        let mut gather = 0;
        let mut plan = Vec::with_capacity(genome.layers.len());
        let out_pos = genome.output_position();
        for (p, l) in genome.layers.iter().enumerate() {
            let slots: Vec<Slot> = l
                .connectors
                .iter()
                .map(|c| match c.source {
                    NodeRef::Input(i) => Slot::Input(i),
                    NodeRef::Neuron { layer, index } => {
                        let q = genome.position_of(layer).expect("validated source");
                        if q < p {
                            Slot::Current(first[q] + index)
                        } else {
                            Slot::Memory(first[q] + index)
                        }
                    }
                })
                .collect();
            let weights = offset;
            offset += l.neurons * slots.len();
            let bias = offset;
            offset += l.neurons;
            let fan_in = slots.len();
            plan.push(LayerOp {
                neurons: l.neurons,
                slots,
                weights,
                bias,
                first_neuron: first[p],
                gather,
                hidden: p != out_pos,
            });
            gather += fan_in;
        }

        let mut net = CompiledNetwork {
            num_inputs: ni,
            num_outputs: genome.num_outputs,
            plan,
            params: vec![0.0; offset],
            memory: vec![0.0; total],
            acts: vec![0.0; ni + total],
            gathered: vec![0.0; gather],
            digest: genome.digest(),
            grad_scratch: vec![0.0; offset],
            dacts_scratch: vec![0.0; ni + total],
        };
        net.init_params(rng);
        Ok(net)
    }

    /// He-uniform weights, zero biases, identity input maps, zero memory.
    pub fn init_params<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let ni = self.num_inputs;
        self.params[..ni].fill(1.0);
        self.params[ni..2 * ni].fill(0.0);
        for op in &self.plan {
            let fan_in = op.fan_in();
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in &mut self.params[op.weights..op.weights + op.neurons * fan_in] {
                *w = rng.gen_range(-bound..=bound);
            }
            self.params[op.bias..op.bias + op.neurons].fill(0.0);
        }
        self.memory.fill(0.0);
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn plan(&self) -> &[LayerOp] {
        &self.plan
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn genome_digest(&self) -> [u8; 32] {
        self.digest
    }

    /// (scale, offset) of network input `i`.
    pub fn input_affine(&self, i: usize) -> (f64, f64) {
        (self.params[i], self.params[self.num_inputs + i])
    }

    /// Weight matrix (row-major, `neurons × fan_in`) and bias of the layer at `position`.
    pub fn layer_params(&self, position: usize) -> (&[f64], &[f64]) {
        let op = &self.plan[position];
        (
            &self.params[op.weights..op.weights + op.neurons * op.fan_in()],
            &self.params[op.bias..op.bias + op.neurons],
        )
    }

    pub fn memory(&self) -> &[f64] {
        &self.memory
    }

    pub fn set_memory(&mut self, memory: &[f64]) {
        self.memory.copy_from_slice(memory);
    }

    pub fn reset_memory(&mut self) {
        self.memory.fill(0.0);
    }

    pub fn memory_slot_count(&self) -> usize {
        self.plan
            .iter()
            .flat_map(|op| &op.slots)
            .filter(|s| matches!(s, Slot::Memory(_)))
            .count()
    }

    /// Evaluate one step and store this step's outputs as the next step's memory.
    pub fn forward(&mut self, input: &[f64]) -> Result<&[f64], ExecError> {
        if input.len() != self.num_inputs {
            return Err(ExecError::InputLength {
                expected: self.num_inputs,
                found: input.len(),
            });
        }
        let ni = self.num_inputs;
        let CompiledNetwork {
            plan,
            params,
            memory,
            acts,
            gathered,
            ..
        } = self;

        for i in 0..ni {
            acts[i] = relu(params[i] * input[i] + params[ni + i]);
        }
        for op in plan.iter() {
            let fan_in = op.slots.len();
            let g = &mut gathered[op.gather..op.gather + fan_in];
            for (v, slot) in g.iter_mut().zip(&op.slots) {
                *v = match *slot {
                    Slot::Input(i) => acts[i],
                    Slot::Current(j) => acts[ni + j],
                    Slot::Memory(j) => memory[j],
                };
            }
            let w = &params[op.weights..op.weights + op.neurons * fan_in];
            let b = &params[op.bias..op.bias + op.neurons];
            let out = &mut acts[ni + op.first_neuron..ni + op.first_neuron + op.neurons];
            for (j, y) in out.iter_mut().enumerate() {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                let z = b[j] + row.iter().zip(g.iter()).map(|(a, x)| a * x).sum::<f64>();
                *y = if op.hidden { relu(z) } else { z };
            }
        }
        memory.copy_from_slice(&acts[ni..]);
        Ok(self.outputs())
    }

    /// Outputs of the most recent [`forward`](Self::forward) call.
    pub fn outputs(&self) -> &[f64] {
        let op = self.plan.last().expect("network has layers");
        let start = self.num_inputs + op.first_neuron;
        &self.acts[start..start + op.neurons]
    }

    /// Accumulate into `grads` the gradient of `dot(d_out, outputs)` for the
    /// most recent forward call, given the raw `input` it was called with.
    /// Memory reads are constants.
    pub(crate) fn backward_last(&mut self, input: &[f64], d_out: &[f64]) {
        let ni = self.num_inputs;
        let CompiledNetwork {
            plan,
            params,
            acts,
            gathered,
            grad_scratch,
            dacts_scratch,
            ..
        } = self;
        let dacts = dacts_scratch;
        dacts.fill(0.0);
        let out = plan.last().expect("network has layers");
        dacts[ni + out.first_neuron..ni + out.first_neuron + out.neurons].copy_from_slice(d_out);

        for op in plan.iter().rev() {
            let fan_in = op.slots.len();
            let g = &gathered[op.gather..op.gather + fan_in];
            let w = &params[op.weights..op.weights + op.neurons * fan_in];
            for j in 0..op.neurons {
                let k = ni + op.first_neuron + j;
                let mut dz = dacts[k];
                if op.hidden && acts[k] <= 0.0 {
                    dz = 0.0;
                }
                if dz == 0.0 {
                    continue;
                }
                grad_scratch[op.bias + j] += dz;
                let gw = &mut grad_scratch[op.weights + j * fan_in..op.weights + (j + 1) * fan_in];
                for (gw, x) in gw.iter_mut().zip(g) {
                    *gw += dz * x;
                }
                let row = &w[j * fan_in..(j + 1) * fan_in];
                for (slot, wv) in op.slots.iter().zip(row) {
                    match *slot {
                        Slot::Input(i) => dacts[i] += dz * wv,
                        Slot::Current(n) => dacts[ni + n] += dz * wv,
                        Slot::Memory(_) => {}
                    }
                }
            }
        }
        for i in 0..ni {
            if acts[i] > 0.0 {
                grad_scratch[i] += dacts[i] * input[i];
                grad_scratch[ni + i] += dacts[i];
            }
        }
    }
}
