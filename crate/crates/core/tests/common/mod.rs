//! Shared helpers for the integration tests: a node-by-node interpreter used
//! as an oracle for compiled networks, and small-genome generators.
#![allow(dead_code)]

use funcnet::genome::{mutate, random_genome, Genome, NodeRef};
use funcnet::netexec::{batch_gradient, loss, CompiledNetwork, LossKind, Sample, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar interpreter over the genome graph with its own copy of the weights.
pub struct Interpreter<'g> {
    genome: &'g Genome,
    scale: Vec<f64>,
    offset: Vec<f64>,
    weights: Vec<Vec<Vec<f64>>>,
    bias: Vec<Vec<f64>>,
    /// Previous step's neuron outputs, per layer position.
    prev: Vec<Vec<f64>>,
}

impl<'g> Interpreter<'g> {
    pub fn new(genome: &'g Genome, net: &CompiledNetwork) -> Self {
        let ni = genome.num_inputs;
        let (scale, offset) = (0..ni).map(|i| net.input_affine(i)).unzip();
        let mut weights = Vec::new();
        let mut bias = Vec::new();
        for (p, layer) in genome.layers.iter().enumerate() {
            let (w, b) = net.layer_params(p);
            let fan = layer.connectors.len();
            weights.push((0..layer.neurons).map(|j| w[j * fan..(j + 1) * fan].to_vec()).collect());
            bias.push(b.to_vec());
        }
        let prev = genome.layers.iter().map(|l| vec![0.0; l.neurons]).collect();
        Interpreter { genome, scale, offset, weights, bias, prev }
    }

    pub fn step(&mut self, x: &[f64]) -> Vec<f64> {
        let g = self.genome;
        let a: Vec<f64> = (0..g.num_inputs).map(|i| (self.scale[i] * x[i] + self.offset[i]).max(0.0)).collect();
        let mut cur: Vec<Vec<f64>> = g.layers.iter().map(|l| vec![0.0; l.neurons]).collect();
        let last = g.layers.len() - 1;
        for (p, layer) in g.layers.iter().enumerate() {
            let vals: Vec<f64> = layer
                .connectors
                .iter()
                .map(|c| match c.source {
                    NodeRef::Input(i) => a[i],
                    NodeRef::Neuron { layer: src, index } => {
                        let q = g.position_of(src).unwrap();
                        if q >= p {
                            self.prev[q][index]
                        } else {
                            cur[q][index]
                        }
                    }
                })
                .collect();
            for j in 0..layer.neurons {
                let mut z = self.bias[p][j];
                for (k, v) in vals.iter().enumerate() {
                    z += self.weights[p][j][k] * v;
                }
                cur[p][j] = if p == last { z } else { z.max(0.0) };
            }
        }
        let out = cur[last].clone();
        self.prev = cur;
        out
    }
}

/// A random genome with at most `max_layers` layers and `max_width` neurons per layer.
pub fn small_genome<R: Rng>(rng: &mut R, max_layers: usize, max_width: usize) -> Genome {
    loop {
        let ni = rng.gen_range(1..=5);
        let no = rng.gen_range(1..=4);
        let mut g = random_genome(ni, no, rng);
        for _ in 0..rng.gen_range(0..6) {
            g = mutate(&g, rng).genome;
        }
        if g.layers.len() <= max_layers && g.layers.iter().all(|l| l.neurons <= max_width) {
            return g;
        }
    }
}

/// Backprop against central finite differences. Memory entering the first
/// sample is held fixed, matching the truncated gradient through recurrent edges.
const EPS: f64 = 1e-5;

struct Case {
    net: CompiledNetwork,
    memory: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    classes: Vec<usize>,
    dense: Vec<Vec<f64>>,
    kind: LossKind,
}

impl Case {
    fn new(seed: u64) -> Case {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = small_genome(&mut rng, 6, 8);
        let mut net = CompiledNetwork::compile(&g, &mut rng).unwrap();
        // zero biases put pre-activations exactly on the ReLU kink
        for p in net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let memory = (0..net.memory().len()).map(|_| rng.gen_range(0.0..1.5)).collect();
        let b = rng.gen_range(1..5);
        let inputs = (0..b).map(|_| (0..g.num_inputs).map(|_| rng.gen_range(-1.5..1.5)).collect()).collect();
        let classes = (0..b).map(|_| rng.gen_range(0..g.num_outputs)).collect();
        let dense = (0..b).map(|_| (0..g.num_outputs).map(|_| rng.gen_range(-0.4..0.4)).collect()).collect();
        let kind = if seed % 2 == 0 { LossKind::CrossEntropy } else { LossKind::SmoothL1 };
        Case { net, memory, inputs, classes, dense, kind }
    }

    fn samples(&self) -> Vec<Sample<'_>> {
        (0..self.inputs.len())
            .map(|k| Sample {
                input: &self.inputs[k],
                target: match self.kind {
                    LossKind::CrossEntropy => Target::Class(self.classes[k]),
                    LossKind::SmoothL1 => Target::Dense(&self.dense[k]),
                },
                // the first sample reads the preset memory, the rest start clear
                reset_memory: k > 0,
            })
            .collect()
    }

    /// Mean loss computed by plain forward passes.
    fn loss_at(&mut self, params: &[f64]) -> f64 {
        let mut net = self.net.clone();
        net.params_mut().copy_from_slice(params);
        net.set_memory(&self.memory);
        let samples = self.samples();
        let mut total = 0.0;
        for s in &samples {
            if s.reset_memory {
                net.reset_memory();
            }
            let out = net.forward(s.input).unwrap().to_vec();
            total += loss(&out, s.target, self.kind).unwrap();
        }
        total / samples.len() as f64
    }
}

pub fn relative_error(seed: u64) -> f64 {
    let mut case = Case::new(seed);
    let mut net = case.net.clone();
    net.set_memory(&case.memory);
    let samples = case.samples();
    batch_gradient(&mut net, &samples, case.kind).unwrap();
    let analytic = net.last_gradient().to_vec();
    drop(samples);
    let base = case.net.params().to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] += EPS;
        let up = case.loss_at(&p);
        p[i] -= 2.0 * EPS;
        let down = case.loss_at(&p);
        let numeric = (up - down) / (2.0 * EPS);
        let scale = analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[i] - numeric).abs() / scale);
    }
    worst
}

