//! Compile a genome and fit a small classification problem with Adam.
use funcnet::genome::random_genome;
use funcnet::netexec::{train_step, AdamConfig, CompiledNetwork, LossKind, OptimizerState, Sample, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_genome(2, 2, &mut rng);
    let mut net = CompiledNetwork::compile(&g, &mut rng).unwrap();
    println!("{} parameters over {} layers", net.param_count(), net.plan().len());

    // label: is the point inside the unit circle
    let points: Vec<[f64; 2]> = (0..256).map(|_| [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]).collect();
    let batch: Vec<Sample> = points
        .iter()
        .map(|p| Sample {
            input: p,
            target: Target::Class(usize::from(p[0] * p[0] + p[1] * p[1] < 1.0)),
            reset_memory: true,
        })
        .collect();
    let mut opt = OptimizerState::new(net.param_count(), AdamConfig { lr: 1e-2, ..Default::default() });
    for epoch in 0..=400 {
        let loss = train_step(&mut net, &batch, LossKind::CrossEntropy, &mut opt).unwrap();
        if epoch % 100 == 0 {
            println!("epoch {epoch:>3}: loss {loss:.4}");
        }
    }
    let correct = batch
        .iter()
        .filter(|s| {
            net.reset_memory();
            let out = net.forward(s.input).unwrap();
            let class = usize::from(out[1] > out[0]);
            matches!(s.target, Target::Class(c) if c == class)
        })
        .count();
    println!("training accuracy {:.3}", correct as f64 / batch.len() as f64);
}
