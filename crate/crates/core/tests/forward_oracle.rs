mod common;

use common::{small_genome, Interpreter};
use funcnet::netexec::CompiledNetwork;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_deviation(seed: u64, steps: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = small_genome(&mut rng, 6, 8);
    let mut net = CompiledNetwork::compile(&g, &mut rng).unwrap();
    let mut oracle = Interpreter::new(&g, &net);
    let mut worst: f64 = 0.0;
    for _ in 0..steps {
        let x: Vec<f64> = (0..g.num_inputs).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let want = oracle.step(&x);
        let got = net.forward(&x).unwrap();
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

#[test]
fn two_hundred_genomes_match_the_interpreter() {
    let worst = (0..200).map(|s| max_deviation(s, 4)).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max deviation {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn compiled_forward_equals_interpreter(seed in any::<u64>(), steps in 1usize..6) {
        prop_assert!(max_deviation(seed, steps) < 1e-6);
    }
}
