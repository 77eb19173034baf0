//! Play one TAG episode with a fixed action pattern and print the step log.
use funcnet::env::tag::{random_permutation, TagConfig, TagEpisode};
use funcnet::env::{replay, Episodic};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let perm = random_permutation(&mut rng);
    let mut ep = TagEpisode::new(TagConfig::default(), perm, &mut rng);
    ep.reset(&mut rng);
    let actions: Vec<usize> = (0..256).map(|k| [0, 1, 2, 2, 1, 0][k % 6]).collect();
    let log = replay(&mut ep, &actions, &mut rng).unwrap();
    for r in log.iter().take(20) {
        println!("{r}");
    }
    println!("... {} steps, score {:.3}, per role {:?}", log.len(), ep.score(), ep.role_tally());
}
