//! Draw a random genome, mutate it a few times and print the text form.
use funcnet::genome::{mutate, random_genome, validate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut g = random_genome(4, 2, &mut rng);
    println!("layers {}, hidden neurons {}, recurrent edges {}", g.layers.len(), g.hidden_neurons(), g.recurrent_edge_count());
    for step in 1..=5 {
        let out = mutate(&g, &mut rng);
        g = out.genome;
        println!("mutation {step}: {:?} -> {} layers, {} connectors", out.kind, g.layers.len(), g.connector_count());
    }
    assert!(validate(&g).is_empty());
    println!("\n{}", g.to_text());
    println!("digest {}", g.digest_hex());
}
