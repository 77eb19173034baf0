//! First-collision time of two random walkers on the TAG torus.
use funcnet::env::tag::tag_calibrate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let sims: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let c = tag_calibrate(sims, 12, 12, 10_000, &mut ChaCha8Rng::seed_from_u64(0));
    println!("{} walks: {} collided, {} censored", c.runs, c.collided, c.censored);
    println!("mean {:.2} steps, std {:.2}", c.mean_steps, c.std_steps);
    // every move adds 1 to (row + col) mod 3, so the difference between the
    // walkers only changes between the two half-steps of a round
    println!("collided fraction {:.3} (at most 2/3 can ever meet)", c.collided as f64 / c.runs as f64);
}
