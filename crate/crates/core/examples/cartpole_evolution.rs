//! Evolve cart-pole controllers until one greedy episode balances 300 steps.
use funcnet::evolution::{run_experiment_with, ExperimentSpec, StopRule, Task, TaskContext};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut spec = ExperimentSpec::new(Task::CartPole, 25, 30, seed);
    spec.stop = StopRule::WindowSuccess(1.0 / spec.schedule.exploitation_episodes() as f64);
    let ctx = TaskContext::new(spec, None).unwrap();
    let result = run_experiment_with(&ctx, |row, s| {
        println!(
            "gen {:>2}: best parent {:.3}, control {:.3}, best window success {:.2}",
            row.generation, row.best_parent_score, row.control_score, s.best_window_success
        );
    })
    .unwrap();
    let best = result.best.unwrap();
    println!("best member {} (generation {}): {} layers", best.id, best.generation, best.genome.layers.len());
}
