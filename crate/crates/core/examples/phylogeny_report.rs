//! Run a short TAG experiment and summarize its lineages.
use funcnet::env::tag::Specialization;
use funcnet::evolution::{run_experiment, ExperimentSpec, Task, TaskContext};
use funcnet::phylogeny::{lineage_bounds, SeriesFilter};

fn main() {
    let mut spec = ExperimentSpec::new(Task::Tag(Specialization::Prey), 9, 6, 3);
    spec.schedule.episodes_per_generation = 10;
    let result = run_experiment(&TaskContext::new(spec, None).unwrap()).unwrap();
    let tree = &result.tree;
    let last = tree.last_generation().unwrap();
    println!("{} individuals, {} edges over {} generations", tree.len(), tree.edge_count(), last + 1);
    if let Some((root, count)) = tree.dominant_lineage() {
        let (lo, hi) = lineage_bounds(2, last).unwrap();
        println!("dominant lineage {root}: {count} descendants (super-dominant range [{lo}, {hi}])");
    }
    println!("parents  {:?}", tree.dominant_series(SeriesFilter::Parents, last));
    println!("children {:?}", tree.dominant_series(SeriesFilter::Children, last));
    println!("random   {:?}", tree.dominant_series(SeriesFilter::Random, last));
    println!("\n{}", tree.to_dot());
}
