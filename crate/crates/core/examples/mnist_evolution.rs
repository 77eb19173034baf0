//! A short MNIST run. Needs the IDX files in `FUNCNET_MNIST_DIR`.
use std::sync::Arc;

use funcnet::env::mnist::{MnistSet, Split};
use funcnet::evolution::{run_experiment_with, ExperimentSpec, MnistData, Task, TaskContext};

fn main() {
    let Some(dir) = std::env::var_os("FUNCNET_MNIST_DIR") else {
        eprintln!("set FUNCNET_MNIST_DIR to a directory with the MNIST IDX files");
        return;
    };
    let dir = std::path::PathBuf::from(dir);
    let train = MnistSet::load(&dir, Split::Train).expect("training split");
    let test = MnistSet::load(&dir, Split::Test).ok();
    let mut spec = ExperimentSpec::new(Task::Mnist, 9, 10, 1);
    spec.controls = Some(1);
    let ctx = TaskContext::new(spec, Some(Arc::new(MnistData { train, test }))).unwrap();
    run_experiment_with(&ctx, |row, _| {
        println!(
            "gen {:>2}: best loss {:.4} (accuracy {:.3}), control loss {:.4}, {} batches",
            row.generation, row.best_parent_loss, row.best_parent_score, row.control_loss, row.batches_consumed
        );
    })
    .unwrap();
}
