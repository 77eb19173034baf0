use std::fs;
use std::path::Path;

use funcnet::cli::{main_with_args, EXIT_CONFIG, EXIT_DATA, EXIT_FAILURE};
use funcnet::evolution::METRICS_HEADER;
use funcnet::genome::random_genome;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut argv = vec!["funcnet"];
    argv.extend_from_slice(args);
    let code = main_with_args(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

const SMALL_TAG: &str = "task = \"tag\"\nn = 9\ngenerations = 3\nseed = 5\n[schedule]\nepisodes_per_generation = 6\n";

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_TAG);
    let out = dir.path().join("out");
    let (code, text) = run(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{text}");
    for f in ["config.snapshot", "metrics.csv", "phylo.log", "best.genome", "best.params", "score_vs_generation.tsv", "loss_vs_batches.tsv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = metrics.lines().collect();
    assert_eq!(lines[0], METRICS_HEADER);
    assert_eq!(lines.len(), 4);
    let best_ever: Vec<f64> = lines[1..].iter().map(|l| l.split(',').nth(5).unwrap().parse().unwrap()).collect();
    assert!(best_ever.windows(2).all(|w| w[0] <= w[1]));

    let (code, text) = run(&["validate-genome", out.join("best.genome").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.starts_with("valid"));
    let (code, text) = run(&["phylo", out.to_str().unwrap(), "--counts"]);
    assert_eq!(code, 0);
    assert!(text.contains("generation\tparents\tchildren\trandom\troots"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_TAG);
    let out = dir.path().join("o");
    let (code, _) = run(&["run", "--config", &cfg, "--generations", "1", "--seed", "9", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let snap = fs::read_to_string(out.join("config.snapshot")).unwrap();
    assert!(snap.contains("generations = 1") && snap.contains("seed = 9"));
    assert_eq!(fs::read_to_string(out.join("metrics.csv")).unwrap().lines().count(), 2);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "n = 10\n");
    assert_eq!(run(&["run", "--config", &bad, "--out", dir.path().join("a").to_str().unwrap()]).0, EXIT_CONFIG);
    let unknown = write_config(dir.path(), "colour = 1\n");
    assert_eq!(run(&["run", "--config", &unknown]).0, EXIT_CONFIG);
    assert_eq!(run(&["run", "--task", "chess"]).0, EXIT_CONFIG);
    assert_eq!(run(&["bogus-verb"]).0, EXIT_CONFIG);

    let missing = dir.path().join("nothing-here");
    let (code, _) = run(&["run", "--task", "mnist", "--n", "9", "--mnist-dir", missing.to_str().unwrap(), "--out", dir.path().join("m").to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA);
    assert_eq!(run(&["phylo", missing.to_str().unwrap()]).0, EXIT_DATA);
    assert_eq!(run(&["validate-genome", missing.to_str().unwrap()]).0, EXIT_DATA);
}

#[test]
fn validate_genome_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let g = random_genome(4, 2, &mut ChaCha8Rng::seed_from_u64(1));
    let good = dir.path().join("good.genome");
    fs::write(&good, g.to_text()).unwrap();
    assert_eq!(run(&["validate-genome", good.to_str().unwrap()]).0, 0);

    let mut broken = g.clone();
    broken.layers.last_mut().unwrap().neurons += 1;
    let bad = dir.path().join("bad.genome");
    fs::write(&bad, broken.to_text()).unwrap();
    let (code, text) = run(&["validate-genome", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(text.contains("violation"), "{text}");
}

#[test]
fn phylo_on_the_toy_tree() {
    let log = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy_tree.log");
    let (code, text) = run(&["phylo", log, "--counts"]);
    assert_eq!(code, 0);
    assert!(text.contains("# edges 12"), "{text}");
    assert!(text.contains("# dominant_lineage 1 6"), "{text}");
    // the roots column sums to the edge count
    let roots: usize = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("generation"))
        .map(|l| l.split('\t').nth(4).unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(roots, 12);

    let (code, dot) = run(&["phylo", log, "--dot"]);
    assert_eq!(code, 0);
    assert!(dot.starts_with("digraph") && dot.contains("n1 -> n10;"));
    assert_eq!(dot.matches("->").count(), 12);
}

#[test]
fn phylo_on_a_roots_only_log() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("phylo.log");
    fs::write(&p, "0,1,evolved,-\n0,2,evolved,-\n0,3,control,-\n").unwrap();
    let (code, text) = run(&["phylo", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(text.contains("# edges 0"));
    assert!(text.contains("0\t0\t0\t0\t0"));
}

#[test]
fn calibrate_tag_reports() {
    let (code, one) = run(&["calibrate-tag", "--sims", "1"]);
    assert_eq!(code, 0);
    assert!(one.contains("runs 1"));
    assert!(one.contains("std_steps 0.000"), "{one}");
    let a = run(&["calibrate-tag", "--sims", "50", "--seed", "3"]).1;
    let b = run(&["calibrate-tag", "--sims", "50", "--seed", "3"]).1;
    assert_eq!(a, b);
}

#[test]
fn mnist_run_on_synthetic_idx_files() {
    use funcnet::env::mnist::{encode_idx, MnistSet, Split};
    use rand::Rng;

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mnist");
    fs::create_dir(&data).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (split, count) in [(Split::Train, 120), (Split::Test, 30)] {
        // the label is written into the brightness of the top-left pixel
        let labels: Vec<u8> = (0..count).map(|_| rng.gen_range(0..10)).collect();
        let mut images = vec![0u8; count * 784];
        for (k, &l) in labels.iter().enumerate() {
            images[k * 784] = 25 * l;
        }
        let set = MnistSet::from_bytes(&encode_idx(&[count, 28, 28], &images), &encode_idx(&[count], &labels)).unwrap();
        set.write(&data, split).unwrap();
    }
    let out = dir.path().join("out");
    let (code, text) = run(&[
        "run", "--task", "mnist", "--n", "9", "--generations", "2", "--seed", "1",
        "--mnist-dir", data.to_str().unwrap(), "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(text.contains("test accuracy"), "{text}");
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let batches: Vec<usize> = metrics.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(batches, vec![24, 48]);
    let snap = fs::read_to_string(out.join("config.snapshot")).unwrap();
    assert!(snap.contains("task = \"mnist\""), "{snap}");
}
