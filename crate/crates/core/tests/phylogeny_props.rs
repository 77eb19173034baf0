use std::collections::HashMap;

use funcnet::phylogeny::{lineage_bounds, NodeRole, PhyloTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random forest plus an independent parent map.
fn random_tree(seed: u64) -> (PhyloTree, HashMap<u64, Option<u64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = PhyloTree::new();
    let mut parent = HashMap::new();
    let mut born: Vec<(u64, u32)> = Vec::new();
    let mut next = 1;
    for _ in 0..rng.gen_range(1..6) {
        t.add_root(next, 0, NodeRole::Evolved).unwrap();
        parent.insert(next, None);
        born.push((next, 0));
        next += 1;
    }
    for g in 1..rng.gen_range(1..8) {
        let older: Vec<u64> = born.iter().filter(|b| b.1 < g).map(|b| b.0).collect();
        for _ in 0..rng.gen_range(0..6) {
            let id = next;
            next += 1;
            if rng.gen_bool(0.2) {
                t.add_root(id, g, NodeRole::Random).unwrap();
                parent.insert(id, None);
            } else {
                let p = older[rng.gen_range(0..older.len())];
                t.add_child(p, id, g, NodeRole::Evolved).unwrap();
                parent.insert(id, Some(p));
            }
            born.push((id, g));
        }
    }
    (t, parent)
}

fn subtree_size(parent: &HashMap<u64, Option<u64>>, root: u64) -> usize {
    parent
        .keys()
        .filter(|&&id| {
            let mut cur = Some(id);
            while let Some(c) = cur {
                if c == root {
                    return true;
                }
                cur = parent[&c];
            }
            false
        })
        .count()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn descendants_equal_subtree_edges(seed in any::<u64>()) {
        let (t, parent) = random_tree(seed);
        let mut total = 0;
        for (&id, p) in &parent {
            let d = t.descendants_count(id).unwrap();
            prop_assert_eq!(d, subtree_size(&parent, id) - 1);
            if p.is_none() {
                total += d;
            }
        }
        prop_assert_eq!(total, t.edge_count());
    }

    #[test]
    fn log_round_trip(seed in any::<u64>()) {
        let (t, _) = random_tree(seed);
        prop_assert_eq!(PhyloTree::from_log(&t.to_log()).unwrap(), t);
    }
}

#[test]
fn bounds_grow_with_horizon() {
    assert_eq!(lineage_bounds(2, 3).unwrap(), (8, 14));
    for alpha in [2u64, 4, 6] {
        let mut last = (0, 0);
        for n in 1..=8 {
            let (lo, hi) = lineage_bounds(alpha, n).unwrap();
            // the lower bound may exceed the upper one for tiny horizons
            assert!(lo > last.0 && hi > last.1);
            last = (lo, hi);
        }
    }
}
