//! Lineage records across generations.
//!
//! Nodes are individuals, stamped with the generation they were born in.
//! A parent kept alive across several generations keeps its node, so its
//! children may be born several generations after it. The descendant count
//! of a lineage is half the degree sum over its subtree, i.e. its edge count.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRole {
    /// Initial random population and all mutated offspring.
    Evolved,
    Control,
    /// Random genome injected after generation 0.
    Random,
}

impl NodeRole {
    pub fn label(self) -> &'static str {
        match self {
            NodeRole::Evolved => "evolved",
            NodeRole::Control => "control",
            NodeRole::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "evolved" => Some(NodeRole::Evolved),
            "control" => Some(NodeRole::Control),
            "random" => Some(NodeRole::Random),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhyloNode {
    pub id: u64,
    pub generation: u32,
    pub role: NodeRole,
    pub parent: Option<u64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhyloError {
    #[error("id {0} already recorded")]
    DuplicateId(u64),
    #[error("parent {0} is not in the tree")]
    UnknownParent(u64),
    #[error("node {0} is not in the tree")]
    UnknownNode(u64),
    #[error("child {child} (generation {child_gen}) is not younger than parent {parent} (generation {parent_gen})")]
    NotYounger { parent: u64, parent_gen: u32, child: u64, child_gen: u32 },
    #[error("alpha must be at least 2")]
    Alpha,
    #[error("horizon must be positive")]
    Horizon,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PhyloTree {
    nodes: Vec<PhyloNode>,
    index: HashMap<u64, usize>,
    children: HashMap<u64, Vec<u64>>,
}

/// Which individuals a descendant series is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFilter {
    /// Every non-control node born in the generation.
    Evolved,
    /// Individuals chosen as parents in the generation (they have children born in the next one).
    Parents,
    /// Offspring born in the generation.
    Children,
    /// Random injections born in the generation.
    Random,
    /// Lineage roots born in the generation, controls excluded.
    Roots,
    All,
}

impl PhyloTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[PhyloNode] {
        &self.nodes
    }

    pub fn node(&self, id: u64) -> Option<&PhyloNode> {
        self.index.get(&id).map(|&k| &self.nodes[k])
    }

    pub fn children(&self, id: u64) -> &[u64] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.parent.is_some()).count()
    }

    pub fn roots(&self) -> impl Iterator<Item = &PhyloNode> {
        self.nodes.iter().filter(|n| n.parent.is_none())
    }

    pub fn edges(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.nodes.iter().filter_map(|n| n.parent.map(|p| (p, n.id)))
    }

    pub fn last_generation(&self) -> Option<u32> {
        self.nodes.iter().map(|n| n.generation).max()
    }

    pub fn add_root(&mut self, id: u64, generation: u32, role: NodeRole) -> Result<(), PhyloError> {
        self.insert(PhyloNode { id, generation, role, parent: None })
    }

    pub fn add_child(&mut self, parent: u64, id: u64, generation: u32, role: NodeRole) -> Result<(), PhyloError> {
        self.insert(PhyloNode { id, generation, role, parent: Some(parent) })
    }

    fn insert(&mut self, node: PhyloNode) -> Result<(), PhyloError> {
        if self.index.contains_key(&node.id) {
            return Err(PhyloError::DuplicateId(node.id));
        }
        if let Some(p) = node.parent {
            let parent = self.node(p).ok_or(PhyloError::UnknownParent(p))?;
            if parent.generation >= node.generation {
                return Err(PhyloError::NotYounger {
                    parent: p,
                    parent_gen: parent.generation,
                    child: node.id,
                    child_gen: node.generation,
                });
            }
            self.children.entry(p).or_default().push(node.id);
        }
        self.index.insert(node.id, self.nodes.len());
        self.nodes.push(node);
        Ok(())
    }

    /// Append one generation: `(parent, child)` pairs and new roots. Nothing
    /// is recorded if any entry is rejected.
    pub fn record_generation(
        &mut self,
        generation: u32,
        pairs: &[(u64, u64)],
        roots: &[(u64, NodeRole)],
    ) -> Result<(), PhyloError> {
        let mut staged = self.clone();
        for &(id, role) in roots {
            staged.add_root(id, generation, role)?;
        }
        for &(parent, child) in pairs {
            staged.add_child(parent, child, generation, NodeRole::Evolved)?;
        }
        *self = staged;
        Ok(())
    }

    /// Subtree of `root` restricted to nodes born at or before `horizon`.
    fn subtree(&self, root: u64, horizon: u32) -> Vec<u64> {
        let mut out = vec![root];
        let mut k = 0;
        while k < out.len() {
            for &c in self.children(out[k]) {
                if self.nodes[self.index[&c]].generation <= horizon {
                    out.push(c);
                }
            }
            k += 1;
        }
        out
    }

    /// Half the degree sum over the lineage subtree of `root`.
    pub fn descendants_count(&self, root: u64) -> Result<usize, PhyloError> {
        self.descendants_until(root, u32::MAX)
    }

    pub fn descendants_until(&self, root: u64, horizon: u32) -> Result<usize, PhyloError> {
        if !self.index.contains_key(&root) {
            return Err(PhyloError::UnknownNode(root));
        }
        let nodes = self.subtree(root, horizon);
        let inside: std::collections::HashSet<u64> = nodes.iter().copied().collect();
        let degree_sum: usize = nodes
            .iter()
            .map(|&id| {
                let down = self.children(id).iter().filter(|c| inside.contains(c)).count();
                let up = usize::from(id != root && self.node(id).and_then(|n| n.parent).is_some_and(|p| inside.contains(&p)));
                down + up
            })
            .sum();
        Ok(degree_sum / 2)
    }

    /// The lineage root an individual descends from.
    pub fn root_of(&self, id: u64) -> Option<u64> {
        let mut cur = self.node(id)?;
        while let Some(p) = cur.parent {
            cur = self.node(p)?;
        }
        Some(cur.id)
    }

    /// Non-control root with the most descendants so far (ties to the lower id).
    pub fn dominant_lineage(&self) -> Option<(u64, usize)> {
        let mut best: Option<(u64, usize)> = None;
        for r in self.roots().filter(|r| r.role != NodeRole::Control) {
            let c = self.descendants_count(r.id).expect("root exists");
            if best.is_none_or(|(bid, bc)| c > bc || (c == bc && r.id < bid)) {
                best = Some((r.id, c));
            }
        }
        best
    }

    fn matches(&self, node: &PhyloNode, generation: u32, filter: SeriesFilter) -> bool {
        match filter {
            SeriesFilter::Parents => self
                .children(node.id)
                .iter()
                .any(|c| self.node(*c).is_some_and(|c| c.generation == generation + 1)),
            _ if node.generation != generation => false,
            SeriesFilter::Evolved => node.role != NodeRole::Control,
            SeriesFilter::Children => node.parent.is_some(),
            SeriesFilter::Random => node.role == NodeRole::Random,
            SeriesFilter::Roots => node.parent.is_none() && node.role != NodeRole::Control,
            SeriesFilter::All => true,
        }
    }

    /// For each generation `g` in `0..=horizon`, the summed descendant counts
    /// (within the horizon) of the individuals selected by `filter` at `g`.
    pub fn dominant_series(&self, filter: SeriesFilter, horizon: u32) -> Vec<usize> {
        (0..=horizon)
            .map(|g| {
                self.nodes
                    .iter()
                    .filter(|n| self.matches(n, g, filter))
                    .map(|n| self.descendants_until(n.id, horizon).expect("node exists"))
                    .sum()
            })
            .collect()
    }

    /// One line per node: `gen,id,role,parent_id|-`, in recording order.
    pub fn to_log(&self) -> String {
        let mut s = String::new();
        for n in &self.nodes {
            let parent = n.parent.map_or("-".to_string(), |p| p.to_string());
            let _ = writeln!(s, "{},{},{},{}", n.generation, n.id, n.role.label(), parent);
        }
        s
    }

    pub fn from_log(text: &str) -> Result<Self, PhyloError> {
        let mut t = PhyloTree::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: &str| PhyloError::Parse { line: k + 1, message: message.to_string() };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(bad("expected `gen,id,role,parent_id|-`"));
            }
            let generation = f[0].parse().map_err(|_| bad("bad generation"))?;
            let id = f[1].parse().map_err(|_| bad("bad id"))?;
            let role = NodeRole::parse(f[2]).ok_or_else(|| bad("bad role"))?;
            match f[3] {
                "-" => t.add_root(id, generation, role)?,
                p => t.add_child(p.parse().map_err(|_| bad("bad parent id"))?, id, generation, role)?,
            }
        }
        Ok(t)
    }

    /// Graphviz digraph with one rank per generation.
    pub fn to_dot(&self) -> String {
        let mut by_gen: BTreeMap<u32, Vec<&PhyloNode>> = BTreeMap::new();
        for n in &self.nodes {
            by_gen.entry(n.generation).or_default().push(n);
        }
        let mut s = String::from("digraph phylogeny {\n  rankdir=TB;\n  node [shape=circle];\n");
        for (g, nodes) in &by_gen {
            let _ = write!(s, "  {{ rank=same; // generation {g}\n");
            for n in nodes {
                let color = match n.role {
                    NodeRole::Evolved => "black",
                    NodeRole::Control => "blue",
                    NodeRole::Random => "green",
                };
                let _ = writeln!(s, "    n{} [label=\"{}\", color={color}];", n.id, n.id);
            }
            s.push_str("  }\n");
        }
        for (p, c) in self.edges() {
            let _ = writeln!(s, "  n{p} -> n{c};");
        }
        s.push_str("}\n");
        s
    }
}

/// Bounds on a lineage's descendant count after `horizon` generations when
/// each parent has `alpha` children: `[α(1+N), (α^{N+1} − 1)/(α − 1) − 1]`.
pub fn lineage_bounds(alpha: u64, horizon: u32) -> Result<(u64, u64), PhyloError> {
    if alpha < 2 {
        return Err(PhyloError::Alpha);
    }
    if horizon == 0 {
        return Err(PhyloError::Horizon);
    }
    let lower = alpha * (1 + horizon as u64);
    let upper = (alpha.pow(horizon + 1) - 1) / (alpha - 1) - 1;
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Generation 0: evolved 1..=8 and control 9. Parents 1 and 5 reproduce
    /// in generations 1 and 2; a random injection from generation 1 (id 14)
    /// takes over from 5 as the second parent in generation 3.
    pub(crate) fn toy_tree() -> PhyloTree {
        let mut t = PhyloTree::new();
        let roots: Vec<(u64, NodeRole)> = (1..=8).map(|i| (i, NodeRole::Evolved)).chain([(9, NodeRole::Control)]).collect();
        t.record_generation(0, &[], &roots).unwrap();
        t.record_generation(1, &[(1, 10), (1, 11), (5, 12), (5, 13)], &[(14, NodeRole::Random), (15, NodeRole::Random)])
            .unwrap();
        t.record_generation(2, &[(1, 16), (1, 17), (5, 18), (5, 19)], &[(20, NodeRole::Random), (21, NodeRole::Random)])
            .unwrap();
        t.record_generation(3, &[(1, 22), (1, 23), (14, 24), (14, 25)], &[(26, NodeRole::Random), (27, NodeRole::Random)])
            .unwrap();
        t
    }

    #[test]
    fn toy_tree_counts() {
        let t = toy_tree();
        assert_eq!(t.descendants_count(1).unwrap(), 6);
        assert_eq!(t.descendants_count(5).unwrap(), 4);
        assert_eq!(t.descendants_count(14).unwrap(), 2);
        assert_eq!(t.descendants_count(9).unwrap(), 0);
        assert_eq!(t.edge_count(), 12);
        assert_eq!(t.dominant_lineage(), Some((1, 6)));
    }

    #[test]
    fn generation_zero_only() {
        let mut t = PhyloTree::new();
        let roots: Vec<_> = (1..=9).map(|i| (i, NodeRole::Evolved)).collect();
        t.record_generation(0, &[], &roots).unwrap();
        assert_eq!((t.len(), t.edge_count()), (9, 0));
        t.record_generation(1, &[(1, 10), (1, 11), (2, 12), (2, 13)], &[]).unwrap();
        assert_eq!((t.len(), t.edge_count()), (13, 4));
    }

    #[test]
    fn bad_records_rejected_atomically() {
        let mut t = toy_tree();
        let before = t.clone();
        assert_eq!(t.record_generation(4, &[(1, 30), (1, 10)], &[]), Err(PhyloError::DuplicateId(10)));
        assert_eq!(t, before);
        assert_eq!(t.record_generation(4, &[(99, 31)], &[]), Err(PhyloError::UnknownParent(99)));
        assert!(matches!(t.add_child(22, 32, 3, NodeRole::Evolved), Err(PhyloError::NotYounger { .. })));
    }

    #[test]
    fn bounds() {
        assert_eq!(lineage_bounds(2, 3).unwrap(), (8, 14));
        assert_eq!(lineage_bounds(2, 1).unwrap(), (4, 2));
        assert_eq!(lineage_bounds(1, 3), Err(PhyloError::Alpha));
        assert_eq!(lineage_bounds(2, 0), Err(PhyloError::Horizon));
    }

    #[test]
    fn series_semantics() {
        let t = toy_tree();
        assert_eq!(t.dominant_series(SeriesFilter::Roots, 3), vec![10, 2, 0, 0]);
        assert_eq!(t.dominant_series(SeriesFilter::Random, 3), vec![0, 2, 0, 0]);
        // parents of generation 0 are 1 and 5; of generation 2 are 1 and 14
        assert_eq!(t.dominant_series(SeriesFilter::Parents, 3)[0], 10);
        assert_eq!(t.dominant_series(SeriesFilter::Parents, 3)[2], 8);
        assert_eq!(t.dominant_series(SeriesFilter::Children, 3), vec![0, 0, 0, 0]);
        // truncating the horizon drops later edges
        assert_eq!(t.dominant_series(SeriesFilter::Roots, 1), vec![4, 0]);
        let total: usize = t.roots().map(|r| t.descendants_count(r.id).unwrap()).sum();
        assert_eq!(total, t.edge_count());
    }

    #[test]
    fn log_round_trip_and_dot() {
        let t = toy_tree();
        let log = t.to_log();
        assert_eq!(log.lines().next(), Some("0,1,evolved,-"));
        assert!(log.contains("\n3,24,evolved,14\n"));
        assert_eq!(PhyloTree::from_log(&log).unwrap(), t);
        let dot = t.to_dot();
        assert_eq!(dot.matches("rank=same").count(), 4);
        assert_eq!(dot.matches("->").count(), 12);
        assert!(matches!(PhyloTree::from_log("0,1,bogus,-"), Err(PhyloError::Parse { line: 1, .. })));
    }

    #[test]
    fn chain_dot_has_two_edges() {
        let mut t = PhyloTree::new();
        t.add_root(1, 0, NodeRole::Evolved).unwrap();
        t.add_child(1, 2, 1, NodeRole::Evolved).unwrap();
        t.add_child(2, 3, 2, NodeRole::Evolved).unwrap();
        assert_eq!(t.to_dot().matches("->").count(), 2);
        assert_eq!(t.root_of(3), Some(1));
        assert_eq!(t.descendants_count(1).unwrap(), 2);
    }
}
