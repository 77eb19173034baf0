//! Graph genomes describing network topology.
//!
//! A genome is an ordered list of layers. Each layer owns a set of
//! *connectors* (input slots, each wired to exactly one source node) and a
//! number of neurons; every connector of a layer feeds every neuron of that
//! layer. The last layer is the output layer. A connector whose source sits
//! in a layer at the same or a later position reads that layer's output from
//! the previous time step (a virtual input).

mod adjacency;
mod mutate;
mod text;
mod validate;

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;

pub use adjacency::{AdjacencyError, AdjacencyNode, AdjacencyView};
pub use mutate::{
    add_connection, add_layer, add_neuron, move_connection, mutate, mutate_add, mutate_rearrange,
    mutate_remove, mutate_with_limits, remove_duplicate_connection, remove_neuron,
    swap_connections, AddKind, GenomeLimits, Infeasible, MutationKind, MutationOutcome,
    RearrangeKind, RemoveKind, RETRY_BUDGET,
};
pub use text::ParseError;
pub use validate::{validate, Violation};

/// Hard cap on the number of layers, output layer included.
pub const MAX_LAYERS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConnectorId(pub u32);

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

impl fmt::Display for ConnectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

/// A node that can feed a connector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Input(usize),
    Neuron { layer: LayerId, index: usize },
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Input(i) => write!(f, "i:{i}"),
            NodeRef::Neuron { layer, index } => write!(f, "n:{}:{index}", layer.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectorGene {
    pub id: ConnectorId,
    pub source: NodeRef,
    pub protected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerGene {
    pub id: LayerId,
    pub neurons: usize,
    /// Neurons `0..protected_neurons` existed when the lineage was founded.
    /// Added neurons are always appended, so the protected ones form a prefix.
    pub protected_neurons: usize,
    pub protected: bool,
    /// Kept sorted by connector id; the order fixes weight column layout.
    pub connectors: Vec<ConnectorGene>,
}

impl LayerGene {
    pub fn fan_in(&self) -> usize {
        self.connectors.len()
    }
}

/// Identifies a genome element for protection bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementId {
    Layer(LayerId),
    Neuron(LayerId, usize),
    Connector(ConnectorId),
}

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementId::Layer(l) => write!(f, "layer {l}"),
            ElementId::Neuron(l, i) => write!(f, "neuron {l}[{i}]"),
            ElementId::Connector(c) => write!(f, "connector {c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Genome {
    pub num_inputs: usize,
    pub num_outputs: usize,
    /// Evaluation order; the last entry is the output layer.
    pub layers: Vec<LayerGene>,
    pub born_generation: u32,
    pub parent_id: Option<u64>,
    pub(crate) next_layer_id: u32,
    pub(crate) next_connector_id: u32,
}

impl Genome {
    /// The fixed control topology: one linear layer, fully connected to the inputs.
    pub fn control(num_inputs: usize, num_outputs: usize) -> Genome {
        assert!(num_inputs >= 1 && num_outputs >= 1);
        let connectors = (0..num_inputs)
            .map(|i| ConnectorGene {
                id: ConnectorId(i as u32),
                source: NodeRef::Input(i),
                protected: true,
            })
            .collect();
        Genome {
            num_inputs,
            num_outputs,
            layers: vec![LayerGene {
                id: LayerId(0),
                neurons: num_outputs,
                protected_neurons: num_outputs,
                protected: true,
                connectors,
            }],
            born_generation: 0,
            parent_id: None,
            next_layer_id: 1,
            next_connector_id: num_inputs as u32,
        }
    }

    pub fn position_of(&self, layer: LayerId) -> Option<usize> {
        self.layers.iter().position(|l| l.id == layer)
    }

    pub fn layer(&self, layer: LayerId) -> Option<&LayerGene> {
        self.layers.iter().find(|l| l.id == layer)
    }

    pub fn output_position(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn output_layer(&self) -> &LayerGene {
        self.layers.last().expect("genome has no layers")
    }

    /// N_p: total neuron count outside the output layer.
    pub fn hidden_neurons(&self) -> usize {
        self.layers[..self.layers.len().saturating_sub(1)]
            .iter()
            .map(|l| l.neurons)
            .sum()
    }

    /// N_c: total connector count.
    pub fn connector_count(&self) -> usize {
        self.layers.iter().map(|l| l.connectors.len()).sum()
    }

    /// Whether a connector with `source`, placed in the layer at `position`,
    /// reads from the previous time step.
    pub fn is_recurrent_at(&self, position: usize, source: NodeRef) -> bool {
        match source {
            NodeRef::Input(_) => false,
            NodeRef::Neuron { layer, .. } => match self.position_of(layer) {
                Some(q) => q >= position,
                None => false,
            },
        }
    }

    pub fn recurrent_edge_count(&self) -> usize {
        self.layers
            .iter()
            .enumerate()
            .map(|(p, l)| {
                l.connectors
                    .iter()
                    .filter(|c| self.is_recurrent_at(p, c.source))
                    .count()
            })
            .sum()
    }

    /// Nodes allowed to feed a connector: all network inputs and every
    /// neuron outside the output layer.
    pub fn source_nodes(&self) -> Vec<NodeRef> {
        let mut out: Vec<NodeRef> = (0..self.num_inputs).map(NodeRef::Input).collect();
        for l in &self.layers[..self.output_position()] {
            out.extend((0..l.neurons).map(|index| NodeRef::Neuron { layer: l.id, index }));
        }
        out
    }

    /// Sources that are computed before the layer at `position` in the same step.
    pub fn forward_sources(&self, position: usize) -> Vec<NodeRef> {
        let mut out: Vec<NodeRef> = (0..self.num_inputs).map(NodeRef::Input).collect();
        for l in &self.layers[..position.min(self.output_position())] {
            out.extend((0..l.neurons).map(|index| NodeRef::Neuron { layer: l.id, index }));
        }
        out
    }

    pub fn protected_elements(&self) -> BTreeSet<ElementId> {
        let mut set = BTreeSet::new();
        for l in &self.layers {
            if l.protected {
                set.insert(ElementId::Layer(l.id));
            }
            for i in 0..l.protected_neurons {
                set.insert(ElementId::Neuron(l.id, i));
            }
            for c in l.connectors.iter().filter(|c| c.protected) {
                set.insert(ElementId::Connector(c.id));
            }
        }
        set
    }

    /// Connector id → (layer id, source) for every protected connector.
    pub fn protected_wiring(&self) -> Vec<(ConnectorId, LayerId, NodeRef)> {
        let mut out = Vec::new();
        for l in &self.layers {
            for c in l.connectors.iter().filter(|c| c.protected) {
                out.push((c.id, l.id, c.source));
            }
        }
        out.sort();
        out
    }

    /// Mark every element as part of the founding structure of a lineage.
    pub fn protect_all(&mut self) {
        for l in &mut self.layers {
            l.protected = true;
            l.protected_neurons = l.neurons;
            for c in &mut l.connectors {
                c.protected = true;
            }
        }
    }

    pub(crate) fn fresh_layer_id(&mut self) -> LayerId {
        let id = LayerId(self.next_layer_id);
        self.next_layer_id += 1;
        id
    }

    pub(crate) fn fresh_connector_id(&mut self) -> ConnectorId {
        let id = ConnectorId(self.next_connector_id);
        self.next_connector_id += 1;
        id
    }

    pub(crate) fn push_connector(&mut self, position: usize, source: NodeRef) -> ConnectorId {
        let id = self.fresh_connector_id();
        self.layers[position].connectors.push(ConnectorGene {
            id,
            source,
            protected: false,
        });
        id
    }

    /// SHA-256 over the canonical text form.
    pub fn digest(&self) -> [u8; 32] {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.to_text().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

/// Draw a random genome satisfying the construction constraints.
///
/// The hidden neuron count N_p is uniform in `[1, N_i + N_o]`; the number of
/// hidden layers is then uniform over what N_p and the layer cap allow.
/// Each layer first receives one forward connector, then every input and
/// every hidden neuron that still feeds nothing is wired into a uniformly
/// chosen layer (which may make the edge recurrent).
pub fn random_genome<R: Rng + ?Sized>(num_inputs: usize, num_outputs: usize, rng: &mut R) -> Genome {
    assert!(num_inputs >= 1, "genome needs at least one input");
    assert!(num_outputs >= 1, "genome needs at least one output");

    let hidden_total = rng.gen_range(1..=num_inputs + num_outputs);
    let hidden_layers = rng.gen_range(1..=hidden_total.min(MAX_LAYERS - 1));

    let mut sizes = vec![1usize; hidden_layers];
    for _ in hidden_layers..hidden_total {
        sizes[rng.gen_range(0..hidden_layers)] += 1;
    }

    let mut genome = Genome {
        num_inputs,
        num_outputs,
        layers: Vec::with_capacity(hidden_layers + 1),
        born_generation: 0,
        parent_id: None,
        next_layer_id: 0,
        next_connector_id: 0,
    };
    for &neurons in sizes.iter().chain(std::iter::once(&num_outputs)) {
        let id = genome.fresh_layer_id();
        genome.layers.push(LayerGene {
            id,
            neurons,
            protected_neurons: 0,
            protected: false,
            connectors: Vec::new(),
        });
    }

    let mut input_fed = vec![false; num_inputs];
    let mut neuron_fed: Vec<Vec<bool>> = sizes.iter().map(|&n| vec![false; n]).collect();

    for position in 0..genome.layers.len() {
        let candidates = genome.forward_sources(position);
        let source = candidates[rng.gen_range(0..candidates.len())];
        mark_fed(&genome, source, &mut input_fed, &mut neuron_fed);
        genome.push_connector(position, source);
    }

    let layer_count = genome.layers.len();
    for i in 0..num_inputs {
        if !input_fed[i] {
            let position = rng.gen_range(0..layer_count);
            genome.push_connector(position, NodeRef::Input(i));
        }
    }
    for hp in 0..hidden_layers {
        for index in 0..sizes[hp] {
            if !neuron_fed[hp][index] {
                let position = rng.gen_range(0..layer_count);
                let layer = genome.layers[hp].id;
                genome.push_connector(position, NodeRef::Neuron { layer, index });
            }
        }
    }

    genome.protect_all();
    genome
}

fn mark_fed(genome: &Genome, source: NodeRef, inputs: &mut [bool], neurons: &mut [Vec<bool>]) {
    match source {
        NodeRef::Input(i) => inputs[i] = true,
        NodeRef::Neuron { layer, index } => {
            let p = genome.position_of(layer).expect("source layer exists");
            neurons[p][index] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_genome_shapes() {
        for &(ni, no) in &[(17, 3), (4, 2), (1, 1), (784, 10)] {
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let g = random_genome(ni, no, &mut rng);
                assert!(validate(&g).is_empty(), "{:?}", validate(&g));
                assert!(g.layers.len() <= MAX_LAYERS);
                assert!(g.layers.len() >= 2);
                let np = g.hidden_neurons();
                assert!((1..=ni + no).contains(&np));
                assert!(g.connector_count() >= np + ni);
                assert_eq!(g.output_layer().neurons, no);
                assert_eq!(g.protected_elements().len(), {
                    let neurons: usize = g.layers.iter().map(|l| l.neurons).sum();
                    g.layers.len() + neurons + g.connector_count()
                });
            }
        }
    }

    #[test]
    fn minimal_sizes_bound_hidden_count() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_genome(1, 1, &mut rng);
            assert!((1..=2).contains(&g.hidden_neurons()));
        }
    }

    #[test]
    fn control_is_single_linear_layer() {
        let g = Genome::control(4, 2);
        assert!(validate(&g).is_empty());
        assert_eq!(g.layers.len(), 1);
        assert_eq!(g.hidden_neurons(), 0);
        assert_eq!(g.connector_count(), 4);
    }

    #[test]
    fn hidden_count_covers_its_range() {
        let mut seen = [false; 5];
        for seed in 0..400 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen[random_genome(2, 2, &mut rng).hidden_neurons()] = true;
        }
        assert_eq!(&seen[1..], &[true; 4]);
    }
}
