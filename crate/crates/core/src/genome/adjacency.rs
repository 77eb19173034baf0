use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{validate, ConnectorGene, ConnectorId, Genome, LayerGene, LayerId, NodeRef, Violation};

/// Label of one row/column of an [`AdjacencyView`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjacencyNode {
    Input(usize),
    Connector { id: ConnectorId, layer: LayerId, protected: bool },
    Neuron { layer: LayerId, index: usize, protected: bool, output: bool },
}

#[derive(Debug, Error, PartialEq)]
pub enum AdjacencyError {
    #[error("genome is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("connector node {0} has {1} sources, expected exactly one")]
    SourceCount(usize, usize),
    #[error("connector node {0} feeds neurons of more than one layer")]
    MixedDestinations(usize),
    #[error("edge {0} -> {1} has no meaning in a genome graph")]
    StrayEdge(usize, usize),
}

/// Square 0/1 matrix over inputs, connectors, hidden neurons and output
/// neurons (in that order). Row = source, column = destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyView {
    pub nodes: Vec<AdjacencyNode>,
    cells: Vec<u8>,
}

impl AdjacencyView {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * self.nodes.len() + col]
    }

    fn set(&mut self, row: usize, col: usize) {
        let n = self.nodes.len();
        self.cells[row * n + col] = 1;
    }

    pub fn edge_count(&self) -> usize {
        self.cells.iter().map(|&c| c as usize).sum()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.nodes.len();
        (0..n * n)
            .filter(|&k| self.cells[k] == 1)
            .map(|k| (k / n, k % n))
            .collect()
    }

    /// Rebuild a genome from the matrix; only node labels (ids, order,
    /// protection) come from `nodes`, all wiring comes from the cells.
    pub fn to_genome(&self) -> Result<Genome, AdjacencyError> {
        let n = self.nodes.len();
        let mut num_inputs = 0;
        let mut layer_order: Vec<LayerId> = Vec::new();
        let mut neurons: HashMap<LayerId, (usize, usize)> = HashMap::new();
        let mut neuron_at: HashMap<usize, (LayerId, usize)> = HashMap::new();
        let mut num_outputs = 0;

        for (k, node) in self.nodes.iter().enumerate() {
            match *node {
                AdjacencyNode::Input(_) => num_inputs += 1,
                AdjacencyNode::Neuron { layer, index, protected, output } => {
                    if !layer_order.contains(&layer) {
                        layer_order.push(layer);
                    }
                    let entry = neurons.entry(layer).or_insert((0, 0));
                    entry.0 += 1;
                    if protected {
                        entry.1 += 1;
                    }
                    if output {
                        num_outputs += 1;
                    }
                    neuron_at.insert(k, (layer, index));
                }
                AdjacencyNode::Connector { .. } => {}
            }
        }

        let mut connectors: BTreeMap<LayerId, Vec<ConnectorGene>> = BTreeMap::new();
        for (col, node) in self.nodes.iter().enumerate() {
            let AdjacencyNode::Connector { id, protected, .. } = *node else {
                continue;
            };
            let sources: Vec<usize> = (0..n).filter(|&r| self.get(r, col) == 1).collect();
            if sources.len() != 1 {
                return Err(AdjacencyError::SourceCount(col, sources.len()));
            }
            let source = match self.nodes[sources[0]] {
                AdjacencyNode::Input(i) => NodeRef::Input(i),
                AdjacencyNode::Neuron { layer, index, .. } => NodeRef::Neuron { layer, index },
                AdjacencyNode::Connector { .. } => return Err(AdjacencyError::StrayEdge(sources[0], col)),
            };
            let mut dest: Option<LayerId> = None;
            for d in (0..n).filter(|&d| self.get(col, d) == 1) {
                let (layer, _) = *neuron_at.get(&d).ok_or(AdjacencyError::StrayEdge(col, d))?;
                if dest.is_some_and(|l| l != layer) {
                    return Err(AdjacencyError::MixedDestinations(col));
                }
                dest = Some(layer);
            }
            if let Some(layer) = dest {
                connectors.entry(layer).or_default().push(ConnectorGene { id, source, protected });
            }
        }

        let mut max_layer = 0;
        let mut max_conn = 0;
        let layers = layer_order
            .iter()
            .map(|&id| {
                let (count, protected_neurons) = neurons[&id];
                let mut conns = connectors.remove(&id).unwrap_or_default();
                conns.sort_by_key(|c| c.id);
                max_layer = max_layer.max(id.0 + 1);
                if let Some(c) = conns.last() {
                    max_conn = max_conn.max(c.id.0 + 1);
                }
                LayerGene {
                    id,
                    neurons: count,
                    protected_neurons,
                    protected: protected_neurons > 0,
                    connectors: conns,
                }
            })
            .collect();

        Ok(Genome {
            num_inputs,
            num_outputs,
            layers,
            born_generation: 0,
            parent_id: None,
            next_layer_id: max_layer,
            next_connector_id: max_conn,
        })
    }
}

impl Genome {
    /// Every edge of the genome graph: source → connector, and connector →
    /// each neuron of its layer (layers are fully connected).
    pub fn to_adjacency(&self) -> Result<AdjacencyView, AdjacencyError> {
        let violations = validate(self);
        if !violations.is_empty() {
            return Err(AdjacencyError::Invalid(violations));
        }

        let mut nodes: Vec<AdjacencyNode> = (0..self.num_inputs).map(AdjacencyNode::Input).collect();
        for l in &self.layers {
            for c in &l.connectors {
                nodes.push(AdjacencyNode::Connector { id: c.id, layer: l.id, protected: c.protected });
            }
        }
        let out_pos = self.output_position();
        let mut neuron_index: HashMap<(LayerId, usize), usize> = HashMap::new();
        for (p, l) in self.layers.iter().enumerate() {
            for i in 0..l.neurons {
                neuron_index.insert((l.id, i), nodes.len());
                nodes.push(AdjacencyNode::Neuron {
                    layer: l.id,
                    index: i,
                    protected: i < l.protected_neurons,
                    output: p == out_pos,
                });
            }
        }

        let n = nodes.len();
        let mut view = AdjacencyView { nodes, cells: vec![0; n * n] };
        let mut conn = self.num_inputs;
        for l in &self.layers {
            for c in &l.connectors {
                let src = match c.source {
                    NodeRef::Input(i) => i,
                    NodeRef::Neuron { layer, index } => neuron_index[&(layer, index)],
                };
                view.set(src, conn);
                for i in 0..l.neurons {
                    view.set(conn, neuron_index[&(l.id, i)]);
                }
                conn += 1;
            }
        }
        Ok(view)
    }
}
