use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{ConnectorId, ElementId, Genome, LayerId, NodeRef, MAX_LAYERS};

/// One broken structural rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoInputs,
    NoLayers,
    TooManyLayers { count: usize },
    OutputWidth { expected: usize, found: usize },
    NoNeurons { layer: LayerId },
    NoConnectors { layer: LayerId },
    NoForwardConnector { layer: LayerId },
    DanglingSource { connector: ConnectorId, source: NodeRef },
    OutputAsSource { connector: ConnectorId },
    DeadEnd { node: NodeRef },
    TooFewConnectors { connectors: usize, required: usize },
    MissingProtected { element: ElementId },
    DuplicateLayerId { layer: LayerId },
    DuplicateConnectorId { connector: ConnectorId },
    UnsortedConnectors { layer: LayerId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoInputs => write!(f, "genome declares zero network inputs"),
            Violation::NoLayers => write!(f, "genome has no layers"),
            Violation::TooManyLayers { count } => {
                write!(f, "{count} layers exceeds the cap of {MAX_LAYERS}")
            }
            Violation::OutputWidth { expected, found } => {
                write!(f, "output layer has {found} neurons, expected {expected}")
            }
            Violation::NoNeurons { layer } => write!(f, "layer {layer} has no neurons"),
            Violation::NoConnectors { layer } => write!(f, "layer {layer} has no connectors"),
            Violation::NoForwardConnector { layer } => write!(
                f,
                "layer {layer} has no connector from a network input or an earlier layer"
            ),
            Violation::DanglingSource { connector, source } => {
                write!(f, "connector {connector} reads nonexistent node {source}")
            }
            Violation::OutputAsSource { connector } => {
                write!(f, "connector {connector} reads an output neuron")
            }
            Violation::DeadEnd { node } => write!(f, "node {node} feeds no connector"),
            Violation::TooFewConnectors { connectors, required } => write!(
                f,
                "{connectors} connectors, at least {required} required (hidden neurons + inputs)"
            ),
            Violation::MissingProtected { element } => {
                write!(f, "protected {element} does not exist")
            }
            Violation::DuplicateLayerId { layer } => write!(f, "layer id {layer} used twice"),
            Violation::DuplicateConnectorId { connector } => {
                write!(f, "connector id {connector} used twice")
            }
            Violation::UnsortedConnectors { layer } => {
                write!(f, "connectors of layer {layer} are not in id order")
            }
        }
    }
}

/// Check every structural invariant; an empty list means the genome is valid.
pub fn validate(genome: &Genome) -> Vec<Violation> {
    let mut out = Vec::new();

    if genome.num_inputs == 0 {
        out.push(Violation::NoInputs);
    }
    if genome.layers.is_empty() {
        out.push(Violation::NoLayers);
        return out;
    }
    if genome.layers.len() > MAX_LAYERS {
        out.push(Violation::TooManyLayers {
            count: genome.layers.len(),
        });
    }
    let output = genome.output_layer();
    if output.neurons != genome.num_outputs {
        out.push(Violation::OutputWidth {
            expected: genome.num_outputs,
            found: output.neurons,
        });
    }

    let mut positions: HashMap<LayerId, usize> = HashMap::new();
    for (p, layer) in genome.layers.iter().enumerate() {
        if positions.insert(layer.id, p).is_some() {
            out.push(Violation::DuplicateLayerId { layer: layer.id });
        }
    }
    let output_position = genome.output_position();

    let mut connector_ids = HashSet::new();
    let mut input_fed = vec![false; genome.num_inputs];
    let mut neuron_fed: Vec<Vec<bool>> =
        genome.layers.iter().map(|l| vec![false; l.neurons]).collect();

    for (p, layer) in genome.layers.iter().enumerate() {
        if layer.neurons == 0 {
            out.push(Violation::NoNeurons { layer: layer.id });
        }
        if layer.connectors.is_empty() {
            out.push(Violation::NoConnectors { layer: layer.id });
        }
        if layer.connectors.windows(2).any(|w| w[0].id >= w[1].id) {
            out.push(Violation::UnsortedConnectors { layer: layer.id });
        }
        if layer.protected_neurons > layer.neurons {
            for i in layer.neurons..layer.protected_neurons {
                out.push(Violation::MissingProtected {
                    element: ElementId::Neuron(layer.id, i),
                });
            }
        }

        let mut forward = false;
        for c in &layer.connectors {
            if !connector_ids.insert(c.id) {
                out.push(Violation::DuplicateConnectorId { connector: c.id });
            }
            match c.source {
                NodeRef::Input(i) => {
                    if i < genome.num_inputs {
                        input_fed[i] = true;
                        forward = true;
                    } else {
                        out.push(Violation::DanglingSource {
                            connector: c.id,
                            source: c.source,
                        });
                    }
                }
                NodeRef::Neuron { layer: src, index } => match positions.get(&src) {
                    Some(&q) if q == output_position => {
                        out.push(Violation::OutputAsSource { connector: c.id })
                    }
                    Some(&q) if index < genome.layers[q].neurons => {
                        neuron_fed[q][index] = true;
                        if q < p {
                            forward = true;
                        }
                    }
                    _ => out.push(Violation::DanglingSource {
                        connector: c.id,
                        source: c.source,
                    }),
                },
            }
        }
        if !layer.connectors.is_empty() && !forward {
            out.push(Violation::NoForwardConnector { layer: layer.id });
        }
    }

    for (i, fed) in input_fed.iter().enumerate() {
        if !fed {
            out.push(Violation::DeadEnd {
                node: NodeRef::Input(i),
            });
        }
    }
    for (p, layer) in genome.layers.iter().enumerate().take(output_position) {
        for (index, fed) in neuron_fed[p].iter().enumerate() {
            if !fed {
                out.push(Violation::DeadEnd {
                    node: NodeRef::Neuron {
                        layer: layer.id,
                        index,
                    },
                });
            }
        }
    }

    let required = genome.hidden_neurons() + genome.num_inputs;
    let connectors = genome.connector_count();
    if connectors < required {
        out.push(Violation::TooFewConnectors {
            connectors,
            required,
        });
    }

    out
}
