//! The seven structural mutations.
//!
//! Each concrete operation takes its choices explicitly and returns either a
//! valid genome that keeps every protected element intact, or [`Infeasible`].
//! The `mutate_*` samplers draw those choices at random, and [`mutate`]
//! applies exactly one mutation of a uniformly chosen feasible kind.

use std::fmt;

use rand::Rng;

use super::{validate, ConnectorGene, ConnectorId, Genome, LayerGene, LayerId, NodeRef};

/// Attempts per mutation kind before falling back to another kind.
pub const RETRY_BUDGET: usize = 64;

/// Growth caps for the additive mutations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenomeLimits {
    pub max_layers: usize,
    pub max_neurons_per_layer: usize,
    pub max_connectors_per_layer: usize,
}

impl Default for GenomeLimits {
    fn default() -> Self {
        GenomeLimits {
            max_layers: super::MAX_LAYERS,
            max_neurons_per_layer: 1024,
            max_connectors_per_layer: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutationKind {
    AddConnection,
    AddNeuron,
    AddLayer,
    RemoveDuplicateConnection,
    RemoveNeuron,
    SwapConnections,
    MoveConnection,
}

impl MutationKind {
    pub const ALL: [MutationKind; 7] = [
        MutationKind::AddConnection,
        MutationKind::AddNeuron,
        MutationKind::AddLayer,
        MutationKind::RemoveDuplicateConnection,
        MutationKind::RemoveNeuron,
        MutationKind::SwapConnections,
        MutationKind::MoveConnection,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddKind {
    Connection,
    Neuron,
    Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoveKind {
    DuplicateConnection,
    Neuron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RearrangeKind {
    Swap,
    Move,
}

/// A mutation could not be applied. `permanent` means resampling the same
/// kind cannot help (no candidates exist at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Infeasible {
    pub reason: &'static str,
    pub permanent: bool,
}

impl Infeasible {
    fn retry(reason: &'static str) -> Self {
        Infeasible { reason, permanent: false }
    }

    fn never(reason: &'static str) -> Self {
        Infeasible { reason, permanent: true }
    }
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "infeasible mutation: {}", self.reason)
    }
}

impl std::error::Error for Infeasible {}

#[derive(Debug, Clone)]
pub struct MutationOutcome {
    pub genome: Genome,
    /// `None` when no mutation was feasible and the genome is an unchanged copy.
    pub kind: Option<MutationKind>,
}

impl MutationOutcome {
    pub fn is_no_op(&self) -> bool {
        self.kind.is_none()
    }
}

fn finish(candidate: Genome, original: &Genome) -> Result<Genome, Infeasible> {
    if !validate(&candidate).is_empty() {
        return Err(Infeasible::retry("result breaks a structural rule"));
    }
    if !preserves_protection(original, &candidate) {
        return Err(Infeasible::retry("result alters protected structure"));
    }
    Ok(candidate)
}

/// Every protected element of `before` exists in `after` with the same wiring.
pub(crate) fn preserves_protection(before: &Genome, after: &Genome) -> bool {
    let kept = after.protected_elements();
    if !before.protected_elements().is_subset(&kept) {
        return false;
    }
    let wiring = after.protected_wiring();
    before
        .protected_wiring()
        .iter()
        .all(|w| wiring.binary_search(w).is_ok())
}

fn locate_connector(genome: &Genome, id: ConnectorId) -> Option<(usize, usize)> {
    genome.layers.iter().enumerate().find_map(|(p, l)| {
        l.connectors.iter().position(|c| c.id == id).map(|i| (p, i))
    })
}

fn position(genome: &Genome, layer: LayerId) -> Result<usize, Infeasible> {
    genome
        .position_of(layer)
        .ok_or(Infeasible::never("unknown layer"))
}

/// Add one connector from `source` to `layer` (fan-in + 1).
pub fn add_connection(
    genome: &Genome,
    layer: LayerId,
    source: NodeRef,
    limits: &GenomeLimits,
) -> Result<Genome, Infeasible> {
    let p = position(genome, layer)?;
    if genome.layers[p].fan_in() >= limits.max_connectors_per_layer {
        return Err(Infeasible::retry("connector cap reached"));
    }
    let mut g = genome.clone();
    g.push_connector(p, source);
    finish(g, genome)
}

/// Append a neuron to a hidden layer and wire it into `consumer`.
pub fn add_neuron(
    genome: &Genome,
    layer: LayerId,
    consumer: LayerId,
    limits: &GenomeLimits,
) -> Result<Genome, Infeasible> {
    let p = position(genome, layer)?;
    if p == genome.output_position() {
        return Err(Infeasible::retry("output width is fixed"));
    }
    if genome.layers[p].neurons >= limits.max_neurons_per_layer {
        return Err(Infeasible::retry("neuron cap reached"));
    }
    let q = position(genome, consumer)?;
    if genome.layers[q].fan_in() >= limits.max_connectors_per_layer {
        return Err(Infeasible::retry("connector cap reached"));
    }
    let mut g = genome.clone();
    g.layers[p].neurons += 1;
    let index = g.layers[p].neurons - 1;
    g.push_connector(q, NodeRef::Neuron { layer, index });
    finish(g, genome)
}

/// Insert a one-neuron layer at `position` (before the output layer).
///
/// `forward_source` must be computable before the new layer; `extra_source`
/// may point anywhere, including layers at or after `position`, in which case
/// it becomes a virtual input. The new neuron is consumed by `consumer`.
pub fn add_layer(
    genome: &Genome,
    position: usize,
    forward_source: NodeRef,
    extra_source: Option<NodeRef>,
    consumer: LayerId,
    limits: &GenomeLimits,
) -> Result<Genome, Infeasible> {
    if genome.layers.len() >= limits.max_layers {
        return Err(Infeasible::never("layer cap reached"));
    }
    if position > genome.output_position() {
        return Err(Infeasible::retry("layers cannot follow the output layer"));
    }
    let q = genome
        .position_of(consumer)
        .ok_or(Infeasible::retry("unknown consumer layer"))?;
    if genome.layers[q].fan_in() >= limits.max_connectors_per_layer {
        return Err(Infeasible::retry("connector cap reached"));
    }

    let mut g = genome.clone();
    let id = g.fresh_layer_id();
    let mut connectors = vec![ConnectorGene {
        id: g.fresh_connector_id(),
        source: forward_source,
        protected: false,
    }];
    if let Some(source) = extra_source {
        connectors.push(ConnectorGene {
            id: g.fresh_connector_id(),
            source,
            protected: false,
        });
    }
    g.layers.insert(
        position,
        LayerGene {
            id,
            neurons: 1,
            protected_neurons: 0,
            protected: false,
            connectors,
        },
    );
    if g.is_recurrent_at(position, forward_source) {
        return Err(Infeasible::retry("forward source is not upstream"));
    }
    let q = g.position_of(consumer).expect("consumer survives insertion");
    g.push_connector(q, NodeRef::Neuron { layer: id, index: 0 });
    finish(g, genome)
}

/// Remove an unprotected connector that duplicates another one in its layer.
pub fn remove_duplicate_connection(genome: &Genome, id: ConnectorId) -> Result<Genome, Infeasible> {
    let (p, i) = locate_connector(genome, id).ok_or(Infeasible::never("unknown connector"))?;
    let layer = &genome.layers[p];
    let target = &layer.connectors[i];
    if target.protected {
        return Err(Infeasible::retry("connector is protected"));
    }
    if !layer
        .connectors
        .iter()
        .any(|c| c.id != id && c.source == target.source)
    {
        return Err(Infeasible::retry("connector has no duplicate"));
    }
    let mut g = genome.clone();
    g.layers[p].connectors.remove(i);
    finish(g, genome)
}

/// Remove a hidden neuron together with every connector that reads it.
pub fn remove_neuron(genome: &Genome, layer: LayerId, index: usize) -> Result<Genome, Infeasible> {
    let p = position(genome, layer)?;
    let l = &genome.layers[p];
    if p == genome.output_position() {
        return Err(Infeasible::retry("output width is fixed"));
    }
    if index >= l.neurons {
        return Err(Infeasible::retry("no such neuron"));
    }
    if l.neurons <= 1 {
        return Err(Infeasible::retry("layer keeps at least one neuron"));
    }
    if index < l.protected_neurons {
        return Err(Infeasible::retry("neuron is protected"));
    }

    let removed = NodeRef::Neuron { layer, index };
    let mut g = genome.clone();
    g.layers[p].neurons -= 1;
    for l in &mut g.layers {
        if l.connectors.iter().any(|c| c.source == removed && c.protected) {
            return Err(Infeasible::retry("a protected connector reads the neuron"));
        }
        l.connectors.retain(|c| c.source != removed);
        for c in &mut l.connectors {
            if let NodeRef::Neuron { layer: src, index: k } = &mut c.source {
                if *src == layer && *k > index {
                    *k -= 1;
                }
            }
        }
    }
    finish(g, genome)
}

/// Exchange the sources of two unprotected connectors.
pub fn swap_connections(genome: &Genome, a: ConnectorId, b: ConnectorId) -> Result<Genome, Infeasible> {
    let (pa, ia) = locate_connector(genome, a).ok_or(Infeasible::never("unknown connector"))?;
    let (pb, ib) = locate_connector(genome, b).ok_or(Infeasible::never("unknown connector"))?;
    let ca = &genome.layers[pa].connectors[ia];
    let cb = &genome.layers[pb].connectors[ib];
    if a == b || ca.source == cb.source {
        return Err(Infeasible::retry("swap would not change anything"));
    }
    if ca.protected || cb.protected {
        return Err(Infeasible::retry("connector is protected"));
    }
    let (sa, sb) = (ca.source, cb.source);
    let mut g = genome.clone();
    g.layers[pa].connectors[ia].source = sb;
    g.layers[pb].connectors[ib].source = sa;
    finish(g, genome)
}

/// Point an unprotected connector at a different source node.
pub fn move_connection(genome: &Genome, id: ConnectorId, source: NodeRef) -> Result<Genome, Infeasible> {
    let (p, i) = locate_connector(genome, id).ok_or(Infeasible::never("unknown connector"))?;
    let c = &genome.layers[p].connectors[i];
    if c.protected {
        return Err(Infeasible::retry("connector is protected"));
    }
    if c.source == source {
        return Err(Infeasible::retry("move would not change anything"));
    }
    let mut g = genome.clone();
    g.layers[p].connectors[i].source = source;
    finish(g, genome)
}

fn pick<T: Copy, R: Rng + ?Sized>(items: &[T], rng: &mut R) -> Option<T> {
    if items.is_empty() {
        None
    } else {
        Some(items[rng.gen_range(0..items.len())])
    }
}

fn unprotected_connectors(genome: &Genome) -> Vec<ConnectorId> {
    genome
        .layers
        .iter()
        .flat_map(|l| l.connectors.iter())
        .filter(|c| !c.protected)
        .map(|c| c.id)
        .collect()
}

/// One random additive mutation.
pub fn mutate_add<R: Rng + ?Sized>(
    genome: &Genome,
    kind: AddKind,
    limits: &GenomeLimits,
    rng: &mut R,
) -> Result<Genome, Infeasible> {
    let layer_ids: Vec<LayerId> = genome.layers.iter().map(|l| l.id).collect();
    match kind {
        AddKind::Connection => {
            let layer = pick(&layer_ids, rng).ok_or(Infeasible::never("no layers"))?;
            let source = pick(&genome.source_nodes(), rng).ok_or(Infeasible::never("no sources"))?;
            add_connection(genome, layer, source, limits)
        }
        AddKind::Neuron => {
            let hidden = &layer_ids[..genome.output_position()];
            let layer = pick(hidden, rng).ok_or(Infeasible::never("no hidden layer"))?;
            let consumer = pick(&layer_ids, rng).expect("layers exist");
            add_neuron(genome, layer, consumer, limits)
        }
        AddKind::Layer => {
            if genome.layers.len() >= limits.max_layers {
                return Err(Infeasible::never("layer cap reached"));
            }
            let position = rng.gen_range(0..=genome.output_position());
            let forward = pick(&genome.forward_sources(position), rng).expect("inputs exist");
            let extra = if rng.gen_bool(0.5) {
                pick(&genome.source_nodes(), rng)
            } else {
                None
            };
            let consumer = pick(&layer_ids, rng).expect("layers exist");
            add_layer(genome, position, forward, extra, consumer, limits)
        }
    }
}

/// One random subtractive mutation.
pub fn mutate_remove<R: Rng + ?Sized>(
    genome: &Genome,
    kind: RemoveKind,
    rng: &mut R,
) -> Result<Genome, Infeasible> {
    match kind {
        RemoveKind::DuplicateConnection => {
            let mut candidates = Vec::new();
            for l in &genome.layers {
                for c in l.connectors.iter().filter(|c| !c.protected) {
                    if l.connectors.iter().any(|o| o.id != c.id && o.source == c.source) {
                        candidates.push(c.id);
                    }
                }
            }
            let id = pick(&candidates, rng).ok_or(Infeasible::never("no duplicate connector"))?;
            remove_duplicate_connection(genome, id)
        }
        RemoveKind::Neuron => {
            let mut candidates = Vec::new();
            for l in &genome.layers[..genome.output_position()] {
                if l.neurons > 1 {
                    candidates.extend((l.protected_neurons..l.neurons).map(|i| (l.id, i)));
                }
            }
            let (layer, index) =
                pick(&candidates, rng).ok_or(Infeasible::never("no removable neuron"))?;
            remove_neuron(genome, layer, index)
        }
    }
}

/// One random rewiring mutation.
pub fn mutate_rearrange<R: Rng + ?Sized>(
    genome: &Genome,
    kind: RearrangeKind,
    rng: &mut R,
) -> Result<Genome, Infeasible> {
    let free = unprotected_connectors(genome);
    match kind {
        RearrangeKind::Swap => {
            if free.len() < 2 {
                return Err(Infeasible::never("fewer than two unprotected connectors"));
            }
            let i = rng.gen_range(0..free.len());
            let mut j = rng.gen_range(0..free.len() - 1);
            if j >= i {
                j += 1;
            }
            swap_connections(genome, free[i], free[j])
        }
        RearrangeKind::Move => {
            let id = pick(&free, rng).ok_or(Infeasible::never("no unprotected connector"))?;
            let source = pick(&genome.source_nodes(), rng).expect("inputs exist");
            move_connection(genome, id, source)
        }
    }
}

fn sample_kind<R: Rng + ?Sized>(
    genome: &Genome,
    kind: MutationKind,
    limits: &GenomeLimits,
    rng: &mut R,
) -> Result<Genome, Infeasible> {
    match kind {
        MutationKind::AddConnection => mutate_add(genome, AddKind::Connection, limits, rng),
        MutationKind::AddNeuron => mutate_add(genome, AddKind::Neuron, limits, rng),
        MutationKind::AddLayer => mutate_add(genome, AddKind::Layer, limits, rng),
        MutationKind::RemoveDuplicateConnection => {
            mutate_remove(genome, RemoveKind::DuplicateConnection, rng)
        }
        MutationKind::RemoveNeuron => mutate_remove(genome, RemoveKind::Neuron, rng),
        MutationKind::SwapConnections => mutate_rearrange(genome, RearrangeKind::Swap, rng),
        MutationKind::MoveConnection => mutate_rearrange(genome, RearrangeKind::Move, rng),
    }
}

/// Apply exactly one mutation with the default growth caps.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, rng: &mut R) -> MutationOutcome {
    mutate_with_limits(genome, &GenomeLimits::default(), rng)
}

/// Apply exactly one mutation. Kinds are drawn uniformly without replacement;
/// each gets [`RETRY_BUDGET`] attempts before the next is tried, so the kind
/// applied is uniform over the kinds that turn out feasible.
pub fn mutate_with_limits<R: Rng + ?Sized>(
    genome: &Genome,
    limits: &GenomeLimits,
    rng: &mut R,
) -> MutationOutcome {
    let mut remaining = MutationKind::ALL.to_vec();
    while !remaining.is_empty() {
        let kind = remaining.swap_remove(rng.gen_range(0..remaining.len()));
        for _ in 0..RETRY_BUDGET {
            match sample_kind(genome, kind, limits, rng) {
                Ok(g) => {
                    return MutationOutcome {
                        genome: g,
                        kind: Some(kind),
                    }
                }
                Err(e) if e.permanent => break,
                Err(_) => {}
            }
        }
    }
    MutationOutcome {
        genome: genome.clone(),
        kind: None,
    }
}
