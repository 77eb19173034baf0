//! The generational loop.
//!
//! Each generation every member is trained and scored, the `α` best
//! non-control members become parents, and the next population is made of
//! those parents, `α` mutated children per parent, `α` fresh random genomes
//! and the control networks, whose weights persist between generations.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::env::cartpole::{CartPole, CartPoleParams, CartPoleState};
use crate::env::mnist::{BatchStream, MnistSet};
use crate::env::tag::{self, Specialization, TagConfig, TagEpisode};
use crate::genome::{mutate, random_genome, Genome};
use crate::netexec::CompiledNetwork;
use crate::phylogeny::{NodeRole, PhyloError, PhyloTree};
use crate::seed::{derive_seed, stream_rng, Stream};
use crate::trainer::{self, RlOptions, Schedule, TrainerError};

#[derive(Debug, Error, PartialEq)]
pub enum EvolutionError {
    #[error("population size {0} is not a perfect square of at least 4")]
    NotSquare(usize),
    #[error("{controls} controls leave no room in a population of {n}")]
    TooManyControls { n: usize, controls: usize },
    #[error("the mnist task needs a training set")]
    MissingData,
    #[error("{0} parents selected, expected {1}")]
    ParentCount(usize, usize),
    #[error(transparent)]
    Phylo(#[from] PhyloError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Tag(Specialization),
    CartPole,
    Mnist,
}

impl Task {
    pub fn dims(self) -> (usize, usize) {
        match self {
            Task::Tag(_) => (tag::OBSERVATION_LEN, tag::ACTIONS.len()),
            Task::CartPole => (4, 2),
            Task::Mnist => (crate::env::mnist::PIXELS, 10),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Tag(Specialization::Both) => "tag",
            Task::Tag(Specialization::Prey) => "tag-prey",
            Task::Tag(Specialization::Predator) => "tag-predator",
            Task::CartPole => "cartpole",
            Task::Mnist => "mnist",
        }
    }

    /// Parents are picked by lowest loss for classification, highest score otherwise.
    pub fn selects_by_loss(self) -> bool {
        self == Task::Mnist
    }

    pub fn default_schedule(self) -> Schedule {
        match self {
            Task::Tag(_) => Schedule::tag(),
            Task::CartPole => Schedule::cartpole(),
            Task::Mnist => Schedule::mnist(),
        }
    }
}

/// When a run may end before its generation budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Never,
    /// Some member played at least this fraction of its greedy episodes perfectly.
    WindowSuccess(f64),
    /// The best parent's training loss fell below this value.
    LossBelow(f64),
}

impl StopRule {
    pub fn default_for(task: Task) -> StopRule {
        match task {
            Task::Tag(_) => StopRule::Never,
            Task::CartPole => StopRule::WindowSuccess(0.9),
            Task::Mnist => StopRule::LossBelow(0.25),
        }
    }
}

/// Everything that determines the outcome of an experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub task: Task,
    pub n: usize,
    /// Generations evaluated; zero is treated as one.
    pub generations: usize,
    pub seed: u64,
    pub controls: Option<usize>,
    pub stop: StopRule,
    pub schedule: Schedule,
    pub tag: TagConfig,
    pub cartpole: CartPoleParams,
    pub rl: RlOptions,
}

impl ExperimentSpec {
    pub fn new(task: Task, n: usize, generations: usize, seed: u64) -> Self {
        let tag = TagConfig {
            specialization: match task {
                Task::Tag(s) => s,
                _ => Specialization::Both,
            },
            ..TagConfig::default()
        };
        ExperimentSpec {
            task,
            n,
            generations,
            seed,
            controls: None,
            stop: StopRule::default_for(task),
            schedule: task.default_schedule(),
            tag,
            cartpole: CartPoleParams::default(),
            rl: RlOptions::default(),
        }
    }
}

/// MNIST splits shared by all workers.
#[derive(Debug, Clone)]
pub struct MnistData {
    pub train: MnistSet,
    pub test: Option<MnistSet>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MemberRole {
    Evolved,
    Control,
    RandomInjected,
}

impl MemberRole {
    pub fn node_role(self) -> NodeRole {
        match self {
            MemberRole::Evolved => NodeRole::Evolved,
            MemberRole::Control => NodeRole::Control,
            MemberRole::RandomInjected => NodeRole::Random,
        }
    }
}

/// Result of training one member for one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    pub loss: f64,
    pub train_steps: usize,
    pub window_success: f64,
    pub window_roles: Vec<(String, f64)>,
    /// Parameters after training.
    pub params: Vec<f64>,
    pub failure: Option<String>,
}

impl Evaluation {
    fn failed(reason: String) -> Self {
        Evaluation {
            score: f64::NEG_INFINITY,
            loss: f64::INFINITY,
            train_steps: 0,
            window_success: 0.0,
            window_roles: Vec::new(),
            params: Vec::new(),
            failure: Some(reason),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub genome: Genome,
    pub role: MemberRole,
    pub parent_id: Option<u64>,
    /// Trained weights carried into the next generation (controls only).
    pub persistent_params: Option<Vec<f64>>,
    /// Cumulative training steps over the member's life.
    pub train_steps_total: usize,
    pub evaluation: Option<Evaluation>,
}

impl Individual {
    fn new(id: u64, genome: Genome, role: MemberRole, parent_id: Option<u64>) -> Self {
        Individual { id, genome, role, parent_id, persistent_params: None, train_steps_total: 0, evaluation: None }
    }

    pub fn score(&self) -> f64 {
        self.evaluation.as_ref().map_or(f64::NEG_INFINITY, |e| e.score)
    }

    pub fn loss(&self) -> f64 {
        self.evaluation.as_ref().map_or(f64::INFINITY, |e| e.loss)
    }
}

/// Sizes derived from the population size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub alpha: usize,
    pub controls: usize,
}

fn integer_root(n: usize, k: u32) -> usize {
    let mut r = (n as f64).powf(1.0 / k as f64).round() as usize + 1;
    while r.pow(k) > n {
        r -= 1;
    }
    r
}

impl Shape {
    /// `α = √n − 1` and, unless overridden, `⌊n^{1/4}⌋` controls.
    pub fn new(n: usize, controls: Option<usize>) -> Result<Shape, EvolutionError> {
        let root = integer_root(n, 2);
        if n < 4 || root * root != n {
            return Err(EvolutionError::NotSquare(n));
        }
        let controls = controls.unwrap_or_else(|| integer_root(n, 4));
        if controls >= n {
            return Err(EvolutionError::TooManyControls { n, controls });
        }
        Ok(Shape { n, alpha: root - 1, controls })
    }

    /// Children kept per generation after trimming to `n`.
    pub fn children(&self) -> usize {
        let room = self.n.saturating_sub(2 * self.alpha + self.controls);
        room.min(self.alpha * self.alpha)
    }

    /// Random injections per generation, including padding when short of `n`.
    pub fn injections(&self) -> usize {
        self.n - self.alpha - self.children() - self.controls
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub generation: u32,
    pub shape: Shape,
    pub members: Vec<Individual>,
}

impl Population {
    pub fn count(&self, role: MemberRole) -> usize {
        self.members.iter().filter(|m| m.role == role).count()
    }

    pub fn get(&self, id: u64) -> Option<&Individual> {
        self.members.iter().find(|m| m.id == id)
    }
}

/// Monotone id source; ids start at 1.
#[derive(Debug, Clone)]
pub struct IdSource(u64);

impl Default for IdSource {
    fn default() -> Self {
        IdSource(1)
    }
}

impl IdSource {
    pub fn next(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }
}

/// Generation 0: `n − controls` random genomes followed by the controls.
pub fn init_population(
    shape: Shape,
    task: Task,
    master_seed: u64,
    ids: &mut IdSource,
    tree: &mut PhyloTree,
) -> Result<Population, EvolutionError> {
    let (ni, no) = task.dims();
    let mut members = Vec::with_capacity(shape.n);
    for _ in 0..shape.n - shape.controls {
        let id = ids.next();
        let g = random_genome(ni, no, &mut stream_rng(master_seed, 0, id, Stream::Genome));
        members.push(Individual::new(id, g, MemberRole::Evolved, None));
    }
    for _ in 0..shape.controls {
        members.push(Individual::new(ids.next(), Genome::control(ni, no), MemberRole::Control, None));
    }
    let roots: Vec<(u64, NodeRole)> = members.iter().map(|m| (m.id, m.role.node_role())).collect();
    tree.record_generation(0, &[], &roots)?;
    Ok(Population { generation: 0, shape, members })
}

/// The `alpha` best non-control members, best first; ties go to the lower id.
pub fn select_parents(population: &Population, alpha: usize, by_loss: bool) -> Vec<u64> {
    let mut candidates: Vec<&Individual> = population.members.iter().filter(|m| m.role != MemberRole::Control).collect();
    candidates.sort_by(|a, b| {
        let primary = if by_loss { a.loss().total_cmp(&b.loss()) } else { b.score().total_cmp(&a.score()) };
        primary.then(a.id.cmp(&b.id))
    });
    candidates.into_iter().take(alpha).map(|m| m.id).collect()
}

/// Build the next population from ranked `parents` and record the lineage.
pub fn next_generation(
    population: &Population,
    parents: &[u64],
    task: Task,
    master_seed: u64,
    ids: &mut IdSource,
    tree: &mut PhyloTree,
) -> Result<Population, EvolutionError> {
    let shape = population.shape;
    if parents.len() != shape.alpha {
        return Err(EvolutionError::ParentCount(parents.len(), shape.alpha));
    }
    let generation = population.generation + 1;
    let (ni, no) = task.dims();
    let mut members = Vec::with_capacity(shape.n);
    for &p in parents {
        let parent = population.get(p).expect("parent belongs to the population");
        // a selected random injection joins the evolved pool
        members.push(Individual { evaluation: None, role: MemberRole::Evolved, ..parent.clone() });
    }

    // the trimmed slots are the last children of the lowest-ranked parents
    let mut pairs = Vec::new();
    let mut remaining = shape.children();
    for &p in parents {
        let parent = population.get(p).expect("parent belongs to the population");
        for _ in 0..shape.alpha.min(remaining) {
            let id = ids.next();
            let mut child = mutate(&parent.genome, &mut stream_rng(master_seed, generation, id, Stream::Mutation)).genome;
            child.born_generation = generation;
            child.parent_id = Some(p);
            members.push(Individual::new(id, child, MemberRole::Evolved, Some(p)));
            pairs.push((p, id));
        }
        remaining -= shape.alpha.min(remaining);
    }

    let mut roots = Vec::new();
    for _ in 0..shape.injections() {
        let id = ids.next();
        let mut g = random_genome(ni, no, &mut stream_rng(master_seed, generation, id, Stream::Genome));
        g.born_generation = generation;
        members.push(Individual::new(id, g, MemberRole::RandomInjected, None));
        roots.push((id, NodeRole::Random));
    }
    for c in population.members.iter().filter(|m| m.role == MemberRole::Control) {
        members.push(Individual { evaluation: None, ..c.clone() });
    }
    tree.record_generation(generation, &pairs, &roots)?;
    Ok(Population { generation, shape, members })
}

/// Shared, read-only inputs to member evaluation.
#[derive(Debug, Clone)]
pub struct TaskContext {
    pub spec: ExperimentSpec,
    pub permutation: Vec<usize>,
    pub mnist: Option<Arc<MnistData>>,
}

impl TaskContext {
    pub fn new(spec: ExperimentSpec, mnist: Option<Arc<MnistData>>) -> Result<Self, EvolutionError> {
        if spec.task == Task::Mnist && mnist.is_none() {
            return Err(EvolutionError::MissingData);
        }
        let permutation = tag::random_permutation(&mut stream_rng(spec.seed, 0, 0, Stream::Experiment));
        Ok(TaskContext { spec, permutation, mnist })
    }

    fn tag_config(&self) -> TagConfig {
        let s = &self.spec.schedule;
        TagConfig {
            life_cycles: s.life_cycles,
            steps_per_cycle: s.steps_per_episode / s.life_cycles.max(1),
            ..self.spec.tag
        }
    }
}

/// Train and score one member from its own random stream.
pub fn evaluate_member(member: &Individual, generation: u32, ctx: &TaskContext) -> Evaluation {
    let spec = &ctx.spec;
    let mut rng = stream_rng(spec.seed, generation, member.id, Stream::Evaluation);
    let mut net = match CompiledNetwork::compile(&member.genome, &mut rng) {
        Ok(n) => n,
        Err(e) => return Evaluation::failed(e.to_string()),
    };
    if let Some(p) = &member.persistent_params {
        net.params_mut().copy_from_slice(p);
    }
    let result = match spec.task {
        Task::Tag(_) => {
            let mut env = TagEpisode::new(ctx.tag_config(), ctx.permutation.clone(), &mut rng);
            trainer::run_rl_generation(&mut net, &mut env, &spec.schedule, &spec.rl, &mut rng)
                .map(|r| (r.score, r.loss, r.train_steps, r.window_success, r.window_roles))
        }
        Task::CartPole => {
            let params = CartPoleParams { max_steps: spec.schedule.steps_per_episode, ..spec.cartpole };
            let mut env = CartPole::new(params, CartPoleState::reset(&mut rng));
            trainer::run_rl_generation(&mut net, &mut env, &spec.schedule, &spec.rl, &mut rng)
                .map(|r| (r.score, r.loss, r.train_steps, r.window_success, r.window_roles))
        }
        Task::Mnist => {
            let data = ctx.mnist.as_ref().expect("checked when the context was built");
            let s = &spec.schedule;
            let seed = derive_seed(spec.seed, 0, member.id, Stream::Batches);
            // every member sees the batches scheduled for this generation
            let start = generation as u64 * s.batches_per_generation as u64;
            let mut stream = BatchStream::starting_at(data.train.len(), s.batch_size, seed, start);
            trainer::run_supervised_generation(&mut net, &data.train, &mut stream, s.batches_per_generation, spec.rl.adam)
                .map(|r| (r.accuracy, r.loss, r.train_steps, 0.0, Vec::new()))
        }
    };
    match result {
        Ok((score, loss, train_steps, window_success, window_roles)) if score.is_finite() && loss.is_finite() => {
            Evaluation { score, loss, train_steps, window_success, window_roles, params: net.params().to_vec(), failure: None }
        }
        Ok((score, loss, ..)) => Evaluation::failed(format!("non-finite result: score {score}, loss {loss}")),
        Err(e) => Evaluation::failed(match e {
            TrainerError::Train(t) => t.to_string(),
            other => other.to_string(),
        }),
    }
}

/// Evaluate every member; controls keep their trained weights afterwards.
pub fn evaluate_generation(population: &mut Population, ctx: &TaskContext) {
    let generation = population.generation;
    let results: Vec<Evaluation> = population.members.par_iter().map(|m| evaluate_member(m, generation, ctx)).collect();
    for (m, e) in population.members.iter_mut().zip(results) {
        if let Some(reason) = &e.failure {
            log::warn!("generation {generation}: member {} failed: {reason}", m.id);
        }
        m.train_steps_total += e.train_steps;
        if m.role == MemberRole::Control && e.failure.is_none() {
            m.persistent_params = Some(e.params.clone());
        }
        m.evaluation = Some(e);
    }
}

/// One line of `metrics.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub generation: u32,
    pub best_parent_score: f64,
    pub mean_score: f64,
    pub std_score: f64,
    pub control_score: f64,
    pub best_ever_score: f64,
    pub best_parent_loss: f64,
    pub control_loss: f64,
    pub random_best_score: f64,
    pub dominant_lineage_id: u64,
    pub batches_consumed: usize,
}

pub const METRICS_HEADER: &str = "generation,best_parent_score,mean_score,std_score,control_score,best_ever_score,best_parent_loss,control_loss,random_best_score,dominant_lineage_id,batches_consumed";

fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.6}")
    }
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.generation,
            cell(self.best_parent_score),
            cell(self.mean_score),
            cell(self.std_score),
            cell(self.control_score),
            cell(self.best_ever_score),
            cell(self.best_parent_loss),
            cell(self.control_loss),
            cell(self.random_best_score),
            self.dominant_lineage_id,
            self.batches_consumed
        )
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

fn finite_mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

/// Extra per-generation facts that are not part of the CSV schema.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub generation: u32,
    pub parents: Vec<u64>,
    pub best_window_success: f64,
    /// Role-split greedy-window success of the best parent.
    pub best_parent_roles: Vec<(String, f64)>,
    pub composition: [usize; 3],
}

/// The best network seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct Champion {
    pub id: u64,
    pub generation: u32,
    pub score: f64,
    pub loss: f64,
    pub genome: Genome,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<MetricsRow>,
    pub summaries: Vec<GenerationSummary>,
    pub tree: PhyloTree,
    pub best: Option<Champion>,
    pub final_population: Population,
    pub stopped_early: bool,
}

fn better(task: Task, a: (f64, f64), b: (f64, f64)) -> bool {
    if task.selects_by_loss() {
        a.1 < b.1
    } else {
        a.0 > b.0
    }
}

/// Run the whole loop on the current rayon pool.
pub fn run_experiment(ctx: &TaskContext) -> Result<ExperimentResult, EvolutionError> {
    run_experiment_with(ctx, |_, _| {})
}

/// [`run_experiment`] with a callback after each generation.
pub fn run_experiment_with(
    ctx: &TaskContext,
    mut on_generation: impl FnMut(&MetricsRow, &GenerationSummary),
) -> Result<ExperimentResult, EvolutionError> {
    let spec = &ctx.spec;
    let task = spec.task;
    let shape = Shape::new(spec.n, spec.controls)?;
    let mut ids = IdSource::default();
    let mut tree = PhyloTree::new();
    let mut population = init_population(shape, task, spec.seed, &mut ids, &mut tree)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut best: Option<Champion> = None;
    let mut best_ever_score = f64::NEG_INFINITY;
    let mut stopped_early = false;

    for g in 0..spec.generations.max(1) {
        if g > 0 {
            let parents = select_parents(&population, shape.alpha, task.selects_by_loss());
            population = next_generation(&population, &parents, task, spec.seed, &mut ids, &mut tree)?;
        }
        evaluate_generation(&mut population, ctx);

        let parents = select_parents(&population, shape.alpha, task.selects_by_loss());
        let top = population.get(parents[0]).expect("selected from the population");
        let top_eval = top.evaluation.clone().expect("evaluated");
        if best.as_ref().is_none_or(|b| better(task, (top_eval.score, top_eval.loss), (b.score, b.loss))) {
            best = Some(Champion {
                id: top.id,
                generation: population.generation,
                score: top_eval.score,
                loss: top_eval.loss,
                genome: top.genome.clone(),
                params: top_eval.params.clone(),
            });
        }
        if top_eval.score.is_finite() {
            best_ever_score = best_ever_score.max(top_eval.score);
        }
        let of_role = |role: MemberRole| population.members.iter().filter(move |m| m.role == role);
        let (mean_score, std_score) = finite_mean_std(of_role(MemberRole::Evolved).map(|m| m.score()));
        let (control_score, _) = finite_mean_std(of_role(MemberRole::Control).map(|m| m.score()));
        let (control_loss, _) = finite_mean_std(of_role(MemberRole::Control).map(|m| m.loss()));
        let random_best_score = of_role(MemberRole::RandomInjected)
            .map(|m| m.score())
            .filter(|s| s.is_finite())
            .fold(f64::NAN, f64::max);
        let row = MetricsRow {
            generation: population.generation,
            best_parent_score: top_eval.score,
            mean_score,
            std_score,
            control_score,
            best_ever_score,
            best_parent_loss: top_eval.loss,
            control_loss,
            random_best_score,
            dominant_lineage_id: tree.dominant_lineage().map_or(0, |d| d.0),
            batches_consumed: of_role(MemberRole::Control).next().map_or(0, |c| c.train_steps_total),
        };
        let best_window_success = population
            .members
            .iter()
            .filter_map(|m| m.evaluation.as_ref())
            .map(|e| e.window_success)
            .fold(0.0, f64::max);
        let summary = GenerationSummary {
            generation: population.generation,
            parents: parents.clone(),
            best_window_success,
            best_parent_roles: top_eval.window_roles.clone(),
            composition: [
                population.count(MemberRole::Evolved),
                population.count(MemberRole::RandomInjected),
                population.count(MemberRole::Control),
            ],
        };
        log::info!(
            "generation {}: best parent {} score {:.4} loss {:.4}",
            row.generation,
            top.id,
            row.best_parent_score,
            row.best_parent_loss
        );
        on_generation(&row, &summary);
        rows.push(row);
        summaries.push(summary);

        let stop = match spec.stop {
            StopRule::Never => false,
            StopRule::WindowSuccess(f) => best_window_success >= f,
            StopRule::LossBelow(x) => top_eval.loss < x,
        };
        if stop {
            stopped_early = g + 1 < spec.generations.max(1);
            break;
        }
    }

    Ok(ExperimentResult { rows, summaries, tree, best, final_population: population, stopped_early })
}

/// Draw a member's random genome outside an experiment (examples, tests).
pub fn random_member<R: Rng + ?Sized>(task: Task, rng: &mut R) -> Genome {
    let (ni, no) = task.dims();
    random_genome(ni, no, rng)
}
