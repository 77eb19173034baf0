//! Training loops run for every member between generations.
//!
//! The two control tasks use one-step Q-learning with rank-softmax
//! exploration; MNIST uses plain mini-batch cross-entropy.

use rand::Rng;
use thiserror::Error;

use crate::env::mnist::{BatchStream, MnistSet, PIXELS};
use crate::env::{EnvError, Episodic};
use crate::netexec::{
    train_step, train_step_observed, AdamConfig, CompiledNetwork, ExecError, LossKind, OptimizerState, Sample, Target,
    TrainError,
};

#[derive(Debug, Error, PartialEq)]
pub enum TrainerError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("network produced non-finite action values")]
    NonFiniteQ,
}

/// Episode and batch budget for one generation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub episodes_per_generation: usize,
    pub steps_per_episode: usize,
    pub life_cycles: usize,
    pub batch_size: usize,
    pub max_batches_per_episode: Option<usize>,
    pub exploitation_fraction: f64,
    /// Supervised tasks only.
    pub batches_per_generation: usize,
}

impl Schedule {
    pub fn tag() -> Self {
        Schedule {
            episodes_per_generation: 128,
            steps_per_episode: 256,
            life_cycles: 16,
            batch_size: 16,
            max_batches_per_episode: None,
            exploitation_fraction: 0.9,
            batches_per_generation: 0,
        }
    }

    pub fn cartpole() -> Self {
        Schedule {
            episodes_per_generation: 250,
            steps_per_episode: 300,
            life_cycles: 1,
            batch_size: 25,
            max_batches_per_episode: Some(12),
            exploitation_fraction: 0.9,
            batches_per_generation: 0,
        }
    }

    pub fn mnist() -> Self {
        Schedule {
            episodes_per_generation: 0,
            steps_per_episode: 0,
            life_cycles: 0,
            batch_size: 50,
            max_batches_per_episode: None,
            exploitation_fraction: 0.9,
            batches_per_generation: 24,
        }
    }

    /// Episodes played with exploration before the greedy window.
    pub fn exploration_episodes(&self) -> usize {
        (self.exploitation_fraction * self.episodes_per_generation as f64).floor() as usize
    }

    pub fn exploitation_episodes(&self) -> usize {
        self.episodes_per_generation - self.exploration_episodes()
    }

    /// Training steps for an episode that lasted `steps` time steps.
    pub fn batches_for_episode(&self, steps: usize) -> usize {
        let n = steps.div_ceil(self.batch_size);
        self.max_batches_per_episode.map_or(n, |m| n.min(m))
    }
}

/// Probabilities of the rank-softmax: the i-th largest value gets weight
/// `e^(K+1-i)`. Equal values rank the lower index higher.
pub fn action_probabilities(q: &[f64]) -> Result<Vec<f64>, TrainerError> {
    if q.is_empty() || q.iter().any(|v| !v.is_finite()) {
        return Err(TrainerError::NonFiniteQ);
    }
    let mut order: Vec<usize> = (0..q.len()).collect();
    // ascending by value, higher index first among equals
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(b.cmp(&a)));
    let mut rank = vec![0.0; q.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = (pos + 1) as f64;
    }
    // shift by K before exponentiating; ratios are unchanged
    let k = q.len() as f64;
    let w: Vec<f64> = rank.iter().map(|r| (r - k).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

pub fn explore_action<R: Rng + ?Sized>(q: &[f64], rng: &mut R) -> Result<usize, TrainerError> {
    let p = action_probabilities(q)?;
    let mut u: f64 = rng.gen();
    for (i, pi) in p.iter().enumerate() {
        if u < *pi {
            return Ok(i);
        }
        u -= pi;
    }
    Ok(p.len() - 1)
}

/// Index of the largest value, lowest index among equals.
pub fn greedy_action(q: &[f64]) -> Result<usize, TrainerError> {
    if q.is_empty() || q.iter().any(|v| !v.is_finite()) {
        return Err(TrainerError::NonFiniteQ);
    }
    let mut best = 0;
    for i in 1..q.len() {
        if q[i] > q[best] {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    /// Memory was cleared before `state` was observed.
    pub reset_before: bool,
}

/// Q(state, action) and its one-step target for each transition.
///
/// The window is replayed in order from `memory` (the network memory before
/// the first transition) so recurrent reads see the same history as in play.
/// The next-state values come from the current network. Leaves the network
/// memory in an unspecified state.
pub fn q_targets(
    net: &mut CompiledNetwork,
    window: &[Transition],
    memory: &[f64],
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>), TrainerError> {
    net.set_memory(memory);
    let mut best_q = Vec::with_capacity(window.len() + 1);
    let mut taken = Vec::with_capacity(window.len());
    for t in window {
        if t.reset_before {
            net.reset_memory();
        }
        let q = net.forward(&t.state)?;
        taken.push(q[t.action]);
        best_q.push(q.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    let last = window.last();
    let tail = match last {
        Some(t) if !t.terminal => {
            let q = net.forward(&t.next_state)?;
            q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        }
        _ => 0.0,
    };
    best_q.push(tail);
    let targets = window
        .iter()
        .enumerate()
        .map(|(k, t)| if t.terminal { t.reward } else { t.reward + gamma * best_q[k + 1] })
        .collect();
    Ok((taken, targets))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlOptions {
    pub gamma: f64,
    pub adam: AdamConfig,
}

impl Default for RlOptions {
    fn default() -> Self {
        RlOptions { gamma: 0.9, adam: AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlReport {
    /// Mean episode score over the greedy window.
    pub score: f64,
    /// Mean training loss over the generation.
    pub loss: f64,
    pub train_steps: usize,
    pub episode_scores: Vec<f64>,
    pub episode_steps: Vec<usize>,
    /// Fraction of greedy-window episodes with a perfect score.
    pub window_success: f64,
    /// Success rate per role over the greedy window (roles the task has).
    pub window_roles: Vec<(String, f64)>,
}

fn train_window(
    net: &mut CompiledNetwork,
    window: &[Transition],
    memory: &[f64],
    opts: &RlOptions,
    opt: &mut OptimizerState,
) -> Result<f64, TrainerError> {
    let (_, targets) = q_targets(net, window, memory, opts.gamma)?;
    net.set_memory(memory);
    let samples: Vec<Sample> = window
        .iter()
        .zip(&targets)
        .map(|(t, &value)| Sample {
            input: &t.state,
            target: Target::Action { index: t.action, value },
            reset_memory: t.reset_before,
        })
        .collect();
    Ok(train_step(net, &samples, LossKind::SmoothL1, opt)?)
}

/// Play and learn one generation's episodes on `env`.
///
/// Exploration episodes sample actions from the rank-softmax, the remaining
/// ones act greedily. Every `batch_size` steps (and at episode end) the
/// trailing window of transitions drives one Adam step.
pub fn run_rl_generation<E: Episodic, R: Rng + ?Sized>(
    net: &mut CompiledNetwork,
    env: &mut E,
    schedule: &Schedule,
    opts: &RlOptions,
    rng: &mut R,
) -> Result<RlReport, TrainerError> {
    let mut opt = OptimizerState::new(net.param_count(), opts.adam);
    let explore = schedule.exploration_episodes();
    let mut obs = vec![0.0; env.observation_len()];
    let mut next = vec![0.0; env.observation_len()];
    let mut losses = Vec::new();
    let mut scores = Vec::with_capacity(schedule.episodes_per_generation);
    let mut lengths = Vec::with_capacity(schedule.episodes_per_generation);
    let mut tallies: Vec<(&'static str, usize, usize)> = Vec::new();

    for episode in 0..schedule.episodes_per_generation {
        let greedy = episode >= explore;
        env.reset(rng);
        net.reset_memory();
        env.observe(&mut obs);
        let mut window: Vec<Transition> = Vec::with_capacity(schedule.batch_size);
        let mut snapshot = net.memory().to_vec();
        let mut reset_pending = true;
        let mut batches = 0;
        let mut steps = 0;
        loop {
            if window.is_empty() {
                snapshot.copy_from_slice(net.memory());
            }
            let q = net.forward(&obs)?;
            let action = if greedy { greedy_action(q)? } else { explore_action(q, rng)? };
            let out = env.step(action, rng)?;
            steps += 1;
            env.observe(&mut next);
            window.push(Transition {
                state: obs.clone(),
                action,
                reward: out.reward,
                next_state: next.clone(),
                terminal: out.terminal,
                reset_before: reset_pending,
            });
            reset_pending = out.boundary;
            if window.len() == schedule.batch_size || out.episode_over {
                if schedule.max_batches_per_episode.is_none_or(|m| batches < m) {
                    losses.push(train_window(net, &window, &snapshot, opts, &mut opt)?);
                    batches += 1;
                }
                window.clear();
            }
            if out.boundary {
                net.reset_memory();
            }
            std::mem::swap(&mut obs, &mut next);
            if out.episode_over {
                break;
            }
        }
        scores.push(env.score());
        lengths.push(steps);
        if greedy {
            for (label, wins, tries) in env.role_tally() {
                match tallies.iter_mut().find(|t| t.0 == label) {
                    Some(t) => {
                        t.1 += wins;
                        t.2 += tries;
                    }
                    None => tallies.push((label, wins, tries)),
                }
            }
        }
    }

    let window_scores = &scores[explore.min(scores.len())..];
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(RlReport {
        score: mean(window_scores),
        loss: mean(&losses),
        train_steps: losses.len(),
        window_success: if window_scores.is_empty() {
            0.0
        } else {
            window_scores.iter().filter(|&&s| s >= 1.0).count() as f64 / window_scores.len() as f64
        },
        episode_scores: scores,
        episode_steps: lengths,
        window_roles: tallies
            .into_iter()
            .map(|(label, wins, tries)| (label.to_string(), wins as f64 / tries as f64))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedReport {
    pub loss: f64,
    /// Accuracy of the pre-update predictions on the training batches.
    pub accuracy: f64,
    pub train_steps: usize,
}

/// Train on `batches` consecutive batches from `stream`, one Adam step each.
/// Every sample starts from cleared memory.
pub fn run_supervised_generation(
    net: &mut CompiledNetwork,
    set: &MnistSet,
    stream: &mut BatchStream,
    batches: usize,
    adam: AdamConfig,
) -> Result<SupervisedReport, TrainerError> {
    let mut opt = OptimizerState::new(net.param_count(), adam);
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut seen = 0usize;
    for _ in 0..batches {
        let batch = stream.next_batch(set);
        let samples: Vec<Sample> = (0..batch.len())
            .map(|k| Sample { input: batch.input(k), target: Target::Class(batch.labels[k]), reset_memory: true })
            .collect();
        let labels = &batch.labels;
        let mut observe = |k: usize, out: &[f64]| {
            if greedy_action(out).ok() == Some(labels[k]) {
                correct += 1;
            }
        };
        loss += train_step_observed(net, &samples, LossKind::CrossEntropy, &mut opt, &mut observe)?;
        seen += batch.len();
    }
    Ok(SupervisedReport {
        loss: if batches == 0 { 0.0 } else { loss / batches as f64 },
        accuracy: if seen == 0 { 0.0 } else { correct as f64 / seen as f64 },
        train_steps: batches,
    })
}

/// Classification accuracy over a whole set.
pub fn evaluate_accuracy(net: &mut CompiledNetwork, set: &MnistSet) -> Result<f64, TrainerError> {
    let mut x = vec![0.0; PIXELS];
    let mut correct = 0;
    for i in 0..set.len() {
        set.normalized(i, &mut x);
        net.reset_memory();
        if greedy_action(net.forward(&x)?)? == set.labels[i] as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / set.len().max(1) as f64)
}

/// Mean cross-entropy over a whole set.
pub fn evaluate_loss(net: &mut CompiledNetwork, set: &MnistSet) -> Result<f64, TrainerError> {
    let mut x = vec![0.0; PIXELS];
    let mut total = 0.0;
    for i in 0..set.len() {
        set.normalized(i, &mut x);
        net.reset_memory();
        let out = net.forward(&x)?;
        total += crate::netexec::loss(out, Target::Class(set.labels[i] as usize), LossKind::CrossEntropy)
            .map_err(TrainError::from)?;
    }
    Ok(total / set.len().max(1) as f64)
}
