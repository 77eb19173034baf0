//! Prey/predator tag on a periodic grid.
//!
//! The learning agent plays against a scripted opponent that greedily
//! minimises (as predator) or maximises (as prey) the Euclidean distance to
//! the agent. Both sides share the three moves Down, Right and North-West,
//! whose displacements sum to zero.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{EnvError, Episodic, StepOutcome};

pub const OBSERVATION_LEN: usize = 17;
pub const ACTIONS: [(i32, i32); 3] = [(1, 0), (0, 1), (-1, -1)];
pub const ACTION_NAMES: [&str; 3] = ["down", "right", "north-west"];

/// Points given to the agent.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TagRewards {
    pub predator_step: f64,
    pub catch: f64,
    pub prey_step: f64,
    pub caught: f64,
    /// Added when the same action is played three or more times in a row.
    pub repeat: f64,
}

impl Default for TagRewards {
    fn default() -> Self {
        TagRewards { predator_step: -1.0, catch: 10.0, prey_step: 1.0, caught: -10.0, repeat: -5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Prey,
    Predator,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Prey => Role::Predator,
            Role::Predator => Role::Prey,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::Prey => "prey",
            Role::Predator => "predator",
        }
    }
}

/// Which roles the agent is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Specialization {
    /// Alternate prey and predator every life-cycle, starting as prey.
    Both,
    Prey,
    Predator,
}

impl Specialization {
    pub fn role_for_cycle(self, cycle: usize) -> Role {
        match self {
            Specialization::Both if cycle % 2 == 0 => Role::Prey,
            Specialization::Both => Role::Predator,
            Specialization::Prey => Role::Prey,
            Specialization::Predator => Role::Predator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagConfig {
    pub rows: i32,
    pub cols: i32,
    pub life_cycles: usize,
    pub steps_per_cycle: usize,
    pub specialization: Specialization,
    pub rewards: TagRewards,
}

impl Default for TagConfig {
    fn default() -> Self {
        TagConfig {
            rows: 12,
            cols: 12,
            life_cycles: 16,
            steps_per_cycle: 16,
            specialization: Specialization::Both,
            rewards: TagRewards::default(),
        }
    }
}

/// Signed displacement on a ring of `size` cells with the smallest magnitude;
/// a half-way tie resolves to the positive value.
pub fn min_image(d: i32, size: i32) -> i32 {
    let r = d.rem_euclid(size);
    if 2 * r > size {
        r - size
    } else {
        r
    }
}

pub fn displacement(from: (i32, i32), to: (i32, i32), rows: i32, cols: i32) -> (i32, i32) {
    (min_image(to.0 - from.0, rows), min_image(to.1 - from.1, cols))
}

pub fn torus_distance(a: (i32, i32), b: (i32, i32), rows: i32, cols: i32) -> f64 {
    let (dr, dc) = displacement(a, b, rows, cols);
    ((dr * dr + dc * dc) as f64).sqrt()
}

fn apply(pos: (i32, i32), action: usize, rows: i32, cols: i32) -> (i32, i32) {
    let (dr, dc) = ACTIONS[action];
    ((pos.0 + dr).rem_euclid(rows), (pos.1 + dc).rem_euclid(cols))
}

/// Octant of a non-zero displacement, 0 = North then clockwise
/// (N, NE, E, SE, S, SW, W, NW). Rows grow southwards.
pub fn octant(dr: i32, dc: i32) -> Option<usize> {
    if dr == 0 && dc == 0 {
        return None;
    }
    let angle = (dc as f64).atan2(-dr as f64); // clockwise from north
    let sector = (angle / std::f64::consts::FRAC_PI_4).round() as i64;
    Some(sector.rem_euclid(8) as usize)
}

/// Two positions are a legal start when distinct and not N/S/E/W neighbours.
pub fn legal_start(a: (i32, i32), b: (i32, i32), rows: i32, cols: i32) -> bool {
    let (dr, dc) = displacement(a, b, rows, cols);
    !(dr == 0 && dc == 0) && dr.abs() + dc.abs() != 1
}

pub fn random_start<R: Rng + ?Sized>(rows: i32, cols: i32, rng: &mut R) -> ((i32, i32), (i32, i32)) {
    loop {
        let a = (rng.gen_range(0..rows), rng.gen_range(0..cols));
        let b = (rng.gen_range(0..rows), rng.gen_range(0..cols));
        if legal_start(a, b, rows, cols) {
            return (a, b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagState {
    pub rows: i32,
    pub cols: i32,
    pub agent: (i32, i32),
    pub opponent: (i32, i32),
    pub role: Role,
    pub life_cycle: usize,
    pub step_in_cycle: usize,
    /// Most recent agent actions, newest last, at most three.
    pub last_actions: Vec<usize>,
    pub rewards: TagRewards,
}

impl TagState {
    pub fn reset<R: Rng + ?Sized>(config: &TagConfig, rng: &mut R) -> TagState {
        let (agent, opponent) = random_start(config.rows, config.cols, rng);
        TagState {
            rows: config.rows,
            cols: config.cols,
            agent,
            opponent,
            role: config.specialization.role_for_cycle(0),
            life_cycle: 0,
            step_in_cycle: 0,
            last_actions: Vec::with_capacity(3),
            rewards: config.rewards,
        }
    }

    /// Observation before permutation: 3×3 window indicators (row-major,
    /// agent at the centre) then the opponent octant one-hot.
    pub fn raw_observation(&self) -> [f64; OBSERVATION_LEN] {
        let mut out = [0.0; OBSERVATION_LEN];
        let (dr, dc) = displacement(self.agent, self.opponent, self.rows, self.cols);
        if dr.abs() <= 1 && dc.abs() <= 1 {
            out[((dr + 1) * 3 + (dc + 1)) as usize] = 1.0;
        }
        if let Some(o) = octant(dr, dc) {
            out[9 + o] = 1.0;
        }
        out
    }

    /// The opponent's move: best post-move distance, lowest index on ties.
    pub fn opponent_action(&self) -> usize {
        let score = |a: usize| {
            let d = torus_distance(apply(self.opponent, a, self.rows, self.cols), self.agent, self.rows, self.cols);
            match self.role {
                // opponent is the predator
                Role::Prey => -d,
                Role::Predator => d,
            }
        };
        let mut best = 0;
        for a in 1..ACTIONS.len() {
            if score(a) > score(best) {
                best = a;
            }
        }
        best
    }

    /// Advance one time step within the current life-cycle.
    ///
    /// Returns the reward and whether the step ended in a catch. The caller
    /// decides what happens at the end of a life-cycle.
    pub fn step(&mut self, action: usize) -> Result<(f64, bool), EnvError> {
        if action >= ACTIONS.len() {
            return Err(EnvError::BadAction { action, actions: ACTIONS.len() });
        }
        if self.agent == self.opponent {
            return Err(EnvError::StepAfterEnd);
        }
        let mut reward = match self.role {
            Role::Prey => self.rewards.prey_step,
            Role::Predator => self.rewards.predator_step,
        };
        if self.last_actions.len() == 3 {
            self.last_actions.remove(0);
        }
        self.last_actions.push(action);
        if self.last_actions.len() == 3 && self.last_actions.iter().all(|&a| a == action) {
            reward += self.rewards.repeat;
        }
        self.step_in_cycle += 1;

        self.agent = apply(self.agent, action, self.rows, self.cols);
        if self.agent != self.opponent {
            let a = self.opponent_action();
            self.opponent = apply(self.opponent, a, self.rows, self.cols);
        }
        let caught = self.agent == self.opponent;
        if caught {
            reward += match self.role {
                Role::Predator => self.rewards.catch,
                Role::Prey => self.rewards.caught,
            };
        }
        Ok((reward, caught))
    }
}

/// Fraction of successful life-cycles.
pub fn tag_score(successes: &[bool]) -> f64 {
    if successes.is_empty() {
        return 0.0;
    }
    successes.iter().filter(|&&s| s).count() as f64 / successes.len() as f64
}

/// A whole episode of consecutive life-cycles with a fixed observation permutation.
#[derive(Debug, Clone)]
pub struct TagEpisode {
    pub config: TagConfig,
    pub state: TagState,
    /// `permutation[k]` is the observation slot that receives raw feature `k`.
    pub permutation: Vec<usize>,
    pub successes: Vec<bool>,
}

impl TagEpisode {
    pub fn new<R: Rng + ?Sized>(config: TagConfig, permutation: Vec<usize>, rng: &mut R) -> Self {
        assert_eq!(permutation.len(), OBSERVATION_LEN);
        let state = TagState::reset(&config, rng);
        TagEpisode { config, state, permutation, successes: Vec::new() }
    }

    fn start_cycle<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let cycle = self.successes.len();
        self.state = TagState::reset(&self.config, rng);
        self.state.life_cycle = cycle;
        self.state.role = self.config.specialization.role_for_cycle(cycle);
    }
}

/// One permutation of the 17 observation slots, drawn once per experiment.
pub fn random_permutation<R: Rng + ?Sized>(rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..OBSERVATION_LEN).collect();
    p.shuffle(rng);
    p
}

impl Episodic for TagEpisode {
    fn observation_len(&self) -> usize {
        OBSERVATION_LEN
    }

    fn action_count(&self) -> usize {
        ACTIONS.len()
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.successes.clear();
        self.start_cycle(rng);
    }

    fn observe(&self, out: &mut [f64]) {
        let raw = self.state.raw_observation();
        for (k, v) in raw.iter().enumerate() {
            out[self.permutation[k]] = *v;
        }
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<StepOutcome, EnvError> {
        if self.successes.len() >= self.config.life_cycles {
            return Err(EnvError::StepAfterEnd);
        }
        let role = self.state.role;
        let (reward, caught) = self.state.step(action)?;
        let timeout = self.state.step_in_cycle >= self.config.steps_per_cycle;
        let cycle_over = caught || timeout;
        if cycle_over {
            let success = match role {
                Role::Predator => caught,
                Role::Prey => !caught,
            };
            self.successes.push(success);
        }
        let episode_over = self.successes.len() >= self.config.life_cycles;
        if cycle_over && !episode_over {
            self.start_cycle(rng);
        }
        Ok(StepOutcome { reward, terminal: cycle_over, boundary: cycle_over, episode_over })
    }

    fn score(&self) -> f64 {
        tag_score(&self.successes)
    }

    fn role_label(&self) -> &'static str {
        self.state.role.label()
    }

    fn role_tally(&self) -> Vec<(&'static str, usize, usize)> {
        [Role::Prey, Role::Predator]
            .into_iter()
            .map(|role| {
                let cycles: Vec<bool> = self
                    .successes
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| self.config.specialization.role_for_cycle(*k) == role)
                    .map(|(_, &s)| s)
                    .collect();
                (role.label(), cycles.iter().filter(|&&s| s).count(), cycles.len())
            })
            .filter(|t| t.2 > 0)
            .collect()
    }
}

/// Summary of paired random walks used to calibrate rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub runs: usize,
    pub collided: usize,
    /// Runs that had not collided after `max_steps`.
    pub censored: usize,
    /// Mean steps to first co-location over the runs that collided.
    pub mean_steps: f64,
    pub std_steps: f64,
}

/// Two uniform random walkers over the three moves, started under the reset
/// rules. Each step walker A moves, co-location is checked, then walker B
/// moves and co-location is checked again.
pub fn tag_calibrate<R: Rng + ?Sized>(runs: usize, rows: i32, cols: i32, max_steps: usize, rng: &mut R) -> Calibration {
    let mut steps = Vec::with_capacity(runs);
    let mut censored = 0;
    for _ in 0..runs {
        let (mut a, mut b) = random_start(rows, cols, rng);
        let mut hit = None;
        for t in 1..=max_steps {
            a = apply(a, rng.gen_range(0..ACTIONS.len()), rows, cols);
            if a == b {
                hit = Some(t);
                break;
            }
            b = apply(b, rng.gen_range(0..ACTIONS.len()), rows, cols);
            if a == b {
                hit = Some(t);
                break;
            }
        }
        match hit {
            Some(t) => steps.push(t as f64),
            None => censored += 1,
        }
    }
    let n = steps.len().max(1) as f64;
    let mean = steps.iter().sum::<f64>() / n;
    let var = steps.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    Calibration { runs, collided: steps.len(), censored, mean_steps: mean, std_steps: var.sqrt() }
}
