//! Evaluation tasks: [`tag`] (prey/predator gridworld), [`cartpole`], and
//! [`mnist`] data loading.

pub mod cartpole;
pub mod mnist;
pub mod tag;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("action {action} out of range ({actions} actions)")]
    BadAction { action: usize, actions: usize },
    #[error("step after the episode ended")]
    StepAfterEnd,
}

/// Result of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    /// The transition ends an MDP episode: no bootstrapping from the next state.
    pub terminal: bool,
    /// Network memory should be cleared before the next observation.
    pub boundary: bool,
    pub episode_over: bool,
}

/// An episodic task driven by discrete actions.
pub trait Episodic {
    fn observation_len(&self) -> usize;
    fn action_count(&self) -> usize;
    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R);
    fn observe(&self, out: &mut [f64]);
    fn step<R: Rng + ?Sized>(&mut self, action: usize, rng: &mut R) -> Result<StepOutcome, EnvError>;
    /// Score of the current (usually finished) episode, in [0, 1].
    fn score(&self) -> f64;
    fn role_label(&self) -> &'static str;
    /// Per-role `(label, successes, attempts)` for the current episode, when
    /// the task has roles.
    fn role_tally(&self) -> Vec<(&'static str, usize, usize)> {
        Vec::new()
    }
}

/// One line of an episode log: `step,role,action,reward,terminal`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub step: usize,
    pub role: String,
    pub action: usize,
    pub reward: f64,
    pub terminal: bool,
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{},{}", self.step, self.role, self.action, self.reward, self.terminal as u8)
    }
}

impl FromStr for LogRecord {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let f: Vec<&str> = s.trim().split(',').collect();
        if f.len() != 5 {
            return Err(format!("expected 5 fields, got {}", f.len()));
        }
        let bad = |what: &str| format!("bad {what} in `{s}`");
        Ok(LogRecord {
            step: f[0].parse().map_err(|_| bad("step"))?,
            role: f[1].to_string(),
            action: f[2].parse().map_err(|_| bad("action"))?,
            reward: f[3].parse().map_err(|_| bad("reward"))?,
            terminal: match f[4] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("terminal flag")),
            },
        })
    }
}

/// Play `actions` from a fresh episode and log every step.
pub fn replay<E: Episodic, R: Rng + ?Sized>(env: &mut E, actions: &[usize], rng: &mut R) -> Result<Vec<LogRecord>, EnvError> {
    let mut out = Vec::with_capacity(actions.len());
    for (step, &action) in actions.iter().enumerate() {
        let role = env.role_label().to_string();
        let o = env.step(action, rng)?;
        out.push(LogRecord { step, role, action, reward: o.reward, terminal: o.terminal });
        if o.episode_over {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_line_round_trip() {
        let r = LogRecord { step: 3, role: "prey".into(), action: 2, reward: -4.0, terminal: false };
        assert_eq!(r.to_string(), "3,prey,2,-4,0");
        assert_eq!(r.to_string().parse::<LogRecord>().unwrap(), r);
        assert!("1,2,3".parse::<LogRecord>().is_err());
    }

    #[test]
    fn replay_is_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let perm = tag::random_permutation(&mut rng);
            let mut ep = tag::TagEpisode::new(tag::TagConfig::default(), perm, &mut rng);
            ep.reset(&mut rng);
            let actions: Vec<usize> = (0..256).map(|k| (k * 7 + k / 5) % 3).collect();
            replay(&mut ep, &actions, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}
