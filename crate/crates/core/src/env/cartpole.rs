//! Cart-pole balancing with the classic Euler-integrated dynamics.

use rand::Rng;

use super::{EnvError, Episodic, StepOutcome};

pub const OBSERVATION_LEN: usize = 4;
/// Action index to force sign.
pub const ACTION_SIGNS: [f64; 2] = [1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force_mag: f64,
    pub dt: f64,
    pub theta_limit: f64,
    pub x_limit: f64,
    pub max_steps: usize,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        CartPoleParams {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            dt: 0.02,
            theta_limit: 15f64.to_radians(),
            x_limit: 2.4,
            max_steps: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
    pub steps: usize,
}

impl CartPoleParams {
    /// (ẍ, θ̈) under horizontal force `force`.
    pub fn accelerations(&self, s: &CartPoleState, force: f64) -> (f64, f64) {
        let total = self.cart_mass + self.pole_mass;
        let (sin, cos) = s.theta.sin_cos();
        let ml = self.pole_mass * self.half_length;
        let temp = (force + ml * s.theta_dot * s.theta_dot * sin) / total;
        let theta_acc = (self.gravity * sin - cos * temp)
            / (self.half_length * (4.0 / 3.0 - self.pole_mass * cos * cos / total));
        let x_acc = (force + ml * (s.theta_dot * s.theta_dot * sin - theta_acc * cos)) / total;
        (x_acc, theta_acc)
    }

    /// One Euler step without termination checks.
    pub fn integrate(&self, s: &CartPoleState, force: f64) -> CartPoleState {
        let (x_acc, theta_acc) = self.accelerations(s, force);
        CartPoleState {
            x: s.x + self.dt * s.x_dot,
            x_dot: s.x_dot + self.dt * x_acc,
            theta: s.theta + self.dt * s.theta_dot,
            theta_dot: s.theta_dot + self.dt * theta_acc,
            steps: s.steps + 1,
        }
    }

    pub fn failed(&self, s: &CartPoleState) -> bool {
        s.theta.abs() > self.theta_limit || s.x.abs() > self.x_limit
    }

    pub fn is_terminal(&self, s: &CartPoleState) -> bool {
        self.failed(s) || s.steps >= self.max_steps
    }
}

impl CartPoleState {
    /// All four state variables uniform in ±0.05.
    pub fn reset<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut u = || rng.gen_range(-0.05..0.05);
        CartPoleState { x: u(), x_dot: u(), theta: u(), theta_dot: u(), steps: 0 }
    }

    pub fn observation(&self) -> [f64; OBSERVATION_LEN] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }
}

#[derive(Debug, Clone)]
pub struct CartPole {
    pub params: CartPoleParams,
    pub state: CartPoleState,
    done: bool,
}

impl CartPole {
    pub fn new(params: CartPoleParams, state: CartPoleState) -> Self {
        CartPole { params, state, done: false }
    }

    /// Steps survived without failing.
    pub fn upright_steps(&self) -> usize {
        if self.params.failed(&self.state) {
            self.state.steps - 1
        } else {
            self.state.steps
        }
    }

    pub fn succeeded(&self) -> bool {
        self.upright_steps() >= self.params.max_steps
    }
}

impl Episodic for CartPole {
    fn observation_len(&self) -> usize {
        OBSERVATION_LEN
    }

    fn action_count(&self) -> usize {
        ACTION_SIGNS.len()
    }

    fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.state = CartPoleState::reset(rng);
        self.done = false;
    }

    fn observe(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.state.observation());
    }

    fn step<R: Rng + ?Sized>(&mut self, action: usize, _rng: &mut R) -> Result<StepOutcome, EnvError> {
        if action >= ACTION_SIGNS.len() {
            return Err(EnvError::BadAction { action, actions: ACTION_SIGNS.len() });
        }
        if self.done {
            return Err(EnvError::StepAfterEnd);
        }
        let force = self.params.force_mag * ACTION_SIGNS[action];
        self.state = self.params.integrate(&self.state, force);
        let failed = self.params.failed(&self.state);
        self.done = self.params.is_terminal(&self.state);
        Ok(StepOutcome {
            reward: if failed { 0.0 } else { 1.0 },
            // running out of time is a truncation, not a terminal state
            terminal: failed,
            boundary: self.done,
            episode_over: self.done,
        })
    }

    /// Fraction of the step budget survived.
    fn score(&self) -> f64 {
        self.upright_steps() as f64 / self.params.max_steps as f64
    }

    fn role_label(&self) -> &'static str {
        "cart"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rest() -> CartPoleState {
        CartPoleState { x: 0.0, x_dot: 0.0, theta: 0.0, theta_dot: 0.0, steps: 0 }
    }

    #[test]
    fn push_right_tips_pole_back() {
        let p = CartPoleParams::default();
        let (x_acc, theta_acc) = p.accelerations(&rest(), 10.0);
        // hand-evaluated: temp = 10/1.1, θ̈ = -temp / (0.5 (4/3 - 0.1/1.1))
        let temp = 10.0 / 1.1;
        let oracle = -temp / (0.5 * (4.0 / 3.0 - 0.1 / 1.1));
        assert!((theta_acc - oracle).abs() < 1e-12);
        assert!(theta_acc < 0.0 && x_acc > 0.0);
        let mut env = CartPole::new(p, rest());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.step(0, &mut rng).unwrap();
        env.step(0, &mut rng).unwrap();
        assert!(env.state.x > 0.0);
    }

    #[test]
    fn falling_pole_terminates_without_reward() {
        let p = CartPoleParams::default();
        let start = CartPoleState { theta: 0.26, theta_dot: 2.0, ..rest() };
        let mut env = CartPole::new(p, start);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = env.step(0, &mut rng).unwrap();
        assert!(out.terminal && out.episode_over);
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.upright_steps(), 0);
        assert_eq!(env.step(0, &mut rng), Err(EnvError::StepAfterEnd));
    }

    #[test]
    fn surviving_the_budget_is_success() {
        // with gravity off nothing falls, so 300 steps always pass
        let p = CartPoleParams { gravity: 0.0, force_mag: 0.0, ..Default::default() };
        let mut env = CartPole::new(p, rest());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut total = 0.0;
        loop {
            let out = env.step(0, &mut rng).unwrap();
            total += out.reward;
            if out.episode_over {
                assert!(!out.terminal);
                break;
            }
        }
        assert_eq!(total, 300.0);
        assert!(env.succeeded());
        assert_eq!(env.score(), 1.0);
    }

    #[test]
    fn hanging_pendulum_period() {
        // small oscillation about θ = π with no force; refine dt for the oracle
        let p = CartPoleParams { dt: 0.002, ..Default::default() };
        let total = p.cart_mass + p.pole_mass;
        let omega = (p.gravity / (p.half_length * (4.0 / 3.0 - p.pole_mass / total))).sqrt();
        let expected = 2.0 * std::f64::consts::PI / omega;

        let mut s = CartPoleState { theta: std::f64::consts::PI + 0.01, ..rest() };
        let mut crossings = Vec::new();
        let mut prev = s.theta - std::f64::consts::PI;
        for k in 1..20_000 {
            s = p.integrate(&s, 0.0);
            let cur = s.theta - std::f64::consts::PI;
            if prev > 0.0 && cur <= 0.0 {
                crossings.push(k as f64 * p.dt);
            }
            prev = cur;
        }
        assert!(crossings.len() >= 3);
        let period = (crossings[2] - crossings[0]) / 2.0;
        assert!((period - expected).abs() / expected < 0.1, "{period} vs {expected}");
    }

    #[test]
    fn reset_is_small_and_seeded() {
        let a = CartPoleState::reset(&mut ChaCha8Rng::seed_from_u64(5));
        let b = CartPoleState::reset(&mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert!(a.observation().iter().all(|v| v.abs() <= 0.05));
    }
}
