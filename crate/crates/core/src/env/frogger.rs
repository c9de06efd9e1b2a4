//! Single drone crossing two lanes of patrolling traffic.
//!
//! Objectives: `[goal, bounds, avoid]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{bit, check_action, clip, flag, take, uniform, Environment, PatrolOpponent, RewardInputs, Step};
use crate::error::{Error, Result};
use crate::math;

pub const GOAL_BONUS: f64 = 10.0;
pub const CRASH_GOAL_PENALTY: f64 = -15.0;
pub const BOUNDARY_PENALTY: f64 = -25.0;
pub const COLLISION_PENALTY: f64 = -25.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FroggerConfig {
    /// Arena is `[-h, h]^2`.
    pub half_extent: f64,
    /// Largest per-axis displacement per step.
    pub step_size: f64,
    pub lanes: Vec<f64>,
    pub speeds: Vec<f64>,
    pub x_lim: f64,
    pub reversal_prob: f64,
    pub start_y: f64,
    pub goal_y: f64,
    /// Start and goal x are drawn from `[-spawn_half_width, spawn_half_width]`.
    pub spawn_half_width: f64,
    pub goal_radius: f64,
    pub collision_radius: f64,
    pub max_steps: usize,
}

impl Default for FroggerConfig {
    fn default() -> Self {
        FroggerConfig {
            half_extent: 1.0,
            step_size: 0.05,
            lanes: vec![-0.3, 0.3],
            speeds: vec![0.03, 0.04],
            x_lim: 0.95,
            reversal_prob: 0.05,
            start_y: -0.8,
            goal_y: 0.8,
            spawn_half_width: 0.5,
            goal_radius: 0.1,
            collision_radius: 0.1,
            max_steps: 400,
        }
    }
}

impl FroggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lanes.is_empty() || self.speeds.is_empty() {
            return Err(Error::config("frogger needs at least one lane and one opponent speed"));
        }
        if !(self.half_extent > 0.0 && self.step_size > 0.0 && self.max_steps > 0) {
            return Err(Error::config("frogger arena, step size and step cap must be positive"));
        }
        if !(0.0..=1.0).contains(&self.reversal_prob) {
            return Err(Error::config("frogger reversal probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Quantities the frogger reward reads.
#[derive(Clone, Debug, PartialEq)]
pub struct FroggerInputs {
    pub prev_goal_dist: f64,
    pub goal_dist: f64,
    /// Signed distance to the nearest wall; negative outside the arena.
    pub wall_dist: f64,
    pub opponent_dist: f64,
    pub reached_goal: bool,
    pub collided: bool,
    pub out_of_bounds: bool,
}

impl FroggerInputs {
    pub fn encode(&self) -> Vec<f64> {
        vec![
            self.prev_goal_dist,
            self.goal_dist,
            self.wall_dist,
            self.opponent_dist,
            bit(self.reached_goal),
            bit(self.collided),
            bit(self.out_of_bounds),
        ]
    }

    pub fn decode(data: &[f64]) -> Result<Self> {
        let [p, g, w, o, r, c, b] = take::<7>("frogger", data)?;
        Ok(FroggerInputs {
            prev_goal_dist: p,
            goal_dist: g,
            wall_dist: w,
            opponent_dist: o,
            reached_goal: flag(r),
            collided: flag(c),
            out_of_bounds: flag(b),
        })
    }
}

pub fn rewards(i: &FroggerInputs) -> [f64; 3] {
    let mut goal = clip(i.prev_goal_dist - i.goal_dist, -1.0, 1.0);
    if i.reached_goal {
        goal += GOAL_BONUS;
    }
    if i.collided || i.out_of_bounds {
        goal += CRASH_GOAL_PENALTY;
    }
    let mut bounds = 0.1 * clip(i.wall_dist / 0.2, 0.0, 1.0);
    if i.out_of_bounds {
        bounds += BOUNDARY_PENALTY;
    }
    let mut avoid = 0.1 * clip(i.opponent_dist / 0.3, 0.0, 1.0);
    if i.collided {
        avoid += COLLISION_PENALTY;
    }
    [goal, bounds, avoid]
}

#[derive(Clone, Debug)]
pub struct FroggerEnv {
    pub config: FroggerConfig,
    pub agent: [f64; 2],
    pub goal: [f64; 2],
    pub opponents: Vec<PatrolOpponent>,
    prev_opponents: Vec<[f64; 2]>,
    steps: usize,
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    math::hypot(a[0] - b[0], a[1] - b[1])
}

impl FroggerEnv {
    pub fn new(config: FroggerConfig) -> Self {
        FroggerEnv {
            agent: [0.0, config.start_y],
            goal: [0.0, config.goal_y],
            opponents: Vec::new(),
            prev_opponents: Vec::new(),
            steps: 0,
            config,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(self.observation_dim());
        obs.extend_from_slice(&self.agent);
        obs.push(self.goal[0] - self.agent[0]);
        obs.push(self.goal[1] - self.agent[1]);
        for o in &self.opponents {
            obs.extend_from_slice(&o.position());
        }
        for p in &self.prev_opponents {
            obs.extend_from_slice(p);
        }
        obs
    }

    fn nearest_opponent(&self) -> f64 {
        self.opponents
            .iter()
            .map(|o| dist(self.agent, o.position()))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Environment for FroggerEnv {
    fn name(&self) -> &'static str {
        "frogger"
    }

    fn objective_count(&self) -> usize {
        3
    }

    fn observation_dim(&self) -> usize {
        4 + 4 * self.config.lanes.len()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let c = &self.config;
        self.agent = [uniform(rng, -c.spawn_half_width, c.spawn_half_width), c.start_y];
        self.goal = [uniform(rng, -c.spawn_half_width, c.spawn_half_width), c.goal_y];
        self.opponents = c
            .lanes
            .iter()
            .map(|&y| PatrolOpponent::spawn(rng, y, &c.speeds, c.x_lim, c.reversal_prob))
            .collect();
        self.prev_opponents = self.opponents.iter().map(|o| o.position()).collect();
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Step> {
        check_action("frogger", action, 2)?;
        self.prev_opponents = self.opponents.iter().map(|o| o.position()).collect();
        for o in &mut self.opponents {
            o.step(rng);
        }
        let h = self.config.half_extent;
        let prev_goal_dist = dist(self.agent, self.goal);
        for (p, a) in self.agent.iter_mut().zip(action) {
            *p += (2.0 * a.clamp(0.0, 1.0) - 1.0) * self.config.step_size;
        }
        let [x, y] = self.agent;
        let wall_dist = (h - x.abs()).min(h - y.abs());
        let opponent_dist = self.nearest_opponent();
        let goal_dist = dist(self.agent, self.goal);
        let inputs = FroggerInputs {
            prev_goal_dist,
            goal_dist,
            wall_dist,
            opponent_dist,
            reached_goal: goal_dist < self.config.goal_radius,
            collided: opponent_dist < self.config.collision_radius,
            out_of_bounds: wall_dist < 0.0,
        };
        self.steps += 1;
        let terminated = inputs.reached_goal || inputs.collided || inputs.out_of_bounds;
        Ok(Step {
            observation: self.observation(),
            reward: rewards(&inputs).to_vec(),
            terminated,
            truncated: !terminated && self.steps >= self.config.max_steps,
            inputs: RewardInputs::Frogger(inputs),
        })
    }

    fn return_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let cap = self.config.max_steps as f64;
        let span = 2.0 * self.config.half_extent * core::f64::consts::SQRT_2;
        (
            vec![CRASH_GOAL_PENALTY - span, BOUNDARY_PENALTY, COLLISION_PENALTY],
            vec![GOAL_BONUS + span, 0.1 * cap, 0.1 * cap],
        )
    }

    fn objective_names(&self) -> Vec<&'static str> {
        vec!["goal", "bounds", "avoid"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> FroggerInputs {
        FroggerInputs {
            prev_goal_dist: 1.0,
            goal_dist: 1.0,
            wall_dist: 0.5,
            opponent_dist: 1.0,
            reached_goal: false,
            collided: false,
            out_of_bounds: false,
        }
    }

    #[test]
    fn progress_reward() {
        let r = rewards(&FroggerInputs {
            goal_dist: 0.5,
            ..quiet()
        });
        assert_eq!(r[0], 0.5);
    }

    #[test]
    fn wall_saturation() {
        let r = rewards(&FroggerInputs {
            wall_dist: 0.2,
            ..quiet()
        });
        assert_eq!(r[1], 0.1);
    }

    #[test]
    fn opponent_collision() {
        let i = FroggerInputs {
            opponent_dist: 0.05,
            collided: true,
            ..quiet()
        };
        let r = rewards(&i);
        assert!((r[2] - (0.1 * (0.05 / 0.3) - 25.0)).abs() < 1e-12);
        assert!((r[2] + 24.983).abs() < 1e-3);
        assert_eq!(r[0], -15.0);
    }

    #[test]
    fn collision_with_opponent_ends_episode() {
        let mut env = FroggerEnv::new(FroggerConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        env.reset(&mut rng);
        for o in &mut env.opponents {
            o.reversal_prob = 0.0;
            o.speed = 0.0;
        }
        env.opponents[0].x = 0.0;
        env.opponents[0].y = -0.3;
        env.agent = [0.0, -0.4];
        let s = env.step(&[0.5, 1.0], &mut rng).unwrap();
        assert!(s.terminated);
        let d = 0.3 - 0.4 + 0.05f64;
        assert!((s.reward[2] - (0.1 * (d.abs() / 0.3) + COLLISION_PENALTY)).abs() < 1e-12);
    }

    #[test]
    fn observation_shape_and_cap() {
        let cfg = FroggerConfig {
            max_steps: 5,
            lanes: vec![0.9],
            ..Default::default()
        };
        let mut env = FroggerEnv::new(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(env.reset(&mut rng).len(), env.observation_dim());
        let mut last = None;
        for _ in 0..5 {
            last = Some(env.step(&[0.5, 0.5], &mut rng).unwrap());
        }
        let s = last.unwrap();
        assert!(s.truncated && !s.terminated);
        assert_eq!(s.reward[0], 0.0);
    }

    #[test]
    fn encode_round_trip() {
        let i = FroggerInputs {
            collided: true,
            ..quiet()
        };
        assert_eq!(FroggerInputs::decode(&i.encode()).unwrap(), i);
        assert!(FroggerInputs::decode(&[1.0]).is_err());
    }
}
