//! Three drones moving to a goal as an equilateral triangle, past a patrolling
//! opponent. One centralized policy emits all three displacement commands.
//!
//! Objectives: `[goal, bounds, avoid, form]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{bit, check_action, clip, flag, take, uniform, Environment, PatrolOpponent, RewardInputs, Step};
use crate::error::{Error, Result};
use crate::math;

pub const AGENTS: usize = 3;
pub const GOAL_BONUS: f64 = 10.0;
pub const CRASH_PENALTY: f64 = -5.0;
pub const OPPONENT_PENALTY: f64 = -10.0;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FormationConfig {
    pub half_extent: f64,
    pub side_length: f64,
    pub step_size: f64,
    pub start_y: f64,
    pub goal_y: f64,
    pub spawn_half_width: f64,
    pub opponent_y: f64,
    pub speeds: Vec<f64>,
    pub x_lim: f64,
    pub reversal_prob: f64,
    pub goal_radius: f64,
    /// Opponent contact and agent-agent contact distance.
    pub collision_radius: f64,
    pub max_steps: usize,
}

impl Default for FormationConfig {
    fn default() -> Self {
        FormationConfig {
            half_extent: 1.0,
            side_length: 0.45,
            step_size: 0.05,
            start_y: -0.7,
            goal_y: 0.7,
            spawn_half_width: 0.5,
            opponent_y: 0.0,
            speeds: vec![0.03, 0.04],
            x_lim: 0.95,
            reversal_prob: 0.05,
            goal_radius: 0.1,
            collision_radius: 0.1,
            max_steps: 600,
        }
    }
}

impl FormationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.speeds.is_empty() {
            return Err(Error::config("formation needs at least one opponent speed"));
        }
        if !(self.half_extent > 0.0 && self.step_size > 0.0 && self.side_length > 0.0 && self.max_steps > 0) {
            return Err(Error::config(
                "formation arena, step size, side length and step cap must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.reversal_prob) {
            return Err(Error::config("formation reversal probability must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Quantities the formation reward reads.
#[derive(Clone, Debug, PartialEq)]
pub struct FormationInputs {
    /// Centroid-to-goal distance before and after the step.
    pub prev_goal_dist: f64,
    pub goal_dist: f64,
    /// Mean command norm over the agents.
    pub effort: f64,
    /// `min_i min(x_lim - |x_i|, y_lim - |y_i|)`.
    pub min_wall_dist: f64,
    pub min_opponent_dist: f64,
    /// Largest deviation of a pairwise distance from the target side length.
    pub formation_error: f64,
    pub reached_goal: bool,
    pub opponent_hit: bool,
    pub agent_contact: bool,
    pub out_of_bounds: bool,
}

impl FormationInputs {
    pub fn crashed(&self) -> bool {
        self.opponent_hit || self.agent_contact || self.out_of_bounds
    }

    pub fn encode(&self) -> Vec<f64> {
        vec![
            self.prev_goal_dist,
            self.goal_dist,
            self.effort,
            self.min_wall_dist,
            self.min_opponent_dist,
            self.formation_error,
            bit(self.reached_goal),
            bit(self.opponent_hit),
            bit(self.agent_contact),
            bit(self.out_of_bounds),
        ]
    }

    pub fn decode(data: &[f64]) -> Result<Self> {
        let [p, g, e, w, o, f, r, h, c, b] = take::<10>("formation", data)?;
        Ok(FormationInputs {
            prev_goal_dist: p,
            goal_dist: g,
            effort: e,
            min_wall_dist: w,
            min_opponent_dist: o,
            formation_error: f,
            reached_goal: flag(r),
            opponent_hit: flag(h),
            agent_contact: flag(c),
            out_of_bounds: flag(b),
        })
    }
}

pub fn formation_reward(error: f64) -> f64 {
    math::exp(-5.0 * error) - clip(error, 0.0, 1.0)
}

pub fn rewards(i: &FormationInputs) -> [f64; 4] {
    let mut goal = 5.0 * (i.prev_goal_dist - i.goal_dist) - 0.1 * i.effort;
    if i.reached_goal {
        goal += GOAL_BONUS;
    }
    if i.crashed() {
        goal += CRASH_PENALTY;
    }
    let bounds = 0.1 * clip(i.min_wall_dist / 0.2, 0.0, 1.0);
    let mut avoid = 0.2 * clip(i.min_opponent_dist / 0.4, 0.0, 1.0);
    if i.opponent_hit {
        avoid += OPPONENT_PENALTY;
    }
    [goal, bounds, avoid, formation_reward(i.formation_error)]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    math::hypot(a[0] - b[0], a[1] - b[1])
}

pub fn centroid(agents: &[[f64; 2]; AGENTS]) -> [f64; 2] {
    let n = AGENTS as f64;
    [
        agents.iter().map(|p| p[0]).sum::<f64>() / n,
        agents.iter().map(|p| p[1]).sum::<f64>() / n,
    ]
}

pub fn formation_error(agents: &[[f64; 2]; AGENTS], side: f64) -> f64 {
    let mut e: f64 = 0.0;
    for i in 0..AGENTS {
        for j in i + 1..AGENTS {
            e = e.max((dist(agents[i], agents[j]) - side).abs());
        }
    }
    e
}

/// Vertices of an upright equilateral triangle centred on `c`.
pub fn triangle(c: [f64; 2], side: f64) -> [[f64; 2]; AGENTS] {
    let r = side / math::sqrt(3.0);
    let mut out = [[0.0; 2]; AGENTS];
    for (k, p) in out.iter_mut().enumerate() {
        let phi = math::PI / 2.0 + math::TAU * k as f64 / AGENTS as f64;
        *p = [c[0] + r * math::cos(phi), c[1] + r * math::sin(phi)];
    }
    out
}

#[derive(Clone, Debug)]
pub struct FormationEnv {
    pub config: FormationConfig,
    pub agents: [[f64; 2]; AGENTS],
    pub goal: [f64; 2],
    pub opponent: PatrolOpponent,
    prev_opponent: [f64; 2],
    steps: usize,
}

impl FormationEnv {
    pub fn new(config: FormationConfig) -> Self {
        let opponent = PatrolOpponent {
            x: 0.0,
            y: config.opponent_y,
            speed: config.speeds[0],
            direction: 1.0,
            x_lim: config.x_lim,
            reversal_prob: config.reversal_prob,
        };
        FormationEnv {
            agents: triangle([0.0, config.start_y], config.side_length),
            goal: [0.0, config.goal_y],
            prev_opponent: opponent.position(),
            opponent,
            steps: 0,
            config,
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(12);
        for p in &self.agents {
            obs.extend_from_slice(p);
        }
        let c = centroid(&self.agents);
        obs.push(self.goal[0] - c[0]);
        obs.push(self.goal[1] - c[1]);
        obs.extend_from_slice(&self.opponent.position());
        obs.extend_from_slice(&self.prev_opponent);
        obs
    }
}

impl Environment for FormationEnv {
    fn name(&self) -> &'static str {
        "formation"
    }

    fn objective_count(&self) -> usize {
        4
    }

    fn observation_dim(&self) -> usize {
        12
    }

    fn action_dim(&self) -> usize {
        2 * AGENTS
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let c = &self.config;
        let start = [uniform(rng, -c.spawn_half_width, c.spawn_half_width), c.start_y];
        self.agents = triangle(start, c.side_length);
        self.goal = [uniform(rng, -c.spawn_half_width, c.spawn_half_width), c.goal_y];
        self.opponent = PatrolOpponent::spawn(rng, c.opponent_y, &c.speeds, c.x_lim, c.reversal_prob);
        self.prev_opponent = self.opponent.position();
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<Step> {
        check_action("formation", action, 2 * AGENTS)?;
        self.prev_opponent = self.opponent.position();
        self.opponent.step(rng);
        let c = &self.config;
        let prev_goal_dist = dist(centroid(&self.agents), self.goal);
        let mut effort = 0.0;
        for (k, p) in self.agents.iter_mut().enumerate() {
            let u = [
                2.0 * action[2 * k].clamp(0.0, 1.0) - 1.0,
                2.0 * action[2 * k + 1].clamp(0.0, 1.0) - 1.0,
            ];
            effort += math::hypot(u[0], u[1]);
            p[0] += u[0] * c.step_size;
            p[1] += u[1] * c.step_size;
        }
        effort /= AGENTS as f64;
        let h = c.half_extent;
        let opp = self.opponent.position();
        let min_wall_dist = self
            .agents
            .iter()
            .map(|p| (h - p[0].abs()).min(h - p[1].abs()))
            .fold(f64::INFINITY, f64::min);
        let min_opponent_dist = self.agents.iter().map(|p| dist(*p, opp)).fold(f64::INFINITY, f64::min);
        let mut closest_pair = f64::INFINITY;
        for i in 0..AGENTS {
            for j in i + 1..AGENTS {
                closest_pair = closest_pair.min(dist(self.agents[i], self.agents[j]));
            }
        }
        let goal_dist = dist(centroid(&self.agents), self.goal);
        let inputs = FormationInputs {
            prev_goal_dist,
            goal_dist,
            effort,
            min_wall_dist,
            min_opponent_dist,
            formation_error: formation_error(&self.agents, c.side_length),
            reached_goal: goal_dist < c.goal_radius,
            opponent_hit: min_opponent_dist < c.collision_radius,
            agent_contact: closest_pair < c.collision_radius,
            out_of_bounds: min_wall_dist < 0.0,
        };
        self.steps += 1;
        let terminated = inputs.reached_goal || inputs.crashed();
        Ok(Step {
            observation: self.observation(),
            reward: rewards(&inputs).to_vec(),
            terminated,
            truncated: !terminated && self.steps >= self.config.max_steps,
            inputs: RewardInputs::Formation(inputs),
        })
    }

    fn return_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let cap = self.config.max_steps as f64;
        let span = 5.0 * 2.0 * self.config.half_extent * core::f64::consts::SQRT_2;
        let effort = 0.1 * core::f64::consts::SQRT_2 * cap;
        (
            vec![-span - effort + CRASH_PENALTY, 0.0, OPPONENT_PENALTY, -cap],
            vec![span + GOAL_BONUS, 0.1 * cap, 0.2 * cap, cap],
        )
    }

    fn objective_names(&self) -> Vec<&'static str> {
        vec!["goal", "bounds", "avoid", "form"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_triangle() {
        let t = triangle([0.1, -0.2], 0.45);
        assert!(formation_error(&t, 0.45) < 1e-12);
        assert!((formation_reward(formation_error(&t, 0.45)) - 1.0).abs() < 1e-11);
        assert_eq!(formation_reward(0.0), 1.0);
    }

    #[test]
    fn unit_error() {
        assert!((formation_reward(1.0) - (libm::exp(-5.0) - 1.0)).abs() < 1e-15);
        assert!((formation_reward(1.0) + 0.99326).abs() < 1e-5);
    }

    #[test]
    fn stationary_swarm_has_no_goal_reward() {
        let mut env = FormationEnv::new(FormationConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        env.reset(&mut rng);
        env.opponent.x = 0.9;
        env.opponent.reversal_prob = 0.0;
        env.opponent.speed = 0.0;
        let s = env.step(&[0.5; 6], &mut rng).unwrap();
        assert_eq!(s.reward[0], 0.0);
        assert!(!s.terminated);
    }

    #[test]
    fn opponent_contact_penalty() {
        let i = FormationInputs {
            prev_goal_dist: 1.0,
            goal_dist: 1.0,
            effort: 0.0,
            min_wall_dist: 0.5,
            min_opponent_dist: 0.05,
            formation_error: 0.0,
            reached_goal: false,
            opponent_hit: true,
            agent_contact: false,
            out_of_bounds: false,
        };
        let r = rewards(&i);
        assert_eq!(r[0], -5.0);
        assert!((r[2] - (0.2 * 0.125 - 10.0)).abs() < 1e-12);
        assert_eq!(FormationInputs::decode(&i.encode()).unwrap(), i);
    }
}
