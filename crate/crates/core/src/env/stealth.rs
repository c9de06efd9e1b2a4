//! Stealth visual search: a Dubins robot looks for hidden targets in a
//! cluttered arena while staying near the walls and keeping on the move.
//!
//! Objectives: `[score, stealth, exploration]`.
//! Observation: `[x, y, cos θ, sin θ] ++ vision grid (6) ++ lidar (rays)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;

use super::{bit, check_action, clip, flag, uniform, Environment, RewardInputs, Step};
use crate::error::{Error, Result};
use crate::math;

pub const GRID_CELLS: usize = 6;
const SECTORS: usize = 3;
const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct StealthConfig {
    pub x_dim: f64,
    pub y_dim: f64,
    pub agent_radius: f64,
    pub dt: f64,
    /// Linear speed at `v = 1`.
    pub v_scale: f64,
    /// Turn rate at `ω = 1`, rad/s.
    pub omega_scale: f64,
    pub fov: f64,
    pub sensor_range: f64,
    /// Boundary between the near and far range bands of the vision grid.
    pub near_band: f64,
    pub lidar_rays: usize,
    pub lidar_range: f64,
    /// `L_safe` per axis as a fraction of the arena half-dimensions.
    pub safe_fraction: f64,
    pub targets: usize,
    pub target_radius: f64,
    /// A target inside the FOV and within this range counts as scanned.
    pub scan_range: f64,
    pub circles: usize,
    pub rectangles: usize,
    pub circle_radius: [f64; 2],
    pub rect_half_extent: [f64; 2],
    pub max_steps: usize,
}

impl Default for StealthConfig {
    fn default() -> Self {
        StealthConfig {
            x_dim: 1.0,
            y_dim: 1.0,
            agent_radius: 0.05,
            dt: 0.05,
            v_scale: 1.0,
            omega_scale: math::PI,
            fov: 1.715,
            sensor_range: 0.6,
            near_band: 0.3,
            lidar_rays: 20,
            lidar_range: 0.35,
            safe_fraction: 0.75,
            targets: 5,
            target_radius: 0.05,
            scan_range: 0.15,
            circles: 3,
            rectangles: 2,
            circle_radius: [0.08, 0.15],
            rect_half_extent: [0.05, 0.15],
            max_steps: 1000,
        }
    }
}

impl StealthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_dim > 0.0 && self.y_dim > 0.0 && self.dt > 0.0) {
            return Err(Error::config("stealth arena dimensions and dt must be positive"));
        }
        if !(self.fov > 0.0 && self.fov < math::TAU) {
            return Err(Error::config("stealth field of view must lie in (0, 2π)"));
        }
        if !(self.safe_fraction > 0.0 && self.safe_fraction <= 1.0) {
            return Err(Error::config("stealth safe fraction must lie in (0, 1]"));
        }
        if self.targets == 0 || self.lidar_rays == 0 || self.max_steps == 0 {
            return Err(Error::config(
                "stealth needs targets, lidar rays and a positive step cap",
            ));
        }
        if !(0.0 < self.near_band && self.near_band < self.sensor_range) {
            return Err(Error::config("stealth near band must lie inside the sensor range"));
        }
        Ok(())
    }

    pub fn safe_limits(&self) -> [f64; 2] {
        [self.safe_fraction * self.x_dim, self.safe_fraction * self.y_dim]
    }

    /// Largest exposure distance anywhere in the arena (reached at the centre).
    pub fn d_max(&self) -> f64 {
        let [lx, ly] = self.safe_limits();
        lx.min(ly)
    }

    pub fn observation_dim(&self) -> usize {
        4 + GRID_CELLS + self.lidar_rays
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Obstacle {
    Circle {
        center: [f64; 2],
        radius: f64,
    },
    /// Axis-aligned box.
    Rect {
        center: [f64; 2],
        half: [f64; 2],
    },
}

impl Obstacle {
    /// Distance from `p` to the obstacle surface; zero inside.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => (math::hypot(p[0] - center[0], p[1] - center[1]) - radius).max(0.0),
            Obstacle::Rect { center, half } => {
                let dx = ((p[0] - center[0]).abs() - half[0]).max(0.0);
                let dy = ((p[1] - center[1]).abs() - half[1]).max(0.0);
                math::hypot(dx, dy)
            }
        }
    }

    /// Smallest `t >= 0` with `p + t d` on the obstacle, if any.
    pub fn ray_hit(&self, p: [f64; 2], d: [f64; 2]) -> Option<f64> {
        match *self {
            Obstacle::Circle { center, radius } => ray_circle(p, d, center, radius),
            Obstacle::Rect { center, half } => {
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                for k in 0..2 {
                    let lo = center[k] - half[k];
                    let hi = center[k] + half[k];
                    if d[k] == 0.0 {
                        if p[k] < lo || p[k] > hi {
                            return None;
                        }
                    } else {
                        let a = (lo - p[k]) / d[k];
                        let b = (hi - p[k]) / d[k];
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                if t1 < t0.max(0.0) {
                    None
                } else {
                    Some(t0.max(0.0))
                }
            }
        }
    }
}

fn ray_circle(p: [f64; 2], d: [f64; 2], c: [f64; 2], r: f64) -> Option<f64> {
    let f = [p[0] - c[0], p[1] - c[1]];
    let b = f[0] * d[0] + f[1] * d[1];
    let cc = f[0] * f[0] + f[1] * f[1] - r * r;
    if cc <= 0.0 {
        return Some(0.0);
    }
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let t = -b - math::sqrt(disc);
    (t >= 0.0).then_some(t)
}

/// Geometric state of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct StealthWorld {
    pub pos: [f64; 2],
    pub heading: f64,
    pub targets: Vec<[f64; 2]>,
    pub scanned: Vec<bool>,
    pub obstacles: Vec<Obstacle>,
}

impl StealthWorld {
    pub fn empty(pos: [f64; 2], heading: f64) -> Self {
        StealthWorld {
            pos,
            heading,
            targets: Vec::new(),
            scanned: Vec::new(),
            obstacles: Vec::new(),
        }
    }

    fn collides(&self, p: [f64; 2], cfg: &StealthConfig) -> bool {
        let r = cfg.agent_radius;
        p[0].abs() > cfg.x_dim - r || p[1].abs() > cfg.y_dim - r || self.obstacles.iter().any(|o| o.distance(p) < r)
    }

    /// Bearing of `q` relative to the heading, in `(-π, π]`, and its range.
    fn relative(&self, q: [f64; 2]) -> (f64, f64) {
        let dx = q[0] - self.pos[0];
        let dy = q[1] - self.pos[1];
        (
            math::wrap_angle(math::atan2(dy, dx) - self.heading),
            math::hypot(dx, dy),
        )
    }
}

/// Bins unscanned targets in the FOV into `band * 3 + sector`, where band 0
/// is near and sector 0 is the clockwise-most third of the FOV.
pub fn vision_grid(world: &StealthWorld, cfg: &StealthConfig) -> [f64; GRID_CELLS] {
    let mut counts = [0usize; GRID_CELLS];
    let half = cfg.fov / 2.0;
    for (t, _) in world.targets.iter().zip(&world.scanned).filter(|(_, s)| !**s) {
        let (phi, d) = world.relative(*t);
        if d > cfg.sensor_range || phi.abs() > half {
            continue;
        }
        let band = usize::from(d >= cfg.near_band);
        let sector = (math::floor((phi + half) / (cfg.fov / SECTORS as f64)) as usize).min(SECTORS - 1);
        counts[band * SECTORS + sector] += 1;
    }
    counts.map(|c| (0.5 * c as f64).min(1.0))
}

/// Normalized range readings, `1.0` when nothing is hit within range.
pub fn lidar(world: &StealthWorld, cfg: &StealthConfig) -> Vec<f64> {
    let n = cfg.lidar_rays;
    (0..n)
        .map(|k| {
            let a = world.heading + math::TAU * k as f64 / n as f64;
            let d = [math::cos(a), math::sin(a)];
            let mut t = wall_hit(world.pos, d, cfg);
            for o in &world.obstacles {
                if let Some(h) = o.ray_hit(world.pos, d) {
                    t = t.min(h);
                }
            }
            for (q, _) in world.targets.iter().zip(&world.scanned).filter(|(_, s)| !**s) {
                if let Some(h) = ray_circle(world.pos, d, *q, cfg.target_radius) {
                    t = t.min(h);
                }
            }
            t.min(cfg.lidar_range) / cfg.lidar_range
        })
        .collect()
}

fn wall_hit(p: [f64; 2], d: [f64; 2], cfg: &StealthConfig) -> f64 {
    let lim = [cfg.x_dim, cfg.y_dim];
    let mut t = f64::INFINITY;
    for k in 0..2 {
        if d[k] > 0.0 {
            t = t.min((lim[k] - p[k]) / d[k]);
        } else if d[k] < 0.0 {
            t = t.min((-lim[k] - p[k]) / d[k]);
        }
    }
    t.max(0.0)
}

/// `max(0, min(L_x - |x|, L_y - |y|))`
pub fn exposure(pos: [f64; 2], safe: [f64; 2]) -> f64 {
    (safe[0] - pos[0].abs()).min(safe[1] - pos[1].abs()).max(0.0)
}

/// Quantities the stealth reward reads.
#[derive(Clone, Debug, PartialEq)]
pub struct StealthInputs {
    pub new_scans: usize,
    pub total_targets: usize,
    pub grid: [f64; GRID_CELLS],
    pub d_risk: f64,
    pub d_max: f64,
    pub collided: bool,
    /// `||p_t - p_{t-1}||`
    pub displacement: f64,
}

impl StealthInputs {
    pub fn encode(&self) -> Vec<f64> {
        let mut v = vec![self.new_scans as f64, self.total_targets as f64];
        v.extend_from_slice(&self.grid);
        v.extend_from_slice(&[self.d_risk, self.d_max, bit(self.collided), self.displacement]);
        v
    }

    pub fn decode(data: &[f64]) -> Result<Self> {
        let [n, total, g0, g1, g2, g3, g4, g5, risk, dmax, coll, disp] = super::take::<12>("stealth", data)?;
        Ok(StealthInputs {
            new_scans: n as usize,
            total_targets: total as usize,
            grid: [g0, g1, g2, g3, g4, g5],
            d_risk: risk,
            d_max: dmax,
            collided: flag(coll),
            displacement: disp,
        })
    }
}

pub fn rewards(i: &StealthInputs) -> [f64; 3] {
    let grid: f64 = i.grid.iter().sum();
    let score = clip(
        10.0 * i.new_scans as f64 + 0.05 * grid,
        0.0,
        10.0 * i.total_targets as f64,
    );
    let stealth = clip((1.0 - i.d_risk / i.d_max) - bit(i.collided), 0.0, 1.0);
    let expl = clip(2.0 * i.displacement, 0.0, 1.0);
    [score, stealth, expl]
}

#[derive(Clone, Debug)]
pub struct StealthEnv {
    pub config: StealthConfig,
    pub world: StealthWorld,
    steps: usize,
}

impl StealthEnv {
    pub fn new(config: StealthConfig) -> Self {
        StealthEnv {
            config,
            world: StealthWorld::empty([0.0, 0.0], 0.0),
            steps: 0,
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        let w = &self.world;
        let mut obs = Vec::with_capacity(self.config.observation_dim());
        obs.extend_from_slice(&[w.pos[0], w.pos[1], math::cos(w.heading), math::sin(w.heading)]);
        obs.extend_from_slice(&vision_grid(w, &self.config));
        obs.extend(lidar(w, &self.config));
        obs
    }

    fn sample_free(&self, rng: &mut dyn RngCore, margin: f64, clearance: f64) -> [f64; 2] {
        let c = &self.config;
        let mut p = [0.0, 0.0];
        for _ in 0..PLACEMENT_ATTEMPTS {
            p = [
                uniform(rng, -c.x_dim + margin, c.x_dim - margin),
                uniform(rng, -c.y_dim + margin, c.y_dim - margin),
            ];
            if self.world.obstacles.iter().all(|o| o.distance(p) > clearance) {
                break;
            }
        }
        p
    }
}

impl Environment for StealthEnv {
    fn name(&self) -> &'static str {
        "stealth"
    }

    fn objective_count(&self) -> usize {
        3
    }

    fn observation_dim(&self) -> usize {
        self.config.observation_dim()
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let c = self.config.clone();
        let inner = [0.8 * c.x_dim, 0.8 * c.y_dim];
        let mut obstacles = Vec::with_capacity(c.circles + c.rectangles);
        for _ in 0..c.circles {
            obstacles.push(Obstacle::Circle {
                center: [uniform(rng, -inner[0], inner[0]), uniform(rng, -inner[1], inner[1])],
                radius: uniform(rng, c.circle_radius[0], c.circle_radius[1]),
            });
        }
        for _ in 0..c.rectangles {
            obstacles.push(Obstacle::Rect {
                center: [uniform(rng, -inner[0], inner[0]), uniform(rng, -inner[1], inner[1])],
                half: [
                    uniform(rng, c.rect_half_extent[0], c.rect_half_extent[1]),
                    uniform(rng, c.rect_half_extent[0], c.rect_half_extent[1]),
                ],
            });
        }
        self.world = StealthWorld::empty([0.0, 0.0], 0.0);
        self.world.obstacles = obstacles;
        let start = self.sample_free(rng, 2.0 * c.agent_radius, c.agent_radius + 0.02);
        let targets: Vec<[f64; 2]> = (0..c.targets)
            .map(|_| self.sample_free(rng, 0.1, c.target_radius))
            .collect();
        self.world.pos = start;
        self.world.heading = uniform(rng, -math::PI, math::PI);
        self.world.scanned = vec![false; targets.len()];
        self.world.targets = targets;
        self.steps = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<Step> {
        check_action("stealth", action, 2)?;
        let c = &self.config;
        let v = action[0].clamp(0.0, 1.0);
        let omega = 2.0 * action[1].clamp(0.0, 1.0) - 1.0;
        let w = &mut self.world;
        w.heading = math::wrap_angle(w.heading + omega * c.omega_scale * c.dt);
        let prev = w.pos;
        let next = [
            prev[0] + v * c.v_scale * math::cos(w.heading) * c.dt,
            prev[1] + v * c.v_scale * math::sin(w.heading) * c.dt,
        ];
        let collided = w.collides(next, c);
        if !collided {
            w.pos = next;
        }
        let mut new_scans = 0;
        let half = c.fov / 2.0;
        for k in 0..w.targets.len() {
            if w.scanned[k] {
                continue;
            }
            let (phi, d) = w.relative(w.targets[k]);
            if d <= c.scan_range && phi.abs() <= half {
                w.scanned[k] = true;
                new_scans += 1;
            }
        }
        let inputs = StealthInputs {
            new_scans,
            total_targets: w.targets.len(),
            grid: vision_grid(w, c),
            d_risk: exposure(w.pos, c.safe_limits()),
            d_max: c.d_max(),
            collided,
            displacement: math::hypot(w.pos[0] - prev[0], w.pos[1] - prev[1]),
        };
        self.steps += 1;
        let terminated = self.world.scanned.iter().all(|s| *s);
        Ok(Step {
            observation: self.observation(),
            reward: rewards(&inputs).to_vec(),
            terminated,
            truncated: !terminated && self.steps >= self.config.max_steps,
            inputs: RewardInputs::Stealth(inputs),
        })
    }

    fn return_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let c = &self.config;
        let cap = c.max_steps as f64;
        let expl = (2.0 * c.v_scale * c.dt).min(1.0) * cap;
        (
            vec![0.0, 0.0, 0.0],
            vec![10.0 * c.targets as f64 + 0.05 * GRID_CELLS as f64 * cap, cap, expl],
        )
    }

    fn objective_names(&self) -> Vec<&'static str> {
        vec!["score", "stealth", "exploration"]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> StealthConfig {
        StealthConfig::default()
    }

    fn inputs() -> StealthInputs {
        StealthInputs {
            new_scans: 0,
            total_targets: 5,
            grid: [0.0; 6],
            d_risk: 0.3,
            d_max: 0.75,
            collided: false,
            displacement: 0.0,
        }
    }

    #[test]
    fn quiet_step_scores_nothing() {
        let r = rewards(&inputs());
        assert_eq!(r[0], 0.0);
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn border_is_fully_stealthy() {
        assert_eq!(exposure([0.9, 0.0], cfg().safe_limits()), 0.0);
        let r = rewards(&StealthInputs {
            d_risk: 0.0,
            ..inputs()
        });
        assert_eq!(r[1], 1.0);
    }

    #[test]
    fn exploration_clip() {
        let r = rewards(&StealthInputs {
            displacement: 0.5,
            ..inputs()
        });
        assert_eq!(r[2], 1.0);
    }

    #[test]
    fn empty_arena_lidar_is_clear() {
        let w = StealthWorld::empty([0.0, 0.0], 0.3);
        assert!(lidar(&w, &cfg()).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn lidar_sees_wall_and_box() {
        let c = cfg();
        let mut w = StealthWorld::empty([0.8, 0.0], 0.0);
        let l = lidar(&w, &c);
        assert!((l[0] - 0.2 / 0.35).abs() < 1e-12);
        w.pos = [0.0, 0.0];
        w.obstacles.push(Obstacle::Rect {
            center: [0.0, 0.25],
            half: [0.1, 0.05],
        });
        let l = lidar(&w, &c);
        assert!((l[5] - 0.2 / 0.35).abs() < 1e-12);
    }

    #[test]
    fn target_behind_is_invisible() {
        let mut w = StealthWorld::empty([0.0, 0.0], 0.0);
        w.targets.push([-0.2, 0.0]);
        w.scanned.push(false);
        assert_eq!(vision_grid(&w, &cfg()), [0.0; 6]);
    }

    #[test]
    fn target_ahead_lands_in_near_centre_cell() {
        let mut w = StealthWorld::empty([0.0, 0.0], 0.0);
        w.targets.push([0.2, 0.0]);
        w.scanned.push(false);
        let g = vision_grid(&w, &cfg());
        assert_eq!(g, [0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn collision_restores_position() {
        let mut env = StealthEnv::new(cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        env.world.obstacles.clear();
        env.world.pos = [0.94, 0.0];
        env.world.heading = 0.0;
        let s = env.step(&[1.0, 0.5], &mut rng).unwrap();
        assert_eq!(env.world.pos, [0.94, 0.0]);
        assert_eq!(s.reward[2], 0.0);
        assert_eq!(s.reward[1], 0.0);
    }

    #[test]
    fn reset_places_agent_and_targets_in_free_space() {
        let mut env = StealthEnv::new(cfg());
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs = env.reset(&mut rng);
            assert_eq!(obs.len(), 30);
            assert!(!env.world.collides(env.world.pos, &env.config));
            for t in &env.world.targets {
                assert!(env.world.obstacles.iter().all(|o| o.distance(*t) > 0.0));
            }
        }
    }
}
