//! One-dimensional patrolling opponent with random direction reversals.

use rand::{Rng, RngCore};

use super::uniform;

#[derive(Clone, Debug, PartialEq)]
pub struct PatrolOpponent {
    pub x: f64,
    pub y: f64,
    /// Distance covered per step; never changes.
    pub speed: f64,
    /// `+1.0` or `-1.0`.
    pub direction: f64,
    pub x_lim: f64,
    pub reversal_prob: f64,
}

impl PatrolOpponent {
    /// Random start on the lane with a speed drawn from `speeds`.
    pub fn spawn(rng: &mut dyn RngCore, y: f64, speeds: &[f64], x_lim: f64, reversal_prob: f64) -> Self {
        let speed = speeds[rng.random_range(0..speeds.len())];
        let direction = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        PatrolOpponent {
            x: uniform(rng, -x_lim, x_lim),
            y,
            speed,
            direction,
            x_lim,
            reversal_prob,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    /// Returns `true` when a spontaneous reversal happened this step.
    pub fn step(&mut self, rng: &mut dyn RngCore) -> bool {
        let flipped = rng.random::<f64>() < self.reversal_prob;
        if flipped {
            self.direction = -self.direction;
        }
        self.x += self.direction * self.speed;
        if self.x.abs() >= self.x_lim {
            self.x = self.x.clamp(-self.x_lim, self.x_lim);
            self.direction = -self.x.signum();
        }
        flipped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opp(x: f64, direction: f64) -> PatrolOpponent {
        PatrolOpponent {
            x,
            y: 0.3,
            speed: 0.03,
            direction,
            x_lim: 0.95,
            reversal_prob: 0.05,
        }
    }

    #[test]
    fn bounces_at_the_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut o = PatrolOpponent {
            reversal_prob: 0.0,
            ..opp(0.95, 1.0)
        };
        o.step(&mut rng);
        assert_eq!(o.x, 0.95);
        assert_eq!(o.direction, -1.0);
        o.step(&mut rng);
        assert!(o.x < 0.95);
    }

    #[test]
    fn reversal_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let mut flips = 0;
        for _ in 0..n {
            // Reset to the lane centre so the wall never interferes.
            let mut o = opp(0.0, 1.0);
            if o.step(&mut rng) {
                flips += 1;
            }
        }
        let freq = flips as f64 / n as f64;
        assert!((freq - 0.05).abs() < 0.005, "{freq}");
    }

    #[test]
    fn speed_and_bounds_are_conserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut o = PatrolOpponent::spawn(&mut rng, -0.3, &[0.03, 0.04], 0.95, 0.05);
        let speed = o.speed;
        for _ in 0..10_000 {
            o.step(&mut rng);
            assert_eq!(o.speed, speed);
            assert!(o.x.abs() <= o.x_lim);
            assert_eq!(o.y, -0.3);
        }
    }
}
