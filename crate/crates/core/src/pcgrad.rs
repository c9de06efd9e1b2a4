//! Objective-level projection of conflicting policy gradients.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math;

/// Per-objective gradients in the actor's flat layout.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub grads: Vec<Vec<f64>>,
    pub conflict_pairs_examined: usize,
    pub conflict_pairs_found: usize,
}

impl GradientSet {
    pub fn new(grads: Vec<Vec<f64>>) -> Result<Self> {
        if grads.is_empty() {
            return Err(Error::config("gradient set needs at least one objective"));
        }
        let n = grads[0].len();
        if grads.iter().any(|g| g.len() != n) {
            return Err(Error::config("gradient vectors differ in length"));
        }
        Ok(GradientSet {
            grads,
            conflict_pairs_examined: 0,
            conflict_pairs_found: 0,
        })
    }

    pub fn objectives(&self) -> usize {
        self.grads.len()
    }

    pub fn dim(&self) -> usize {
        self.grads[0].len()
    }

    pub fn conflict_ratio(&self) -> f64 {
        if self.conflict_pairs_examined == 0 {
            0.0
        } else {
            self.conflict_pairs_found as f64 / self.conflict_pairs_examined as f64
        }
    }
}

/// One examined `(i, j)` pair, in the order it was visited.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairVisit {
    pub i: usize,
    pub j: usize,
    /// `g_i(current) . g_j(original)` before any projection for this pair.
    pub dot: f64,
    pub projected: bool,
}

/// Output of [`project_conflicts`].
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub projected: GradientSet,
    pub kappa: f64,
    pub visits: Vec<PairVisit>,
}

/// For each objective `i`, visits the other objectives in a freshly shuffled
/// order and removes the component of the running `g_i` along the original
/// `g_j` whenever the two point in conflicting directions.
pub fn project_conflicts<R: Rng + ?Sized>(grads: &GradientSet, rng: &mut R) -> Result<Projection> {
    let m = grads.objectives();
    for (i, g) in grads.grads.iter().enumerate() {
        if !math::all_finite(g) {
            return Err(Error::divergence(
                "pcgrad",
                format!("objective {i} gradient is not finite"),
            ));
        }
    }
    let originals = &grads.grads;
    let norms: Vec<f64> = originals.iter().map(|g| math::norm_sq(g)).collect();
    let mut out = originals.clone();
    let mut visits = Vec::with_capacity(m * m.saturating_sub(1));
    let mut found = 0;
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for (i, gi) in out.iter_mut().enumerate() {
        order.clear();
        order.extend((0..m).filter(|&j| j != i));
        order.shuffle(rng);
        for &j in &order {
            let dot = math::dot(gi, &originals[j]);
            let conflict = dot < 0.0;
            let mut projected = false;
            if conflict {
                found += 1;
                if norms[j] > 0.0 {
                    math::axpy(-dot / norms[j], &originals[j], gi);
                    projected = true;
                }
            }
            visits.push(PairVisit { i, j, dot, projected });
        }
    }
    let examined = m * m.saturating_sub(1);
    let projected = GradientSet {
        grads: out,
        conflict_pairs_examined: examined,
        conflict_pairs_found: found,
    };
    let kappa = projected.conflict_ratio();
    Ok(Projection {
        projected,
        kappa,
        visits,
    })
}

/// Counts conflicting pairs without modifying the gradients.
pub fn measure_conflicts(grads: &GradientSet) -> f64 {
    let m = grads.objectives();
    if m < 2 {
        return 0.0;
    }
    let mut found = 0;
    for i in 0..m {
        for j in 0..m {
            if i != j && math::dot(&grads.grads[i], &grads.grads[j]) < 0.0 {
                found += 1;
            }
        }
    }
    found as f64 / (m * (m - 1)) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub enum CombineMode {
    Sum,
    /// Weights each objective by `m * eta_i`; uniform `eta` reproduces `Sum`.
    WeightedByEta(Vec<f64>),
}

pub fn summed_update_direction(set: &GradientSet, mode: &CombineMode) -> Result<Vec<f64>> {
    let m = set.objectives();
    let mut out = alloc::vec![0.0; set.dim()];
    match mode {
        CombineMode::Sum => {
            for g in &set.grads {
                math::axpy(1.0, g, &mut out);
            }
        }
        CombineMode::WeightedByEta(eta) => {
            if eta.len() != m {
                return Err(Error::config(format!(
                    "attention has {} entries for {m} objectives",
                    eta.len()
                )));
            }
            let s: f64 = eta.iter().sum();
            if eta.iter().any(|e| *e < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::config("attention weights must lie on the simplex"));
            }
            for (g, e) in set.grads.iter().zip(eta) {
                math::axpy(m as f64 * e, g, &mut out);
            }
        }
    }
    Ok(out)
}
