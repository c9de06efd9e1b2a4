//! Preference-conditioned Gaussian actor and the critic family.
//!
//! Every network reads the concatenation `[state, w]`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, Error, Result};
use crate::math;
use crate::nn::{Activation, Network};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// `ln(0.5)`
pub const LOG_STD_INIT: f64 = -core::f64::consts::LN_2;
pub const HIDDEN: usize = 64;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

fn concat(state: &[f64], w: &[f64], state_dim: usize, pref_dim: usize) -> Result<Vec<f64>> {
    check_len("state", state.len(), state_dim)?;
    check_len("preference", w.len(), pref_dim)?;
    let mut x = Vec::with_capacity(state_dim + pref_dim);
    x.extend_from_slice(state);
    x.extend_from_slice(w);
    Ok(x)
}

/// Diagonal Gaussian policy with a Sigmoid-bounded mean and a
/// state-independent learnable `log_std`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianActor {
    pub net: Network,
    pub log_std: Vec<f64>,
    pub state_dim: usize,
    pub pref_dim: usize,
}

/// A sampled action.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSample {
    /// Clamped to `[0, 1]^d`.
    pub action: Vec<f64>,
    pub raw: Vec<f64>,
    pub log_prob: f64,
}

impl GaussianActor {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, pref_dim: usize, action_dim: usize, rng: &mut R) -> Result<Self> {
        let net = Network::new(
            &[state_dim + pref_dim, HIDDEN, HIDDEN, action_dim],
            &[Activation::Tanh, Activation::Tanh, Activation::Sigmoid],
            rng,
        )?;
        Self::from_parts(net, vec![LOG_STD_INIT; action_dim], state_dim, pref_dim)
    }

    pub fn from_parts(net: Network, log_std: Vec<f64>, state_dim: usize, pref_dim: usize) -> Result<Self> {
        check_len("actor input", net.in_dim(), state_dim + pref_dim)?;
        check_len("log_std", log_std.len(), net.out_dim())?;
        Ok(GaussianActor {
            net,
            log_std,
            state_dim,
            pref_dim,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn input(&self, state: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        concat(state, w, self.state_dim, self.pref_dim)
    }

    fn effective_log_std(&self, d: usize) -> f64 {
        self.log_std[d].clamp(LOG_STD_MIN, LOG_STD_MAX)
    }

    pub fn mean(&self, state: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let x = self.input(state, w)?;
        let mean = self.net.predict(&x)?;
        if !math::all_finite(&mean) {
            return Err(Error::divergence("actor", "non-finite policy mean"));
        }
        Ok(mean)
    }

    /// Deterministic action used for evaluation.
    pub fn mean_action(&self, state: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.mean(state, w)
    }

    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], w: &[f64], rng: &mut R) -> Result<ActionSample> {
        let mean = self.mean(state, w)?;
        let mut raw = Vec::with_capacity(mean.len());
        for (d, &mu) in mean.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            raw.push(mu + math::exp(self.effective_log_std(d)) * z);
        }
        let log_prob = self.gaussian_log_prob(&mean, &raw);
        let action = raw.iter().map(|a| a.clamp(0.0, 1.0)).collect();
        Ok(ActionSample { action, raw, log_prob })
    }

    fn gaussian_log_prob(&self, mean: &[f64], raw: &[f64]) -> f64 {
        let mut lp = 0.0;
        for d in 0..mean.len() {
            let ls = self.effective_log_std(d);
            let z = (raw[d] - mean[d]) / math::exp(ls);
            lp += -0.5 * z * z - ls - HALF_LN_2PI;
        }
        lp
    }

    /// `sum_d (0.5 ln(2 pi e) + log_std_d)`
    pub fn entropy(&self) -> f64 {
        (0..self.action_dim())
            .map(|d| 0.5 + HALF_LN_2PI + self.effective_log_std(d))
            .sum()
    }

    pub fn log_prob_and_entropy(&self, state: &[f64], w: &[f64], raw: &[f64]) -> Result<(f64, f64)> {
        check_len("action", raw.len(), self.action_dim())?;
        let mean = self.mean(state, w)?;
        Ok((self.gaussian_log_prob(&mean, raw), self.entropy()))
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count() + self.log_std.len()
    }

    /// Network parameters followed by `log_std`.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.net.flat();
        v.extend_from_slice(&self.log_std);
        v
    }

    /// Loads parameters; `log_std` is projected back into its admissible range.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("actor parameters", flat.len(), self.param_count())?;
        let n = self.net.param_count();
        self.net.set_flat(&flat[..n])?;
        for (ls, &v) in self.log_std.iter_mut().zip(&flat[n..]) {
            *ls = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok(())
    }

    /// Writes `d log pi(raw | input) / d theta` into `grad` (overwriting it)
    /// and returns the log-probability.
    pub fn log_prob_grad_into(&self, input: &[f64], raw: &[f64], grad: &mut [f64]) -> Result<f64> {
        check_len("actor gradient buffer", grad.len(), self.param_count())?;
        check_len("action", raw.len(), self.action_dim())?;
        let (mean, tape) = self.net.forward(input)?;
        if !math::all_finite(&mean) {
            return Err(Error::divergence("actor", "non-finite policy mean"));
        }
        let n = self.net.param_count();
        let d = self.action_dim();
        let mut dmean = vec![0.0; d];
        let mut lp = 0.0;
        for k in 0..d {
            let ls = self.effective_log_std(k);
            let var = math::exp(2.0 * ls);
            let diff = raw[k] - mean[k];
            let z2 = diff * diff / var;
            lp += -0.5 * z2 - ls - HALF_LN_2PI;
            dmean[k] = diff / var;
            grad[n + k] = z2 - 1.0;
        }
        grad[..n].iter_mut().for_each(|g| *g = 0.0);
        self.net.accumulate_backward(&tape, &dmean, 1.0, &mut grad[..n])?;
        Ok(lp)
    }

    /// Gradient of the entropy: nonzero only on `log_std`.
    pub fn entropy_grad(&self) -> Vec<f64> {
        let n = self.net.param_count();
        let mut g = vec![0.0; self.param_count()];
        g[n..].iter_mut().for_each(|v| *v = 1.0);
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CriticKind {
    Branched,
    Shared,
}

/// Shared trunk with one independent value head per objective.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchedCritic {
    pub trunk: Network,
    pub heads: Vec<Network>,
}

/// Shared trunk and a single head emitting all `m` values.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedCritic {
    pub trunk: Network,
    pub head: Network,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CriticNet {
    Branched(BranchedCritic),
    Shared(SharedCritic),
}

/// Vector-valued critic `V(s, w) in R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub net: CriticNet,
    pub state_dim: usize,
    pub pref_dim: usize,
    pub objectives: usize,
}

fn trunk_dims(input: usize) -> [usize; 3] {
    [input, HIDDEN, HIDDEN]
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(
        kind: CriticKind,
        state_dim: usize,
        pref_dim: usize,
        objectives: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(kind, state_dim, pref_dim, objectives, |dims, acts| {
            Network::new(dims, acts, rng)
        })
    }

    pub fn zeroed(kind: CriticKind, state_dim: usize, pref_dim: usize, objectives: usize) -> Result<Self> {
        Self::build(kind, state_dim, pref_dim, objectives, Network::zeros)
    }

    fn build<F>(kind: CriticKind, state_dim: usize, pref_dim: usize, objectives: usize, mut make: F) -> Result<Self>
    where
        F: FnMut(&[usize], &[Activation]) -> Result<Network>,
    {
        if objectives == 0 {
            return Err(Error::config("critic needs at least one objective"));
        }
        let trunk = make(&trunk_dims(state_dim + pref_dim), &[Activation::Tanh, Activation::Tanh])?;
        let head_acts = [Activation::Tanh, Activation::Identity];
        let net = match kind {
            CriticKind::Branched => {
                let heads = (0..objectives)
                    .map(|_| make(&[HIDDEN, HIDDEN, 1], &head_acts))
                    .collect::<Result<Vec<_>>>()?;
                CriticNet::Branched(BranchedCritic { trunk, heads })
            }
            CriticKind::Shared => {
                let head = make(&[HIDDEN, HIDDEN, objectives], &head_acts)?;
                CriticNet::Shared(SharedCritic { trunk, head })
            }
        };
        Ok(Critic {
            net,
            state_dim,
            pref_dim,
            objectives,
        })
    }

    pub fn kind(&self) -> CriticKind {
        match self.net {
            CriticNet::Branched(_) => CriticKind::Branched,
            CriticNet::Shared(_) => CriticKind::Shared,
        }
    }

    pub fn input(&self, state: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        concat(state, w, self.state_dim, self.pref_dim)
    }

    pub fn value_vector(&self, state: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let x = self.input(state, w)?;
        self.values(&x)
    }

    pub fn values(&self, input: &[f64]) -> Result<Vec<f64>> {
        match &self.net {
            CriticNet::Branched(b) => {
                let feat = b.trunk.predict(input)?;
                b.heads.iter().map(|h| h.predict(&feat).map(|v| v[0])).collect()
            }
            CriticNet::Shared(s) => {
                let feat = s.trunk.predict(input)?;
                s.head.predict(&feat)
            }
        }
    }

    /// Networks in flat-layout order.
    pub fn networks(&self) -> Vec<&Network> {
        match &self.net {
            CriticNet::Branched(b) => core::iter::once(&b.trunk).chain(b.heads.iter()).collect(),
            CriticNet::Shared(s) => alloc::vec![&s.trunk, &s.head],
        }
    }

    fn networks_mut(&mut self) -> Vec<&mut Network> {
        match &mut self.net {
            CriticNet::Branched(b) => core::iter::once(&mut b.trunk).chain(b.heads.iter_mut()).collect(),
            CriticNet::Shared(s) => alloc::vec![&mut s.trunk, &mut s.head],
        }
    }

    pub fn param_count(&self) -> usize {
        self.networks().iter().map(|n| n.param_count()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        for n in self.networks() {
            n.extend_flat(&mut v);
        }
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("critic parameters", flat.len(), self.param_count())?;
        let mut off = 0;
        for n in self.networks_mut() {
            let k = n.param_count();
            n.set_flat(&flat[off..off + k])?;
            off += k;
        }
        Ok(())
    }

    /// Adds `scale * d(out_grad . V(input)) / d(phi)` into `grad`; returns `V(input)`.
    pub fn accumulate_grad(&self, input: &[f64], out_grad: &[f64], scale: f64, grad: &mut [f64]) -> Result<Vec<f64>> {
        check_len("critic output gradient", out_grad.len(), self.objectives)?;
        check_len("critic gradient buffer", grad.len(), self.param_count())?;
        match &self.net {
            CriticNet::Branched(b) => {
                let (feat, trunk_tape) = b.trunk.forward(input)?;
                let nt = b.trunk.param_count();
                let mut feat_grad = vec![0.0; feat.len()];
                let mut values = Vec::with_capacity(self.objectives);
                let mut off = nt;
                for (i, h) in b.heads.iter().enumerate() {
                    let (v, tape) = h.forward(&feat)?;
                    values.push(v[0]);
                    let k = h.param_count();
                    if out_grad[i] != 0.0 {
                        let fg = h.accumulate_backward(&tape, &out_grad[i..i + 1], scale, &mut grad[off..off + k])?;
                        math::axpy(1.0, &fg, &mut feat_grad);
                    }
                    off += k;
                }
                b.trunk
                    .accumulate_backward(&trunk_tape, &feat_grad, scale, &mut grad[..nt])?;
                Ok(values)
            }
            CriticNet::Shared(s) => {
                let (feat, trunk_tape) = s.trunk.forward(input)?;
                let nt = s.trunk.param_count();
                let (values, tape) = s.head.forward(&feat)?;
                let feat_grad = s.head.accumulate_backward(&tape, out_grad, scale, &mut grad[nt..])?;
                s.trunk
                    .accumulate_backward(&trunk_tape, &feat_grad, scale, &mut grad[..nt])?;
                Ok(values)
            }
        }
    }

    /// Parameter range `[start, end)` of head `j` in the flat layout.
    pub fn head_range(&self, j: usize) -> Option<(usize, usize)> {
        match &self.net {
            CriticNet::Branched(b) => {
                let mut off = b.trunk.param_count();
                for (i, h) in b.heads.iter().enumerate() {
                    if i == j {
                        return Some((off, off + h.param_count()));
                    }
                    off += h.param_count();
                }
                None
            }
            CriticNet::Shared(_) => None,
        }
    }
}

impl core::fmt::Display for CriticKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            CriticKind::Branched => "branched",
            CriticKind::Shared => "shared",
        })
    }
}
