//! The PASTA training loop and the scalarised PPO baselines.
//!
//! One iteration collects `horizon` steps, estimates per-objective advantages,
//! steps the smoothness controller with the previous iteration's conflict
//! ratio, and then runs `epochs` passes of shuffled minibatch updates. Within
//! each minibatch the critic is updated before the actor.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::advantage::{RolloutBatch, Transition};
use crate::controller::{ControllerConfig, ControllerMode, ControllerState, ControllerTrace};
use crate::env::{EnvConfig, Environment};
use crate::error::{Error, Result};
use crate::math;
use crate::nn::AdamState;
use crate::pcgrad::{measure_conflicts, project_conflicts, summed_update_direction, CombineMode, GradientSet};
use crate::policy::{Critic, CriticKind, GaussianActor};
use crate::scalarize::{self, AttentionWeights, PreferenceVector, ReturnNormalizer, UtopiaPoint};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum Algorithm {
    Pasta,
    Linear,
    Tch,
    /// The PASTA pipeline with the controller bypassed at a constant `mu`.
    FixedStch {
        mu: f64,
    },
}

impl Algorithm {
    pub fn label(&self) -> alloc::string::String {
        match self {
            Algorithm::Pasta => "pasta".into(),
            Algorithm::Linear => "linear".into(),
            Algorithm::Tch => "tch".into(),
            Algorithm::FixedStch { mu } => format!("stch_{mu}"),
        }
    }

    fn uses_attention(&self) -> bool {
        matches!(self, Algorithm::Pasta | Algorithm::FixedStch { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CriticMode {
    #[default]
    BranchedWeighted,
    BranchedUnweighted,
    SharedWeighted,
    SharedUnweighted,
}

impl CriticMode {
    pub fn kind(self) -> CriticKind {
        match self {
            CriticMode::BranchedWeighted | CriticMode::BranchedUnweighted => CriticKind::Branched,
            CriticMode::SharedWeighted | CriticMode::SharedUnweighted => CriticKind::Shared,
        }
    }

    pub fn weighted(self) -> bool {
        matches!(self, CriticMode::BranchedWeighted | CriticMode::SharedWeighted)
    }
}

/// When the hard Tchebycheff baseline re-selects its worst objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TchSelection {
    #[default]
    PerIteration,
    /// Uses the minibatch mean of the value targets, scaled by the batch-wide
    /// target range, in place of the iteration's normalised returns.
    PerMinibatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Ablation {
    pub no_pcgrad: bool,
    pub weighted_pcgrad: bool,
    pub critic: CriticMode,
    pub controller: ControllerMode,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PpoConfig {
    pub horizon: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub clip_eps: f64,
    pub c1: f64,
    pub c2: f64,
    pub gamma: f64,
    pub lambda_gae: f64,
    pub lr: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            horizon: 2048,
            epochs: 10,
            minibatch: 64,
            clip_eps: 0.2,
            c1: 0.5,
            c2: 0.01,
            gamma: 0.99,
            lambda_gae: 0.95,
            lr: 3e-4,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.epochs == 0 || self.minibatch == 0 {
            return Err(Error::config("horizon, epochs and minibatch must be positive"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::config(format!(
                "clip_eps must lie in (0, 1), got {}",
                self.clip_eps
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(0.0..=1.0).contains(&self.lambda_gae) {
            return Err(Error::config("gamma must lie in (0, 1] and lambda_gae in [0, 1]"));
        }
        if !(self.lr > 0.0) || !(self.c1 >= 0.0) || !(self.c2 >= 0.0) {
            return Err(Error::config("lr must be positive and c1, c2 non-negative"));
        }
        Ok(())
    }
}

/// Scalarisation and controller constants.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct StchConfig {
    pub zeta: f64,
    pub rho: f64,
    pub mu_start: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub tau: f64,
    pub lambda_ema: f64,
}

impl Default for StchConfig {
    fn default() -> Self {
        StchConfig {
            zeta: 1.05,
            rho: 0.15,
            mu_start: 10.0,
            mu_min: 0.05,
            mu_max: 10.0,
            tau: 0.4,
            lambda_ema: 0.05,
        }
    }
}

impl StchConfig {
    pub fn controller(&self, horizon: u64, mode: ControllerMode) -> ControllerConfig {
        ControllerConfig {
            mu_start: self.mu_start,
            mu_min: self.mu_min,
            mu_max: self.mu_max,
            tau: self.tau,
            lambda_ema: self.lambda_ema,
            horizon,
            mode,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub ppo: PpoConfig,
    pub stch: StchConfig,
    pub ablation: Ablation,
    pub tch_selection: TchSelection,
    pub total_iterations: u64,
    pub seed: u64,
    /// Empty means uniform over the environment's objectives.
    pub preference: Vec<f64>,
    pub eval_every: u64,
    pub eval_episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Pasta,
            ppo: PpoConfig::default(),
            stch: StchConfig::default(),
            ablation: Ablation::default(),
            tch_selection: TchSelection::default(),
            total_iterations: 100,
            seed: 0,
            preference: Vec::new(),
            eval_every: 10,
            eval_episodes: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, objectives: usize) -> Result<PreferenceVector> {
        self.ppo.validate()?;
        if self.total_iterations == 0 {
            return Err(Error::config("total_iterations must be positive"));
        }
        if self.eval_every == 0 || self.eval_episodes == 0 {
            return Err(Error::config("eval_every and eval_episodes must be positive"));
        }
        if let Algorithm::FixedStch { mu } = self.algorithm {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::config(format!("fixed mu must be positive, got {mu}")));
            }
        }
        UtopiaPoint::new(self.stch.zeta)?;
        scalarize::maintenance_mix(&[1.0], self.stch.rho)?;
        self.stch
            .controller(self.total_iterations, self.ablation.controller)
            .validate()?;
        if self.preference.is_empty() {
            return Ok(PreferenceVector::uniform(objectives));
        }
        if self.preference.len() != objectives {
            return Err(Error::config(format!(
                "preference has {} weights but the environment has {objectives} objectives",
                self.preference.len()
            )));
        }
        PreferenceVector::new(self.preference.clone())
    }
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`
pub fn clipped_objective_loss(ratio: f64, adv: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * adv).min(clipped * adv)
}

/// Whether the unclipped branch is active, i.e. the surrogate has a nonzero
/// gradient with respect to the ratio.
pub fn clip_active(ratio: f64, adv: f64, clip_eps: f64) -> bool {
    !((adv > 0.0 && ratio > 1.0 + clip_eps) || (adv < 0.0 && ratio < 1.0 - clip_eps))
}

/// `(1/N) sum_t sum_i eta_i (V_i(s_t) - y_ti)^2` over row-major `N x m` data.
pub fn weighted_value_loss(values: &[f64], targets: &[f64], eta: &[f64]) -> f64 {
    let m = eta.len();
    let n = values.len() / m;
    let mut loss = 0.0;
    for t in 0..n {
        for i in 0..m {
            let e = values[t * m + i] - targets[t * m + i];
            loss += eta[i] * e * e;
        }
    }
    loss / n as f64
}

/// One step of the update-order trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Collect,
    Advantages,
    Normalize,
    ControllerStep,
    Attention,
    CriticUpdate { epoch: usize, minibatch: usize },
    ActorUpdate { epoch: usize, minibatch: usize },
    ConflictAggregate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub mean_returns: Vec<f64>,
    /// Mean returns placed in the unit box by the environment's nominal bounds.
    pub normalized: Vec<f64>,
    pub hypervolume: f64,
    pub expected_utility: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationReport {
    pub iteration: u64,
    pub kappa: f64,
    pub mu: f64,
    pub controller: Option<ControllerTrace>,
    pub delta: Vec<f64>,
    pub eta: Vec<f64>,
    pub normalized_returns: Vec<f64>,
    pub mean_episode_returns: Vec<f64>,
    pub episodes_completed: usize,
    pub clip_losses: Vec<f64>,
    pub value_loss: f64,
    pub entropy: f64,
    pub tch_index: Option<usize>,
    pub eval: Option<EvalReport>,
}

/// Per-minibatch quantities needed to rebuild the actor direction.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorStep {
    pub objective_grads: Vec<Vec<f64>>,
    pub direction: Vec<f64>,
    pub kappa: f64,
}

struct Streams {
    policy: ChaCha8Rng,
    env: ChaCha8Rng,
    shuffle: ChaCha8Rng,
    pcgrad: ChaCha8Rng,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

pub struct Trainer {
    pub config: TrainConfig,
    env: Box<dyn Environment + Send>,
    eval_env: Box<dyn Environment + Send>,
    w: PreferenceVector,
    z: Vec<f64>,
    pub actor: GaussianActor,
    pub critic: Critic,
    pub actor_opt: AdamState,
    pub critic_opt: AdamState,
    pub controller: ControllerState,
    pub normalizer: ReturnNormalizer,
    rng: Streams,
    kappa_prev: f64,
    iteration: u64,
    obs: Vec<f64>,
    episode_return: Vec<f64>,
    events: Option<Vec<TraceEvent>>,
}

impl Trainer {
    pub fn from_env_config(config: TrainConfig, env: &EnvConfig) -> Result<Self> {
        Self::new(config, env.build()?, env.build()?)
    }

    pub fn new(
        config: TrainConfig,
        mut env: Box<dyn Environment + Send>,
        eval_env: Box<dyn Environment + Send>,
    ) -> Result<Self> {
        let m = env.objective_count();
        let w = config.validate(m)?;
        let z = UtopiaPoint::new(config.stch.zeta)?.realize(m);
        let mut init = stream(config.seed, 0);
        let (sd, ad) = (env.observation_dim(), env.action_dim());
        let actor = GaussianActor::new(sd, m, ad, &mut init)?;
        let critic = Critic::new(config.ablation.critic.kind(), sd, m, m, &mut init)?;
        let actor_opt = AdamState::new(actor.param_count(), config.ppo.lr);
        let critic_opt = AdamState::new(critic.param_count(), config.ppo.lr);
        let controller = ControllerState::new(
            config
                .stch
                .controller(config.total_iterations, config.ablation.controller),
        )?;
        let mut rng = Streams {
            policy: stream(config.seed, 1),
            env: stream(config.seed, 2),
            shuffle: stream(config.seed, 3),
            pcgrad: stream(config.seed, 4),
        };
        let obs = env.reset(&mut rng.env);
        Ok(Trainer {
            env,
            eval_env,
            w,
            z,
            actor,
            critic,
            actor_opt,
            critic_opt,
            controller,
            normalizer: ReturnNormalizer::new(m),
            rng,
            kappa_prev: 0.0,
            iteration: 0,
            obs,
            episode_return: vec![0.0; m],
            events: None,
            config,
        })
    }

    pub fn objectives(&self) -> usize {
        self.w.len()
    }

    pub fn preference(&self) -> &PreferenceVector {
        &self.w
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Conflict ratio that will drive the next controller step.
    pub fn conflict_estimate(&self) -> f64 {
        self.kappa_prev
    }

    /// Restores the iteration counter and conflict estimate from a checkpoint.
    pub fn restore_progress(&mut self, iteration: u64, kappa: f64) {
        self.iteration = iteration;
        self.kappa_prev = kappa.clamp(0.0, 1.0);
    }

    pub fn environment(&self) -> &dyn Environment {
        self.env.as_ref()
    }

    /// Starts recording the update-order trace.
    pub fn record_events(&mut self) {
        self.events = Some(Vec::new());
    }

    pub fn take_events(&mut self) -> Vec<TraceEvent> {
        self.events.as_mut().map(core::mem::take).unwrap_or_default()
    }

    fn event(&mut self, e: TraceEvent) {
        if let Some(ev) = self.events.as_mut() {
            ev.push(e);
        }
    }

    /// Current smoothing parameter for the configured algorithm.
    pub fn mu(&self) -> f64 {
        match self.config.algorithm {
            Algorithm::FixedStch { mu } => mu,
            _ => self.controller.mu,
        }
    }

    /// Runs `horizon` environment steps with the current stochastic policy.
    pub fn collect(&mut self) -> Result<RolloutBatch> {
        let m = self.objectives();
        let mut batch = RolloutBatch::new(m);
        let mut value = self.critic.value_vector(&self.obs, &self.w)?;
        for _ in 0..self.config.ppo.horizon {
            let sample = self.actor.act(&self.obs, &self.w, &mut self.rng.policy)?;
            let step = self.env.step(&sample.action, &mut self.rng.env)?;
            if !math::all_finite(&step.reward) {
                return Err(Error::divergence(self.env.name(), "non-finite reward"));
            }
            math::axpy(1.0, &step.reward, &mut self.episode_return);
            let done = step.done();
            let state = core::mem::replace(&mut self.obs, step.observation);
            let next_value = if step.terminated {
                vec![0.0; m]
            } else {
                self.critic.value_vector(&self.obs, &self.w)?
            };
            batch.push(Transition {
                state,
                action: sample.action,
                raw_action: sample.raw,
                log_prob: sample.log_prob,
                reward: step.reward,
                done,
                value: core::mem::replace(&mut value, next_value.clone()),
                next_value,
            })?;
            if done {
                batch
                    .episodic_returns
                    .push(core::mem::replace(&mut self.episode_return, vec![0.0; m]));
                self.obs = self.env.reset(&mut self.rng.env);
                value = self.critic.value_vector(&self.obs, &self.w)?;
            }
        }
        Ok(batch)
    }

    /// Executes one full training iteration.
    pub fn run_iteration(&mut self) -> Result<IterationReport> {
        let m = self.objectives();
        let ppo = self.config.ppo;
        let mut batch = self.collect()?;
        self.event(TraceEvent::Collect);
        batch.compute_gae(ppo.gamma, ppo.lambda_gae)?;
        batch.normalize_advantages();
        if !math::all_finite(&batch.advantages) || !math::all_finite(&batch.value_targets) {
            return Err(Error::divergence("advantage", "non-finite advantages or value targets"));
        }
        self.event(TraceEvent::Advantages);

        let episodes = batch.episodic_returns.len();
        let returns = if episodes > 0 {
            batch.episodic_returns.clone()
        } else {
            vec![self.episode_return.clone()]
        };
        let mut mean_returns = vec![0.0; m];
        for r in &returns {
            math::axpy(1.0 / returns.len() as f64, r, &mut mean_returns);
        }
        let rbar = self.normalizer.update_and_normalize(&returns)?;
        self.event(TraceEvent::Normalize);

        let trace = match self.config.algorithm {
            Algorithm::Pasta => {
                let tr = self.controller.step(self.kappa_prev);
                self.event(TraceEvent::ControllerStep);
                Some(tr)
            }
            _ => None,
        };
        let uniform = vec![1.0 / m as f64; m];
        let (delta, eta) = if self.config.algorithm.uses_attention() {
            let att = AttentionWeights::compute(&rbar, &self.w, &self.z, self.mu(), self.config.stch.rho)?;
            (att.delta, att.eta)
        } else {
            (uniform.clone(), uniform.clone())
        };
        self.event(TraceEvent::Attention);
        let critic_weights = if self.config.algorithm.uses_attention() && self.config.ablation.critic.weighted() {
            eta.clone()
        } else {
            uniform
        };
        let tch_index = match self.config.algorithm {
            Algorithm::Tch => Some(scalarize::tch_worst_index(&rbar, &self.w, &self.z).0),
            _ => None,
        };
        let target_range = self.target_range(&batch);

        let n = batch.len();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut kappas = Vec::new();
        let mut clip_sum = vec![0.0; m];
        let mut value_sum = 0.0;
        let mut updates = 0usize;
        for epoch in 0..ppo.epochs {
            idx.shuffle(&mut self.rng.shuffle);
            for (mb, chunk) in idx.chunks(ppo.minibatch).enumerate() {
                value_sum += self.critic_update(&batch, chunk, &critic_weights)?;
                self.event(TraceEvent::CriticUpdate { epoch, minibatch: mb });
                let j = match (tch_index, self.config.tch_selection) {
                    (Some(_), TchSelection::PerMinibatch) => Some(self.minibatch_worst(&batch, chunk, &target_range)),
                    (j, _) => j,
                };
                let (step, losses) = self.actor_direction(&batch, chunk, &eta, j)?;
                let mut params = self.actor.flat();
                self.actor_opt.step(&mut params, &step.direction, true, "actor")?;
                self.actor.set_flat(&params)?;
                self.event(TraceEvent::ActorUpdate { epoch, minibatch: mb });
                math::axpy(1.0, &losses, &mut clip_sum);
                kappas.push(step.kappa);
                updates += 1;
            }
        }
        let kappa = kappas.iter().sum::<f64>() / kappas.len() as f64;
        self.kappa_prev = kappa;
        self.event(TraceEvent::ConflictAggregate);
        self.iteration += 1;

        clip_sum.iter_mut().for_each(|c| *c /= updates as f64);
        Ok(IterationReport {
            iteration: self.iteration,
            kappa,
            mu: self.mu(),
            controller: trace,
            delta,
            eta,
            normalized_returns: rbar,
            mean_episode_returns: mean_returns,
            episodes_completed: episodes,
            clip_losses: clip_sum,
            value_loss: value_sum / updates as f64,
            entropy: self.actor.entropy(),
            tch_index,
            eval: None,
        })
    }

    /// One critic Adam step on `c1 * weighted_value_loss`; returns the loss
    /// before the step.
    fn critic_update(&mut self, batch: &RolloutBatch, chunk: &[usize], weights: &[f64]) -> Result<f64> {
        let m = self.objectives();
        let inv_n = 1.0 / chunk.len() as f64;
        let c1 = self.config.ppo.c1;
        let mut grad = vec![0.0; self.critic.param_count()];
        let mut values = Vec::with_capacity(chunk.len() * m);
        let mut targets = Vec::with_capacity(chunk.len() * m);
        for &t in chunk {
            let x = self.critic.input(&batch.states[t], &self.w)?;
            let v = self.critic.values(&x)?;
            let y = batch.target_row(t);
            let out_grad: Vec<f64> = (0..m).map(|i| 2.0 * c1 * weights[i] * (v[i] - y[i]) * inv_n).collect();
            self.critic.accumulate_grad(&x, &out_grad, 1.0, &mut grad)?;
            values.extend_from_slice(&v);
            targets.extend_from_slice(y);
        }
        let loss = weighted_value_loss(&values, &targets, weights);
        if !loss.is_finite() {
            return Err(Error::divergence("critic", "non-finite value loss"));
        }
        let mut params = self.critic.flat();
        self.critic_opt.step(&mut params, &grad, false, "critic")?;
        self.critic.set_flat(&params)?;
        Ok(loss)
    }

    /// Builds the actor's ascent direction for one minibatch without applying
    /// it. Returns the direction and the per-objective clipped surrogates.
    pub fn actor_direction(
        &mut self,
        batch: &RolloutBatch,
        chunk: &[usize],
        eta: &[f64],
        tch_index: Option<usize>,
    ) -> Result<(ActorStep, Vec<f64>)> {
        let m = self.objectives();
        let eps = self.config.ppo.clip_eps;
        let p = self.actor.param_count();
        let inv_n = 1.0 / chunk.len() as f64;
        let linear = self.config.algorithm == Algorithm::Linear;
        let rows = if linear { 1 } else { m };
        let mut grads = vec![vec![0.0; p]; rows];
        let mut losses = vec![0.0; m];
        let mut glp = vec![0.0; p];
        for &t in chunk {
            let x = self.actor.input(&batch.states[t], &self.w)?;
            let lp = self.actor.log_prob_grad_into(&x, &batch.raw_actions[t], &mut glp)?;
            let ratio = math::exp(lp - batch.old_log_probs[t]);
            let adv = batch.advantage_row(t);
            for i in 0..m {
                losses[i] += clipped_objective_loss(ratio, adv[i], eps) * inv_n;
            }
            if linear {
                let a = math::dot(&self.w, adv);
                if clip_active(ratio, a, eps) {
                    math::axpy(ratio * a * inv_n, &glp, &mut grads[0]);
                }
            } else {
                for i in 0..m {
                    if clip_active(ratio, adv[i], eps) {
                        math::axpy(ratio * adv[i] * inv_n, &glp, &mut grads[i]);
                    }
                }
            }
        }
        for (i, l) in losses.iter().enumerate() {
            if !l.is_finite() {
                return Err(Error::divergence(
                    "actor",
                    format!("clipped surrogate of objective {i} is not finite"),
                ));
            }
        }

        let (mut direction, kappa) = match self.config.algorithm {
            Algorithm::Linear => (grads[0].clone(), 0.0),
            Algorithm::Tch => {
                let j = tch_index.unwrap_or(0);
                let mut d = vec![0.0; p];
                math::axpy(self.w[j], &grads[j], &mut d);
                (d, 0.0)
            }
            Algorithm::Pasta | Algorithm::FixedStch { .. } => {
                let set = GradientSet::new(grads.clone())?;
                let (projected, kappa) = if self.config.ablation.no_pcgrad {
                    let k = measure_conflicts(&set);
                    (set, k)
                } else {
                    let pr = project_conflicts(&set, &mut self.rng.pcgrad)?;
                    (pr.projected, pr.kappa)
                };
                let mode = if self.config.ablation.weighted_pcgrad {
                    CombineMode::WeightedByEta(eta.to_vec())
                } else {
                    CombineMode::Sum
                };
                (summed_update_direction(&projected, &mode)?, kappa)
            }
        };
        math::axpy(self.config.ppo.c2, &self.actor.entropy_grad(), &mut direction);
        Ok((
            ActorStep {
                objective_grads: grads,
                direction,
                kappa,
            },
            losses,
        ))
    }

    fn target_range(&self, batch: &RolloutBatch) -> (Vec<f64>, Vec<f64>) {
        let m = self.objectives();
        let mut lo = vec![f64::INFINITY; m];
        let mut hi = vec![f64::NEG_INFINITY; m];
        for t in 0..batch.len() {
            for (i, y) in batch.target_row(t).iter().enumerate() {
                lo[i] = lo[i].min(*y);
                hi[i] = hi[i].max(*y);
            }
        }
        (lo, hi)
    }

    fn minibatch_worst(&self, batch: &RolloutBatch, chunk: &[usize], range: &(Vec<f64>, Vec<f64>)) -> usize {
        let m = self.objectives();
        let mut mean = vec![0.0; m];
        for &t in chunk {
            math::axpy(1.0 / chunk.len() as f64, batch.target_row(t), &mut mean);
        }
        let r: Vec<f64> = (0..m)
            .map(|i| ((mean[i] - range.0[i]) / (range.1[i] - range.0[i] + 1e-8)).clamp(0.0, 1.0))
            .collect();
        scalarize::tch_worst_index(&r, &self.w, &self.z).0
    }

    /// Mean returns of deterministic (mean-action) episodes. The evaluation
    /// environment is reseeded identically on every call.
    pub fn evaluate(&mut self) -> Result<EvalReport> {
        let m = self.objectives();
        let episodes = self.config.eval_episodes;
        let mut rng = stream(self.config.seed, 5);
        let mut mean = vec![0.0; m];
        for _ in 0..episodes {
            let mut obs = self.eval_env.reset(&mut rng);
            loop {
                let a = self.actor.mean_action(&obs, &self.w)?;
                let step = self.eval_env.step(&a, &mut rng)?;
                math::axpy(1.0 / episodes as f64, &step.reward, &mut mean);
                if step.done() {
                    break;
                }
                obs = step.observation;
            }
        }
        let (lo, hi) = self.eval_env.return_bounds();
        let normalized: Vec<f64> = (0..m)
            .map(|i| ((mean[i] - lo[i]) / (hi[i] - lo[i])).clamp(0.0, 1.0))
            .collect();
        Ok(EvalReport {
            hypervolume: crate::metrics::hypervolume(&[normalized.clone()]),
            expected_utility: crate::metrics::expected_utility(&mean, &self.w)?,
            mean_returns: mean,
            normalized,
        })
    }

    /// Runs an iteration and attaches an evaluation when one is scheduled.
    pub fn step(&mut self) -> Result<IterationReport> {
        let mut report = self.run_iteration()?;
        let it = self.iteration;
        if it % self.config.eval_every == 0 || it == self.config.total_iterations {
            report.eval = Some(self.evaluate()?);
        }
        Ok(report)
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.config.total_iterations
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvKind, StubConfig};

    fn stub_config(m: usize) -> EnvConfig {
        EnvConfig {
            stub: StubConfig {
                objectives: m,
                action_dim: 2,
                episode_length: 16,
            },
            ..EnvConfig::with_kind(EnvKind::Stub)
        }
    }

    fn small(algorithm: Algorithm) -> TrainConfig {
        TrainConfig {
            algorithm,
            ppo: PpoConfig {
                horizon: 64,
                epochs: 2,
                minibatch: 16,
                ..Default::default()
            },
            total_iterations: 4,
            eval_every: 2,
            eval_episodes: 2,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn clipped_loss_examples() {
        assert_eq!(clipped_objective_loss(1.0, 2.0, 0.2), 2.0);
        assert!((clipped_objective_loss(1.5, 1.0, 0.2) - 1.2).abs() < 1e-15);
        assert!((clipped_objective_loss(0.5, -1.0, 0.2) + 0.8).abs() < 1e-15);
        assert!(!clip_active(1.5, 1.0, 0.2));
        assert!(clip_active(1.5, -1.0, 0.2));
        assert!(!clip_active(0.5, -1.0, 0.2));
    }

    #[test]
    fn value_loss_examples() {
        let v = [1.0, 5.0, 2.0, -3.0];
        let y = [0.0, 0.0, 0.0, 0.0];
        assert_eq!(weighted_value_loss(&v, &y, &[1.0, 0.0]), 2.5);
        assert_eq!(weighted_value_loss(&v, &v, &[0.5, 0.5]), 0.0);
        // squared error summed over heads, averaged over the two samples
        let per_sample = v.iter().map(|x| x * x).sum::<f64>() / 2.0;
        assert!((weighted_value_loss(&v, &y, &[0.5, 0.5]) - 0.5 * per_sample).abs() < 1e-12);
    }

    #[test]
    fn update_order() {
        let mut tr = Trainer::from_env_config(small(Algorithm::Pasta), &stub_config(2)).unwrap();
        tr.record_events();
        tr.run_iteration().unwrap();
        let ev = tr.take_events();
        assert_eq!(
            &ev[..5],
            &[
                TraceEvent::Collect,
                TraceEvent::Advantages,
                TraceEvent::Normalize,
                TraceEvent::ControllerStep,
                TraceEvent::Attention
            ]
        );
        let body = &ev[5..ev.len() - 1];
        assert_eq!(body.len(), 2 * 2 * 4);
        for (k, pair) in body.chunks(2).enumerate() {
            let (epoch, minibatch) = (k / 4, k % 4);
            assert_eq!(pair[0], TraceEvent::CriticUpdate { epoch, minibatch });
            assert_eq!(pair[1], TraceEvent::ActorUpdate { epoch, minibatch });
        }
        assert_eq!(ev.last(), Some(&TraceEvent::ConflictAggregate));
    }

    #[test]
    fn deterministic_reports() {
        let run = || {
            let mut tr = Trainer::from_env_config(small(Algorithm::Pasta), &stub_config(2)).unwrap();
            (0..4).map(|_| tr.step().unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn single_objective_is_plain_ppo() {
        let mut tr = Trainer::from_env_config(small(Algorithm::Pasta), &stub_config(1)).unwrap();
        for _ in 0..3 {
            let r = tr.run_iteration().unwrap();
            assert_eq!(r.kappa, 0.0);
            assert_eq!(r.eta, vec![1.0]);
        }
    }

    #[test]
    fn first_ratio_is_one() {
        let mut tr = Trainer::from_env_config(small(Algorithm::Pasta), &stub_config(2)).unwrap();
        let batch = tr.collect().unwrap();
        for t in 0..batch.len() {
            let (lp, _) = tr
                .actor
                .log_prob_and_entropy(&batch.states[t], &tr.w, &batch.raw_actions[t])
                .unwrap();
            assert!((lp - batch.old_log_probs[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_gradient_is_not_projected() {
        let mut cfg = small(Algorithm::Pasta);
        cfg.ppo.c2 = 0.0;
        let mut a = Trainer::from_env_config(cfg.clone(), &stub_config(2)).unwrap();
        cfg.ppo.c2 = 0.5;
        let mut b = Trainer::from_env_config(cfg, &stub_config(2)).unwrap();
        let mut batch = a.collect().unwrap();
        batch.compute_gae(0.99, 0.95).unwrap();
        batch.normalize_advantages();
        let chunk: Vec<usize> = (0..16).collect();
        let eta = [0.5, 0.5];
        let (sa, _) = a.actor_direction(&batch, &chunk, &eta, None).unwrap();
        let (sb, _) = b.actor_direction(&batch, &chunk, &eta, None).unwrap();
        let diff: Vec<f64> = sb.direction.iter().zip(&sa.direction).map(|(x, y)| x - y).collect();
        let e = a.actor.entropy_grad();
        for (d, g) in diff.iter().zip(&e) {
            assert!((d - 0.5 * g).abs() < 1e-12);
        }
    }

    #[test]
    fn baselines_run() {
        for alg in [Algorithm::Linear, Algorithm::Tch, Algorithm::FixedStch { mu: 1.0 }] {
            let mut tr = Trainer::from_env_config(small(alg), &stub_config(3)).unwrap();
            let r = tr.step().unwrap();
            assert!(r.kappa >= 0.0 && r.kappa <= 1.0);
            if alg == Algorithm::Tch {
                assert!(r.tch_index.is_some());
            }
        }
    }

    #[test]
    fn preference_length_is_checked() {
        let mut cfg = small(Algorithm::Pasta);
        cfg.preference = vec![0.5, 0.5];
        assert!(Trainer::from_env_config(cfg.clone(), &stub_config(3)).is_err());
        cfg.preference = vec![0.5, 0.6];
        assert!(Trainer::from_env_config(cfg, &stub_config(2)).is_err());
    }
}
