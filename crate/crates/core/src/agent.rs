//! Compound-action actor-critic for the HAPS decision-maker.
//!
//! The discrete part of an action is a UAV subset (optionally joined with a
//! forced device association on tiny instances); the continuous part is one
//! normalized target position per UAV. The actor maps `(state, one-hot d)` to
//! positions, the critic scores `(state, one-hot d, positions)`, and the
//! discrete choice is the critic's argmax over eligible `d`.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::env::World;
use crate::error::{Error, Result};
use crate::nn::{
    clip_global_norm, mlp_backward_trace, mlp_forward, mlp_forward_trace, mlp_init, soft_update, Activation,
    AdamConfig, AdamState, MlpSpec, ParamVector, GRAD_CLIP_NORM,
};

/// Joint discrete actions are only enumerable on tiny instances.
pub const MAX_JOINT_UAVS: usize = 2;
pub const MAX_JOINT_DEVICES: usize = 3;
/// Largest UAV count for which the subset one-hot stays manageable.
pub const MAX_SUBSET_UAVS: usize = 10;

/// Normalized observation: device positions, UAV positions, previous
/// association (`(u + 1) / n_uavs`, 0 when uncovered), previous selection
/// bits, and remaining energy over battery capacity. Length `3D + 4U`.
pub fn net_state(world: &World, prev_selection: u32) -> Vec<f64> {
    let side = world.area.side;
    let n_uavs = world.uavs.len();
    let mut s = Vec::with_capacity(3 * world.devices.len() + 4 * n_uavs);
    let unit = |v: f64| (v / side).clamp(0.0, 1.0);
    for d in &world.devices {
        s.push(unit(d.position.x));
        s.push(unit(d.position.y));
    }
    for u in &world.uavs {
        s.push(unit(u.position.x));
        s.push(unit(u.position.y));
    }
    for a in &world.association {
        s.push(a.map_or(0.0, |u| (u + 1) as f64 / n_uavs as f64));
    }
    for u in 0..n_uavs {
        s.push(f64::from(prev_selection >> u & 1));
    }
    for u in &world.uavs {
        s.push((u.energy / world.energy.battery_capacity_j).clamp(0.0, 1.0));
    }
    s
}

pub fn state_dim(n_devices: usize, n_uavs: usize) -> usize {
    3 * n_devices + 4 * n_uavs
}

/// Enumeration of discrete actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscreteSpace {
    /// `d` is a UAV subset bitmask; association follows the nearest-in-range rule.
    Subsets { n_uavs: usize },
    /// `d = subset + 2^n_uavs * code`, where `code` holds each device's forced
    /// association in base `n_uavs + 1` (digit 0 = unassociated).
    Joint { n_uavs: usize, n_devices: usize },
}

impl DiscreteSpace {
    pub fn new(n_uavs: usize, n_devices: usize, joint: bool) -> Result<Self> {
        if joint {
            if n_uavs > MAX_JOINT_UAVS || n_devices > MAX_JOINT_DEVICES {
                return Err(Error::config(format!(
                    "agent.joint_actions needs at most {MAX_JOINT_UAVS} UAVs and {MAX_JOINT_DEVICES} devices, got {n_uavs} and {n_devices}"
                )));
            }
            Ok(DiscreteSpace::Joint { n_uavs, n_devices })
        } else {
            if n_uavs > MAX_SUBSET_UAVS {
                return Err(Error::config(format!(
                    "scenario.n_uavs = {n_uavs} exceeds {MAX_SUBSET_UAVS} for subset actions"
                )));
            }
            Ok(DiscreteSpace::Subsets { n_uavs })
        }
    }

    pub fn n_uavs(&self) -> usize {
        match *self {
            DiscreteSpace::Subsets { n_uavs } | DiscreteSpace::Joint { n_uavs, .. } => n_uavs,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            DiscreteSpace::Subsets { n_uavs } => 1 << n_uavs,
            DiscreteSpace::Joint { n_uavs, n_devices } => (1 << n_uavs) * (n_uavs + 1).pow(n_devices as u32),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn subset(&self, d: usize) -> u32 {
        (d % (1 << self.n_uavs())) as u32
    }

    /// Forced association carried by a joint action.
    pub fn association(&self, d: usize) -> Option<Vec<Option<usize>>> {
        match *self {
            DiscreteSpace::Subsets { .. } => None,
            DiscreteSpace::Joint { n_uavs, n_devices } => {
                let mut code = d >> n_uavs;
                Some(
                    (0..n_devices)
                        .map(|_| {
                            let digit = code % (n_uavs + 1);
                            code /= n_uavs + 1;
                            digit.checked_sub(1)
                        })
                        .collect(),
                )
            }
        }
    }

    /// Actions whose subset only contains UAVs in `eligible`, ascending.
    pub fn eligible(&self, eligible: u32) -> Vec<usize> {
        (0..self.len()).filter(|&d| self.subset(d) & !eligible == 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompoundAction {
    pub discrete: usize,
    /// `[x0, y0, x1, y1, ...]` in `[0, 1]`.
    pub continuous: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: CompoundAction,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// UAV eligibility at `next_state`, restricting the bootstrap argmax.
    pub next_eligible: u32,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            items: Vec::with_capacity(capacity.min(4096)),
            capacity: capacity.max(1),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Overwrites the oldest entry once full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices(&self, rng: &mut impl Rng, n: usize) -> Vec<usize> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| rng.gen_range(0..self.items.len())).collect()
    }

    pub fn sample(&self, rng: &mut impl Rng, n: usize) -> Vec<&Transition> {
        self.sample_indices(rng, n).into_iter().map(|i| &self.items[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub w_coverage: f64,
    pub w_time: f64,
    pub w_loss: f64,
    /// Federated time is divided by this before weighting.
    pub time_scale_s: f64,
    pub loss_scale: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            w_coverage: 1.0,
            w_time: 0.5,
            w_loss: 0.5,
            time_scale_s: 60.0,
            loss_scale: 2.0 * std::f64::consts::LN_2,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("agent.w_coverage", self.w_coverage),
            ("agent.w_time", self.w_time),
            ("agent.w_loss", self.w_loss),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{k} = {v} must be a finite non-negative weight")));
            }
        }
        for (k, v) in [("agent.time_scale_s", self.time_scale_s), ("agent.loss_scale", self.loss_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{k} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// `w1 * coverage - w2 * fed_time / T - w3 * acc_loss / L`.
pub fn compute_reward(coverage: f64, fed_time_s: f64, acc_loss: f64, cfg: &RewardConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.w_coverage * coverage - cfg.w_time * fed_time_s / cfg.time_scale_s - cfg.w_loss * acc_loss / cfg.loss_scale)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentHyper {
    pub gamma: f64,
    pub tau: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Periods over which epsilon falls linearly from start to end.
    pub eps_decay_periods: usize,
    pub sigma: f64,
    /// Exploration noise reached at the end of the decay window.
    pub sigma_end: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub reward: RewardConfig,
    pub joint_actions: bool,
}

impl Default for AgentHyper {
    fn default() -> Self {
        AgentHyper {
            gamma: 0.95,
            tau: 0.01,
            eps_start: 0.9,
            eps_end: 0.05,
            eps_decay_periods: 100,
            sigma: 0.1,
            sigma_end: 0.1,
            batch_size: 64,
            buffer_capacity: 10_000,
            hidden: vec![64, 64],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            reward: RewardConfig::default(),
            joint_actions: false,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("agent.gamma", self.gamma),
            ("agent.tau", self.tau),
            ("agent.eps_start", self.eps_start),
            ("agent.eps_end", self.eps_end),
        ];
        for (k, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{k} = {v} outside [0, 1]")));
            }
        }
        for (k, v) in [("agent.sigma", self.sigma), ("agent.sigma_end", self.sigma_end)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{k} = {v} must be non-negative")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("agent.batch_size must be at least 1"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("agent.buffer_capacity must be at least 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("agent.hidden sizes must be positive"));
        }
        AdamConfig::with_lr(self.actor_lr)
            .validate()
            .map_err(|e| Error::config(format!("agent.actor_lr: {e}")))?;
        AdamConfig::with_lr(self.critic_lr)
            .validate()
            .map_err(|e| Error::config(format!("agent.critic_lr: {e}")))?;
        self.reward.validate()
    }

    fn decay_fraction(&self, t: usize) -> f64 {
        if self.eps_decay_periods == 0 {
            1.0
        } else {
            (t as f64 / self.eps_decay_periods as f64).min(1.0)
        }
    }

    /// Linear schedule, flat at `eps_end` after the decay window.
    pub fn epsilon(&self, t: usize) -> f64 {
        self.eps_start + (self.eps_end - self.eps_start) * self.decay_fraction(t)
    }

    /// Position noise on the same schedule as epsilon.
    pub fn noise_sigma(&self, t: usize) -> f64 {
        self.sigma + (self.sigma_end - self.sigma) * self.decay_fraction(t)
    }
}

/// Online and target actor/critic with their optimizers and replay memory.
#[derive(Debug, Clone)]
pub struct Agent {
    pub hyper: AgentHyper,
    pub space: DiscreteSpace,
    pub state_dim: usize,
    pub actor_spec: MlpSpec,
    pub critic_spec: MlpSpec,
    pub actor: ParamVector,
    pub critic: ParamVector,
    pub target_actor: ParamVector,
    pub target_critic: ParamVector,
    pub replay: ReplayBuffer,
    actor_adam: AdamState,
    critic_adam: AdamState,
}

fn one_hot_concat(state: &[f64], d: usize, n: usize, tail: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(state.len() + n + tail.len());
    v.extend_from_slice(state);
    v.extend((0..n).map(|i| if i == d { 1.0 } else { 0.0 }));
    v.extend_from_slice(tail);
    v
}

impl Agent {
    pub fn new(state_dim: usize, space: DiscreteSpace, hyper: AgentHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let n_disc = space.len();
        let cont = 2 * space.n_uavs();
        let actor_spec = MlpSpec::dense(state_dim + n_disc, &hyper.hidden, cont.max(1), Activation::Tanh, Activation::Sigmoid)?;
        let critic_spec = MlpSpec::dense(state_dim + n_disc + cont, &hyper.hidden, 1, Activation::Tanh, Activation::Linear)?;
        let actor = mlp_init(&actor_spec, seed);
        let critic = mlp_init(&critic_spec, seed ^ 0xC817_1C00);
        Ok(Agent {
            actor_adam: AdamState::new(actor.len(), AdamConfig::with_lr(hyper.actor_lr))?,
            critic_adam: AdamState::new(critic.len(), AdamConfig::with_lr(hyper.critic_lr))?,
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            replay: ReplayBuffer::new(hyper.buffer_capacity),
            actor,
            critic,
            actor_spec,
            critic_spec,
            state_dim,
            space,
            hyper,
        })
    }

    pub fn continuous_dim(&self) -> usize {
        2 * self.space.n_uavs()
    }

    fn check_state(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.state_dim {
            return Err(Error::shape("agent state", self.state_dim, s.len()));
        }
        Ok(())
    }

    fn actor_with(&self, params: &[f64], s: &[f64], d: usize) -> Result<Vec<f64>> {
        let mut c = mlp_forward(&self.actor_spec, params, &one_hot_concat(s, d, self.space.len(), &[]))?;
        c.truncate(self.continuous_dim());
        Ok(c)
    }

    fn critic_with(&self, params: &[f64], s: &[f64], d: usize, c: &[f64]) -> Result<f64> {
        Ok(mlp_forward(&self.critic_spec, params, &one_hot_concat(s, d, self.space.len(), c))?[0])
    }

    /// `mu(s, d)` from the online actor.
    pub fn act(&self, s: &[f64], d: usize) -> Result<Vec<f64>> {
        self.actor_with(&self.actor, s, d)
    }

    /// `Q(s, d, c)` from the online critic.
    pub fn q(&self, s: &[f64], d: usize, c: &[f64]) -> Result<f64> {
        self.critic_with(&self.critic, s, d, c)
    }

    /// `Q(s, d, mu(s, d))` for each candidate, in the given order.
    pub fn q_values(&self, s: &[f64], candidates: &[usize]) -> Result<Vec<(usize, Vec<f64>, f64)>> {
        self.check_state(s)?;
        candidates
            .iter()
            .map(|&d| {
                let c = self.act(s, d)?;
                let q = self.q(s, d, &c)?;
                Ok((d, c, q))
            })
            .collect()
    }

    /// Argmax over `candidates` (first maximum wins, so ascending candidates
    /// break ties toward the smallest index).
    pub fn greedy(&self, s: &[f64], candidates: &[usize]) -> Result<(usize, Vec<f64>, f64)> {
        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for (d, c, q) in self.q_values(s, candidates)? {
            if best.as_ref().is_none_or(|b| q > b.2) {
                best = Some((d, c, q));
            }
        }
        best.ok_or_else(|| Error::config("no eligible discrete action"))
    }

    /// Greedy compound action, then epsilon-uniform replacement of the
    /// discrete part and clamped Gaussian noise on the positions.
    pub fn select_action(&self, s: &[f64], eps: f64, sigma: f64, eligible: u32, rng: &mut impl Rng) -> Result<CompoundAction> {
        let candidates = self.space.eligible(eligible);
        let (mut d, _, _) = self.greedy(s, &candidates)?;
        if rng.gen::<f64>() < eps {
            d = candidates[rng.gen_range(0..candidates.len())];
        }
        let mut c = self.act(s, d)?;
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma).map_err(|e| Error::config(format!("agent.sigma: {e}")))?;
            for v in c.iter_mut() {
                *v = (*v + noise.sample(rng)).clamp(0.0, 1.0);
            }
        }
        Ok(CompoundAction { discrete: d, continuous: c })
    }

    /// Bootstrap target `r + gamma * Q'(s', d', mu'(s', d'))` with `d'` the
    /// target critic's argmax over eligible actions at `s'`.
    pub fn td_target(&self, t: &Transition) -> Result<f64> {
        if t.terminal || self.hyper.gamma == 0.0 {
            return Ok(t.reward);
        }
        let mut best = f64::NEG_INFINITY;
        for d in self.space.eligible(t.next_eligible) {
            let c = self.actor_with(&self.target_actor, &t.next_state, d)?;
            best = best.max(self.critic_with(&self.target_critic, &t.next_state, d, &c)?);
        }
        Ok(t.reward + self.hyper.gamma * best)
    }

    /// Mean squared TD error of the online critic on `batch`.
    pub fn critic_loss(&self, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (t, y) in batch.iter().zip(targets) {
            let q = self.q(&t.state, t.action.discrete, &t.action.continuous)?;
            total += (q - y) * (q - y);
        }
        Ok(total / batch.len() as f64)
    }

    /// One Adam step on the critic's MSE, then a soft target update. Returns
    /// the loss before the step.
    pub fn critic_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let targets = batch.iter().map(|t| self.td_target(t)).collect::<Result<Vec<f64>>>()?;
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.critic.len()];
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let input = one_hot_concat(&t.state, t.action.discrete, self.space.len(), &t.action.continuous);
            let trace = mlp_forward_trace(&self.critic_spec, &self.critic, &input)?;
            let err = trace.output()[0] - y;
            loss += err * err / n;
            mlp_backward_trace(&self.critic_spec, &self.critic, &trace, &[2.0 * err / n], &mut grad)?;
        }
        clip_global_norm(&mut grad, GRAD_CLIP_NORM);
        self.critic_adam.step(&mut self.critic, &grad)?;
        self.target_critic = soft_update(&self.target_critic, &self.critic, self.hyper.tau)?;
        Ok(loss)
    }

    /// `mean Q(s, d, mu(s, d))` over the batch with the online networks.
    pub fn actor_objective(&self, batch: &[&Transition]) -> Result<f64> {
        let mut total = 0.0;
        for t in batch {
            let c = self.act(&t.state, t.action.discrete)?;
            total += self.q(&t.state, t.action.discrete, &c)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Gradient of [`Agent::actor_objective`] with respect to the actor
    /// parameters, through the critic's continuous-action input.
    pub fn actor_gradient(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let n = batch.len() as f64;
        let n_disc = self.space.len();
        let cont = self.continuous_dim();
        let mut grad = vec![0.0; self.actor.len()];
        let mut critic_scratch = vec![0.0; self.critic.len()];
        for t in batch {
            let a_in = one_hot_concat(&t.state, t.action.discrete, n_disc, &[]);
            let a_trace = mlp_forward_trace(&self.actor_spec, &self.actor, &a_in)?;
            let c = &a_trace.output()[..cont];
            let q_in = one_hot_concat(&t.state, t.action.discrete, n_disc, c);
            let q_trace = mlp_forward_trace(&self.critic_spec, &self.critic, &q_in)?;
            let dq = mlp_backward_trace(&self.critic_spec, &self.critic, &q_trace, &[1.0 / n], &mut critic_scratch)?;
            let mut upstream = dq[self.state_dim + n_disc..].to_vec();
            upstream.resize(self.actor_spec.output_dim(), 0.0);
            mlp_backward_trace(&self.actor_spec, &self.actor, &a_trace, &upstream, &mut grad)?;
        }
        Ok(grad)
    }

    /// One Adam ascent step on the actor objective, then a soft target
    /// update. Returns the objective before the step.
    pub fn actor_update(&mut self, batch: &[&Transition]) -> Result<f64> {
        if batch.is_empty() || self.continuous_dim() == 0 {
            return Ok(0.0);
        }
        let objective = self.actor_objective(batch)?;
        let mut grad: Vec<f64> = self.actor_gradient(batch)?.into_iter().map(|g| -g).collect();
        clip_global_norm(&mut grad, GRAD_CLIP_NORM);
        self.actor_adam.step(&mut self.actor, &grad)?;
        self.target_actor = soft_update(&self.target_actor, &self.actor, self.hyper.tau)?;
        Ok(objective)
    }

    /// Samples one mini-batch and runs the critic then actor update. `None`
    /// while the buffer holds fewer than `batch_size` transitions.
    pub fn learn(&mut self, rng: &mut impl Rng) -> Result<Option<(f64, f64)>> {
        if self.replay.len() < self.hyper.batch_size {
            return Ok(None);
        }
        let idx = self.replay.sample_indices(rng, self.hyper.batch_size);
        let replay = std::mem::replace(&mut self.replay, ReplayBuffer::new(1));
        let batch: Vec<&Transition> = idx.iter().map(|&i| &replay.items[i]).collect();
        let res = self
            .critic_update(&batch)
            .and_then(|cl| Ok((cl, self.actor_update(&batch)?)));
        self.replay = replay;
        res.map(Some)
    }

    /// Writes `<stem>.actor.bin`, `<stem>.critic.bin` and `<stem>.sidecar`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.actor.bin")), self.actor.to_blob())?;
        fs::write(dir.join(format!("{stem}.critic.bin")), self.critic.to_blob())?;
        let mut side = String::new();
        for (name, spec) in [("actor", &self.actor_spec), ("critic", &self.critic_spec)] {
            for line in spec.to_sidecar().lines() {
                side.push_str(&format!("{name}.{line}\n"));
            }
        }
        side.push_str(&format!("discrete_actions = {}\n", self.space.len()));
        fs::write(dir.join(format!("{stem}.sidecar")), side)?;
        Ok(())
    }
}

/// Result of applying one compound action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub coverage: f64,
    pub fed_time_s: f64,
    pub val_loss: f64,
    /// Subset that actually participated after eligibility filtering.
    pub selection_mask: u32,
    pub terminal: bool,
}

/// Anything the agent can act in, one decision period per `step`.
pub trait DecisionEnv {
    fn observe(&self) -> Vec<f64>;
    fn eligible_mask(&self) -> u32;
    fn step(&mut self, action: &CompoundAction, space: &DiscreteSpace, t: usize) -> Result<StepOutcome>;
}

/// One row of the agent training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodLog {
    pub t: usize,
    pub reward: f64,
    pub coverage: f64,
    pub fed_time_s: f64,
    pub val_loss: f64,
    pub selection_mask: u32,
    pub eps: f64,
}

impl PeriodLog {
    pub const CSV_HEADER: &'static str = "t,reward,coverage,fed_time_s,val_loss,selection_mask,eps";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.t, self.reward, self.coverage, self.fed_time_s, self.val_loss, self.selection_mask, self.eps
        )
    }
}

/// Observe, act, store, learn; once per period. `on_period` sees each log
/// row, the agent and the env right after the period.
pub fn train<E, F>(env: &mut E, agent: &mut Agent, periods: usize, seed: u64, mut on_period: F) -> Result<Vec<PeriodLog>>
where
    E: DecisionEnv,
    F: FnMut(&PeriodLog, &Agent, &E) -> Result<()>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logs = Vec::with_capacity(periods);
    for t in 0..periods {
        let s = env.observe();
        let eps = agent.hyper.epsilon(t);
        let action = agent.select_action(&s, eps, agent.hyper.noise_sigma(t), env.eligible_mask(), &mut rng)?;
        let out = env.step(&action, &agent.space, t)?;
        agent.replay.push(Transition {
            state: s,
            action,
            reward: out.reward,
            next_state: env.observe(),
            next_eligible: env.eligible_mask(),
            terminal: out.terminal,
        });
        agent.learn(&mut rng)?;
        let row = PeriodLog {
            t,
            reward: out.reward,
            coverage: out.coverage,
            fed_time_s: out.fed_time_s,
            val_loss: out.val_loss,
            selection_mask: out.selection_mask,
            eps,
        };
        on_period(&row, agent, env)?;
        logs.push(row);
    }
    Ok(logs)
}
