//! Brute-force references on tiny instances: grid-search UAV placement and
//! exhaustive joint (subset, association, placement) search.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{compute_reward, train, Agent, AgentHyper, CompoundAction, DecisionEnv, DiscreteSpace, RewardConfig, StepOutcome};
use crate::env::{associate, coverage_capacity, fed_round_time, LatencyParams, Point};
use crate::error::{Error, Result};

/// `steps x steps` lattice over `[0, side]^2`, corners included.
pub fn grid_points(side: f64, steps: usize) -> Vec<Point> {
    let steps = steps.max(2);
    let h = side / (steps - 1) as f64;
    (0..steps)
        .flat_map(|i| (0..steps).map(move |j| Point::new(i as f64 * h, j as f64 * h)))
        .collect()
}

/// Best nearest-in-range coverage over all placements of `n_uavs` UAVs on
/// `grid`; ties keep the first placement found.
pub fn best_coverage_placement(devices: &[Point], n_uavs: usize, radius: f64, grid: &[Point]) -> (f64, Vec<Point>) {
    fn rec(devices: &[Point], radius: f64, grid: &[Point], left: usize, start: usize, current: &mut Vec<Point>, best: &mut (f64, Vec<Point>)) {
        if left == 0 {
            let cov = coverage_capacity(devices, current, &associate(devices, current, radius), radius);
            if cov > best.0 {
                *best = (cov, current.clone());
            }
            return;
        }
        // UAVs are interchangeable for coverage, so only non-decreasing grid indices.
        for g in start..grid.len() {
            current.push(grid[g]);
            rec(devices, radius, grid, left - 1, g, current, best);
            current.pop();
        }
    }
    let mut best = (f64::NEG_INFINITY, Vec::new());
    rec(devices, radius, grid, n_uavs, 0, &mut Vec::new(), &mut best);
    best
}

/// Devices in tight groups around random centers.
pub fn clustered_devices(rng: &mut impl Rng, side: f64, clusters: usize, per_cluster: usize, spread: f64) -> Vec<Point> {
    let margin = side * 0.15;
    let mut out = Vec::with_capacity(clusters * per_cluster);
    for _ in 0..clusters {
        let c = Point::new(rng.gen_range(margin..side - margin), rng.gen_range(margin..side - margin));
        for _ in 0..per_cluster {
            out.push(Point::new(
                (c.x + rng.gen_range(-spread..spread)).clamp(0.0, side),
                (c.y + rng.gen_range(-spread..spread)).clamp(0.0, side),
            ));
        }
    }
    out
}

/// Static devices, instantaneous repositioning, reward = coverage, no
/// selection (eligibility is always the empty subset only).
#[derive(Debug, Clone)]
pub struct PlacementEnv {
    pub devices: Vec<Point>,
    pub uavs: Vec<Point>,
    pub radius: f64,
    pub side: f64,
}

impl PlacementEnv {
    pub fn state_dim(&self) -> usize {
        2 * (self.devices.len() + self.uavs.len())
    }

    pub fn coverage_at(&self, uavs: &[Point]) -> f64 {
        coverage_capacity(&self.devices, uavs, &associate(&self.devices, uavs, self.radius), self.radius)
    }

    pub fn positions(&self, c: &[f64]) -> Vec<Point> {
        c.chunks(2).map(|p| Point::new(p[0] * self.side, p[1] * self.side)).collect()
    }
}

impl DecisionEnv for PlacementEnv {
    fn observe(&self) -> Vec<f64> {
        self.devices
            .iter()
            .chain(&self.uavs)
            .flat_map(|p| [p.x / self.side, p.y / self.side])
            .collect()
    }

    fn eligible_mask(&self) -> u32 {
        0
    }

    fn step(&mut self, action: &CompoundAction, _space: &DiscreteSpace, _t: usize) -> Result<StepOutcome> {
        self.uavs = self.positions(&action.continuous);
        let coverage = self.coverage_at(&self.uavs);
        Ok(StepOutcome {
            reward: coverage,
            coverage,
            fed_time_s: 0.0,
            val_loss: 0.0,
            selection_mask: 0,
            terminal: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementResult {
    pub trained_coverage: f64,
    pub optimal_coverage: f64,
    pub trained_positions: Vec<Point>,
    pub optimal_positions: Vec<Point>,
}

impl PlacementResult {
    pub fn ratio(&self) -> f64 {
        if self.optimal_coverage == 0.0 {
            1.0
        } else {
            self.trained_coverage / self.optimal_coverage
        }
    }
}

/// Agent defaults adjusted for the coverage-only bandit: no discounting, no
/// discrete exploration, and position noise decaying over the first three
/// quarters of `periods`.
pub fn placement_hyper(periods: usize) -> AgentHyper {
    AgentHyper {
        gamma: 0.0,
        eps_start: 0.0,
        eps_end: 0.0,
        eps_decay_periods: periods * 3 / 4,
        sigma: 0.3,
        sigma_end: 0.02,
        batch_size: 32,
        buffer_capacity: 2000,
        actor_lr: 3e-4,
        critic_lr: 3e-3,
        tau: 0.05,
        reward: RewardConfig {
            w_time: 0.0,
            w_loss: 0.0,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub const PLACEMENT_PERIODS: usize = 3000;

/// Two clusters of three static devices, both UAVs starting at the center.
pub fn placement_instance(seed: u64) -> PlacementEnv {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PlacementEnv {
        devices: clustered_devices(&mut rng, 1000.0, 2, 3, 60.0),
        uavs: vec![Point::new(500.0, 500.0); 2],
        radius: 200.0,
        side: 1000.0,
    }
}

/// Trains on a placement instance, then compares the noise-free greedy
/// placement with the grid optimum.
pub fn train_placement(mut env: PlacementEnv, periods: usize, hyper: AgentHyper, grid_steps: usize, seed: u64) -> Result<PlacementResult> {
    let space = DiscreteSpace::new(env.uavs.len(), env.devices.len(), false)?;
    let mut agent = Agent::new(env.state_dim(), space, hyper, seed)?;
    let grid = grid_points(env.side, grid_steps);
    let (optimal_coverage, optimal_positions) = best_coverage_placement(&env.devices, env.uavs.len(), env.radius, &grid);
    train(&mut env, &mut agent, periods, seed.wrapping_add(1), |_, _, _| Ok(()))?;
    let c = agent.act(&env.observe(), 0)?;
    let trained_positions = env.positions(&c);
    Ok(PlacementResult {
        trained_coverage: env.coverage_at(&trained_positions),
        optimal_coverage,
        trained_positions,
        optimal_positions,
    })
}

/// A tiny instance where the association can also be chosen freely.
///
/// The accuracy term falls with the number of devices whose data reaches a
/// selected UAV, so a forced association onto a selected UAV can beat the
/// nearest-in-range rule.
#[derive(Debug, Clone)]
pub struct JointInstance {
    pub devices: Vec<Point>,
    pub n_uavs: usize,
    pub radius: f64,
    pub haps: Point,
    pub latency: LatencyParams,
    pub k_rounds: usize,
    pub reward: RewardConfig,
    /// Accuracy loss with no contributing devices.
    pub base_loss: f64,
}

impl JointInstance {
    pub fn random(rng: &mut impl Rng, n_devices: usize, n_uavs: usize) -> Self {
        JointInstance {
            devices: (0..n_devices)
                .map(|_| Point::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0)))
                .collect(),
            n_uavs,
            radius: 300.0,
            haps: Point::new(500.0, 500.0),
            latency: LatencyParams::default(),
            k_rounds: 30,
            reward: RewardConfig::default(),
            base_loss: 2.0 * std::f64::consts::LN_2,
        }
    }

    /// Reward of a fully specified joint action.
    pub fn reward(&self, subset: u32, uavs: &[Point], association: &[Option<usize>]) -> Result<f64> {
        let coverage = coverage_capacity(&self.devices, uavs, association, self.radius);
        let selected: Vec<Point> = (0..self.n_uavs).filter(|u| subset >> u & 1 == 1).map(|u| uavs[u]).collect();
        let time = fed_round_time(&selected, &self.haps, &self.latency, self.k_rounds);
        let contributing = association
            .iter()
            .zip(&self.devices)
            .filter(|(a, d)| a.is_some_and(|u| subset >> u & 1 == 1 && d.distance(&uavs[u]) <= self.radius))
            .count();
        let loss = self.base_loss * (1.0 - 0.5 * contributing as f64 / self.devices.len().max(1) as f64);
        compute_reward(coverage, time, loss, &self.reward)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointComparison {
    pub factorized_best: f64,
    pub joint_best: f64,
}

impl JointComparison {
    /// Shortfall of the factorized optimum relative to the joint one.
    pub fn relative_gap(&self) -> f64 {
        (self.joint_best - self.factorized_best) / self.joint_best.abs().max(1e-12)
    }
}

/// Exhaustive search over placements on `grid` and all discrete actions, once
/// with the nearest-in-range association and once with every association.
pub fn joint_vs_factorized(inst: &JointInstance, grid: &[Point]) -> Result<JointComparison> {
    let factorized = DiscreteSpace::new(inst.n_uavs, inst.devices.len(), false)?;
    let joint = DiscreteSpace::new(inst.n_uavs, inst.devices.len(), true)?;
    if inst.n_uavs != 2 {
        return Err(Error::config("joint search is written for exactly 2 UAVs"));
    }
    let mut fact_best = f64::NEG_INFINITY;
    let mut joint_best = f64::NEG_INFINITY;
    for a in grid {
        for b in grid {
            let uavs = [*a, *b];
            let nearest = associate(&inst.devices, &uavs, inst.radius);
            for d in 0..factorized.len() {
                fact_best = fact_best.max(inst.reward(factorized.subset(d), &uavs, &nearest)?);
            }
            for d in 0..joint.len() {
                let assoc = joint.association(d).expect("joint action carries an association");
                joint_best = joint_best.max(inst.reward(joint.subset(d), &uavs, &assoc)?);
            }
        }
    }
    Ok(JointComparison {
        factorized_best: fact_best,
        joint_best,
    })
}

/// Placement check on one instance per seed.
pub fn placement_suite(seeds: &[u64], periods: usize) -> Result<Vec<PlacementResult>> {
    seeds
        .iter()
        .map(|&seed| train_placement(placement_instance(seed), periods, placement_hyper(periods), 21, seed))
        .collect()
}
