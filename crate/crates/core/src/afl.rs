//! HAPS-side federated loop over per-UAV GANs.
//!
//! Each episode broadcasts the global models, lets the selected UAVs train K
//! local rounds concurrently, and averages the returned snapshots weighted by
//! shard size. Unselected UAVs never block aggregation.

use std::fmt;
use std::sync::mpsc;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Features;
use crate::env::{fed_round_time, EnergyLedger, Point, World};
use crate::error::{Error, Result};
use crate::gan::{disc_loss, gen_loss, local_train, sample_noise, GanHyper, GanModels, GanNets, RoundLoss};
use crate::nn::ParamVector;
use crate::seed;

/// Seed of the fixed noise batch used for every validation-loss evaluation.
const VALIDATION_NOISE_SEED: u64 = 0x005E_ED0F_7A11;
pub const MAX_VALIDATION_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SelectionIndicator(Vec<bool>);

impl SelectionIndicator {
    pub fn none(n: usize) -> Self {
        SelectionIndicator(vec![false; n])
    }

    pub fn all(n: usize) -> Self {
        SelectionIndicator(vec![true; n])
    }

    /// Bit `i` of `mask` selects UAV `i`.
    pub fn from_mask(mask: u32, n: usize) -> Self {
        SelectionIndicator((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn mask(&self) -> u32 {
        self.0.iter().enumerate().fold(0, |m, (i, &b)| m | (u32::from(b) << i))
    }

    pub fn is_selected(&self, uav: usize) -> bool {
        self.0.get(uav).copied().unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Only UAVs present in `eligible` stay selected.
    pub fn restricted_to(&self, eligible: u32) -> Self {
        SelectionIndicator::from_mask(self.mask() & eligible, self.len())
    }
}

/// `"10100"` selects UAVs 0 and 2.
impl fmt::Display for SelectionIndicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModels {
    pub gen: ParamVector,
    pub disc: ParamVector,
    pub version: u64,
}

/// One UAV's learning state.
#[derive(Debug, Clone, PartialEq)]
pub struct UavNode {
    pub id: usize,
    pub models: GanModels,
    pub selected: bool,
    pub version: u64,
}

/// An uploaded local snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Submission {
    pub uav: usize,
    pub gen: ParamVector,
    pub disc: ParamVector,
    pub shard_size: usize,
}

/// Overwrites every UAV's local parameters with the global ones and records
/// its selection bit.
pub fn broadcast(global: &GlobalModels, indicator: &SelectionIndicator, nodes: &mut [UavNode]) -> Result<()> {
    for node in nodes.iter_mut() {
        node.models.load_params(&global.gen, &global.disc)?;
        node.selected = indicator.is_selected(node.id);
        node.version = global.version;
    }
    Ok(())
}

fn weighted_mean(parts: &[(&ParamVector, f64)]) -> ParamVector {
    let len = parts[0].0.len();
    let mut acc = vec![0.0; len];
    for (p, w) in parts {
        for (a, v) in acc.iter_mut().zip(p.iter()) {
            *a += w * v;
        }
    }
    ParamVector::new(acc)
}

/// Shard-size-weighted average of generator and discriminator separately.
///
/// Returns `None` when nothing can be averaged (no submissions, or all with
/// empty shards). The sum runs in UAV-id order so the result does not depend
/// on arrival order.
pub fn aggregate(submissions: &[Submission]) -> Result<Option<(ParamVector, ParamVector)>> {
    let mut subs: Vec<&Submission> = submissions.iter().filter(|s| s.shard_size > 0).collect();
    if subs.is_empty() {
        return Ok(None);
    }
    subs.sort_by_key(|s| s.uav);
    let (g_len, d_len) = (subs[0].gen.len(), subs[0].disc.len());
    for s in &subs {
        if s.gen.len() != g_len {
            return Err(Error::shape("aggregated generator", g_len, s.gen.len()));
        }
        if s.disc.len() != d_len {
            return Err(Error::shape("aggregated discriminator", d_len, s.disc.len()));
        }
    }
    let total: f64 = subs.iter().map(|s| s.shard_size as f64).sum();
    let gen: Vec<(&ParamVector, f64)> = subs.iter().map(|s| (&s.gen, s.shard_size as f64 / total)).collect();
    let disc: Vec<(&ParamVector, f64)> = subs.iter().map(|s| (&s.disc, s.shard_size as f64 / total)).collect();
    Ok(Some((weighted_mean(&gen), weighted_mean(&disc))))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AsyncMode {
    /// Aggregate once every selected UAV has uploaded.
    #[default]
    WaitSelected,
    /// Aggregate at a fixed deadline (seconds after broadcast); uploads whose
    /// simulated completion time is later are discarded.
    Deadline(f64),
}

/// Per-episode record.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    pub episode: usize,
    pub selection: SelectionIndicator,
    /// Selected UAVs that produced no usable submission.
    pub dropped: Vec<usize>,
    /// Mean local-round losses for each UAV that trained.
    pub uav_losses: Vec<Option<RoundLoss>>,
    pub gen_loss: f64,
    pub disc_loss: f64,
    /// Global discriminator BCE on the validation slice after aggregation.
    pub val_loss: f64,
    pub energy: EnergyLedger,
    pub latency_s: f64,
}

impl RoundLog {
    /// Energy spent on learning (local rounds plus uploads).
    pub fn learning_energy(&self) -> f64 {
        self.energy.train + self.energy.upload
    }
}

fn mean_losses(losses: &[RoundLoss]) -> Option<RoundLoss> {
    if losses.is_empty() {
        return None;
    }
    let n = losses.len() as f64;
    Some(RoundLoss {
        disc: losses.iter().map(|l| l.disc).sum::<f64>() / n,
        gen: losses.iter().map(|l| l.gen).sum::<f64>() / n,
    })
}

struct TrainResult {
    uav: usize,
    losses: Vec<RoundLoss>,
    submission: Option<Submission>,
}

/// Federated state held at the HAPS plus every UAV's local learner.
#[derive(Debug, Clone)]
pub struct Federation {
    pub nodes: Vec<UavNode>,
    pub global: GlobalModels,
    pub hyper: GanHyper,
    pub async_mode: AsyncMode,
    validation: Vec<Features>,
    validation_noise: Vec<Vec<f64>>,
}

impl Federation {
    pub fn new(n_uavs: usize, hyper: GanHyper, validation: &[Features], seed: u64) -> Result<Self> {
        let init = GanModels::new(&hyper, seed)?;
        let stride = validation.len().div_ceil(MAX_VALIDATION_ROWS).max(1);
        let validation: Vec<Features> = validation.iter().step_by(stride).copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(VALIDATION_NOISE_SEED);
        let validation_noise = sample_noise(&mut rng, validation.len().max(1), hyper.latent_dim);
        let global = GlobalModels {
            gen: init.nets.gen.clone(),
            disc: init.nets.disc.clone(),
            version: 0,
        };
        let nodes = (0..n_uavs)
            .map(|id| UavNode {
                id,
                models: init.clone(),
                selected: false,
                version: 0,
            })
            .collect();
        Ok(Federation {
            nodes,
            global,
            hyper,
            async_mode: AsyncMode::default(),
            validation,
            validation_noise,
        })
    }

    pub fn global_nets(&self) -> GanNets {
        let mut nets = self.nodes[0].models.nets.clone();
        nets.gen = self.global.gen.clone();
        nets.disc = self.global.disc.clone();
        nets
    }

    /// Discriminator BCE on the validation rows against a fixed noise batch.
    pub fn validation_loss(&self, nets: &GanNets) -> Result<f64> {
        disc_loss(nets, &self.validation, &self.validation_noise)
    }

    fn evaluate_global(&self) -> Result<RoundLoss> {
        let nets = self.global_nets();
        Ok(RoundLoss {
            disc: self.validation_loss(&nets)?,
            gen: gen_loss(&nets, &self.validation_noise),
        })
    }

    /// Trains the chosen nodes concurrently. Each trainer owns its node and
    /// shard; results come back over a channel in completion order.
    fn train_nodes(&mut self, jobs: Vec<(usize, usize, &[Features])>, base_seed: u64, episode: usize, upload: bool) -> Result<Vec<TrainResult>> {
        let hyper = &self.hyper;
        let (tx, rx) = mpsc::channel::<Result<TrainResult>>();
        thread::scope(|scope| {
            let mut by_id: Vec<Option<&mut UavNode>> = self.nodes.iter_mut().map(Some).collect();
            for (uav, rounds, shard) in jobs {
                let node = by_id[uav].take().expect("one job per UAV");
                let tx = tx.clone();
                let seed = seed::derive(base_seed, &[episode as u64, uav as u64]);
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let res = local_train(&mut node.models, shard, hyper, rounds, &mut rng).map(|losses| {
                        let complete = rounds == hyper.local_rounds_per_upload && !losses.is_empty();
                        TrainResult {
                            uav,
                            submission: (upload && complete).then(|| Submission {
                                uav,
                                gen: node.models.nets.gen.clone(),
                                disc: node.models.nets.disc.clone(),
                                shard_size: shard.len(),
                            }),
                            losses,
                        }
                    });
                    let _ = tx.send(res);
                });
            }
        });
        drop(tx);
        let mut results = rx.into_iter().collect::<Result<Vec<_>>>()?;
        results.sort_by_key(|r| r.uav);
        Ok(results)
    }

    /// One federated episode: broadcast, local training of the selected UAVs,
    /// upload, aggregation. Energy and latency are charged against `world`.
    pub fn run_episode(
        &mut self,
        world: &mut World,
        shards: &[Vec<Features>],
        indicator: &SelectionIndicator,
        episode: usize,
        base_seed: u64,
    ) -> Result<RoundLog> {
        let n = self.nodes.len();
        if shards.len() != n || world.uavs.len() != n {
            return Err(Error::shape("per-UAV shards", n, shards.len()));
        }
        let k = self.hyper.local_rounds_per_upload;
        broadcast(&self.global, indicator, &mut self.nodes)?;

        let mut energy = EnergyLedger::default();
        let mut dropped = Vec::new();
        let mut jobs = Vec::new();
        for uav in 0..n {
            if !indicator.is_selected(uav) {
                continue;
            }
            if shards[uav].is_empty() {
                dropped.push(uav);
                continue;
            }
            let state = &mut world.uavs[uav];
            let before = state.spent;
            let full = world.energy.eligible(state, k);
            let rounds = if full {
                k
            } else {
                ((state.energy / world.energy.local_round_j).floor() as usize).min(k)
            };
            state.charge_training(rounds, &world.energy);
            if full {
                state.charge_upload(&world.energy);
            } else {
                dropped.push(uav);
            }
            energy.train += state.spent.train - before.train;
            energy.upload += state.spent.upload - before.upload;
            if rounds > 0 {
                jobs.push((uav, rounds, shards[uav].as_slice()));
            }
        }

        let results = self.train_nodes(jobs, base_seed, episode, true)?;
        let mut uav_losses = vec![None; n];
        let mut submissions = Vec::new();
        let mut arrivals: Vec<(usize, f64)> = Vec::new();
        let t_local = k as f64 * world.latency.local_round_s;
        for r in results {
            uav_losses[r.uav] = mean_losses(&r.losses);
            if let Some(sub) = r.submission {
                let p = world.uavs[r.uav].position;
                let arrival = t_local
                    + world.latency.upload_base_s
                    + world.latency.upload_per_m_s * p.distance(&world.area.haps);
                arrivals.push((r.uav, arrival));
                submissions.push(sub);
            }
        }

        let mut latency_s = fed_round_time(
            &arrivals.iter().map(|(u, _)| world.uavs[*u].position).collect::<Vec<Point>>(),
            &world.area.haps,
            &world.latency,
            k,
        );
        if let AsyncMode::Deadline(deadline) = self.async_mode {
            let late: Vec<usize> = arrivals.iter().filter(|(_, t)| *t > deadline).map(|(u, _)| *u).collect();
            submissions.retain(|s| !late.contains(&s.uav));
            dropped.extend(late);
            dropped.sort_unstable();
            let slowest = arrivals.iter().map(|(_, t)| *t).fold(0.0, f64::max);
            latency_s = slowest.min(deadline) + world.latency.aggregation_s + world.latency.broadcast_s;
        }

        if let Some((gen, disc)) = aggregate(&submissions)? {
            self.global = GlobalModels {
                gen,
                disc,
                version: self.global.version + 1,
            };
        } else if indicator.count() > 0 {
            log::warn!("episode {episode}: no submissions arrived, global models retained");
        }

        let trained: Vec<RoundLoss> = uav_losses.iter().flatten().copied().collect();
        let train_mean = match mean_losses(&trained) {
            Some(l) => l,
            None => self.evaluate_global()?,
        };
        let val_loss = self.validation_loss(&self.global_nets())?;
        Ok(RoundLog {
            episode,
            selection: indicator.clone(),
            dropped,
            uav_losses,
            gen_loss: train_mean.gen,
            disc_loss: train_mean.disc,
            val_loss,
            energy,
            latency_s,
        })
    }

    /// Standalone baseline: every UAV with energy for K rounds trains its own
    /// models on its own shard; nothing is uploaded or averaged.
    pub fn run_standalone_episode(
        &mut self,
        world: &mut World,
        shards: &[Vec<Features>],
        episode: usize,
        base_seed: u64,
    ) -> Result<RoundLog> {
        let n = self.nodes.len();
        if shards.len() != n || world.uavs.len() != n {
            return Err(Error::shape("per-UAV shards", n, shards.len()));
        }
        let k = self.hyper.local_rounds_per_upload;
        let mut energy = EnergyLedger::default();
        let mut jobs = Vec::new();
        let mut dropped = Vec::new();
        for uav in 0..n {
            if shards[uav].is_empty() {
                continue;
            }
            let state = &mut world.uavs[uav];
            if state.charge_training(k, &world.energy) {
                energy.train += k as f64 * world.energy.local_round_j;
                jobs.push((uav, k, shards[uav].as_slice()));
            } else {
                dropped.push(uav);
            }
        }
        let mask = jobs.iter().fold(0u32, |m, (u, _, _)| m | 1 << u);
        let results = self.train_nodes(jobs, base_seed, episode, false)?;
        let mut uav_losses = vec![None; n];
        for r in results {
            uav_losses[r.uav] = mean_losses(&r.losses);
        }
        let trained: Vec<RoundLoss> = uav_losses.iter().flatten().copied().collect();
        let mut val = 0.0;
        for node in &self.nodes {
            val += self.validation_loss(&node.models.nets)?;
        }
        let mean = mean_losses(&trained).unwrap_or(RoundLoss {
            disc: f64::NAN,
            gen: f64::NAN,
        });
        let active = mask.count_ones() > 0;
        Ok(RoundLog {
            episode,
            selection: SelectionIndicator::from_mask(mask, n),
            dropped,
            uav_losses,
            gen_loss: mean.gen,
            disc_loss: mean.disc,
            val_loss: val / n as f64,
            energy,
            latency_s: if active { k as f64 * world.latency.local_round_s } else { 0.0 },
        })
    }
}

/// FL baseline: every energy-eligible UAV participates in every episode.
/// `shards_for` maps the current world to per-UAV shards.
pub fn run_fl_all<F>(
    fed: &mut Federation,
    world: &mut World,
    mut shards_for: F,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<RoundLog>>
where
    F: FnMut(&World) -> Result<Vec<Vec<Features>>>,
{
    let k = fed.hyper.local_rounds_per_upload;
    let n = fed.nodes.len();
    (0..episodes)
        .map(|e| {
            let shards = shards_for(world)?;
            let indicator = SelectionIndicator::from_mask(world.eligible_mask(k), n);
            fed.run_episode(world, &shards, &indicator, e, base_seed)
        })
        .collect()
}

pub fn run_standalone<F>(
    fed: &mut Federation,
    world: &mut World,
    mut shards_for: F,
    episodes: usize,
    base_seed: u64,
) -> Result<Vec<RoundLog>>
where
    F: FnMut(&World) -> Result<Vec<Vec<Features>>>,
{
    (0..episodes)
        .map(|e| {
            let shards = shards_for(world)?;
            fed.run_standalone_episode(world, &shards, e, base_seed)
        })
        .collect()
}
