//! End-to-end execution of one configured method into a run directory.
//!
//! Layout: `config.resolved`, `rounds.csv`, `agent.csv`, `snapshots.jsonl`,
//! `checkpoints/`, `summary`, and `error` if the run failed part-way.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, Method};
use super::metrics::{compute_metrics, DetectionMetrics};
use crate::afl::{Federation, RoundLog, SelectionIndicator};
use crate::agent::{compute_reward, net_state, state_dim, train, Agent, CompoundAction, DecisionEnv, DiscreteSpace, PeriodLog, RewardConfig, StepOutcome};
use crate::dataset::{parse_records, prepare, shards_from_devices, synthetic_records, Features, Label, LabeledSample, PreparedData};
use crate::env::{fly, step_mobility, Point, World};
use crate::error::{Error, Result};
use crate::gan::{anomaly_score, calibrate_threshold, classify, save_checkpoint, GanNets, ScorerConfig};
use crate::seed;

pub const ROUNDS_HEADER: &str = "episode,selection_mask,gen_loss,disc_loss,val_loss,energy_J,latency_s";

mod stream {
    pub const DATA: u64 = 1;
    pub const WORLD: u64 = 2;
    pub const MODELS: u64 = 3;
    pub const TRAINING: u64 = 4;
    pub const AGENT_INIT: u64 = 5;
    pub const AGENT_TRAIN: u64 = 6;
    pub const MOBILITY: u64 = 7;
}

/// Reads the configured log, or generates the synthetic one, and splits it.
pub fn load_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let data_seed = seed::derive(cfg.seed, &[stream::DATA]);
    let records = if cfg.data.uses_synthetic() {
        synthetic_records(cfg.data.synthetic_motes, cfg.data.synthetic_per_mote, data_seed)
    } else {
        let file = File::open(&cfg.data.path)?;
        let parsed = parse_records(BufReader::new(file))?;
        if parsed.skipped > 0 {
            log::warn!("{} malformed lines skipped in {}", parsed.skipped, cfg.data.path);
        }
        parsed.records
    };
    prepare(&records, &cfg.data.split, &cfg.data.injection, data_seed)
}

pub fn build_world(cfg: &ExperimentConfig) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[stream::WORLD]));
    World::random(cfg.area, cfg.scenario, cfg.energy, cfg.latency, &mut rng)
}

pub fn build_federation(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Federation> {
    let mut fed = Federation::new(
        cfg.scenario.n_uavs,
        cfg.gan.clone(),
        &data.validation,
        seed::derive(cfg.seed, &[stream::MODELS]),
    )?;
    fed.async_mode = cfg.async_mode();
    Ok(fed)
}

/// World plus federation driven by the agent, one AFL episode per period.
pub struct FederatedEnv<'a> {
    pub world: World,
    pub fed: Federation,
    train_by_device: &'a [Vec<Features>],
    prev_selection: u32,
    mobility: ChaCha8Rng,
    reward: RewardConfig,
    training_seed: u64,
    /// Record of the most recent step.
    pub last_round: Option<RoundLog>,
    pub last_flight_j: f64,
}

impl<'a> FederatedEnv<'a> {
    pub fn new(cfg: &ExperimentConfig, data: &'a PreparedData) -> Result<Self> {
        Ok(FederatedEnv {
            world: build_world(cfg),
            fed: build_federation(cfg, data)?,
            train_by_device: &data.train_by_device,
            prev_selection: 0,
            mobility: ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[stream::MOBILITY])),
            reward: cfg.agent.reward,
            training_seed: seed::derive(cfg.seed, &[stream::TRAINING]),
            last_round: None,
            last_flight_j: 0.0,
        })
    }

    fn k(&self) -> usize {
        self.fed.hyper.local_rounds_per_upload
    }
}

impl DecisionEnv for FederatedEnv<'_> {
    fn observe(&self) -> Vec<f64> {
        net_state(&self.world, self.prev_selection)
    }

    fn eligible_mask(&self) -> u32 {
        self.world.eligible_mask(self.k())
    }

    fn step(&mut self, action: &CompoundAction, space: &DiscreteSpace, t: usize) -> Result<StepOutcome> {
        let side = self.world.area.side;
        step_mobility(&mut self.world.devices, &self.world.area, &mut self.mobility);
        let mut flight_j = 0.0;
        for (u, c) in action.continuous.chunks(2).enumerate() {
            let target = self.world.area.clamp(Point::new(c[0] * side, c[1] * side));
            flight_j += fly(&mut self.world.uavs[u], target, &self.world.energy).energy_j;
        }
        match space.association(action.discrete) {
            Some(forced) => self.world.association = forced,
            None => self.world.reassociate(),
        }
        let n_uavs = self.world.uavs.len();
        let shards = shards_from_devices(self.train_by_device, &self.world.association, n_uavs)?;
        let indicator = SelectionIndicator::from_mask(space.subset(action.discrete), n_uavs);
        let round = self.fed.run_episode(&mut self.world, &shards, &indicator, t, self.training_seed)?;
        let coverage = self.world.coverage();
        let reward = compute_reward(coverage, round.latency_s, round.val_loss, &self.reward)?;
        let selection_mask = indicator.mask();
        self.prev_selection = selection_mask;
        let out = StepOutcome {
            reward,
            coverage,
            fed_time_s: round.latency_s,
            val_loss: round.val_loss,
            selection_mask,
            terminal: self.world.eligible_mask(self.k()) == 0,
        };
        self.last_round = Some(round);
        self.last_flight_j = flight_j;
        Ok(out)
    }
}

/// Scores every row, splitting the work across threads; order is preserved.
pub fn score_rows(nets: &GanNets, rows: &[Features], scorer: &ScorerConfig) -> Result<Vec<f64>> {
    let threads = thread::available_parallelism().map_or(1, |n| n.get()).min(16);
    let chunk = rows.len().div_ceil(threads).max(1);
    thread::scope(|s| {
        let handles: Vec<_> = rows
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|x| anomaly_score(x, nets, scorer)).collect::<Result<Vec<f64>>>()))
            .collect();
        let mut out = Vec::with_capacity(rows.len());
        for h in handles {
            out.extend(h.join().expect("scoring thread panicked")?);
        }
        Ok(out)
    })
}

/// Calibrates the threshold on normal validation rows, classifies the test
/// set, and returns metrics with the threshold used.
pub fn evaluate_nets(
    nets: &GanNets,
    validation: &[Features],
    test: &[LabeledSample],
    scorer: &ScorerConfig,
    quantile: f64,
) -> Result<(DetectionMetrics, f64)> {
    let val_scores = score_rows(nets, validation, scorer)?;
    let threshold = calibrate_threshold(&val_scores, quantile)?;
    let rows: Vec<Features> = test.iter().map(|s| s.features).collect();
    let scores = score_rows(nets, &rows, scorer)?;
    let labels: Vec<bool> = test.iter().map(|s| s.label == Label::Anomalous).collect();
    let preds: Vec<bool> = scores.iter().map(|&s| classify(s, threshold)).collect();
    Ok((compute_metrics(&labels, &preds)?, threshold))
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub rounds: Vec<RoundLog>,
    pub agent_logs: Vec<PeriodLog>,
    pub flight_j: Vec<f64>,
    pub metrics: DetectionMetrics,
    /// One threshold for the global model, or one per evaluated UAV.
    pub thresholds: Vec<f64>,
    pub summary: Vec<(String, String)>,
}

struct RunFiles {
    rounds: BufWriter<File>,
    agent: BufWriter<File>,
    snapshots: BufWriter<File>,
    checkpoints: PathBuf,
}

impl RunFiles {
    fn create(dir: &Path) -> Result<Self> {
        let mut rounds = BufWriter::new(File::create(dir.join("rounds.csv"))?);
        writeln!(rounds, "{ROUNDS_HEADER}")?;
        rounds.flush()?;
        let mut agent = BufWriter::new(File::create(dir.join("agent.csv"))?);
        writeln!(agent, "{}", PeriodLog::CSV_HEADER)?;
        agent.flush()?;
        let checkpoints = dir.join("checkpoints");
        fs::create_dir_all(&checkpoints)?;
        Ok(RunFiles {
            rounds,
            agent,
            snapshots: BufWriter::new(File::create(dir.join("snapshots.jsonl"))?),
            checkpoints,
        })
    }

    fn episode(&mut self, round: &RoundLog, world: &World) -> Result<()> {
        writeln!(
            self.rounds,
            "{},{},{},{},{},{},{}",
            round.episode,
            round.selection,
            round.gen_loss,
            round.disc_loss,
            round.val_loss,
            round.learning_energy(),
            round.latency_s
        )?;
        self.rounds.flush()?;
        let snap = serde_json::to_string(&world.snapshot(round.episode)).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(self.snapshots, "{snap}")?;
        self.snapshots.flush()?;
        Ok(())
    }

    fn period(&mut self, row: &PeriodLog, n_uavs: usize) -> Result<()> {
        let mask = SelectionIndicator::from_mask(row.selection_mask, n_uavs);
        writeln!(
            self.agent,
            "{},{},{},{},{},{},{}",
            row.t, row.reward, row.coverage, row.fed_time_s, row.val_loss, mask, row.eps
        )?;
        self.agent.flush()?;
        Ok(())
    }
}

fn save_models(dir: &Path, stem: &str, fed: &Federation, method: Method, scorer: &ScorerConfig) -> Result<()> {
    if method == Method::Standalone {
        for node in &fed.nodes {
            save_checkpoint(dir, &format!("{stem}.uav{}", node.id), &node.models.nets, scorer)?;
        }
        Ok(())
    } else {
        save_checkpoint(dir, &format!("{stem}.global"), &fed.global_nets(), scorer)
    }
}

/// Runs the configured method into `out`. On failure the logs written so
/// far stay in place and an `error` file records the cause.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out)?;
    fs::write(out.join("config.resolved"), cfg.to_text())?;
    let _ = fs::remove_file(out.join("error"));
    match run_inner(cfg, out) {
        Ok(outcome) => Ok(outcome),
        Err(e) => {
            let _ = fs::write(out.join("error"), format!("error = {e}\n"));
            Err(e)
        }
    }
}

fn run_inner(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let data = load_data(cfg)?;
    let mut files = RunFiles::create(out)?;
    let n_uavs = cfg.scenario.n_uavs;
    let every = cfg.checkpoint_every;
    let mut rounds = Vec::with_capacity(cfg.episodes);
    let mut flight_j = Vec::with_capacity(cfg.episodes);
    let mut agent_logs = Vec::new();

    let fed = match cfg.method {
        Method::AflCa2c => {
            let mut env = FederatedEnv::new(cfg, &data)?;
            let space = DiscreteSpace::new(n_uavs, cfg.scenario.n_devices, cfg.agent.joint_actions)?;
            let mut agent = Agent::new(
                state_dim(cfg.scenario.n_devices, n_uavs),
                space,
                cfg.agent.clone(),
                seed::derive(cfg.seed, &[stream::AGENT_INIT]),
            )?;
            let ckpt = files.checkpoints.clone();
            agent_logs = train(
                &mut env,
                &mut agent,
                cfg.episodes,
                seed::derive(cfg.seed, &[stream::AGENT_TRAIN]),
                |row, agent, env| {
                    let round = env.last_round.clone().ok_or_else(|| Error::config("period produced no round"))?;
                    files.episode(&round, &env.world)?;
                    files.period(row, n_uavs)?;
                    if (row.t + 1) % every == 0 {
                        agent.save(&ckpt, &format!("ep{:04}.agent", row.t + 1))?;
                        save_checkpoint(&ckpt, &format!("ep{:04}.global", row.t + 1), &env.fed.global_nets(), &cfg.scorer)?;
                    }
                    rounds.push(round);
                    flight_j.push(env.last_flight_j);
                    Ok(())
                },
            )?;
            agent.save(&ckpt, "final.agent")?;
            env.fed
        }
        Method::FlAll | Method::Standalone => {
            let mut world = build_world(cfg);
            let mut fed = build_federation(cfg, &data)?;
            let mut mobility = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[stream::MOBILITY]));
            let training_seed = seed::derive(cfg.seed, &[stream::TRAINING]);
            let k = cfg.gan.local_rounds_per_upload;
            for e in 0..cfg.episodes {
                step_mobility(&mut world.devices, &world.area, &mut mobility);
                world.reassociate();
                let shards = shards_from_devices(&data.train_by_device, &world.association, n_uavs)?;
                let round = if cfg.method == Method::FlAll {
                    let indicator = SelectionIndicator::from_mask(world.eligible_mask(k), n_uavs);
                    fed.run_episode(&mut world, &shards, &indicator, e, training_seed)?
                } else {
                    fed.run_standalone_episode(&mut world, &shards, e, training_seed)?
                };
                files.episode(&round, &world)?;
                if (e + 1) % every == 0 {
                    save_models(&files.checkpoints, &format!("ep{:04}", e + 1), &fed, cfg.method, &cfg.scorer)?;
                }
                rounds.push(round);
                flight_j.push(0.0);
            }
            fed
        }
    };

    let (metrics, thresholds) = evaluate_federation(cfg, &fed, &rounds, &data)?;
    let mut scorer = cfg.scorer;
    if cfg.method == Method::Standalone {
        for (node, th) in fed.nodes.iter().zip(thresholds.iter().chain(std::iter::repeat(&f64::INFINITY))) {
            scorer.threshold = *th;
            save_checkpoint(&files.checkpoints, &format!("final.uav{}", node.id), &node.models.nets, &scorer)?;
        }
    } else {
        scorer.threshold = thresholds[0];
        save_models(&files.checkpoints, "final", &fed, cfg.method, &scorer)?;
    }

    let summary = build_summary(cfg, &rounds, &flight_j, &metrics, &thresholds);
    let text: String = summary.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    fs::write(out.join("summary"), text)?;
    Ok(RunOutcome {
        dir: out.to_path_buf(),
        rounds,
        agent_logs,
        flight_j,
        metrics,
        thresholds,
        summary,
    })
}

/// Global-model metrics, or the mean over UAVs that trained at least once
/// for the standalone baseline.
fn evaluate_federation(
    cfg: &ExperimentConfig,
    fed: &Federation,
    rounds: &[RoundLog],
    data: &PreparedData,
) -> Result<(DetectionMetrics, Vec<f64>)> {
    if cfg.method != Method::Standalone {
        let (m, th) = evaluate_nets(&fed.global_nets(), &data.validation, &data.test, &cfg.scorer, cfg.quantile)?;
        return Ok((m, vec![th]));
    }
    let trained: Vec<usize> = (0..fed.nodes.len())
        .filter(|&u| rounds.iter().any(|r| r.uav_losses[u].is_some()))
        .collect();
    let evaluated = if trained.is_empty() {
        (0..fed.nodes.len()).collect()
    } else {
        trained
    };
    let mut all = Vec::new();
    let mut thresholds = vec![f64::INFINITY; fed.nodes.len()];
    for u in evaluated {
        let (m, th) = evaluate_nets(&fed.nodes[u].models.nets, &data.validation, &data.test, &cfg.scorer, cfg.quantile)?;
        all.push(m);
        thresholds[u] = th;
    }
    let mean = DetectionMetrics::mean(&all).ok_or_else(|| Error::config("no UAV models to evaluate"))?;
    Ok((mean, thresholds))
}

fn build_summary(
    cfg: &ExperimentConfig,
    rounds: &[RoundLog],
    flight_j: &[f64],
    m: &DetectionMetrics,
    thresholds: &[f64],
) -> Vec<(String, String)> {
    let n_uavs = cfg.scenario.n_uavs as f64;
    let total: f64 = rounds.iter().map(RoundLog::learning_energy).sum();
    let upload: f64 = rounds.iter().map(|r| r.energy.upload).sum();
    let flight: f64 = flight_j.iter().sum();
    let selected: usize = rounds.iter().map(|r| r.selection.count()).sum();
    let strict = rounds
        .iter()
        .filter(|r| r.selection.count() > 0 && r.selection.count() < cfg.scenario.n_uavs)
        .count();
    let last = rounds.last();
    let episodes = rounds.len().max(1) as f64;
    let thr: Vec<String> = thresholds.iter().map(|t| t.to_string()).collect();
    let mut s: Vec<(String, String)> = Vec::new();
    let mut put = |k: &str, v: String| s.push((k.to_string(), v));
    put("method", cfg.method.to_string());
    put("seed", cfg.seed.to_string());
    put("episodes", rounds.len().to_string());
    put("total_energy_J", total.to_string());
    put("upload_energy_J", upload.to_string());
    put("flight_energy_J", flight.to_string());
    put("mean_uav_energy_J", (total / n_uavs).to_string());
    put("mean_selected", (selected as f64 / episodes).to_string());
    put("strict_subset_fraction", (strict as f64 / episodes).to_string());
    put("final_gen_loss", last.map_or(f64::NAN, |r| r.gen_loss).to_string());
    put("final_disc_loss", last.map_or(f64::NAN, |r| r.disc_loss).to_string());
    put("final_val_loss", last.map_or(f64::NAN, |r| r.val_loss).to_string());
    put("threshold", thr.join(","));
    put("precision", m.precision.to_string());
    put("recall", m.recall.to_string());
    put("accuracy", m.accuracy.to_string());
    put("f1", m.f1.to_string());
    put("tp", m.counts.tp.to_string());
    put("fp", m.counts.fp.to_string());
    put("fn", m.counts.fn_.to_string());
    put("tn", m.counts.tn.to_string());
    s
}

/// Parses a `key = value` file such as `summary` or `config.resolved`.
pub fn read_key_values(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Format(format!("{}: bad line '{l}'", path.display())))
        })
        .collect()
}

/// Re-scores a finished run's final checkpoint against the data its config
/// regenerates.
pub fn evaluate_run(run_dir: &Path) -> Result<DetectionMetrics> {
    let cfg = ExperimentConfig::load(&run_dir.join("config.resolved"))?;
    let data = load_data(&cfg)?;
    let ckpt = run_dir.join("checkpoints");
    let stems: Vec<String> = if cfg.method == Method::Standalone {
        (0..cfg.scenario.n_uavs).map(|u| format!("final.uav{u}")).collect()
    } else {
        vec!["final.global".to_string()]
    };
    let mut all = Vec::new();
    for stem in stems {
        let (nets, scorer) = crate::gan::load_checkpoint(&ckpt, &stem)?;
        if !scorer.threshold.is_finite() {
            continue;
        }
        let rows: Vec<Features> = data.test.iter().map(|s| s.features).collect();
        let scores = score_rows(&nets, &rows, &scorer)?;
        let labels: Vec<bool> = data.test.iter().map(|s| s.label == Label::Anomalous).collect();
        let preds: Vec<bool> = scores.iter().map(|&s| classify(s, scorer.threshold)).collect();
        all.push(compute_metrics(&labels, &preds)?);
    }
    DetectionMetrics::mean(&all).ok_or_else(|| Error::config("no evaluable checkpoint in run"))
}
