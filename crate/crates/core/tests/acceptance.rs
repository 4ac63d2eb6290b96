use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use aerofed::afl::{aggregate, Federation, SelectionIndicator, Submission};
use aerofed::agent::{Agent, AgentHyper, DiscreteSpace};
use aerofed::dataset::Features;
use aerofed::env::{fly, Area, EnergyParams, LatencyParams, Point, ScenarioParams, UavState, World};
use aerofed::experiment::plots::{plateau_episode, read_rounds};
use aerofed::experiment::{self, ExperimentConfig};
use aerofed::gan::{disc_loss, local_train, sample_noise, GanHyper, GanModels};
use aerofed::nn::gradcheck::gradcheck_suite;
use aerofed::oracle::{grid_points, joint_vs_factorized, placement_suite, JointInstance, PLACEMENT_PERIODS};

fn report(id: u32, name: &str, pass: bool, detail: String) -> bool {
    println!("criterion {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    pass
}

fn within(limit: Duration, started: Instant) -> (bool, String) {
    let e = started.elapsed();
    (e < limit, format!("{:.1}s of {}s budget", e.as_secs_f64(), limit.as_secs()))
}

fn summary_value(summary: &[(String, String)], key: &str) -> f64 {
    summary
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or_else(|| panic!("summary has no numeric {key}"))
}

fn synthetic_config(method: &str, seed: u64, episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.set("run.method", method).unwrap();
    cfg.set("run.seed", &seed.to_string()).unwrap();
    cfg.set("run.episodes", &episodes.to_string()).unwrap();
    cfg.set("data.synthetic", "true").unwrap();
    cfg
}

#[test]
fn c01_energy_constants() {
    let started = Instant::now();
    let params = EnergyParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut world = World::random(
        Area::default(),
        ScenarioParams {
            n_uavs: 2,
            ..Default::default()
        },
        params,
        LatencyParams::default(),
        &mut rng,
    );
    let shard: Vec<Features> = (0..64).map(|_| [rng.gen(), rng.gen(), rng.gen(), rng.gen()]).collect();
    let hyper = GanHyper {
        hidden: vec![4],
        ..Default::default()
    };
    let mut fed = Federation::new(2, hyper, &shard, 1).unwrap();
    let before = world.uavs[0].energy;
    let log = fed
        .run_episode(&mut world, &[shard.clone(), shard.clone()], &SelectionIndicator::from_mask(0b01, 2), 0, 1)
        .unwrap();
    let episode_j = before - world.uavs[0].energy;
    let idle_j = world.uavs[1].spent.total();

    let mut uav = UavState::new(Point::new(0.0, 0.0), params.battery_capacity_j);
    let flight = fly(&mut uav, Point::new(300.0, 400.0), &params);

    let (fast, time) = within(Duration::from_secs(1), started);
    let pass = episode_j == 60.0 && log.energy.total() == 60.0 && idle_j == 0.0 && flight.energy_j == 150.0 && fast;
    let ok = report(
        1,
        "energy constants",
        pass,
        format!("episode {episode_j} J, unselected {idle_j} J, 0.5 km flight {} J, {time}", flight.energy_j),
    );
    assert!(ok);
}

#[test]
fn c02_gradient_suite() {
    let started = Instant::now();
    let reports = gradcheck_suite(100, 0);
    let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let (fast, time) = within(Duration::from_secs(30), started);
    let ok = report(
        2,
        "gradient suite",
        reports.len() == 100 && worst < 1e-4 && fast,
        format!("{} cases, worst relative error {worst:.2e}, {time}", reports.len()),
    );
    assert!(ok);
}

#[test]
fn c03_fedavg_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut permutation_exact = true;
    for _ in 0..50 {
        let members = rng.gen_range(1..=5);
        let g_len = rng.gen_range(1..=200);
        let d_len = rng.gen_range(1..=200);
        let subs: Vec<Submission> = (0..members)
            .map(|uav| Submission {
                uav,
                gen: (0..g_len).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>().into(),
                disc: (0..d_len).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>().into(),
                shard_size: rng.gen_range(1..500),
            })
            .collect();
        let (g, d) = aggregate(&subs).unwrap().unwrap();

        let total: f64 = subs.iter().map(|s| s.shard_size as f64).sum();
        for i in 0..g_len {
            let expect: f64 = subs.iter().map(|s| s.gen[i] * s.shard_size as f64).sum::<f64>() / total;
            worst = worst.max((g[i] - expect).abs());
        }
        for i in 0..d_len {
            let expect: f64 = subs.iter().map(|s| s.disc[i] * s.shard_size as f64).sum::<f64>() / total;
            worst = worst.max((d[i] - expect).abs());
        }

        let mut shuffled = subs.clone();
        shuffled.shuffle(&mut rng);
        let (g2, d2) = aggregate(&shuffled).unwrap().unwrap();
        permutation_exact &= g2 == g && d2 == d;
    }
    let ok = report(
        3,
        "fedavg oracle",
        worst <= 1e-12 && permutation_exact,
        format!("max deviation {worst:.1e}, permutations bit-identical: {permutation_exact}"),
    );
    assert!(ok);
}

#[test]
fn c04_gan_equilibrium() {
    let started = Instant::now();
    let mean = [1.0, -1.0];
    let sd = [0.5, 1.0];
    let n = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dist: Vec<Normal<f64>> = (0..2).map(|k| Normal::new(mean[k], sd[k]).unwrap()).collect();
    let data: Vec<[f64; 2]> = (0..n).map(|_| [dist[0].sample(&mut rng), dist[1].sample(&mut rng)]).collect();
    let hyper = GanHyper {
        data_dim: 2,
        latent_dim: 4,
        ..Default::default()
    };
    let mut models = GanModels::new(&hyper, 0).unwrap();
    local_train(&mut models, &data, &hyper, 4000, &mut rng).unwrap();

    let noise = sample_noise(&mut rng, n, hyper.latent_dim);
    let loss = disc_loss(&models.nets, &data, &noise).unwrap();
    let fake: Vec<Vec<f64>> = noise.iter().map(|z| models.nets.generate(z)).collect();

    let mut mean_ok = true;
    let mut detail = Vec::new();
    for k in 0..2 {
        let stats = |xs: &mut dyn Iterator<Item = f64>| {
            let v: Vec<f64> = xs.collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var, v.len() as f64)
        };
        let (mg, vg, ng) = stats(&mut fake.iter().map(|x| x[k]));
        let (md, vd, nd) = stats(&mut data.iter().map(|x| x[k]));
        let se = (vg / ng + vd / nd).sqrt();
        mean_ok &= (mg - md).abs() <= 3.0 * se;
        detail.push(format!("dim{k} gen {mg:.3} data {md:.3} se {se:.3}"));
    }
    let target = 2.0 * std::f64::consts::LN_2;
    let loss_ok = (loss - target).abs() <= 0.5;
    let (fast, time) = within(Duration::from_secs(120), started);
    let ok = report(
        4,
        "gan equilibrium",
        loss_ok && mean_ok && fast,
        format!("disc loss {loss:.3} vs {target:.3}±0.5, {}, {time}", detail.join(", ")),
    );
    assert!(ok);
}

#[test]
fn c05_convergence_plateau() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    experiment::run(&synthetic_config("afl-ca2c", 0, 120), dir.path()).unwrap();
    let rows = read_rounds(&dir.path().join("rounds.csv")).unwrap();
    let total: Vec<f64> = rows.iter().map(|r| r.gen_loss + r.disc_loss).collect();
    let plateau = plateau_episode(&total, 10, 10, 0.05);
    let (fast, time) = within(Duration::from_secs(15 * 60), started);
    let ok = report(
        5,
        "convergence plateau",
        rows.len() == 120 && plateau.is_some_and(|e| e < 120) && fast,
        format!("plateau at episode {:?} of {}, {time}", plateau.map(|e| e + 1), rows.len()),
    );
    assert!(ok);
}

const COMPARISON_SEEDS: [u64; 3] = [0, 1, 2];

struct MethodRun {
    mean_uav_energy: f64,
    strict_subset_fraction: f64,
    f1: f64,
}

struct Comparison {
    /// Indexed by seed position, then afl-ca2c, fl-all, standalone.
    runs: Vec<[MethodRun; 3]>,
    elapsed: Duration,
}

fn comparison() -> &'static Comparison {
    static CELL: OnceLock<Comparison> = OnceLock::new();
    CELL.get_or_init(|| {
        let started = Instant::now();
        let runs = COMPARISON_SEEDS
            .iter()
            .map(|&seed| {
                ["afl-ca2c", "fl-all", "standalone"].map(|method| {
                    let dir = tempfile::tempdir().unwrap();
                    let out = experiment::run(&synthetic_config(method, seed, 100), dir.path()).unwrap();
                    MethodRun {
                        mean_uav_energy: summary_value(&out.summary, "mean_uav_energy_J"),
                        strict_subset_fraction: summary_value(&out.summary, "strict_subset_fraction"),
                        f1: out.metrics.f1,
                    }
                })
            })
            .collect();
        Comparison {
            runs,
            elapsed: started.elapsed(),
        }
    })
}

#[test]
fn c06_energy_ordering() {
    let cmp = comparison();
    let mut all = true;
    let mut detail = Vec::new();
    for (seed, [afl, fl_all, standalone]) in COMPARISON_SEEDS.iter().zip(&cmp.runs) {
        let ordered = standalone.mean_uav_energy < afl.mean_uav_energy && afl.mean_uav_energy < fl_all.mean_uav_energy;
        let margin_needed = afl.strict_subset_fraction >= 0.3;
        let margin_ok = !margin_needed || fl_all.mean_uav_energy >= 1.1 * afl.mean_uav_energy;
        all &= ordered && margin_ok;
        detail.push(format!(
            "seed {seed}: standalone {:.0} afl {:.0} fl-all {:.0} J, strict subsets {:.0}%{}",
            standalone.mean_uav_energy,
            afl.mean_uav_energy,
            fl_all.mean_uav_energy,
            100.0 * afl.strict_subset_fraction,
            if ordered && margin_ok { "" } else { " <- violated" }
        ));
    }
    let per_run = cmp.elapsed / 9;
    let fast = per_run * 3 < Duration::from_secs(30 * 60);
    let ok = report(
        6,
        "energy ordering",
        all && fast,
        format!("{}; {:.0}s per method triple", detail.join("; "), (per_run * 3).as_secs_f64()),
    );
    assert!(ok);
}

#[test]
fn c07_detection_ordering() {
    let cmp = comparison();
    let mut wins = 0;
    let mut detail = Vec::new();
    for (seed, [afl, _, standalone]) in COMPARISON_SEEDS.iter().zip(&cmp.runs) {
        wins += usize::from(afl.f1 >= standalone.f1);
        detail.push(format!("seed {seed}: afl {:.3} standalone {:.3}", afl.f1, standalone.f1));
    }
    let ok = report(
        7,
        "detection ordering",
        wins * 2 > COMPARISON_SEEDS.len(),
        format!("{wins}/{} seeds; {}", COMPARISON_SEEDS.len(), detail.join("; ")),
    );
    assert!(ok);
}

#[test]
fn c08_agent_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let space = DiscreteSpace::new(5, 30, false).unwrap();
    let state_dim = 3 * 30 + 4 * 5;
    let agent = Agent::new(state_dim, space, AgentHyper::default(), 8).unwrap();
    let every: Vec<usize> = (0..space.len()).collect();
    let mut agree = 0;
    for _ in 0..1000 {
        let s: Vec<f64> = (0..state_dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let (picked, _, _) = agent.greedy(&s, &every).unwrap();
        let mut best = 0;
        let mut best_q = f64::NEG_INFINITY;
        for mask in 0..32usize {
            let c = agent.act(&s, mask).unwrap();
            let q = agent.q(&s, mask, &c).unwrap();
            if q > best_q {
                best_q = q;
                best = mask;
            }
        }
        agree += usize::from(picked == best);
    }

    let grid = grid_points(1000.0, 11);
    let mut worst_gap = 0.0f64;
    for _ in 0..10 {
        let inst = JointInstance::random(&mut rng, 3, 2);
        worst_gap = worst_gap.max(joint_vs_factorized(&inst, &grid).unwrap().relative_gap());
    }
    let ok = report(
        8,
        "agent oracles",
        space.len() == 32 && agree == 1000 && worst_gap <= 0.05,
        format!("greedy matched enumeration {agree}/1000, worst joint gap {:.2}%", 100.0 * worst_gap),
    );
    assert!(ok);
}

#[test]
fn c09_degenerate_placement() {
    let seeds = [0, 1, 2];
    let started = Instant::now();
    let results = placement_suite(&seeds, PLACEMENT_PERIODS).unwrap();
    let per_check = started.elapsed() / seeds.len() as u32;
    let ratios: Vec<f64> = results.iter().map(|r| r.ratio()).collect();
    let ok = report(
        9,
        "degenerate placement",
        ratios.iter().all(|&r| r >= 0.9) && per_check < Duration::from_secs(300),
        format!(
            "trained/optimal coverage {:?}, {:.1}s per instance",
            ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>(),
            per_check.as_secs_f64()
        ),
    );
    assert!(ok);
}

#[test]
fn c10_determinism() {
    let read = |dir: &Path| (fs::read(dir.join("rounds.csv")).unwrap(), fs::read(dir.join("summary")).unwrap());
    let mut same = true;
    for method in ["afl-ca2c", "fl-all", "standalone"] {
        let cfg = synthetic_config(method, 10, 12);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        experiment::run(&cfg, a.path()).unwrap();
        experiment::run(&cfg, b.path()).unwrap();
        same &= read(a.path()) == read(b.path());
    }
    let ok = report(10, "determinism", same, format!("rounds.csv and summary byte-identical: {same}"));
    assert!(ok);
}
