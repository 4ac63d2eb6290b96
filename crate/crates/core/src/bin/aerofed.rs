use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aerofed::agent::{Agent, AgentHyper, DiscreteSpace};
use aerofed::experiment::{self, plots, ExperimentConfig};
use aerofed::nn::gradcheck::gradcheck_suite;
use aerofed::oracle::{grid_points, joint_vs_factorized, placement_suite, JointInstance, PLACEMENT_PERIODS};
use aerofed::Result;

#[derive(Parser)]
#[command(name = "aerofed", version, about = "Federated GAN anomaly detection over simulated UAV networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment into a run directory.
    Run(RunArgs),
    /// Re-score a finished run's final checkpoint.
    Evaluate(DirArgs),
    /// Write convergence.csv, energy.csv and detection.csv for a run.
    EmitPlots(DirArgs),
    /// Finite-difference check of the MLP gradients on random networks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
    /// Brute-force comparisons on tiny instances.
    Oracle {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Use the generated dataset instead of `data.path`.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    episodes: Option<usize>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct DirArgs {
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

fn run_cmd(a: RunArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| aerofed::Error::Config(format!("override '{o}' is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = a.seed {
        cfg.set("run.seed", &s.to_string())?;
    }
    if let Some(e) = a.episodes {
        cfg.set("run.episodes", &e.to_string())?;
    }
    if a.synthetic {
        cfg.set("data.synthetic", "true")?;
    }
    let out = experiment::run(&cfg, &a.out)?;
    plots::emit_plot_data(&a.out)?;
    for (k, v) in &out.summary {
        println!("{k} = {v}");
    }
    Ok(())
}

fn oracle_cmd(seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = DiscreteSpace::new(5, 30, false)?;
    let agent = Agent::new(110, space, AgentHyper::default(), seed)?;
    let all: Vec<usize> = (0..space.len()).collect();
    let mut agree = 0;
    for _ in 0..1000 {
        let s: Vec<f64> = (0..110).map(|_| rng.gen()).collect();
        let (d, _, _) = agent.greedy(&s, &all)?;
        let mut best = (0, f64::NEG_INFINITY);
        for cand in 0..space.len() {
            let q = agent.q(&s, cand, &agent.act(&s, cand)?)?;
            if q > best.1 {
                best = (cand, q);
            }
        }
        agree += usize::from(best.0 == d);
    }
    println!("greedy_vs_enumeration = {agree}/1000");

    let inst = JointInstance::random(&mut rng, 3, 2);
    let cmp = joint_vs_factorized(&inst, &grid_points(1000.0, 11))?;
    println!("factorized_best = {}", cmp.factorized_best);
    println!("joint_best = {}", cmp.joint_best);
    println!("relative_gap = {}", cmp.relative_gap());

    for r in placement_suite(&[seed], PLACEMENT_PERIODS)? {
        println!("placement_trained = {}", r.trained_coverage);
        println!("placement_optimal = {}", r.optimal_coverage);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run_cmd(a),
        Command::Evaluate(d) => experiment::evaluate_run(&d.out).map(|m| {
            println!("precision = {}", m.precision);
            println!("recall = {}", m.recall);
            println!("accuracy = {}", m.accuracy);
            println!("f1 = {}", m.f1);
        }),
        Command::EmitPlots(d) => plots::emit_plot_data(&d.out),
        Command::Gradcheck { seed, cases } => {
            let reports = gradcheck_suite(cases, seed);
            let worst = reports.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
            println!("cases = {}", reports.len());
            println!("max_relative_error = {worst:e}");
            if worst < 1e-4 {
                Ok(())
            } else {
                Err(aerofed::Error::Numeric {
                    context: "gradient check",
                    index: reports.iter().position(|r| r.max_rel_error >= 1e-4).unwrap_or(0),
                })
            }
        }
        Command::Oracle { seed } => oracle_cmd(seed),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
