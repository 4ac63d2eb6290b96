//! Flat `section.key = value` experiment configuration.
//!
//! Lines may also sit under a `[section]` header, in which case bare keys are
//! prefixed with it. `#` starts a comment. Every field has a default, so an
//! empty file is a complete configuration.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::agent::{AgentHyper, MAX_JOINT_DEVICES, MAX_JOINT_UAVS, MAX_SUBSET_UAVS};
use crate::dataset::{AnomalyKind, InjectionSpec, SplitConfig, N_FEATURES};
use crate::env::{Area, EnergyParams, LatencyParams, ScenarioParams};
use crate::error::{Error, Result};
use crate::gan::{GanHyper, ScorerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Federated GAN with the actor-critic choosing subsets and positions.
    #[default]
    AflCa2c,
    /// Every eligible UAV joins every round; UAVs hold their positions.
    FlAll,
    /// Each UAV trains alone; nothing is uploaded.
    Standalone,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "afl-ca2c" => Ok(Method::AflCa2c),
            "fl-all" => Ok(Method::FlAll),
            "standalone" => Ok(Method::Standalone),
            other => Err(format!("unknown method '{other}' (afl-ca2c, fl-all, standalone)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::AflCa2c => "afl-ca2c",
            Method::FlAll => "fl-all",
            Method::Standalone => "standalone",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    /// Intel Lab style log; empty means use the synthetic generator.
    pub path: String,
    pub synthetic: bool,
    pub synthetic_motes: u32,
    pub synthetic_per_mote: usize,
    pub split: SplitConfig,
    pub injection: InjectionSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: String::new(),
            synthetic: false,
            synthetic_motes: 54,
            synthetic_per_mote: 300,
            split: SplitConfig::default(),
            injection: InjectionSpec::default(),
        }
    }
}

impl DataConfig {
    pub fn uses_synthetic(&self) -> bool {
        self.synthetic || self.path.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub method: Method,
    pub seed: u64,
    pub episodes: usize,
    pub checkpoint_every: usize,
    pub area: Area,
    pub scenario: ScenarioParams,
    pub energy: EnergyParams,
    pub latency: LatencyParams,
    /// Aggregation deadline in seconds; 0 waits for every selected UAV.
    pub deadline_s: f64,
    pub gan: GanHyper,
    pub scorer: ScorerConfig,
    pub quantile: f64,
    pub agent: AgentHyper,
    pub data: DataConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::default(),
            seed: 0,
            episodes: 100,
            checkpoint_every: 10,
            area: Area::default(),
            scenario: ScenarioParams::default(),
            energy: EnergyParams::default(),
            latency: LatencyParams::default(),
            deadline_s: 0.0,
            gan: GanHyper::default(),
            scorer: ScorerConfig::default(),
            quantile: 0.95,
            agent: AgentHyper::default(),
            data: DataConfig::default(),
        }
    }
}

trait ConfigValue: Sized {
    fn parse_value(raw: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! plain_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(raw: &str) -> std::result::Result<Self, String> {
                raw.parse::<$t>().map_err(|e| format!("'{raw}' is not a valid {}: {e}", stringify!($t)))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

plain_value!(f64, usize, u64, u32, bool);

impl ConfigValue for String {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        Ok(raw.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for Method {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        raw.parse()
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for Vec<usize> {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        raw.split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|e| format!("'{s}' in list: {e}")))
            .collect()
    }
    fn render(&self) -> String {
        self.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

impl ConfigValue for Vec<AnomalyKind> {
    fn parse_value(raw: &str) -> std::result::Result<Self, String> {
        raw.split(',').map(|s| s.parse().map_err(|e: Error| e.to_string())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")
    }
}

macro_rules! config_fields {
    ($($key:literal => $($path:ident).+),* $(,)?) => {
        /// Every accepted key, in echo order.
        pub const KEYS: &[&str] = &[$($key),*];

        fn set_field(cfg: &mut ExperimentConfig, key: &str, raw: &str) -> Result<()> {
            match key {
                $($key => {
                    cfg.$($path).+ = ConfigValue::parse_value(raw)
                        .map_err(|e| Error::config(format!("{key}: {e}")))?;
                })*
                _ => return Err(Error::config(format!("unknown key '{key}'"))),
            }
            Ok(())
        }

        fn field_values(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
            vec![$(($key, cfg.$($path).+.render())),*]
        }
    };
}

config_fields! {
    "run.method" => method,
    "run.seed" => seed,
    "run.episodes" => episodes,
    "run.checkpoint_every" => checkpoint_every,
    "scenario.area_m" => area.side,
    "scenario.haps_x" => area.haps.x,
    "scenario.haps_y" => area.haps.y,
    "scenario.n_uavs" => scenario.n_uavs,
    "scenario.n_devices" => scenario.n_devices,
    "scenario.coverage_radius_m" => scenario.coverage_radius_m,
    "scenario.mobile_fraction" => scenario.mobile_fraction,
    "scenario.device_speed_m" => scenario.device_speed_m,
    "energy.upload_j" => energy.upload_j,
    "energy.local_round_j" => energy.local_round_j,
    "energy.fly_rate_j_per_km" => energy.fly_j_per_km,
    "energy.battery_capacity_j" => energy.battery_capacity_j,
    "latency.local_round_s" => latency.local_round_s,
    "latency.upload_base_s" => latency.upload_base_s,
    "latency.upload_per_m_s" => latency.upload_per_m_s,
    "latency.aggregation_s" => latency.aggregation_s,
    "latency.broadcast_s" => latency.broadcast_s,
    "latency.deadline_s" => deadline_s,
    "gan.K" => gan.local_rounds_per_upload,
    "gan.N" => gan.disc_rounds_per_gen,
    "gan.latent_dim" => gan.latent_dim,
    "gan.hidden" => gan.hidden,
    "gan.batch_size" => gan.batch_size,
    "gan.gen_lr" => gan.gen_lr,
    "gan.disc_lr" => gan.disc_lr,
    "gan.beta1" => gan.beta1,
    "gan.beta2" => gan.beta2,
    "scorer.weight_g" => scorer.weight_g,
    "scorer.z_search_steps" => scorer.z_search_steps,
    "scorer.z_search_lr" => scorer.z_search_lr,
    "scorer.quantile" => quantile,
    "agent.gamma" => agent.gamma,
    "agent.tau" => agent.tau,
    "agent.eps_start" => agent.eps_start,
    "agent.eps_end" => agent.eps_end,
    "agent.eps_decay_periods" => agent.eps_decay_periods,
    "agent.sigma" => agent.sigma,
    "agent.sigma_end" => agent.sigma_end,
    "agent.batch_size" => agent.batch_size,
    "agent.buffer_capacity" => agent.buffer_capacity,
    "agent.hidden" => agent.hidden,
    "agent.actor_lr" => agent.actor_lr,
    "agent.critic_lr" => agent.critic_lr,
    "agent.w_coverage" => agent.reward.w_coverage,
    "agent.w_time" => agent.reward.w_time,
    "agent.w_loss" => agent.reward.w_loss,
    "agent.time_scale_s" => agent.reward.time_scale_s,
    "agent.loss_scale" => agent.reward.loss_scale,
    "agent.joint_actions" => agent.joint_actions,
    "data.path" => data.path,
    "data.synthetic" => data.synthetic,
    "data.synthetic_motes" => data.synthetic_motes,
    "data.synthetic_per_mote" => data.synthetic_per_mote,
    "data.train_fraction" => data.split.train_fraction,
    "data.validation_fraction" => data.split.validation_fraction,
    "data.max_train_per_mote" => data.split.max_train_per_mote,
    "data.anomaly_rate" => data.injection.rate,
    "data.anomaly_kinds" => data.injection.kinds,
    "data.anomaly_magnitude" => data.injection.magnitude_sigmas,
}

fn check(ok: bool, key: &str, msg: impl fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(format!("{key}: {msg}")))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            let k = k.trim();
            let key = if section.is_empty() || k.contains('.') {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            set_field(&mut cfg, &key, v.trim())?;
        }
        cfg.sync();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies one `key = value` override on top of the current values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        set_field(self, key, value)?;
        self.sync();
        self.validate()
    }

    fn sync(&mut self) {
        self.data.split.n_devices = self.scenario.n_devices;
        self.gan.data_dim = N_FEATURES;
    }

    pub fn validate(&self) -> Result<()> {
        check(self.area.side > 0.0 && self.area.side.is_finite(), "scenario.area_m", "must be positive")?;
        check(self.area.contains(&self.area.haps), "scenario.haps_x", "HAPS point must lie inside the area")?;
        let n_uavs = self.scenario.n_uavs;
        check(n_uavs >= 1, "scenario.n_uavs", "must be at least 1")?;
        check(n_uavs <= MAX_SUBSET_UAVS, "scenario.n_uavs", format!("at most {MAX_SUBSET_UAVS} UAVs supported"))?;
        check(self.scenario.n_devices >= 1, "scenario.n_devices", "must be at least 1")?;
        check(self.scenario.coverage_radius_m > 0.0, "scenario.coverage_radius_m", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.scenario.mobile_fraction),
            "scenario.mobile_fraction",
            "must lie in [0, 1]",
        )?;
        check(self.scenario.device_speed_m >= 0.0, "scenario.device_speed_m", "must be non-negative")?;
        self.energy.validate()?;
        self.latency.validate()?;
        check(self.deadline_s >= 0.0 && self.deadline_s.is_finite(), "latency.deadline_s", "must be >= 0")?;
        self.gan.validate()?;
        check(!self.gan.hidden.contains(&0), "gan.hidden", "layer sizes must be positive")?;
        self.scorer.validate()?;
        check(self.quantile > 0.0 && self.quantile <= 1.0, "scorer.quantile", "must lie in (0, 1]")?;
        self.agent.validate()?;
        if self.agent.joint_actions {
            check(
                n_uavs <= MAX_JOINT_UAVS && self.scenario.n_devices <= MAX_JOINT_DEVICES,
                "agent.joint_actions",
                format!("needs at most {MAX_JOINT_UAVS} UAVs and {MAX_JOINT_DEVICES} devices"),
            )?;
        }
        check(self.checkpoint_every >= 1, "run.checkpoint_every", "must be at least 1")?;
        let split = &self.data.split;
        check(
            split.train_fraction > 0.0 && split.train_fraction < 1.0,
            "data.train_fraction",
            "must lie in (0, 1)",
        )?;
        check(
            (0.0..1.0).contains(&split.validation_fraction),
            "data.validation_fraction",
            "must lie in [0, 1)",
        )?;
        check(
            (0.0..=1.0).contains(&self.data.injection.rate),
            "data.anomaly_rate",
            "must lie in [0, 1]",
        )?;
        check(!self.data.injection.kinds.is_empty(), "data.anomaly_kinds", "needs at least one kind")?;
        check(self.data.injection.magnitude_sigmas >= 0.0, "data.anomaly_magnitude", "must be non-negative")?;
        check(
            (1..=crate::dataset::MAX_MOTE_ID).contains(&self.data.synthetic_motes),
            "data.synthetic_motes",
            format!("must lie in 1..={}", crate::dataset::MAX_MOTE_ID),
        )?;
        check(self.data.synthetic_per_mote >= 2, "data.synthetic_per_mote", "must be at least 2")?;
        Ok(())
    }

    /// Every key with its resolved value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in field_values(self) {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn get(&self, key: &str) -> Option<String> {
        field_values(self).into_iter().find(|(k, _)| *k == key).map(|(_, v)| v)
    }

    pub fn async_mode(&self) -> crate::afl::AsyncMode {
        if self.deadline_s > 0.0 {
            crate::afl::AsyncMode::Deadline(self.deadline_s)
        } else {
            crate::afl::AsyncMode::WaitSelected
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.method, Method::AflCa2c);
        assert_eq!(cfg.gan.local_rounds_per_upload, 30);
    }

    #[test]
    fn echo_round_trips() {
        let cfg = ExperimentConfig::parse("energy.fly_rate_j_per_km = 300\nagent.hidden = 16,8\n").unwrap();
        let text = cfg.to_text();
        assert!(text.contains("energy.fly_rate_j_per_km = 300\n"));
        assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
        assert_eq!(text.lines().count(), KEYS.len());
    }

    #[test]
    fn sections_and_comments() {
        let cfg = ExperimentConfig::parse("# header\n[gan]\nK = 5 # fewer\n[run]\nmethod = fl-all\nscenario.n_uavs = 3\n").unwrap();
        assert_eq!(cfg.gan.local_rounds_per_upload, 5);
        assert_eq!(cfg.method, Method::FlAll);
        assert_eq!(cfg.scenario.n_uavs, 3);
    }

    #[test]
    fn errors_name_the_key() {
        let msg = |t: &str| ExperimentConfig::parse(t).unwrap_err().to_string();
        assert!(msg("gan.K = 0").contains("gan.K"));
        assert!(msg("gan.bogus = 1").contains("gan.bogus"));
        assert!(msg("run.episodes = many").contains("run.episodes"));
        assert!(msg("scorer.quantile = 0").contains("scorer.quantile"));
        assert!(msg("agent.w_time = -1").contains("agent.w_time"));
        assert!(msg("run.method = greedy").contains("run.method"));
        assert!(msg("agent.joint_actions = true").contains("agent.joint_actions"));
        assert!(msg("just words").contains("line 1"));
    }

    #[test]
    fn n_devices_flows_into_split() {
        let cfg = ExperimentConfig::parse("scenario.n_devices = 12").unwrap();
        assert_eq!(cfg.data.split.n_devices, 12);
    }
}
