//! CSV series for external plotting, derived from a run directory.

use std::fs;
use std::path::Path;

use super::run::read_key_values;
use crate::error::{Error, Result};

pub const CONVERGENCE_HEADER: &str = "episode,gen_loss,disc_loss";
pub const ENERGY_HEADER: &str = "episode,cumulative_mean_uav_energy_J";
pub const DETECTION_HEADER: &str = "method,precision,recall,accuracy,f1";

/// One parsed `rounds.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRow {
    pub episode: usize,
    pub selection_mask: String,
    pub gen_loss: f64,
    pub disc_loss: f64,
    pub val_loss: f64,
    pub energy_j: f64,
    pub latency_s: f64,
}

pub fn read_rounds(path: &Path) -> Result<Vec<RoundRow>> {
    let text = fs::read_to_string(path)?;
    let bad = |line: &str| Error::Format(format!("{}: bad row '{line}'", path.display()));
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(line));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(line));
            Ok(RoundRow {
                episode: f[0].parse().map_err(|_| bad(line))?,
                selection_mask: f[1].to_string(),
                gen_loss: num(2)?,
                disc_loss: num(3)?,
                val_loss: num(4)?,
                energy_j: num(5)?,
                latency_s: num(6)?,
            })
        })
        .collect()
}

/// Trailing mean over up to `window` values ending at each index.
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..values.len())
        .map(|i| {
            let from = (i + 1).saturating_sub(window);
            values[from..=i].iter().sum::<f64>() / (i + 1 - from) as f64
        })
        .collect()
}

/// First episode `e` (0-based) at which the smoothed series has changed by
/// less than `tol` relative over the preceding `span` episodes.
pub fn plateau_episode(values: &[f64], window: usize, span: usize, tol: f64) -> Option<usize> {
    let s = trailing_mean(values, window);
    (span..s.len()).find(|&e| {
        let base = s[e - span];
        base != 0.0 && ((s[e] - base) / base).abs() < tol
    })
}

/// Writes `convergence.csv`, `energy.csv` and `detection.csv` into `run_dir`.
/// Missing logs produce header-only files.
pub fn emit_plot_data(run_dir: &Path) -> Result<()> {
    let rounds_path = run_dir.join("rounds.csv");
    let rounds = if rounds_path.exists() {
        read_rounds(&rounds_path)?
    } else {
        Vec::new()
    };
    let n_uavs = read_key_values(&run_dir.join("config.resolved"))
        .ok()
        .and_then(|kv| kv.into_iter().find(|(k, _)| k == "scenario.n_uavs"))
        .and_then(|(_, v)| v.parse::<f64>().ok())
        .unwrap_or(1.0);

    let mut conv = format!("{CONVERGENCE_HEADER}\n");
    let mut energy = format!("{ENERGY_HEADER}\n");
    let mut cum = 0.0;
    for r in &rounds {
        conv.push_str(&format!("{},{},{}\n", r.episode, r.gen_loss, r.disc_loss));
        cum += r.energy_j;
        energy.push_str(&format!("{},{}\n", r.episode, cum / n_uavs));
    }
    fs::write(run_dir.join("convergence.csv"), conv)?;
    fs::write(run_dir.join("energy.csv"), energy)?;

    let mut det = format!("{DETECTION_HEADER}\n");
    if let Ok(summary) = read_key_values(&run_dir.join("summary")) {
        let get = |k: &str| summary.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
        if let (Some(m), Some(p), Some(r), Some(a), Some(f)) =
            (get("method"), get("precision"), get("recall"), get("accuracy"), get("f1"))
        {
            det.push_str(&format!("{m},{p},{r},{a},{f}\n"));
        }
    }
    fs::write(run_dir.join("detection.csv"), det)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_mean_small_cases() {
        assert_eq!(trailing_mean(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert!(trailing_mean(&[], 3).is_empty());
    }

    #[test]
    fn plateau_detection() {
        let decaying: Vec<f64> = (0..100).map(|e| 2.0 + 10.0 * (-(e as f64) / 5.0).exp()).collect();
        let e = plateau_episode(&decaying, 10, 10, 0.05).unwrap();
        assert!(e > 10 && e < 60, "{e}");
        let growing: Vec<f64> = (0..50).map(|e| (e + 1) as f64).collect();
        assert_eq!(plateau_episode(&growing, 10, 10, 0.05), None);
    }

    #[test]
    fn empty_run_dir_gives_headers() {
        let dir = tempfile::tempdir().unwrap();
        emit_plot_data(dir.path()).unwrap();
        for (f, h) in [
            ("convergence.csv", CONVERGENCE_HEADER),
            ("energy.csv", ENERGY_HEADER),
            ("detection.csv", DETECTION_HEADER),
        ] {
            assert_eq!(fs::read_to_string(dir.path().join(f)).unwrap(), format!("{h}\n"));
        }
    }
}
