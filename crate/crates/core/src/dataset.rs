//! Intel-Lab-format sensor logs: parsing, z-score normalization, device
//! partitioning and labelled anomaly injection.
//!
//! A log line has eight whitespace-separated fields:
//! `date time epoch moteid temperature humidity light voltage`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use chrono::{NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 4;
pub const MAX_MOTE_ID: u32 = 54;
pub const STD_FLOOR: f64 = 1e-6;
pub const STUCK_WINDOW: usize = 5;
pub const DRIFT_WINDOW: usize = 20;

pub type Features = [f64; N_FEATURES];

#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub date: NaiveDate,
    pub time: NaiveTime,
    pub epoch: i64,
    pub mote_id: u32,
    pub temperature: f64,
    pub humidity: f64,
    pub light: f64,
    pub voltage: f64,
}

impl SensorRecord {
    pub fn features(&self) -> Features {
        [self.temperature, self.humidity, self.light, self.voltage]
    }

    /// Parses one log line; `None` for anything malformed or incomplete.
    pub fn parse_line(line: &str) -> Option<SensorRecord> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return None;
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").ok()?;
        let time = NaiveTime::parse_from_str(fields[1], "%H:%M:%S%.f").ok()?;
        let epoch = fields[2].parse().ok()?;
        let mote_id: u32 = fields[3].parse().ok()?;
        if !(1..=MAX_MOTE_ID).contains(&mote_id) {
            return None;
        }
        let mut feats = [0.0; N_FEATURES];
        for (slot, raw) in feats.iter_mut().zip(&fields[4..]) {
            let v: f64 = raw.parse().ok()?;
            if !v.is_finite() {
                return None;
            }
            *slot = v;
        }
        Some(SensorRecord {
            date,
            time,
            epoch,
            mote_id,
            temperature: feats[0],
            humidity: feats[1],
            light: feats[2],
            voltage: feats[3],
        })
    }
}

impl fmt::Display for SensorRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {} {}",
            self.date.format("%Y-%m-%d"),
            self.time.format("%H:%M:%S%.f"),
            self.epoch,
            self.mote_id,
            self.temperature,
            self.humidity,
            self.light,
            self.voltage
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<SensorRecord>,
    pub skipped: usize,
}

/// Reads every line; malformed ones are counted, not fatal.
pub fn parse_records<R: BufRead>(reader: R) -> Result<ParsedLog> {
    let mut out = ParsedLog::default();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match SensorRecord::parse_line(&line) {
            Some(r) => out.records.push(r),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: Features,
    pub std: Features,
}

impl NormStats {
    pub fn fit(rows: &[Features]) -> Result<NormStats> {
        if rows.is_empty() {
            return Err(Error::config("cannot fit normalization statistics on an empty set"));
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; N_FEATURES];
        for r in rows {
            for k in 0..N_FEATURES {
                mean[k] += r[k];
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = [0.0; N_FEATURES];
        for r in rows {
            for k in 0..N_FEATURES {
                std[k] += (r[k] - mean[k]).powi(2);
            }
        }
        std.iter_mut().for_each(|s| *s = (*s / n).sqrt().max(STD_FLOOR));
        Ok(NormStats { mean, std })
    }

    pub fn fit_records(records: &[SensorRecord]) -> Result<NormStats> {
        let rows: Vec<Features> = records.iter().map(SensorRecord::features).collect();
        NormStats::fit(&rows)
    }

    pub fn normalize(&self, raw: &Features) -> Features {
        let mut out = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            out[k] = (raw[k] - self.mean[k]) / self.std[k];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Features,
    pub label: Label,
    pub source_mote: u32,
}

/// Motes fold onto simulated devices by `(mote - 1) mod n_devices`.
pub fn device_of_mote(mote_id: u32, n_devices: usize) -> usize {
    (mote_id.saturating_sub(1) as usize) % n_devices
}

/// Groups items that already belong to devices into per-UAV shards.
///
/// `association[d]` names the UAV serving device `d`; unassociated devices
/// contribute to no shard.
pub fn shards_from_devices<T: Clone>(
    by_device: &[Vec<T>],
    association: &[Option<usize>],
    n_uavs: usize,
) -> Result<Vec<Vec<T>>> {
    if association.len() != by_device.len() {
        return Err(Error::shape("association", by_device.len(), association.len()));
    }
    let mut shards = vec![Vec::new(); n_uavs];
    for (device, uav) in association.iter().enumerate() {
        if let Some(u) = *uav {
            if u >= n_uavs {
                return Err(Error::config(format!("device {device} associated to unknown UAV {u}")));
            }
            shards[u].extend_from_slice(&by_device[device]);
        }
    }
    Ok(shards)
}

pub fn group_by_device(samples: &[LabeledSample], n_devices: usize) -> Vec<Vec<LabeledSample>> {
    let mut groups = vec![Vec::new(); n_devices];
    for s in samples {
        groups[device_of_mote(s.source_mote, n_devices)].push(s.clone());
    }
    groups
}

/// Per-UAV shards of `samples` under the given device association.
pub fn partition(
    samples: &[LabeledSample],
    n_devices: usize,
    n_uavs: usize,
    association: &[Option<usize>],
) -> Result<Vec<Vec<LabeledSample>>> {
    if n_devices == 0 {
        return Err(Error::config("n_devices must be positive"));
    }
    shards_from_devices(&group_by_device(samples, n_devices), association, n_uavs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnomalyKind {
    Spike,
    Stuck,
    Drift,
}

impl FromStr for AnomalyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spike" => Ok(AnomalyKind::Spike),
            "stuck" => Ok(AnomalyKind::Stuck),
            "drift" => Ok(AnomalyKind::Drift),
            other => Err(Error::config(format!("unknown anomaly kind '{other}'"))),
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnomalyKind::Spike => "spike",
            AnomalyKind::Stuck => "stuck",
            AnomalyKind::Drift => "drift",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSpec {
    pub rate: f64,
    pub kinds: Vec<AnomalyKind>,
    /// Perturbation size in standard deviations (normalized units).
    pub magnitude_sigmas: f64,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        InjectionSpec {
            rate: 0.05,
            kinds: vec![AnomalyKind::Spike, AnomalyKind::Stuck, AnomalyKind::Drift],
            magnitude_sigmas: 3.0,
        }
    }
}

/// Labels each sample anomalous independently with probability `rate` and
/// perturbs one randomly chosen feature of it:
///
/// - spike: `± magnitude`
/// - stuck: the feature repeats the value latched just before its
///   [`STUCK_WINDOW`]-sample window
/// - drift: a ramp reaching `± magnitude` over a [`DRIFT_WINDOW`]-sample window
///
/// Input features are expected in normalized units, where one sigma is 1.
pub fn inject_anomalies(samples: &[LabeledSample], spec: &InjectionSpec, seed: u64) -> Result<Vec<LabeledSample>> {
    if !(0.0..=1.0).contains(&spec.rate) {
        return Err(Error::config(format!("anomaly rate {} outside [0, 1]", spec.rate)));
    }
    if spec.rate > 0.0 && spec.kinds.is_empty() {
        return Err(Error::config("anomaly injection needs at least one kind"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let mut sample = LabeledSample {
            features: s.features,
            label: Label::Normal,
            source_mote: s.source_mote,
        };
        if rng.gen_bool(spec.rate) {
            let kind = spec.kinds[rng.gen_range(0..spec.kinds.len())];
            let f = rng.gen_range(0..N_FEATURES);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let m = spec.magnitude_sigmas;
            match kind {
                AnomalyKind::Spike => sample.features[f] += sign * m,
                AnomalyKind::Stuck => {
                    let latch = (i - i % STUCK_WINDOW).saturating_sub(1);
                    sample.features[f] = samples[latch].features[f];
                }
                AnomalyKind::Drift => {
                    let ramp = ((i % DRIFT_WINDOW) + 1) as f64 / DRIFT_WINDOW as f64;
                    sample.features[f] += sign * m * ramp;
                }
            }
            sample.label = Label::Anomalous;
        }
        out.push(sample);
    }
    Ok(out)
}

pub fn write_labeled_csv<W: Write>(samples: &[LabeledSample], mut w: W) -> Result<()> {
    writeln!(w, "f0,f1,f2,f3,label,mote")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.features[0],
            s.features[1],
            s.features[2],
            s.features[3],
            u8::from(s.label.is_anomalous()),
            s.source_mote
        )?;
    }
    Ok(())
}

pub fn read_labeled_csv<R: BufRead>(r: R) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "f0,f1,f2,f3,label,mote" {
                return Err(Error::Format(format!("unexpected test-set header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("test-set line {}: '{line}'", i + 1));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(bad());
        }
        let mut features = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            features[k] = cols[k].trim().parse().map_err(|_| bad())?;
        }
        let label = match cols[4].trim() {
            "0" => Label::Normal,
            "1" => Label::Anomalous,
            _ => return Err(bad()),
        };
        out.push(LabeledSample {
            features,
            label,
            source_mote: cols[5].trim().parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Stand-in for the real log: every mote draws 4-D Gaussian readings around
/// its own offset from a common indoor baseline, spaced 31 s apart. Offsets
/// are wide relative to the in-mote spread, so motes differ about as much as
/// the lab's sunny and shaded corners do. Light is floored at 0 lux.
pub fn synthetic_records(n_motes: u32, per_mote: usize, seed: u64) -> Vec<SensorRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = [22.0, 38.0, 300.0, 2.65];
    let spread = [1.0, 2.5, 60.0, 0.03];
    let offset_scale = [3.75, 10.0, 300.0, 0.125];
    let unit = Normal::new(0.0, 1.0).unwrap();
    let date = NaiveDate::from_ymd_opt(2004, 2, 28).unwrap();
    let mut out = Vec::with_capacity(n_motes as usize * per_mote);
    for mote in 1..=n_motes {
        let offset: Vec<f64> = (0..N_FEATURES)
            .map(|k| offset_scale[k] * unit.sample(&mut rng))
            .collect();
        for j in 0..per_mote {
            let secs = (j as u32 * 31) % 86_400;
            let mut f = [0.0; N_FEATURES];
            for k in 0..N_FEATURES {
                f[k] = base[k] + offset[k] + spread[k] * unit.sample(&mut rng);
            }
            f[2] = f[2].max(0.0);
            // four-decimal fields like the real log
            for v in f.iter_mut() {
                *v = (*v * 1e4).round() / 1e4;
            }
            out.push(SensorRecord {
                date,
                time: NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).unwrap(),
                epoch: j as i64,
                mote_id: mote,
                temperature: f[0],
                humidity: f[1],
                light: f[2],
                voltage: f[3],
            });
        }
    }
    out
}

/// Train/validation/test material derived from one log.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub stats: NormStats,
    /// Normalized normal training rows, indexed by simulated device.
    pub train_by_device: Vec<Vec<Features>>,
    /// Normal rows held out of training for threshold calibration and the
    /// global validation loss.
    pub validation: Vec<Features>,
    /// Test rows with injected, labelled anomalies.
    pub test: Vec<LabeledSample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub n_devices: usize,
    pub train_fraction: f64,
    /// Share of each mote's training portion held out as validation.
    pub validation_fraction: f64,
    /// Cap on training rows per mote (most recent dropped first); 0 = no cap.
    pub max_train_per_mote: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_devices: 30,
            train_fraction: 0.8,
            validation_fraction: 0.125,
            max_train_per_mote: 0,
        }
    }
}

/// Chronological per-mote split, stats fitted on the training rows only,
/// anomalies injected only into the test rows.
pub fn prepare(
    records: &[SensorRecord],
    split: &SplitConfig,
    injection: &InjectionSpec,
    seed: u64,
) -> Result<PreparedData> {
    if split.n_devices == 0 {
        return Err(Error::config("n_devices must be positive"));
    }
    let mut by_mote: Vec<Vec<&SensorRecord>> = vec![Vec::new(); MAX_MOTE_ID as usize + 1];
    for r in records {
        by_mote[r.mote_id as usize].push(r);
    }
    let mut train_raw: Vec<(u32, Features)> = Vec::new();
    let mut val_raw: Vec<Features> = Vec::new();
    let mut test_raw: Vec<(u32, Features)> = Vec::new();
    for (mote, rows) in by_mote.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        rows.sort_by_key(|r| (r.date, r.time, r.epoch));
        let n = rows.len();
        let n_train = ((n as f64) * split.train_fraction).round() as usize;
        let n_val = ((n_train as f64) * split.validation_fraction).round() as usize;
        let n_fit = n_train - n_val;
        let fit_rows = &rows[..n_fit];
        let fit_rows = if split.max_train_per_mote > 0 && fit_rows.len() > split.max_train_per_mote {
            &fit_rows[..split.max_train_per_mote]
        } else {
            fit_rows
        };
        train_raw.extend(fit_rows.iter().map(|r| (mote as u32, r.features())));
        val_raw.extend(rows[n_fit..n_train].iter().map(|r| r.features()));
        test_raw.extend(rows[n_train..].iter().map(|r| (mote as u32, r.features())));
    }
    let train_rows: Vec<Features> = train_raw.iter().map(|(_, f)| *f).collect();
    let stats = NormStats::fit(&train_rows)?;

    let mut train_by_device = vec![Vec::new(); split.n_devices];
    for (mote, f) in &train_raw {
        train_by_device[device_of_mote(*mote, split.n_devices)].push(stats.normalize(f));
    }
    let validation = val_raw.iter().map(|f| stats.normalize(f)).collect();
    let clean_test: Vec<LabeledSample> = test_raw
        .iter()
        .map(|(mote, f)| LabeledSample {
            features: stats.normalize(f),
            label: Label::Normal,
            source_mote: *mote,
        })
        .collect();
    let test = inject_anomalies(&clean_test, injection, seed)?;
    Ok(PreparedData {
        stats,
        train_by_device,
        validation,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LINE: &str = "2004-02-28 00:59:16.02785 3 1 19.3024 38.4629 45.08 2.68742";

    fn sample(mote: u32, v: f64) -> LabeledSample {
        LabeledSample {
            features: [v; 4],
            label: Label::Normal,
            source_mote: mote,
        }
    }

    #[test]
    fn parses_reference_line() {
        let log = parse_records(LINE.as_bytes()).unwrap();
        assert_eq!(log.skipped, 0);
        let r = &log.records[0];
        assert_eq!(r.mote_id, 1);
        assert_eq!(r.epoch, 3);
        assert_eq!(r.features(), [19.3024, 38.4629, 45.08, 2.68742]);
        assert_eq!(r.date, NaiveDate::from_ymd_opt(2004, 2, 28).unwrap());
    }

    #[test]
    fn empty_and_malformed() {
        let log = parse_records("".as_bytes()).unwrap();
        assert!(log.records.is_empty());
        assert_eq!(log.skipped, 0);
        let text = format!("{LINE}\n2004-02-28 00:59:16.02785 3 1 19.3 38.4\n{LINE}\n");
        let log = parse_records(text.as_bytes()).unwrap();
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.skipped, 1);
        let log = parse_records("2004-02-28 01:00:00.1 5 1 nan 1 1 1\n".as_bytes()).unwrap();
        assert_eq!(log.skipped, 1);
    }

    #[test]
    fn reserialization_preserves_features() {
        let r = SensorRecord::parse_line(LINE).unwrap();
        let printed = r.to_string();
        let fields: Vec<&str> = printed.split_whitespace().collect();
        assert_eq!(&fields[4..], &["19.3024", "38.4629", "45.08", "2.68742"]);
        assert_eq!(SensorRecord::parse_line(&printed).unwrap(), r);
    }

    #[test]
    fn normalization_properties() {
        assert!(NormStats::fit(&[]).is_err());
        let rows = [[1.0, 5.0, 2.0, 3.0], [3.0, 5.0, 4.0, 3.5], [8.0, 5.0, -1.0, 2.0]];
        let st = NormStats::fit(&rows).unwrap();
        assert_eq!(st.std[1], STD_FLOOR);
        let normed: Vec<Features> = rows.iter().map(|r| st.normalize(r)).collect();
        for k in 0..4 {
            let m: f64 = normed.iter().map(|r| r[k]).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-9);
        }
        assert!(normed.iter().all(|r| r[1] == 0.0));
        let single = NormStats::fit(&rows[..1]).unwrap();
        assert_eq!(single.normalize(&rows[0]), [0.0; 4]);
    }

    #[test]
    fn partition_rules() {
        assert_eq!(device_of_mote(31, 30), 0);
        assert_eq!(device_of_mote(1, 30), 0);
        assert_eq!(device_of_mote(54, 30), 23);
        let samples: Vec<LabeledSample> = (1..=54).map(|m| sample(m, m as f64)).collect();
        let all_zero = vec![Some(0); 30];
        let shards = partition(&samples, 30, 5, &all_zero).unwrap();
        assert_eq!(shards[0].len(), 54);
        assert!(shards[1..].iter().all(Vec::is_empty));
        let bad = vec![Some(7); 30];
        assert!(matches!(partition(&samples, 30, 5, &bad), Err(Error::Config(_))));
        let mut partial = vec![None; 30];
        partial[0] = Some(2);
        let shards = partition(&samples, 30, 5, &partial).unwrap();
        let motes: Vec<u32> = shards[2].iter().map(|s| s.source_mote).collect();
        assert_eq!(motes, vec![1, 31]);
    }

    #[test]
    fn injection_edge_cases() {
        let clean: Vec<LabeledSample> = (0..200).map(|i| sample(1, i as f64 * 0.01)).collect();
        let none = inject_anomalies(&clean, &InjectionSpec { rate: 0.0, ..Default::default() }, 1).unwrap();
        assert_eq!(none, clean);
        let all = inject_anomalies(
            &clean,
            &InjectionSpec {
                rate: 1.0,
                kinds: vec![AnomalyKind::Spike],
                magnitude_sigmas: 3.0,
            },
            1,
        )
        .unwrap();
        assert!(all.iter().all(|s| s.label == Label::Anomalous));
        for (a, c) in all.iter().zip(&clean) {
            let moved: Vec<f64> = (0..4).map(|k| (a.features[k] - c.features[k]).abs()).collect();
            assert_eq!(moved.iter().filter(|&&d| (d - 3.0).abs() < 1e-12).count(), 1);
        }
        assert!(inject_anomalies(&clean, &InjectionSpec { rate: 1.5, ..Default::default() }, 0).is_err());
    }

    #[test]
    fn injection_count_within_binomial_bounds() {
        let clean: Vec<LabeledSample> = (0..10_000).map(|i| sample(1 + i % 54, 0.0)).collect();
        let out = inject_anomalies(&clean, &InjectionSpec::default(), 42).unwrap();
        let k = out.iter().filter(|s| s.label.is_anomalous()).count() as f64;
        // Binomial(10000, 0.05): mean 500, sd sqrt(475); 99.9% two-sided z = 3.2905
        let sd = (10_000.0f64 * 0.05 * 0.95).sqrt();
        assert!((k - 500.0).abs() <= 3.2905 * sd, "{k}");
    }

    #[test]
    fn csv_round_trip() {
        let clean: Vec<LabeledSample> = (0..20).map(|i| sample(i + 1, i as f64 * 0.37)).collect();
        let out = inject_anomalies(&clean, &InjectionSpec { rate: 0.5, ..Default::default() }, 3).unwrap();
        let mut buf = Vec::new();
        write_labeled_csv(&out, &mut buf).unwrap();
        assert!(buf.starts_with(b"f0,f1,f2,f3,label,mote\n"));
        assert_eq!(read_labeled_csv(&buf[..]).unwrap(), out);
    }

    #[test]
    fn prepare_splits_without_leakage() {
        let recs = synthetic_records(54, 100, 7);
        let data = prepare(&recs, &SplitConfig::default(), &InjectionSpec::default(), 7).unwrap();
        let n_train: usize = data.train_by_device.iter().map(Vec::len).sum();
        assert_eq!(n_train, 54 * 70);
        assert_eq!(data.validation.len(), 54 * 10);
        assert_eq!(data.test.len(), 54 * 20);
        let rows: Vec<Features> = data.train_by_device.iter().flatten().copied().collect();
        for k in 0..4 {
            let m = rows.iter().map(|r| r[k]).sum::<f64>() / rows.len() as f64;
            assert!(m.abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn partition_is_a_partition(assoc in prop::collection::vec(0usize..5, 30), n in 1usize..300) {
            let samples: Vec<LabeledSample> = (0..n).map(|i| sample(1 + (i as u32 * 7) % 54, i as f64)).collect();
            let association: Vec<Option<usize>> = assoc.into_iter().map(Some).collect();
            let shards = partition(&samples, 30, 5, &association).unwrap();
            let mut seen: Vec<f64> = shards.iter().flatten().map(|s| s.features[0]).collect();
            prop_assert_eq!(seen.len(), n);
            seen.sort_by(f64::total_cmp);
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
        }

        #[test]
        fn injection_is_reproducible(seed in any::<u64>()) {
            let clean: Vec<LabeledSample> = (0..64).map(|i| sample(1, i as f64)).collect();
            let spec = InjectionSpec { rate: 0.3, ..Default::default() };
            prop_assert_eq!(inject_anomalies(&clean, &spec, seed).unwrap(), inject_anomalies(&clean, &spec, seed).unwrap());
        }
    }
}
