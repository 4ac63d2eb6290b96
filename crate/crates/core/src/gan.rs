//! Per-UAV GAN: local adversarial training and anomaly scoring.
//!
//! The discriminator minimizes `-mean[log D(x) + log(1 - D(G(z)))]`; the
//! generator minimizes the non-saturating `-mean[log D(G(z))]`. After training,
//! a sample's score mixes a latent-search reconstruction error with the
//! discriminator's `-log D(x)`.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::{
    clip_global_norm, mlp_backward_trace, mlp_forward, mlp_forward_trace, mlp_init, Activation, AdamConfig,
    AdamState, MlpSpec, ParamVector, GRAD_CLIP_NORM,
};

const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct GanHyper {
    pub data_dim: usize,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    /// Discriminator steps per generator step (N).
    pub disc_rounds_per_gen: usize,
    /// Local rounds between uploads (K).
    pub local_rounds_per_upload: usize,
    pub gen_lr: f64,
    pub disc_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for GanHyper {
    fn default() -> Self {
        GanHyper {
            data_dim: 4,
            latent_dim: 8,
            hidden: vec![32, 32],
            batch_size: 64,
            disc_rounds_per_gen: 1,
            local_rounds_per_upload: 30,
            gen_lr: 2e-4,
            disc_lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
        }
    }
}

impl GanHyper {
    pub fn validate(&self) -> Result<()> {
        if self.disc_rounds_per_gen == 0 {
            return Err(Error::config("gan.N (discriminator rounds per generator round) must be >= 1"));
        }
        if self.local_rounds_per_upload == 0 {
            return Err(Error::config("gan.K (local rounds per upload) must be >= 1"));
        }
        if self.batch_size == 0 || self.latent_dim == 0 || self.data_dim == 0 {
            return Err(Error::config("gan batch, latent and data sizes must be positive"));
        }
        self.adam(self.gen_lr).validate()?;
        self.adam(self.disc_lr).validate()
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig {
            lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: 1e-8,
        }
    }

    pub fn generator_spec(&self) -> Result<MlpSpec> {
        MlpSpec::dense(self.latent_dim, &self.hidden, self.data_dim, Activation::Tanh, Activation::Linear)
    }

    pub fn discriminator_spec(&self) -> Result<MlpSpec> {
        MlpSpec::dense(self.data_dim, &self.hidden, 1, Activation::Tanh, Activation::Sigmoid)
    }
}

/// Generator and discriminator parameters, enough for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct GanNets {
    pub gen_spec: MlpSpec,
    pub gen: ParamVector,
    pub disc_spec: MlpSpec,
    pub disc: ParamVector,
}

impl GanNets {
    pub fn latent_dim(&self) -> usize {
        self.gen_spec.input_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.disc_spec.input_dim()
    }

    pub fn generate(&self, z: &[f64]) -> Vec<f64> {
        mlp_forward(&self.gen_spec, &self.gen, z).expect("latent has generator input width")
    }

    pub fn discriminate(&self, x: &[f64]) -> f64 {
        mlp_forward(&self.disc_spec, &self.disc, x).expect("sample has discriminator input width")[0]
    }
}

/// A UAV's trainable GAN: networks plus their optimizer states.
#[derive(Debug, Clone, PartialEq)]
pub struct GanModels {
    pub nets: GanNets,
    pub gen_adam: AdamState,
    pub disc_adam: AdamState,
}

impl GanModels {
    pub fn new(hyper: &GanHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let gen_spec = hyper.generator_spec()?;
        let disc_spec = hyper.discriminator_spec()?;
        let gen = mlp_init(&gen_spec, seed);
        let disc = mlp_init(&disc_spec, seed.wrapping_add(0x9E37_79B9_7F4A_7C15));
        Ok(GanModels {
            gen_adam: AdamState::new(gen.len(), hyper.adam(hyper.gen_lr))?,
            disc_adam: AdamState::new(disc.len(), hyper.adam(hyper.disc_lr))?,
            nets: GanNets {
                gen_spec,
                gen,
                disc_spec,
                disc,
            },
        })
    }

    /// Replaces both networks' parameters, keeping optimizer state.
    pub fn load_params(&mut self, gen: &ParamVector, disc: &ParamVector) -> Result<()> {
        if gen.len() != self.nets.gen.len() {
            return Err(Error::shape("generator params", self.nets.gen.len(), gen.len()));
        }
        if disc.len() != self.nets.disc.len() {
            return Err(Error::shape("discriminator params", self.nets.disc.len(), disc.len()));
        }
        self.nets.gen = gen.clone();
        self.nets.disc = disc.clone();
        Ok(())
    }
}

pub fn sample_noise(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Discriminator BCE on a fixed real batch and fixed noise, with its gradient
/// over discriminator parameters.
pub fn disc_loss_and_grad<R: AsRef<[f64]>>(nets: &GanNets, real: &[R], noise: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; nets.disc.len()];
    let mut loss = 0.0;
    let nr = real.len().max(1) as f64;
    let nf = noise.len().max(1) as f64;
    for x in real {
        let tr = mlp_forward_trace(&nets.disc_spec, &nets.disc, x.as_ref())?;
        let d = clamp_prob(tr.output()[0]);
        loss -= d.ln() / nr;
        mlp_backward_trace(&nets.disc_spec, &nets.disc, &tr, &[-1.0 / (nr * d)], &mut grad)?;
    }
    for z in noise {
        let fake = nets.generate(z);
        let tr = mlp_forward_trace(&nets.disc_spec, &nets.disc, &fake)?;
        let d = clamp_prob(tr.output()[0]);
        loss -= (1.0 - d).ln() / nf;
        mlp_backward_trace(&nets.disc_spec, &nets.disc, &tr, &[1.0 / (nf * (1.0 - d))], &mut grad)?;
    }
    Ok((loss, grad))
}

pub fn disc_loss<R: AsRef<[f64]>>(nets: &GanNets, real: &[R], noise: &[Vec<f64>]) -> Result<f64> {
    let nr = real.len().max(1) as f64;
    let nf = noise.len().max(1) as f64;
    let mut loss = 0.0;
    for x in real {
        loss -= clamp_prob(nets.discriminate(x.as_ref())).ln() / nr;
    }
    for z in noise {
        loss -= (1.0 - clamp_prob(nets.discriminate(&nets.generate(z)))).ln() / nf;
    }
    Ok(loss)
}

/// Non-saturating generator loss and its gradient over generator parameters.
pub fn gen_loss_and_grad(nets: &GanNets, noise: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; nets.gen.len()];
    let mut scratch = vec![0.0; nets.disc.len()];
    let n = noise.len().max(1) as f64;
    let mut loss = 0.0;
    for z in noise {
        let gt = mlp_forward_trace(&nets.gen_spec, &nets.gen, z)?;
        let dt = mlp_forward_trace(&nets.disc_spec, &nets.disc, gt.output())?;
        let d = clamp_prob(dt.output()[0]);
        loss -= d.ln() / n;
        let dx = mlp_backward_trace(&nets.disc_spec, &nets.disc, &dt, &[-1.0 / (n * d)], &mut scratch)?;
        mlp_backward_trace(&nets.gen_spec, &nets.gen, &gt, &dx, &mut grad)?;
    }
    Ok((loss, grad))
}

pub fn gen_loss(nets: &GanNets, noise: &[Vec<f64>]) -> f64 {
    let n = noise.len().max(1) as f64;
    noise
        .iter()
        .map(|z| -clamp_prob(nets.discriminate(&nets.generate(z))).ln() / n)
        .sum()
}

/// One discriminator Adam step on the given batch and noise. Returns the loss
/// before the step.
pub fn disc_step_with<R: AsRef<[f64]>>(models: &mut GanModels, real: &[R], noise: &[Vec<f64>]) -> Result<f64> {
    let (loss, mut grad) = disc_loss_and_grad(&models.nets, real, noise)?;
    clip_global_norm(&mut grad, GRAD_CLIP_NORM);
    models.disc_adam.step(&mut models.nets.disc, &grad)?;
    Ok(loss)
}

/// Samples as much noise as there are real rows, then [`disc_step_with`].
/// `None` when the real batch is empty.
pub fn disc_step<R: AsRef<[f64]>>(models: &mut GanModels, real: &[R], rng: &mut impl Rng) -> Result<Option<f64>> {
    if real.is_empty() {
        log::warn!("discriminator step skipped: empty real batch");
        return Ok(None);
    }
    let noise = sample_noise(rng, real.len(), models.nets.latent_dim());
    disc_step_with(models, real, &noise).map(Some)
}

pub fn gen_step_with(models: &mut GanModels, noise: &[Vec<f64>]) -> Result<f64> {
    let (loss, mut grad) = gen_loss_and_grad(&models.nets, noise)?;
    clip_global_norm(&mut grad, GRAD_CLIP_NORM);
    models.gen_adam.step(&mut models.nets.gen, &grad)?;
    Ok(loss)
}

pub fn gen_step(models: &mut GanModels, batch_size: usize, rng: &mut impl Rng) -> Result<f64> {
    let noise = sample_noise(rng, batch_size, models.nets.latent_dim());
    gen_step_with(models, &noise)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundLoss {
    /// Mean discriminator loss over the round's N steps.
    pub disc: f64,
    pub gen: f64,
}

/// K local rounds, each N discriminator steps then one generator step, with
/// real mini-batches drawn uniformly (with replacement) from `shard`.
pub fn local_train<R: AsRef<[f64]>>(
    models: &mut GanModels,
    shard: &[R],
    hyper: &GanHyper,
    rounds: usize,
    rng: &mut impl Rng,
) -> Result<Vec<RoundLoss>> {
    if shard.is_empty() {
        log::warn!("local training skipped: empty shard");
        return Ok(Vec::new());
    }
    let mut losses = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let mut disc_total = 0.0;
        for _ in 0..hyper.disc_rounds_per_gen {
            let batch: Vec<&[f64]> = (0..hyper.batch_size)
                .map(|_| shard[rng.gen_range(0..shard.len())].as_ref())
                .collect();
            disc_total += disc_step(models, &batch, rng)?.unwrap_or(0.0);
        }
        let gen = gen_step(models, hyper.batch_size, rng)?;
        losses.push(RoundLoss {
            disc: disc_total / hyper.disc_rounds_per_gen as f64,
            gen,
        });
    }
    Ok(losses)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScorerConfig {
    /// Weight of the reconstruction term; `1 - weight_g` goes to `-log D(x)`.
    pub weight_g: f64,
    pub z_search_steps: usize,
    pub z_search_lr: f64,
    pub threshold: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            weight_g: 0.5,
            z_search_steps: 50,
            z_search_lr: 0.1,
            threshold: f64::INFINITY,
        }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight_g) {
            return Err(Error::config(format!("scorer weight_g {} outside [0, 1]", self.weight_g)));
        }
        if !(self.z_search_lr >= 0.0) {
            return Err(Error::config("scorer z_search_lr must be non-negative"));
        }
        Ok(())
    }
}

fn mean_abs_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64
}

/// Smallest per-feature L1 reconstruction error `|G(z) - x|_1 / d` seen along
/// a fixed-step (sub)gradient descent on `z`, starting from the origin.
pub fn reconstruction_error(nets: &GanNets, x: &[f64], steps: usize, lr: f64) -> Result<f64> {
    if x.len() != nets.data_dim() {
        return Err(Error::shape("score input", nets.data_dim(), x.len()));
    }
    let d = x.len() as f64;
    let mut z = vec![0.0; nets.latent_dim()];
    let mut scratch = vec![0.0; nets.gen.len()];
    let mut best = f64::INFINITY;
    for step in 0..=steps {
        let tr = mlp_forward_trace(&nets.gen_spec, &nets.gen, &z)?;
        let err = mean_abs_error(tr.output(), x);
        best = best.min(err);
        if step == steps || err == 0.0 {
            break;
        }
        let upstream: Vec<f64> = tr
            .output()
            .iter()
            .zip(x)
            .map(|(g, xi)| (g - xi).signum() / d)
            .collect();
        let dz = mlp_backward_trace(&nets.gen_spec, &nets.gen, &tr, &upstream, &mut scratch)?;
        for (zi, gi) in z.iter_mut().zip(&dz) {
            *zi -= lr * gi;
        }
    }
    Ok(best)
}

/// `weight_g * R(x) + (1 - weight_g) * (-log D(x))`; higher is more anomalous.
pub fn anomaly_score(x: &[f64], nets: &GanNets, cfg: &ScorerConfig) -> Result<f64> {
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: "anomaly score input",
            index,
        });
    }
    let lambda = cfg.weight_g;
    let recon = if lambda > 0.0 {
        reconstruction_error(nets, x, cfg.z_search_steps, cfg.z_search_lr)?
    } else {
        0.0
    };
    let disc = if lambda < 1.0 {
        (-nets.discriminate(x).max(PROB_CLAMP).ln()).max(0.0)
    } else {
        0.0
    };
    Ok(if lambda == 1.0 {
        recon
    } else if lambda == 0.0 {
        disc
    } else {
        lambda * recon + (1.0 - lambda) * disc
    })
}

/// Nearest-rank empirical quantile: the `ceil(q * n)`-th smallest score.
pub fn calibrate_threshold(scores: &[f64], q: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::config("threshold calibration needs at least one score"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::config(format!("quantile {q} outside (0, 1]")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Anomalous iff strictly above the threshold.
pub fn classify(score: f64, threshold: f64) -> bool {
    score > threshold
}

/// Writes `<stem>.gen.bin`, `<stem>.disc.bin` and a `<stem>.sidecar` text file.
pub fn save_checkpoint(dir: &Path, stem: &str, nets: &GanNets, scorer: &ScorerConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.gen.bin")), nets.gen.to_blob())?;
    fs::write(dir.join(format!("{stem}.disc.bin")), nets.disc.to_blob())?;
    let mut side = String::new();
    for (name, spec) in [("generator", &nets.gen_spec), ("discriminator", &nets.disc_spec)] {
        for line in spec.to_sidecar().lines() {
            side.push_str(&format!("{name}.{line}\n"));
        }
    }
    side.push_str(&format!("scorer.weight_g = {}\n", scorer.weight_g));
    side.push_str(&format!("scorer.z_search_steps = {}\n", scorer.z_search_steps));
    side.push_str(&format!("scorer.z_search_lr = {}\n", scorer.z_search_lr));
    side.push_str(&format!("scorer.threshold = {}\n", scorer.threshold));
    fs::write(dir.join(format!("{stem}.sidecar")), side)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path, stem: &str) -> Result<(GanNets, ScorerConfig)> {
    let side = fs::read_to_string(dir.join(format!("{stem}.sidecar")))?;
    let mut fields = std::collections::BTreeMap::new();
    for line in side.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("sidecar line '{line}'")))?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::Format(format!("sidecar missing '{k}'")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("sidecar '{k}': {e}")))
    };
    let gen_spec = MlpSpec::from_sidecar_fields(get("generator.layers")?, get("generator.activations")?)?;
    let disc_spec = MlpSpec::from_sidecar_fields(get("discriminator.layers")?, get("discriminator.activations")?)?;
    let gen = ParamVector::from_blob(&fs::read(dir.join(format!("{stem}.gen.bin")))?)?;
    let disc = ParamVector::from_blob(&fs::read(dir.join(format!("{stem}.disc.bin")))?)?;
    if gen.len() != gen_spec.param_count() {
        return Err(Error::shape("generator checkpoint", gen_spec.param_count(), gen.len()));
    }
    if disc.len() != disc_spec.param_count() {
        return Err(Error::shape("discriminator checkpoint", disc_spec.param_count(), disc.len()));
    }
    let scorer = ScorerConfig {
        weight_g: num("scorer.weight_g")?,
        z_search_steps: num("scorer.z_search_steps")? as usize,
        z_search_lr: num("scorer.z_search_lr")?,
        threshold: num("scorer.threshold")?,
    };
    Ok((
        GanNets {
            gen_spec,
            gen,
            disc_spec,
            disc,
        },
        scorer,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn small() -> GanHyper {
        GanHyper {
            hidden: vec![8],
            batch_size: 16,
            local_rounds_per_upload: 5,
            ..Default::default()
        }
    }

    fn zero_disc_head(m: &mut GanModels) {
        m.nets.disc.iter_mut().for_each(|p| *p = 0.0);
    }

    fn batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 4]> {
        (0..n)
            .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.5, -0.5])
            .collect()
    }

    #[test]
    fn constant_half_discriminator_losses() {
        let mut m = GanModels::new(&small(), 1).unwrap();
        zero_disc_head(&mut m);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let real = batch(&mut rng, 16);
        let noise = sample_noise(&mut rng, 16, 8);
        assert!((disc_loss(&m.nets, &real, &noise).unwrap() - 2.0 * LN_2).abs() < 1e-12);
        assert!((gen_loss(&m.nets, &noise) - LN_2).abs() < 1e-12);
        let mut m2 = m.clone();
        assert!((disc_step_with(&mut m2, &real, &noise).unwrap() - 2.0 * LN_2).abs() < 1e-12);
        assert!((gen_step_with(&mut m, &noise).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn steps_isolate_the_other_network() {
        let mut m = GanModels::new(&small(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let real = batch(&mut rng, 16);
        let gen_before = m.nets.gen.clone();
        disc_step(&mut m, &real, &mut rng).unwrap();
        assert_eq!(m.nets.gen, gen_before);
        let disc_before = m.nets.disc.clone();
        gen_step(&mut m, 16, &mut rng).unwrap();
        assert_eq!(m.nets.disc, disc_before);
    }

    #[test]
    fn steps_decrease_loss_on_frozen_batch() {
        let mut hyper = small();
        hyper.disc_lr = 1e-3;
        hyper.gen_lr = 1e-3;
        let mut m = GanModels::new(&hyper, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let real = batch(&mut rng, 32);
        let noise = sample_noise(&mut rng, 32, 8);
        let before = disc_loss(&m.nets, &real, &noise).unwrap();
        disc_step_with(&mut m, &real, &noise).unwrap();
        let after = disc_loss(&m.nets, &real, &noise).unwrap();
        assert!(after < before, "{after} !< {before}");

        let before = gen_loss(&m.nets, &noise);
        gen_step_with(&mut m, &noise).unwrap();
        let after = gen_loss(&m.nets, &noise);
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn disc_gradient_matches_finite_differences() {
        let m = GanModels::new(&small(), 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let real = batch(&mut rng, 4);
        let noise = sample_noise(&mut rng, 4, 8);
        let (_, grad) = disc_loss_and_grad(&m.nets, &real, &noise).unwrap();
        let (_, ggrad) = gen_loss_and_grad(&m.nets, &noise).unwrap();
        let h = 1e-6;
        for i in (0..grad.len()).step_by(7) {
            let mut nets = m.nets.clone();
            nets.disc[i] += h;
            let up = disc_loss(&nets, &real, &noise).unwrap();
            nets.disc[i] -= 2.0 * h;
            let down = disc_loss(&nets, &real, &noise).unwrap();
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6 * fd.abs().max(1.0), "{i}: {fd} vs {}", grad[i]);
        }
        for i in (0..ggrad.len()).step_by(11) {
            let mut nets = m.nets.clone();
            nets.gen[i] += h;
            let up = gen_loss(&nets, &noise);
            nets.gen[i] -= 2.0 * h;
            let down = gen_loss(&nets, &noise);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - ggrad[i]).abs() < 1e-6 * fd.abs().max(1.0), "{i}: {fd} vs {}", ggrad[i]);
        }
    }

    #[test]
    fn local_train_counts_and_determinism() {
        let hyper = GanHyper {
            local_rounds_per_upload: 30,
            ..small()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let shard = batch(&mut rng, 50);
        let m0 = GanModels::new(&hyper, 10).unwrap();
        let mut a = m0.clone();
        let la = local_train(&mut a, &shard, &hyper, 30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(la.len(), 30);
        assert_eq!(a.disc_adam.step_count(), 30);
        assert_eq!(a.gen_adam.step_count(), 30);
        let mut b = m0.clone();
        let lb = local_train(&mut b, &shard, &hyper, 30, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);

        let mut c = m0.clone();
        assert!(local_train(&mut c, &shard, &hyper, 0, &mut rng).unwrap().is_empty());
        assert_eq!(c, m0);
        let empty: Vec<[f64; 4]> = Vec::new();
        assert!(local_train(&mut c, &empty, &hyper, 30, &mut rng).unwrap().is_empty());
        assert_eq!(c, m0);

        let n2 = GanHyper {
            disc_rounds_per_gen: 2,
            ..hyper
        };
        let mut d = m0.clone();
        local_train(&mut d, &shard, &n2, 3, &mut rng).unwrap();
        assert_eq!(d.disc_adam.step_count(), 6);
        assert_eq!(d.gen_adam.step_count(), 3);
    }

    #[test]
    fn score_degenerate_weights() {
        let m = GanModels::new(&small(), 11).unwrap();
        let x = [0.3, -0.2, 1.0, 0.1];
        let cfg = ScorerConfig {
            weight_g: 1.0,
            ..Default::default()
        };
        let r = reconstruction_error(&m.nets, &x, cfg.z_search_steps, cfg.z_search_lr).unwrap();
        assert_eq!(anomaly_score(&x, &m.nets, &cfg).unwrap(), r);

        // D(x) = 1 via a large positive output bias
        let mut nets = m.nets.clone();
        nets.disc.iter_mut().for_each(|p| *p = 0.0);
        let last = nets.disc.len() - 1;
        nets.disc[last] = 1000.0;
        let cfg0 = ScorerConfig {
            weight_g: 0.0,
            ..Default::default()
        };
        assert_eq!(anomaly_score(&x, &nets, &cfg0).unwrap(), 0.0);

        // G(z) = 0 with zero parameters and linear head, x = 0 -> R = 0
        nets.gen.iter_mut().for_each(|p| *p = 0.0);
        assert_eq!(reconstruction_error(&nets, &[0.0; 4], 50, 0.1).unwrap(), 0.0);

        assert!(matches!(
            anomaly_score(&[f64::NAN, 0.0, 0.0, 0.0], &m.nets, &cfg),
            Err(Error::Numeric { index: 0, .. })
        ));
    }

    #[test]
    fn score_monotone_in_reconstruction() {
        let m = GanModels::new(&small(), 12).unwrap();
        let cfg = ScorerConfig::default();
        let near = anomaly_score(&[0.0; 4], &m.nets, &cfg).unwrap();
        assert!(near >= 0.0);
        let r_near = reconstruction_error(&m.nets, &[0.0; 4], 50, 0.1).unwrap();
        let r_far = reconstruction_error(&m.nets, &[40.0; 4], 50, 0.1).unwrap();
        assert!(r_far > r_near);
    }

    #[test]
    fn threshold_rules() {
        let scores: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(calibrate_threshold(&scores, 0.95).unwrap(), 95.0);
        assert_eq!(calibrate_threshold(&scores, 1.0).unwrap(), 100.0);
        assert!(!classify(95.0, 95.0));
        assert!(classify(95.0001, 95.0));
        assert!(calibrate_threshold(&[], 0.5).is_err());
        assert!(calibrate_threshold(&scores, 0.0).is_err());
        let theta = calibrate_threshold(&scores, 0.999_999).unwrap();
        assert_eq!(scores.iter().filter(|&&s| classify(s, theta)).count(), 0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = GanModels::new(&small(), 13).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = ScorerConfig {
            threshold: 1.25,
            ..Default::default()
        };
        save_checkpoint(dir.path(), "global", &m.nets, &cfg).unwrap();
        let (nets, scorer) = load_checkpoint(dir.path(), "global").unwrap();
        assert_eq!(nets, m.nets);
        assert_eq!(scorer, cfg);
        assert!(matches!(load_checkpoint(dir.path(), "missing"), Err(Error::Io(_))));
    }
}
