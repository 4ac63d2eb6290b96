//! Central finite-difference checks of [`mlp_backward`].
//!
//! The objective is `output . upstream` for a random upstream vector; every
//! parameter and input component is perturbed by `±h` and compared against the
//! analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{mlp_backward, mlp_forward, Activation, MlpSpec};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error so near-zero components do not blow up.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub spec: MlpSpec,
    pub max_rel_error: f64,
    pub components: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn objective(spec: &MlpSpec, params: &[f64], input: &[f64], upstream: &[f64]) -> f64 {
    mlp_forward(spec, params, input)
        .expect("shapes fixed by caller")
        .iter()
        .zip(upstream)
        .map(|(y, g)| y * g)
        .sum()
}

/// Max relative error between analytic and central-difference gradients.
pub fn check_gradients(spec: &MlpSpec, params: &[f64], input: &[f64], upstream: &[f64]) -> GradCheckReport {
    let (dp, dx) = mlp_backward(spec, params, input, upstream).expect("shapes fixed by caller");
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + FD_STEP;
        let up = objective(spec, &p, input, upstream);
        p[i] = orig - FD_STEP;
        let down = objective(spec, &p, input, upstream);
        p[i] = orig;
        worst = worst.max(relative_error(dp[i], (up - down) / (2.0 * FD_STEP)));
    }
    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + FD_STEP;
        let up = objective(spec, params, &x, upstream);
        x[i] = orig - FD_STEP;
        let down = objective(spec, params, &x, upstream);
        x[i] = orig;
        worst = worst.max(relative_error(dx[i], (up - down) / (2.0 * FD_STEP)));
    }
    GradCheckReport {
        spec: spec.clone(),
        max_rel_error: worst,
        components: params.len() + input.len(),
    }
}

/// Random architecture drawn from the smooth activations (linear, tanh, sigmoid).
pub fn random_smooth_case(rng: &mut impl Rng) -> (MlpSpec, Vec<f64>, Vec<f64>, Vec<f64>) {
    let acts = [Activation::Linear, Activation::Tanh, Activation::Sigmoid];
    let depth = rng.gen_range(2..=4);
    let sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=6)).collect();
    let a = (0..depth - 1).map(|_| acts[rng.gen_range(0..acts.len())]).collect();
    let spec = MlpSpec::new(sizes, a).expect("generated spec is valid");
    let params = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let input = (0..spec.input_dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let upstream = (0..spec.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (spec, params, input, upstream)
}

/// Relu case whose input is nudged until no pre-activation sits within
/// `margin` of the kink, so central differences stay on one side.
pub fn random_relu_case(rng: &mut impl Rng, margin: f64) -> (MlpSpec, Vec<f64>, Vec<f64>, Vec<f64>) {
    loop {
        let depth = rng.gen_range(2..=4);
        let sizes: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=6)).collect();
        let spec = MlpSpec::new(sizes, vec![Activation::Relu; depth - 1]).unwrap();
        let params: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upstream = (0..spec.output_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..20 {
            let input: Vec<f64> = (0..spec.input_dim()).map(|_| rng.gen_range(-1.5..1.5)).collect();
            if min_abs_preactivation(&spec, &params, &input) > margin {
                return (spec, params, input, upstream);
            }
        }
    }
}

fn min_abs_preactivation(spec: &MlpSpec, params: &[f64], input: &[f64]) -> f64 {
    let mut min = f64::INFINITY;
    let sizes = spec.layer_sizes();
    let mut x = input.to_vec();
    let mut off = 0;
    for li in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[li], sizes[li + 1]);
        let mut next = Vec::with_capacity(n_out);
        for o in 0..n_out {
            let z: f64 = params[off + n_in * n_out + o]
                + (0..n_in).map(|j| params[off + o * n_in + j] * x[j]).sum::<f64>();
            min = min.min(z.abs());
            next.push(z.max(0.0));
        }
        off += n_in * n_out + n_out;
        x = next;
    }
    min
}

/// Runs `n` random smooth-activation checks; returns the reports.
pub fn gradcheck_suite(n: usize, seed: u64) -> Vec<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let (spec, p, x, g) = random_smooth_case(&mut rng);
            check_gradients(&spec, &p, &x, &g)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_3_5_2() {
        let spec = MlpSpec::new(vec![3, 5, 2], vec![Activation::Tanh, Activation::Tanh]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p: Vec<f64> = (0..spec.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rep = check_gradients(&spec, &p, &[0.3, -0.7, 1.1], &[1.0, -0.5]);
        assert!(rep.max_rel_error < 1e-4, "{}", rep.max_rel_error);
    }

    #[test]
    fn relu_off_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let (spec, p, x, g) = random_relu_case(&mut rng, 1e-3);
            let rep = check_gradients(&spec, &p, &x, &g);
            assert!(rep.max_rel_error < 1e-3, "{:?}", rep);
        }
    }

    #[test]
    fn smooth_suite() {
        for rep in gradcheck_suite(30, 1) {
            assert!(rep.max_rel_error < 1e-4, "{:?}", rep);
        }
    }
}
