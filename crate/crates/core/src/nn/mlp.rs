//! Dense feed-forward networks over flat parameter vectors.
//!
//! An [`MlpSpec`] carries only the architecture. Parameters live in a
//! [`ParamVector`] so that averaging and soft updates can treat every network
//! as a plain array.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Architecture of a dense network: layer widths plus one activation per
/// non-input layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::config("an MLP needs at least an input and an output layer"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::config("layer sizes must be positive"));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::config(format!(
                "{} layers need {} activations, got {}",
                layer_sizes.len(),
                layer_sizes.len() - 1,
                activations.len()
            )));
        }
        Ok(MlpSpec {
            layer_sizes,
            activations,
        })
    }

    /// `input -> hidden... -> output`, hidden layers share one activation.
    pub fn dense(
        input: usize,
        hidden: &[usize],
        output: usize,
        hidden_act: Activation,
        output_act: Activation,
    ) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let mut acts = vec![hidden_act; hidden.len()];
        acts.push(output_act);
        MlpSpec::new(sizes, acts)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn layers(&self) -> impl Iterator<Item = LayerView> + '_ {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .zip(&self.activations)
            .map(move |(w, &act)| {
                let view = LayerView {
                    n_in: w[0],
                    n_out: w[1],
                    w_off: offset,
                    b_off: offset + w[0] * w[1],
                    act,
                };
                offset += w[0] * w[1] + w[1];
                view
            })
    }

    /// Text sidecar form: `layers = 4,32,1` and `activations = tanh,sigmoid`.
    pub fn to_sidecar(&self) -> String {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|n| n.to_string()).collect();
        let acts: Vec<String> = self.activations.iter().map(|a| a.to_string()).collect();
        format!("layers = {}\nactivations = {}\n", sizes.join(","), acts.join(","))
    }

    pub fn from_sidecar_fields(layers: &str, activations: &str) -> Result<Self> {
        let sizes = layers
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::config(format!("layer size '{s}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let acts = activations
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Activation>>>()?;
        MlpSpec::new(sizes, acts)
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerView {
    n_in: usize,
    n_out: usize,
    w_off: usize,
    b_off: usize,
    act: Activation,
}

/// Glorot-uniform weights, zero biases. Same spec and seed give the same vector.
pub fn mlp_init(spec: &MlpSpec, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; spec.param_count()];
    for layer in spec.layers() {
        let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit);
        for w in &mut params[layer.w_off..layer.b_off] {
            *w = dist.sample(&mut rng);
        }
    }
    ParamVector::new(params)
}

fn check_params(spec: &MlpSpec, params: &[f64]) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::shape("mlp params", spec.param_count(), params.len()));
    }
    Ok(())
}

pub fn mlp_forward(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<Vec<f64>> {
    check_params(spec, params)?;
    if input.len() != spec.input_dim() {
        return Err(Error::shape("mlp input", spec.input_dim(), input.len()));
    }
    let mut x = input.to_vec();
    for layer in spec.layers() {
        x = affine_act(&layer, params, &x).1;
    }
    Ok(x)
}

fn affine_act(layer: &LayerView, params: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = &params[layer.w_off..layer.b_off];
    let b = &params[layer.b_off..layer.b_off + layer.n_out];
    let mut z = b.to_vec();
    for (o, zo) in z.iter_mut().enumerate() {
        let row = &w[o * layer.n_in..(o + 1) * layer.n_in];
        *zo += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
    let y = z.iter().map(|&v| layer.act.apply(v)).collect();
    (z, y)
}

/// Forward pass that keeps every layer's input and pre-activation.
pub struct ForwardTrace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

pub fn mlp_forward_trace(spec: &MlpSpec, params: &[f64], input: &[f64]) -> Result<ForwardTrace> {
    check_params(spec, params)?;
    if input.len() != spec.input_dim() {
        return Err(Error::shape("mlp input", spec.input_dim(), input.len()));
    }
    let n_layers = spec.activations.len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut pre = Vec::with_capacity(n_layers);
    let mut x = input.to_vec();
    for layer in spec.layers() {
        let (z, y) = affine_act(&layer, params, &x);
        inputs.push(x);
        pre.push(z);
        x = y;
    }
    Ok(ForwardTrace {
        inputs,
        pre,
        output: x,
    })
}

/// Reverse pass from a recorded trace. Parameter gradients of
/// `output . upstream` are *added* into `grad_acc`; the input gradient is returned.
pub fn mlp_backward_trace(
    spec: &MlpSpec,
    params: &[f64],
    trace: &ForwardTrace,
    upstream: &[f64],
    grad_acc: &mut [f64],
) -> Result<Vec<f64>> {
    check_params(spec, params)?;
    if upstream.len() != spec.output_dim() {
        return Err(Error::shape("mlp upstream gradient", spec.output_dim(), upstream.len()));
    }
    if grad_acc.len() != params.len() {
        return Err(Error::shape("mlp gradient accumulator", params.len(), grad_acc.len()));
    }
    let layers: Vec<LayerView> = spec.layers().collect();
    let mut delta_out = upstream.to_vec();
    let mut y = trace.output.clone();
    for (li, layer) in layers.iter().enumerate().rev() {
        let z = &trace.pre[li];
        let x = &trace.inputs[li];
        let delta: Vec<f64> = delta_out
            .iter()
            .zip(z)
            .zip(&y)
            .map(|((d, &zv), &yv)| d * layer.act.derivative(zv, yv))
            .collect();
        let mut dx = vec![0.0; layer.n_in];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row_off = layer.w_off + o * layer.n_in;
            let g_row = &mut grad_acc[row_off..row_off + layer.n_in];
            for (g, xi) in g_row.iter_mut().zip(x) {
                *g += d * xi;
            }
            grad_acc[layer.b_off + o] += d;
            let w_row = &params[row_off..row_off + layer.n_in];
            for (dxi, wi) in dx.iter_mut().zip(w_row) {
                *dxi += d * wi;
            }
        }
        delta_out = dx;
        y = x.clone();
    }
    Ok(delta_out)
}

/// Exact reverse-mode gradients of `output . upstream` with respect to the
/// parameters and the input.
pub fn mlp_backward(
    spec: &MlpSpec,
    params: &[f64],
    input: &[f64],
    upstream: &[f64],
) -> Result<(ParamVector, Vec<f64>)> {
    let trace = mlp_forward_trace(spec, params, input)?;
    let mut grad = vec![0.0; params.len()];
    let dx = mlp_backward_trace(spec, params, &trace, upstream, &mut grad)?;
    Ok((ParamVector::new(grad), dx))
}
