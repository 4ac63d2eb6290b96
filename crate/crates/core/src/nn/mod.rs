//! Dense networks, Adam, and parameter-vector utilities shared by the GAN and
//! the actor-critic agent.

mod adam;
pub mod gradcheck;
mod mlp;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{
    mlp_backward, mlp_backward_trace, mlp_forward, mlp_forward_trace, mlp_init, sigmoid, Activation,
    ForwardTrace, MlpSpec,
};
pub use params::{clip_global_norm, hard_copy_every_c, soft_update, ParamVector, BLOB_MAGIC};

/// Global L2 clipping threshold applied before every Adam step in training loops.
pub const GRAD_CLIP_NORM: f64 = 10.0;
