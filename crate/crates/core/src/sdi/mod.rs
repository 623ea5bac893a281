//! Secondary dynamics injection: three-phase sampling with latent estimate
//! blending, coarse-frame inpainting and sliding-window chaining.

pub mod config;
pub mod long;
pub mod sampler;

pub use crate::diffusion::downsample_mask;
pub use config::{BlendMode, SdiConfig};
pub use long::{generate_long, segment_starts, LongOutput, Segment};
pub use sampler::{
    blend_estimates, conditioned_run, inpaint_coarse, sample, sdi_generate, SdiInputs, SdiOutput, SdiRun, StepLog,
};
