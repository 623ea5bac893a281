//! v-prediction diffusion algebra, noise schedules, latent codecs and the
//! denoiser contract.

pub mod algebra;
pub mod codec;
pub mod denoiser;
pub mod latent;
pub mod schedule;

pub use algebra::{ddim_step, forward_diffuse, latent_estimate, velocity_target, vpred_loss, vpred_loss_grad};
pub use codec::{downsample_mask, Codec};
pub use denoiser::{
    oracle_velocity, ConditionalOracle, Conditioning, Denoiser, ExternalDenoiser, OracleDenoiser, ReferenceOracle,
};
pub use latent::LatentVideo;
pub use schedule::{make_schedule, NoiseSchedule, ScheduleKind};
