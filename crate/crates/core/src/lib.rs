//! Layered hand-drawn character animation.
//!
//! - [`geometry`]: hair/body layering of an implicit field and marching cubes.
//! - [`guidance`]: skinning, rasterization and the pose / SDI mask / coarse
//!   color guidance sequences.
//! - [`diffusion`]: v-prediction algebra, DDIM stepping, toy codecs and the
//!   denoiser contract.
//! - [`sdi`]: the three-phase secondary-dynamics-injection sampler and
//!   sliding-window long video generation.
//! - [`poisson`]: gradient-domain seamless cloning.
//! - [`pipeline`]: project configuration and the command implementations.

// Numeric kernels index several parallel arrays by one loop variable, and
// range checks are written as negated comparisons so NaN is rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod fsutil;
pub mod geometry;
pub mod guidance;
pub mod parallel;
pub mod pipeline;
pub mod poisson;
pub mod raster;
pub mod sdi;

pub use error::{Error, Result};
pub use raster::{BinaryMap, Image};
