//! Skinning, rasterization and pose rendering for the guidance sequences.

pub mod camera;
pub mod pose;
pub mod rasterize;
pub mod rig;
pub mod sdi_mask;
pub mod sequence;
pub mod transform;

pub use camera::OrthoCamera;
pub use pose::{Keypoint, PoseFrame};
pub use rasterize::{rasterize, Attribute, Rendered};
pub use rig::{lbs_deform, MotionClip, Rig, RiggedMesh, Skeleton};
pub use sdi_mask::backproject_sdi_mask;
pub use sequence::{mask_coarse, render_guidance_sequence, FrameGuidance, GuidanceBundle};
pub use transform::Transform;
