//! Implicit-field geometry: voxel masks, hair/body layering and surface
//! extraction.

pub mod field;
pub mod hlm;
pub mod layers;
pub mod marching_cubes;
pub mod mesh;
mod tables;

pub use field::{sphere_sdf, GridGeometry, ScalarField3D, LARGE};
pub use hlm::{hlm_split, LayeredMeshes};
pub use layers::{
    combine_body_volumes, combine_hair_volumes, extrude_mask, fill_interior, mask_field,
    split_segmentation, SegLabel, SegMap, ViewAxis, VolumeMask,
};
pub use marching_cubes::marching_cubes;
pub use mesh::TriMesh;
