//! Hair layering: splits one implicit field into hair and body layers using
//! front and right segmentation maps, then meshes each layer.

use crate::error::Result;
use crate::geometry::field::ScalarField3D;
use crate::geometry::layers::{
    combine_body_volumes, combine_hair_volumes, extrude_mask, fill_interior, mask_field,
    split_segmentation, SegMap, ViewAxis,
};
use crate::geometry::marching_cubes::marching_cubes;
use crate::geometry::mesh::TriMesh;
use crate::parallel;

#[derive(Debug, Clone)]
pub struct LayeredMeshes {
    pub hair: TriMesh,
    pub body: TriMesh,
    /// Hair vertices first, then body; seams are not welded.
    pub merged: TriMesh,
}

pub fn hlm_split(field: &ScalarField3D, s_front: &SegMap, s_right: &SegMap) -> Result<LayeredMeshes> {
    let (front_hair, front_body) = split_segmentation(s_front);
    let (right_hair, right_body) = split_segmentation(s_right);
    // The back hair map is derived from the front image, so it is lifted
    // with the front mapping.
    let back_hair = fill_interior(&front_hair);

    let geom = &field.geom;
    let hair_vol = combine_hair_volumes(
        &extrude_mask(&front_hair, ViewAxis::Front, geom)?,
        &extrude_mask(&back_hair, ViewAxis::Front, geom)?,
        &extrude_mask(&right_hair, ViewAxis::Right, geom)?,
    )?;
    let body_vol = combine_body_volumes(
        &extrude_mask(&front_body, ViewAxis::Front, geom)?,
        &extrude_mask(&right_body, ViewAxis::Right, geom)?,
    )?;
    let hair_field = mask_field(field, &hair_vol)?;
    let body_field = mask_field(field, &body_vol)?;

    let (hair, body) = parallel::join(
        || marching_cubes(&hair_field, 0.0),
        || marching_cubes(&body_field, 0.0),
    );
    let merged = TriMesh::concat(&[&hair, &body]);
    Ok(LayeredMeshes { hair, body, merged })
}
