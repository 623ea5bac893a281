//! Per-frame guidance: coarse colors, SDI masks, masked coarse colors and
//! pose maps for an animated rig.

use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::guidance::camera::OrthoCamera;
use crate::guidance::pose::{
    backproject_facial_keypoints, body_keypoint_positions, render_pose_map, transform_facial_keypoints,
    PoseFrame, BODY_KEYPOINTS, FACIAL_KEYPOINTS,
};
use crate::guidance::rasterize::rasterize_fragments;
use crate::guidance::rig::{lbs_deform, MotionClip, Rig};
use crate::guidance::sdi_mask::backproject_sdi_mask;
use crate::guidance::transform::Transform;
use crate::parallel;
use crate::raster::{BinaryMap, Image};

/// `C · (1 − M)` per pixel.
pub fn mask_coarse(coarse: &Image, mask: &BinaryMap) -> Result<Image> {
    if coarse.width != mask.width || coarse.height != mask.height {
        return Err(Error::shape(
            "mask_coarse",
            coarse.dims(),
            format!("{}x{}", mask.width, mask.height),
        ));
    }
    let mut out = coarse.clone();
    let ch = out.channels;
    for (i, px) in out.data.chunks_mut(ch).enumerate() {
        if mask.bits[i] {
            px.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(out)
}

/// Renders of one deformed mesh.
#[derive(Debug, Clone)]
pub struct FrameGuidance {
    pub coarse: Image,
    pub coverage: BinaryMap,
    pub sdi: BinaryMap,
    pub coarse_masked: Image,
}

/// Rasterizes color and SDI from one fragment pass.
pub fn render_frame(mesh: &TriMesh, camera: &OrthoCamera) -> Result<FrameGuidance> {
    let frags = rasterize_fragments(mesh, camera);
    let coarse = frags.shade_color(mesh);
    let sdi = frags.shade_sdi(mesh);
    let coarse_masked = mask_coarse(&coarse, &sdi)?;
    Ok(FrameGuidance {
        coarse,
        coverage: frags.coverage(),
        sdi,
        coarse_masked,
    })
}

#[derive(Debug, Clone)]
pub struct GuidanceBundle {
    pub ref_image: Image,
    pub nc_ref_image: Image,
    pub ref_pose: PoseFrame,
    pub pose_frames: Vec<PoseFrame>,
    pub poses: Vec<Image>,
    pub frames: Vec<FrameGuidance>,
    /// Deformed mesh per frame, with the SDI attribute attached.
    pub meshes: Vec<TriMesh>,
}

impl GuidanceBundle {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn coarse(&self) -> Vec<Image> {
        self.frames.iter().map(|f| f.coarse.clone()).collect()
    }

    pub fn coarse_masked(&self) -> Vec<Image> {
        self.frames.iter().map(|f| f.coarse_masked.clone()).collect()
    }

    pub fn sdi(&self) -> Vec<BinaryMap> {
        self.frames.iter().map(|f| f.sdi.clone()).collect()
    }
}

/// Rest-pose facial points, or `None` when the rig has no head setup.
pub fn rest_facial_points(rig: &Rig, camera: &OrthoCamera) -> Option<[[f64; 3]; 5]> {
    let pts = rig.facial_points?;
    rig.head_joint?;
    Some(backproject_facial_keypoints(&pts, &rig.mesh.mesh, camera).map(|p| p.position))
}

/// The 18-keypoint pose of `rig` under one frame of skinning transforms.
pub fn pose_frame(
    rig: &Rig,
    frame: &[Transform],
    facial_rest: Option<&[[f64; 3]; 5]>,
    camera: &OrthoCamera,
) -> Result<PoseFrame> {
    let mut world: [Option<[f64; 3]>; 18] = [None; 18];
    let body = body_keypoint_positions(&rig.skeleton, frame, &rig.body_joints)?;
    for (slot, p) in body.into_iter().enumerate() {
        world[BODY_KEYPOINTS[slot]] = p;
    }
    if let (Some(pts), Some(h)) = (facial_rest, rig.head_joint) {
        let bind = rig.skeleton.joints[h].bind;
        let posed = frame[h].compose(&bind);
        let moved = transform_facial_keypoints(pts, &bind, &posed)?;
        for (slot, p) in moved.into_iter().enumerate() {
            world[FACIAL_KEYPOINTS[slot]] = Some(p);
        }
    }
    let pose = PoseFrame::from_world(&world, camera);
    pose.validate()?;
    Ok(pose)
}

/// Animates `rig` through `motion` and renders every guidance sequence.
pub fn render_guidance_sequence(
    rig: &Rig,
    motion: &MotionClip,
    m_front: &BinaryMap,
    m_back: &BinaryMap,
    ref_image: Image,
    nc_ref_image: Image,
    camera: &OrthoCamera,
) -> Result<GuidanceBundle> {
    camera.validate()?;
    if motion.is_empty() {
        return Err(Error::InvalidArgument("motion has no frames".into()));
    }
    let mut rest = rig.mesh.clone();
    rest.mesh = backproject_sdi_mask(&rig.mesh.mesh, camera, m_front, m_back);
    let facial = rest_facial_points(rig, camera);
    let identity = vec![Transform::identity(); rig.skeleton.len()];
    let ref_pose = pose_frame(rig, &identity, facial.as_ref(), camera)?;

    let (w, h) = (camera.width, camera.height);
    let per_frame = parallel::map_range(motion.len(), |i| -> Result<_> {
        let frame = &motion.frames[i];
        let mesh = lbs_deform(&rest, &rig.skeleton, frame)?;
        let guidance = render_frame(&mesh, camera)?;
        let pose = pose_frame(rig, frame, facial.as_ref(), camera)?;
        let map = render_pose_map(&pose, w, h);
        Ok((mesh, guidance, pose, map))
    });

    let mut bundle = GuidanceBundle {
        ref_image,
        nc_ref_image,
        ref_pose,
        pose_frames: Vec::with_capacity(motion.len()),
        poses: Vec::with_capacity(motion.len()),
        frames: Vec::with_capacity(motion.len()),
        meshes: Vec::with_capacity(motion.len()),
    };
    for r in per_frame {
        let (mesh, guidance, pose, map) = r?;
        bundle.meshes.push(mesh);
        bundle.frames.push(guidance);
        bundle.pose_frames.push(pose);
        bundle.poses.push(map);
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_coarse_identities() {
        let c = Image::from_fn(5, 4, 3, |x, y, k| ((x * 7 + y * 3 + k) % 11) as f64 / 10.0);
        assert_eq!(mask_coarse(&c, &BinaryMap::new(5, 4)).unwrap(), c);
        let all = mask_coarse(&c, &BinaryMap::filled(5, 4, true)).unwrap();
        assert!(all.data.iter().all(|v| *v == 0.0));
        let m = BinaryMap::from_fn(5, 4, |x, y| (x + 2 * y) % 3 == 0);
        let out = mask_coarse(&c, &m).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                let keep = if m.get(x, y) { 0.0 } else { 1.0 };
                for k in 0..3 {
                    assert_eq!(out.get(x, y, k), c.get(x, y, k) * keep);
                }
            }
        }
        assert!(mask_coarse(&c, &BinaryMap::new(4, 4)).is_err());
    }
}
