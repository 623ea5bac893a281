//! 18-keypoint skeletons in OpenPose COCO order: extraction from the rig,
//! facial point back-projection, and depth-sorted pose map rendering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::TriMesh;
use crate::guidance::camera::OrthoCamera;
use crate::guidance::rasterize::lerp3;
use crate::guidance::rig::{resolve_keypoint_map, KeypointMap, Skeleton};
use crate::guidance::transform::Transform;
use crate::raster::Image;

pub const KEYPOINT_NAMES: [&str; 18] = [
    "nose",
    "neck",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_eye",
    "l_eye",
    "r_ear",
    "l_ear",
];

/// Keypoints driven by skeleton joints.
pub const BODY_KEYPOINTS: [usize; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

/// Keypoints riding rigidly on the head: nose, right eye, left eye, right ear, left ear.
pub const FACIAL_KEYPOINTS: [usize; 5] = [0, 14, 15, 16, 17];

pub const LIMBS: [(usize, usize); 17] = [
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
];

pub const COLORS: [[u8; 3]; 18] = [
    [255, 0, 0],
    [255, 85, 0],
    [255, 170, 0],
    [255, 255, 0],
    [170, 255, 0],
    [85, 255, 0],
    [0, 255, 0],
    [0, 255, 85],
    [0, 255, 170],
    [0, 255, 255],
    [0, 170, 255],
    [0, 85, 255],
    [0, 0, 255],
    [85, 0, 255],
    [170, 0, 255],
    [255, 0, 255],
    [255, 0, 170],
    [255, 0, 85],
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Keypoint {
    /// Image column in pixels.
    pub x: f64,
    /// Image row in pixels.
    pub y: f64,
    /// View depth; larger is farther.
    pub depth: f64,
    pub valid: bool,
}

impl Keypoint {
    pub fn at(x: f64, y: f64, depth: f64) -> Self {
        Keypoint { x, y, depth, valid: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseFrame {
    pub keypoints: [Keypoint; 18],
}

impl PoseFrame {
    /// Projects world positions through `camera`; `None` entries stay invalid.
    pub fn from_world(points: &[Option<[f64; 3]>; 18], camera: &OrthoCamera) -> Self {
        let mut frame = PoseFrame::default();
        for (kp, p) in frame.keypoints.iter_mut().zip(points) {
            if let Some(p) = p {
                let s = camera.to_screen(*p);
                *kp = Keypoint::at(s[0], s[1], camera.depth(p[2]));
            }
        }
        frame
    }

    pub fn validate(&self) -> Result<()> {
        for (i, kp) in self.keypoints.iter().enumerate() {
            if kp.valid && !(kp.x.is_finite() && kp.y.is_finite() && kp.depth.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "keypoint `{}` is valid but not finite",
                    KEYPOINT_NAMES[i]
                )));
            }
        }
        Ok(())
    }
}

/// World positions of the 13 body keypoints for one frame; keypoints mapped
/// to no joint come back as `None`.
pub fn extract_body_keypoints(
    skeleton: &Skeleton,
    frame: &[Transform],
    map: &KeypointMap,
) -> Result<[Option<[f64; 3]>; 13]> {
    let joints = resolve_keypoint_map(map, skeleton)?;
    body_keypoint_positions(skeleton, frame, &joints)
}

pub fn body_keypoint_positions(
    skeleton: &Skeleton,
    frame: &[Transform],
    joints: &[Option<usize>; 13],
) -> Result<[Option<[f64; 3]>; 13]> {
    if frame.len() != skeleton.len() {
        return Err(Error::shape("body keypoints", skeleton.len(), frame.len()));
    }
    let mut out = [None; 13];
    for (slot, j) in joints.iter().enumerate() {
        if let Some(j) = *j {
            let t = frame.get(j).ok_or(Error::UnknownJoint(j))?;
            out[slot] = Some(t.apply(skeleton.rest_position(j)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FacialPoint {
    pub position: [f64; 3],
    /// The ray missed the mesh and the depth was borrowed.
    pub fallback: bool,
}

/// Nearest depth of the mesh under world point `(x, y)` along the view axis.
fn ray_depth(mesh: &TriMesh, camera: &OrthoCamera, x: f64, y: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det == 0.0 {
            continue;
        }
        let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
        if 1.0 - l1 - l2 < 0.0 || l1 < 0.0 || l2 < 0.0 {
            continue;
        }
        let d = camera.depth(lerp3([0.0, l1, l2], [a[2], b[2], c[2]]));
        best = Some(best.map_or(d, |b: f64| b.min(d)));
    }
    best
}

/// Lifts five image points onto the front-facing surface of `mesh`.
///
/// A point whose ray misses takes the depth of the nearest (in the image)
/// point that hit, or the bounding-box mid-depth when none hit.
pub fn backproject_facial_keypoints(
    kp2d: &[[f64; 2]; 5],
    mesh: &TriMesh,
    camera: &OrthoCamera,
) -> [FacialPoint; 5] {
    let xy: [[f64; 2]; 5] = kp2d.map(|s| camera.to_world_xy(s));
    let hits: [Option<f64>; 5] = xy.map(|p| ray_depth(mesh, camera, p[0], p[1]));
    let mid_depth = mesh
        .bounds()
        .map(|(lo, hi)| camera.depth(0.5 * (lo[2] + hi[2])))
        .unwrap_or(0.0);
    std::array::from_fn(|i| {
        let (depth, fallback) = match hits[i] {
            Some(d) => (d, false),
            None => {
                let neighbor = (0..5)
                    .filter_map(|j| hits[j].map(|d| (j, d)))
                    .min_by(|(j, _), (k, _)| {
                        let dist = |m: usize| {
                            (kp2d[m][0] - kp2d[i][0]).powi(2) + (kp2d[m][1] - kp2d[i][1]).powi(2)
                        };
                        dist(*j).total_cmp(&dist(*k)).then(j.cmp(k))
                    });
                (neighbor.map_or(mid_depth, |(_, d)| d), true)
            }
        };
        FacialPoint {
            position: [xy[i][0], xy[i][1], camera.world_z(depth)],
            fallback,
        }
    })
}

/// Moves rest-pose facial points rigidly with the head:
/// `p' = frame · rest⁻¹ · p`.
pub fn transform_facial_keypoints(
    rest_points: &[[f64; 3]; 5],
    head_rest: &Transform,
    head_frame: &Transform,
) -> Result<[[f64; 3]; 5]> {
    let m = head_frame.compose(&head_rest.try_inverse()?);
    Ok(rest_points.map(|p| m.apply(p)))
}

/// Valid limbs in painting order: farther mean endpoint depth first, ties by
/// ascending limb index.
pub fn limb_paint_order(frame: &PoseFrame) -> Vec<usize> {
    let kp = &frame.keypoints;
    let mut limbs: Vec<(usize, f64)> = LIMBS
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| kp[*a].valid && kp[*b].valid)
        .map(|(i, (a, b))| (i, 0.5 * (kp[*a].depth + kp[*b].depth)))
        .collect();
    limbs.sort_by(|(i, di), (j, dj)| dj.total_cmp(di).then(i.cmp(j)));
    limbs.into_iter().map(|(i, _)| i).collect()
}

/// Stroke geometry `(limb half width, keypoint radius)` in pixels.
pub fn stroke_size(width: usize, height: usize) -> (f64, f64) {
    let scale = (width as f64 / 768.0).min(height as f64 / 512.0);
    ((2.0 * scale).max(0.75), (4.0 * scale).max(1.0))
}

fn paint_where(img: &mut Image, bbox: [f64; 4], color: [u8; 3], inside: impl Fn(f64, f64) -> bool) {
    let x0 = bbox[0].floor().max(0.0) as usize;
    let y0 = bbox[1].floor().max(0.0) as usize;
    let x1 = (bbox[2].ceil() + 1.0).clamp(0.0, img.width as f64) as usize;
    let y1 = (bbox[3].ceil() + 1.0).clamp(0.0, img.height as f64) as usize;
    let c = color.map(|v| v as f64 / 255.0);
    for y in y0..y1 {
        for x in x0..x1 {
            if inside(x as f64 + 0.5, y as f64 + 0.5) {
                for k in 0..3 {
                    img.set(x, y, k, c[k]);
                }
            }
        }
    }
}

/// Renders an RGB pose map on black: limbs as fixed-width segments in
/// [`limb_paint_order`], then keypoint discs in index order.
pub fn render_pose_map(frame: &PoseFrame, width: usize, height: usize) -> Image {
    let mut img = Image::zeros(width, height, 3);
    let (hw, radius) = stroke_size(width, height);
    let kp = &frame.keypoints;
    for limb in limb_paint_order(frame) {
        let (a, b) = LIMBS[limb];
        let (p, q) = ([kp[a].x, kp[a].y], [kp[b].x, kp[b].y]);
        let bbox = [
            p[0].min(q[0]) - hw,
            p[1].min(q[1]) - hw,
            p[0].max(q[0]) + hw,
            p[1].max(q[1]) + hw,
        ];
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        paint_where(&mut img, bbox, COLORS[limb], |x, y| {
            let t = if len2 > 0.0 {
                (((x - p[0]) * d[0] + (y - p[1]) * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (cx, cy) = (p[0] + t * d[0], p[1] + t * d[1]);
            (x - cx).powi(2) + (y - cy).powi(2) <= hw * hw
        });
    }
    for (i, k) in kp.iter().enumerate().filter(|(_, k)| k.valid) {
        let bbox = [k.x - radius, k.y - radius, k.x + radius, k.y + radius];
        paint_where(&mut img, bbox, COLORS[i], |x, y| {
            (x - k.x).powi(2) + (y - k.y).powi(2) <= radius * radius
        });
    }
    img
}
