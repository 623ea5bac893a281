//! A small synthetic character project: a head with hair over a torso,
//! swaying its head and arms. Used by the `demo` command, the tests and the
//! benches.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::{marching_cubes, GridGeometry, ScalarField3D, SegLabel, SegMap, TriMesh};
use crate::guidance::rasterize::rasterize_fragments;
use crate::guidance::rig::{JointEntry, MotionFile, RigFile};
use crate::guidance::{OrthoCamera, Transform};
use crate::pipeline::commands::write_json;
use crate::pipeline::config::{CameraConfig, InputPaths, ProjectConfig};
use crate::raster::{BinaryMap, Image};

#[derive(Debug, Clone, Copy)]
pub struct DemoOptions {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Mark the lower hair as a secondary-dynamics region.
    pub sdi: bool,
}

impl Default for DemoOptions {
    fn default() -> Self {
        DemoOptions {
            frames: 16,
            width: 64,
            height: 64,
            sdi: true,
        }
    }
}

const HEAD: ([f64; 3], f64) = ([0.0, 0.95, 0.0], 0.4);
const TORSO: ([f64; 3], [f64; 3]) = ([0.0, 0.1, 0.0], [0.5, 0.6, 0.32]);
const HAIR: ([f64; 3], [f64; 3]) = ([0.0, 0.72, -0.12], [0.5, 0.68, 0.38]);
const NECK: [f64; 3] = [0.0, 0.55, 0.0];

const HAIR_COLOR: [f64; 3] = [0.45, 0.25, 0.1];
const SKIN_COLOR: [f64; 3] = [0.95, 0.8, 0.65];
const SHIRT_COLOR: [f64; 3] = [0.2, 0.35, 0.8];

fn ellipsoid(p: [f64; 3], c: [f64; 3], r: [f64; 3]) -> f64 {
    let k: f64 = (0..3).map(|i| ((p[i] - c[i]) / r[i]).powi(2)).sum::<f64>().sqrt();
    (k - 1.0) * r.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Signed distance of each part: hair, head, torso.
fn parts(p: [f64; 3]) -> [f64; 3] {
    [
        ellipsoid(p, HAIR.0, HAIR.1),
        ellipsoid(p, HEAD.0, [HEAD.1; 3]),
        ellipsoid(p, TORSO.0, TORSO.1),
    ]
}

fn nearest_part(p: [f64; 3]) -> usize {
    let d = parts(p);
    (0..3).min_by(|a, b| d[*a].total_cmp(&d[*b])).unwrap()
}

pub fn demo_field() -> ScalarField3D {
    let geom = GridGeometry::new([26, 33, 21], [-1.0, -1.0, -0.8], 0.08).expect("valid demo grid");
    ScalarField3D::from_fn(geom, |p| parts(p).into_iter().fold(f64::INFINITY, f64::min))
}

/// Front and right segmentation maps at grid resolution.
pub fn demo_segmentation(geom: &GridGeometry) -> (SegMap, SegMap) {
    let [nx, ny, nz] = geom.dims;
    // with one pixel per voxel, pixel centres coincide with voxel samples
    let at = |i: usize, axis: usize| geom.origin[axis] + geom.spacing * i as f64;
    let label = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| {
        // silhouettes of each part along the projection
        match (parts(a)[1] < 0.0 || parts(a)[2] < 0.0, parts(b)[0] < 0.0 || parts(c)[0] < 0.0) {
            (true, _) => SegLabel::Body,
            (false, true) => SegLabel::Hair,
            _ => SegLabel::Background,
        }
    };
    let front = SegMap::from_fn(nx, ny, |px, py| {
        let (x, y) = (at(px, 0), at(ny - 1 - py, 1));
        label([x, y, HEAD.0[2]], [x, y, HAIR.0[2]], [x, y, HAIR.0[2]])
    });
    let right = SegMap::from_fn(nz, ny, |px, py| {
        let (z, y) = (at(nz - 1 - px, 2), at(ny - 1 - py, 1));
        if parts([0.0, y, z])[1] < 0.0 && z < HEAD.0[2] - 0.1 {
            return SegLabel::Hair;
        }
        label([0.0, y, z], [0.0, y, z], [0.0, y, z])
    });
    (front, right)
}

/// Colored character mesh.
pub fn demo_mesh() -> TriMesh {
    let mut mesh = marching_cubes(&demo_field(), 0.0);
    let colors = mesh
        .vertices
        .iter()
        .map(|v| [HAIR_COLOR, SKIN_COLOR, SHIRT_COLOR][nearest_part(*v)])
        .collect();
    mesh.colors = Some(colors);
    mesh
}

fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Translation by `shift` after a rotation about `pivot`.
fn swing(pivot: [f64; 3], angle: f64, shift: [f64; 3]) -> Transform {
    let r = rotation_z(angle);
    let p = Vector3::from(pivot);
    Transform {
        rotation: r,
        translation: p - r * p + Vector3::from(shift),
    }
}

const JOINTS: [(&str, Option<&str>, [f64; 3]); 14] = [
    ("hips", None, [0.0, -0.3, 0.0]),
    ("neck", Some("hips"), NECK),
    ("head", Some("neck"), [0.0, 0.95, 0.0]),
    ("r_shoulder", Some("neck"), [-0.4, 0.5, 0.0]),
    ("r_elbow", Some("r_shoulder"), [-0.45, 0.15, 0.0]),
    ("r_wrist", Some("r_elbow"), [-0.45, -0.2, 0.0]),
    ("l_shoulder", Some("neck"), [0.4, 0.5, 0.0]),
    ("l_elbow", Some("l_shoulder"), [0.45, 0.15, 0.0]),
    ("l_wrist", Some("l_elbow"), [0.45, -0.2, 0.0]),
    ("r_hip", Some("hips"), [-0.2, -0.4, 0.0]),
    ("r_knee", Some("r_hip"), [-0.2, -0.45, 0.05]),
    ("l_hip", Some("hips"), [0.2, -0.4, 0.0]),
    ("l_knee", Some("l_hip"), [0.2, -0.45, 0.05]),
    ("spine", Some("hips"), [0.0, 0.1, 0.0]),
];

pub fn demo_motion(frames: usize) -> MotionFile {
    let frames = (0..frames)
        .map(|f| {
            let phase = 2.0 * PI * f as f64 / 16.0;
            let shift = [0.06 * phase.sin(), 0.0, 0.0];
            let sway = 0.25 * phase.sin();
            let arm = 0.4 * phase.sin();
            JOINTS
                .iter()
                .map(|(name, _, _)| match *name {
                    "head" => swing(NECK, sway, shift),
                    "r_elbow" | "r_wrist" => swing(JOINTS[3].2, -arm, shift),
                    "l_elbow" | "l_wrist" => swing(JOINTS[6].2, arm, shift),
                    _ => Transform::translation(shift),
                })
                .collect()
        })
        .collect();
    MotionFile { fps: 12.0, frames }
}

pub fn demo_rig(mesh: &TriMesh, mesh_file: &str, camera: &OrthoCamera) -> RigFile {
    let joints = JOINTS
        .iter()
        .map(|(name, parent, p)| JointEntry {
            name: name.to_string(),
            parent: parent.map(str::to_string),
            bind: Transform::translation(*p),
        })
        .collect();
    let mut keypoints = BTreeMap::new();
    for kp in ["neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist", "r_hip", "r_knee", "l_hip", "l_knee"] {
        keypoints.insert(kp.to_string(), Some(kp.to_string()));
    }
    // feet are not modelled
    keypoints.insert("r_ankle".into(), None);
    keypoints.insert("l_ankle".into(), None);
    let weights = mesh
        .vertices
        .iter()
        .map(|v| {
            let joint = if nearest_part(*v) == 2 { "hips" } else { "head" };
            vec![(joint.to_string(), 1.0)]
        })
        .collect();
    let (hc, r) = HEAD;
    let face = [
        [hc[0], hc[1], r],
        [hc[0] - 0.14, hc[1] + 0.1, r],
        [hc[0] + 0.14, hc[1] + 0.1, r],
        [hc[0] - 0.3, hc[1], 0.0],
        [hc[0] + 0.3, hc[1], 0.0],
    ]
    .map(|p| camera.to_screen(p));
    RigFile {
        mesh: PathBuf::from(mesh_file),
        joints,
        keypoints,
        head_joint: Some("head".into()),
        facial_points: Some(face),
        weights,
    }
}

/// Contour-free and contoured references rendered from the rest pose.
pub fn demo_references(mesh: &TriMesh, camera: &OrthoCamera) -> (Image, Image) {
    let frags = rasterize_fragments(mesh, camera);
    let nc = frags.shade_color(mesh);
    let cov = frags.coverage();
    let (w, h) = (camera.width, camera.height);
    let covered = |x: isize, y: isize| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && cov.get(x as usize, y as usize);
    let reference = Image::from_fn(w, h, 3, |x, y, c| {
        let (xi, yi) = (x as isize, y as isize);
        let edge = cov.get(x, y) && [(-1, 0), (1, 0), (0, -1), (0, 1)].iter().any(|(dx, dy)| !covered(xi + dx, yi + dy));
        if edge {
            0.05
        } else {
            nc.get(x, y, c)
        }
    });
    (reference, nc)
}

/// Front and back masks over the lower hair, each drawn from its own view.
pub fn demo_sdi_masks(mesh: &TriMesh, camera: &OrthoCamera) -> (BinaryMap, BinaryMap) {
    let mut marked = mesh.clone();
    marked.sdi = Some(
        mesh.vertices
            .iter()
            .map(|v| if nearest_part(*v) == 0 && v[1] < HEAD.0[1] { 1.0 } else { 0.0 })
            .collect(),
    );
    let front = rasterize_fragments(&marked, camera).shade_sdi(&marked);
    let mut behind = marked.clone();
    behind.vertices = marked.vertices.iter().map(|v| [-v[0], v[1], -v[2]]).collect();
    let back = rasterize_fragments(&behind, camera).shade_sdi(&behind);
    (front, back)
}

/// Everything the demo project consists of, in memory.
#[derive(Debug, Clone)]
pub struct DemoProject {
    pub field: ScalarField3D,
    pub seg_front: SegMap,
    pub seg_right: SegMap,
    pub mesh: TriMesh,
    pub camera: OrthoCamera,
    pub rig: RigFile,
    pub motion: MotionFile,
    pub reference: Image,
    pub nc_reference: Image,
    pub sdi_front: BinaryMap,
    pub sdi_back: BinaryMap,
}

pub fn demo_project(opts: DemoOptions) -> Result<DemoProject> {
    if opts.frames == 0 {
        return Err(Error::InvalidArgument("demo needs at least one frame".into()));
    }
    let field = demo_field();
    let (seg_front, seg_right) = demo_segmentation(&field.geom);
    // colors go through the 8-bit PLY encoding the rig is loaded from
    let mesh = TriMesh::parse_ply(&demo_mesh().to_ply(), Path::new("character.ply"))?;
    let camera_cfg = CameraConfig {
        width: opts.width,
        height: opts.height,
        ..CameraConfig::default()
    };
    let camera = camera_cfg.build(&mesh)?;
    let rig = demo_rig(&mesh, "character.ply", &camera);
    let (reference, nc_reference) = demo_references(&mesh, &camera);
    let (sdi_front, sdi_back) = if opts.sdi {
        demo_sdi_masks(&mesh, &camera)
    } else {
        (BinaryMap::new(opts.width, opts.height), BinaryMap::new(opts.width, opts.height))
    };
    Ok(DemoProject {
        field,
        seg_front,
        seg_right,
        mesh,
        camera,
        rig,
        motion: demo_motion(opts.frames),
        reference,
        nc_reference,
        sdi_front,
        sdi_back,
    })
}

/// Writes the demo project into `dir` and returns the path of its config.
pub fn write_demo_project(dir: &Path, opts: DemoOptions) -> Result<PathBuf> {
    let p = demo_project(opts)?;
    fsutil::create_dir_all(dir)?;
    p.field.save(&dir.join("character.sdf"))?;
    p.seg_front.save_png(&dir.join("seg_front.png"))?;
    p.seg_right.save_png(&dir.join("seg_right.png"))?;
    p.mesh.save_ply(&dir.join("character.ply"))?;
    write_json(&dir.join("rig.json"), &p.rig)?;
    write_json(&dir.join("motion.json"), &p.motion)?;
    p.reference.save_png(&dir.join("reference.png"))?;
    p.nc_reference.save_png(&dir.join("reference_nc.png"))?;
    p.sdi_front.save_png(&dir.join("sdi_front.png"))?;
    p.sdi_back.save_png(&dir.join("sdi_back.png"))?;

    let cfg = ProjectConfig {
        output_dir: PathBuf::from("out"),
        inputs: InputPaths {
            reference: Some("reference.png".into()),
            nc_reference: Some("reference_nc.png".into()),
            seg_front: Some("seg_front.png".into()),
            seg_right: Some("seg_right.png".into()),
            sdf: Some("character.sdf".into()),
            rig: Some("rig.json".into()),
            motion: Some("motion.json".into()),
            sdi_front: Some("sdi_front.png".into()),
            sdi_back: Some("sdi_back.png".into()),
        },
        camera: CameraConfig {
            width: opts.width,
            height: opts.height,
            ..CameraConfig::default()
        },
        ..ProjectConfig::default()
    };
    let path = dir.join("project.toml");
    cfg.save(&path)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_is_consistent() {
        let p = demo_project(DemoOptions::default()).unwrap();
        assert!(!p.mesh.is_empty());
        assert_eq!(p.rig.weights.len(), p.mesh.vertices.len());
        assert_eq!(p.motion.frames.len(), 16);
        assert_eq!(p.motion.frames[0].len(), JOINTS.len());
        assert!(p.sdi_front.count() > 0);
        assert!(p.sdi_back.count() > 0);
        assert_eq!((p.reference.width, p.reference.height), (64, 64));
        let (f, r) = (&p.seg_front, &p.seg_right);
        for m in [f, r] {
            assert!(m.labels.contains(&SegLabel::Hair));
            assert!(m.labels.contains(&SegLabel::Body));
        }
    }
}
