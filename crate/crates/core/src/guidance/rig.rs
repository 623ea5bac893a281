//! Skeletons, motion clips, skinned meshes and their file formats.
//!
//! Motion transforms are world-space skinning transforms relative to the
//! bind pose: a vertex bound with weight 1 to joint `j` moves by exactly the
//! frame's transform for `j`. A joint's posed world transform is therefore
//! `frame[j] ∘ bind[j]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::TriMesh;
use crate::guidance::pose::{BODY_KEYPOINTS, KEYPOINT_NAMES};
use crate::guidance::transform::Transform;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Bind (rest) world transform; its translation is the rest position.
    pub bind: Transform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub joints: Vec<Joint>,
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        let n = joints.len();
        let roots = joints.iter().filter(|j| j.parent.is_none()).count();
        if roots != 1 {
            return Err(Error::InvalidArgument(format!(
                "skeleton must have exactly one root, found {roots}"
            )));
        }
        for (i, j) in joints.iter().enumerate() {
            if !j.bind.is_finite() {
                return Err(Error::InvalidArgument(format!("joint `{}` has a non-finite rest transform", j.name)));
            }
            // walk to the root; more than n hops means a cycle
            let mut cur = Some(i);
            let mut hops = 0;
            while let Some(c) = cur {
                let p = joints[c].parent;
                if let Some(p) = p {
                    if p >= n {
                        return Err(Error::InvalidArgument(format!(
                            "joint `{}` has parent index {p} out of range",
                            joints[c].name
                        )));
                    }
                }
                cur = p;
                hops += 1;
                if hops > n {
                    return Err(Error::InvalidArgument(format!(
                        "joint `{}` is part of a parent cycle",
                        j.name
                    )));
                }
            }
        }
        Ok(Skeleton { joints })
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn rest_position(&self, j: usize) -> [f64; 3] {
        self.joints[j].bind.translation.into()
    }
}

/// Per-frame, per-joint skinning transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub fps: f64,
    pub frames: Vec<Vec<Transform>>,
}

impl MotionClip {
    pub fn new(fps: f64, frames: Vec<Vec<Transform>>, joints: usize) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("motion has no frames".into()));
        }
        for (f, frame) in frames.iter().enumerate() {
            if frame.len() != joints {
                return Err(Error::InvalidArgument(format!(
                    "motion frame {f} has {} transforms, skeleton has {joints} joints",
                    frame.len()
                )));
            }
            for (j, t) in frame.iter().enumerate() {
                if !t.is_finite() || t.orthonormality_error() > 1e-6 {
                    return Err(Error::InvalidArgument(format!(
                        "motion frame {f}, joint {j}: rotation is not orthonormal"
                    )));
                }
            }
        }
        Ok(MotionClip { fps, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// A clip holding the bind pose for `frames` frames.
    pub fn rest(joints: usize, frames: usize) -> Self {
        MotionClip {
            fps: 30.0,
            frames: vec![vec![Transform::identity(); joints]; frames],
        }
    }
}

/// Up to four `(joint, weight)` influences per vertex.
pub type SkinWeights = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct RiggedMesh {
    pub mesh: TriMesh,
    pub weights: Vec<SkinWeights>,
}

impl RiggedMesh {
    pub fn new(mesh: TriMesh, weights: Vec<SkinWeights>) -> Result<Self> {
        mesh.validate()?;
        if weights.len() != mesh.vertices.len() {
            return Err(Error::shape("RiggedMesh weights", mesh.vertices.len(), weights.len()));
        }
        for (v, w) in weights.iter().enumerate() {
            if w.is_empty() || w.len() > 4 {
                return Err(Error::InvalidArgument(format!(
                    "vertex {v} has {} influences (expected 1..=4)",
                    w.len()
                )));
            }
            if w.iter().any(|(_, x)| !(*x >= 0.0)) {
                return Err(Error::InvalidArgument(format!("vertex {v} has a negative weight")));
            }
            let sum: f64 = w.iter().map(|(_, x)| x).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "vertex {v} weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(RiggedMesh { mesh, weights })
    }

    /// Binds every vertex rigidly to one joint.
    pub fn rigid(mesh: TriMesh, joint: usize) -> Result<Self> {
        let n = mesh.vertices.len();
        RiggedMesh::new(mesh, vec![vec![(joint, 1.0)]; n])
    }
}

/// Linear blend skinning, `v' = Σ w_j · T_j(v)`, evaluated as
/// `v + Σ w_j (T_j(v) − v)` so identity transforms leave `v` bit-exact.
pub fn lbs_deform(rig: &RiggedMesh, skeleton: &Skeleton, frame: &[Transform]) -> Result<TriMesh> {
    if frame.len() != skeleton.len() {
        return Err(Error::shape("lbs_deform", skeleton.len(), frame.len()));
    }
    let mut out = rig.mesh.clone();
    for (v, w) in out.vertices.iter_mut().zip(&rig.weights) {
        let rest = *v;
        let mut acc = rest;
        for &(j, wj) in w {
            let t = frame.get(j).ok_or(Error::UnknownJoint(j))?;
            let p = t.apply(rest);
            for k in 0..3 {
                acc[k] += wj * (p[k] - rest[k]);
            }
        }
        *v = acc;
    }
    Ok(out)
}

/// Keypoint-to-joint binding: `None` marks a keypoint deliberately excluded.
pub type KeypointMap = BTreeMap<String, Option<String>>;

/// Everything loaded from a rig file.
#[derive(Debug, Clone)]
pub struct Rig {
    pub skeleton: Skeleton,
    pub mesh: RiggedMesh,
    /// Joint index per body keypoint, in [`BODY_KEYPOINTS`] order.
    pub body_joints: [Option<usize>; 13],
    pub keypoint_map: KeypointMap,
    pub head_joint: Option<usize>,
    /// Nose, right eye, left eye, right ear, left ear in reference pixels.
    pub facial_points: Option<[[f64; 2]; 5]>,
    pub mesh_path: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RigFile {
    pub mesh: PathBuf,
    pub joints: Vec<JointEntry>,
    pub keypoints: KeypointMap,
    #[serde(default)]
    pub head_joint: Option<String>,
    #[serde(default)]
    pub facial_points: Option<[[f64; 2]; 5]>,
    pub weights: Vec<Vec<(String, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointEntry {
    pub name: String,
    pub parent: Option<String>,
    #[serde(flatten)]
    pub bind: Transform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotionFile {
    pub fps: f64,
    pub frames: Vec<Vec<Transform>>,
}

/// Resolves the 13 body keypoints against the skeleton.
pub fn resolve_keypoint_map(map: &KeypointMap, skeleton: &Skeleton) -> Result<[Option<usize>; 13]> {
    let mut out = [None; 13];
    for (slot, &kp) in BODY_KEYPOINTS.iter().enumerate() {
        let name = KEYPOINT_NAMES[kp];
        match map.get(name) {
            None => return Err(Error::UnmappedKeypoint(name.to_string())),
            Some(None) => {}
            Some(Some(joint)) => {
                out[slot] = Some(skeleton.find(joint).ok_or_else(|| {
                    Error::InvalidArgument(format!("keypoint `{name}` maps to unknown joint `{joint}`"))
                })?);
            }
        }
    }
    Ok(out)
}

impl Rig {
    pub fn from_file(file: RigFile, mesh: TriMesh, mesh_path: PathBuf) -> Result<Rig> {
        let names: Vec<&str> = file.joints.iter().map(|j| j.name.as_str()).collect();
        let find = |n: &str| names.iter().position(|m| *m == n);
        let mut joints = Vec::with_capacity(file.joints.len());
        for j in &file.joints {
            let parent = match &j.parent {
                None => None,
                Some(p) => Some(find(p).ok_or_else(|| {
                    Error::InvalidArgument(format!("joint `{}` has unknown parent `{p}`", j.name))
                })?),
            };
            joints.push(Joint {
                name: j.name.clone(),
                parent,
                bind: j.bind,
            });
        }
        let skeleton = Skeleton::new(joints)?;
        let weights = file
            .weights
            .iter()
            .map(|w| {
                w.iter()
                    .map(|(name, x)| {
                        find(name).map(|j| (j, *x)).ok_or_else(|| {
                            Error::InvalidArgument(format!("skinning weight references unknown joint `{name}`"))
                        })
                    })
                    .collect::<Result<SkinWeights>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mesh = RiggedMesh::new(mesh, weights)?;
        let body_joints = resolve_keypoint_map(&file.keypoints, &skeleton)?;
        let head_joint = match &file.head_joint {
            None => None,
            Some(h) => Some(skeleton.find(h).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown head joint `{h}`"))
            })?),
        };
        Ok(Rig {
            skeleton,
            mesh,
            body_joints,
            keypoint_map: file.keypoints,
            head_joint,
            facial_points: file.facial_points,
            mesh_path,
        })
    }

    /// Loads a rig file and the PLY it references (relative to the rig file).
    pub fn load(path: &Path) -> Result<Rig> {
        let text = fsutil::read_to_string(path)?;
        let file: RigFile =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mesh_path = base.join(&file.mesh);
        let mesh = TriMesh::load_ply(&mesh_path)?;
        Rig::from_file(file, mesh, mesh_path).map_err(|e| Error::format(path, e.to_string()))
    }
}

impl MotionClip {
    pub fn load(path: &Path, joints: usize) -> Result<MotionClip> {
        let text = fsutil::read_to_string(path)?;
        let file: MotionFile =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        MotionClip::new(file.fps, file.frames, joints).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_file(&self) -> MotionFile {
        MotionFile {
            fps: self.fps,
            frames: self.frames.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_joint_skeleton() -> Skeleton {
        Skeleton::new(vec![
            Joint {
                name: "root".into(),
                parent: None,
                bind: Transform::identity(),
            },
            Joint {
                name: "child".into(),
                parent: Some(0),
                bind: Transform::translation([0.0, 1.0, 0.0]),
            },
        ])
        .unwrap()
    }

    fn tri() -> TriMesh {
        TriMesh::new(
            vec![[0.3, 0.1, 0.7], [1.1, -0.2, 0.0], [0.0, 2.0, 1.0 / 3.0]],
            vec![[0, 1, 2]],
        )
    }

    #[test]
    fn identity_skinning_is_exact() {
        let sk = two_joint_skeleton();
        let rig = RiggedMesh::new(tri(), vec![vec![(0, 0.3), (1, 0.7)]; 3]).unwrap();
        let out = lbs_deform(&rig, &sk, &[Transform::identity(); 2]).unwrap();
        assert_eq!(out.vertices, rig.mesh.vertices);
    }

    #[test]
    fn translation_and_blend() {
        let sk = two_joint_skeleton();
        let t = [1.0, -2.0, 0.5];
        let rig = RiggedMesh::rigid(tri(), 1).unwrap();
        let out = lbs_deform(&rig, &sk, &[Transform::identity(), Transform::translation(t)]).unwrap();
        for (a, b) in out.vertices.iter().zip(&rig.mesh.vertices) {
            for k in 0..3 {
                assert_eq!(a[k], b[k] + t[k]);
            }
        }

        let (t1, t2) = ([2.0, 0.0, 0.0], [0.0, 4.0, -2.0]);
        let rig = RiggedMesh::new(tri(), vec![vec![(0, 0.5), (1, 0.5)]; 3]).unwrap();
        let out = lbs_deform(&rig, &sk, &[Transform::translation(t1), Transform::translation(t2)]).unwrap();
        for (a, b) in out.vertices.iter().zip(&rig.mesh.vertices) {
            for k in 0..3 {
                assert!((a[k] - (b[k] + (t1[k] + t2[k]) / 2.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn unknown_joint_is_an_error() {
        let sk = two_joint_skeleton();
        let rig = RiggedMesh::rigid(tri(), 5).unwrap();
        assert!(matches!(
            lbs_deform(&rig, &sk, &[Transform::identity(); 2]),
            Err(Error::UnknownJoint(5))
        ));
    }

    #[test]
    fn skeleton_validation() {
        let j = |p: Option<usize>| Joint {
            name: "j".into(),
            parent: p,
            bind: Transform::identity(),
        };
        assert!(Skeleton::new(vec![j(None), j(None)]).is_err());
        assert!(Skeleton::new(vec![j(None), j(Some(2)), j(Some(1))]).is_err());
        assert!(Skeleton::new(vec![j(None), j(Some(7))]).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(RiggedMesh::new(tri(), vec![vec![(0, 0.5)]; 3]).is_err());
        assert!(RiggedMesh::new(tri(), vec![vec![(0, 1.5), (1, -0.5)]; 3]).is_err());
        assert!(RiggedMesh::new(tri(), vec![vec![(0, 1.0)]; 2]).is_err());
    }

    #[test]
    fn motion_validation() {
        let err = MotionClip::new(30.0, vec![], 2).unwrap_err();
        assert!(err.to_string().contains("motion has no frames"));
        let mut skew = Transform::identity();
        skew.rotation[(0, 1)] = 0.1;
        assert!(MotionClip::new(30.0, vec![vec![skew, Transform::identity()]], 2).is_err());
    }

    #[test]
    fn motion_parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        std::fs::write(&p, "{\n  \"fps\": 30,\n  \"frames\": [\n    [ {\"rotation\": [1,0,0]\n").unwrap();
        let err = MotionClip::load(&p, 1).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }
}
