//! Command implementations shared by the CLI and the tests.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{Codec, ConditionalOracle, Denoiser, ExternalDenoiser, LatentVideo, OracleDenoiser, ReferenceOracle};
use crate::error::{Error, Result, StageExt};
use crate::fsutil;
use crate::geometry::{hlm_split, marching_cubes, ScalarField3D, SegMap, TriMesh};
use crate::guidance::pose::render_pose_map;
use crate::guidance::sequence::render_frame;
use crate::guidance::{
    backproject_sdi_mask, render_guidance_sequence, GuidanceBundle, MotionClip, OrthoCamera, PoseFrame, Rig,
};
use crate::parallel;
use crate::pipeline::config::{ProjectConfig, RunInfo};
use crate::poisson::{seamless_clone, SolverOptions};
use crate::raster::{BinaryMap, Image};
use crate::sdi::{generate_long, LongOutput, SdiInputs};

/// Output directory layout.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout { root: root.to_path_buf() }
    }

    pub fn hlm(&self) -> PathBuf {
        self.root.join("hlm")
    }

    pub fn guidance(&self) -> PathBuf {
        self.root.join("guidance")
    }

    /// Per-frame deformed meshes and keypoints, written by `animate` only.
    pub fn cache(&self) -> PathBuf {
        self.root.join("cache")
    }

    pub fn frames(&self) -> PathBuf {
        self.root.join("frames")
    }

    pub fn inpainted(&self) -> PathBuf {
        self.root.join("inpainted")
    }

    pub fn latents(&self) -> PathBuf {
        self.root.join("latents")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.toml")
    }

    pub fn edit(&self) -> Layout {
        Layout::new(&self.root.join("edit"))
    }
}

pub fn numbered(dir: &Path, prefix: &str, i: usize, ext: &str) -> PathBuf {
    dir.join(format!("{prefix}_{i:04}.{ext}"))
}

#[derive(Debug, Clone)]
pub struct HlmReport {
    pub written: Vec<PathBuf>,
    /// Set when layering was skipped.
    pub notice: Option<String>,
}

/// Splits the SDF into hair and body meshes. Without both segmentation maps
/// the whole field is meshed as one layer.
pub fn cmd_hlm(cfg: &ProjectConfig) -> Result<HlmReport> {
    let sdf = cfg.require(&cfg.inputs.sdf, "sdf")?;
    let field = ScalarField3D::load(sdf)?;
    let dir = Layout::new(&cfg.output_dir).hlm();
    let (Some(front), Some(right)) = (&cfg.inputs.seg_front, &cfg.inputs.seg_right) else {
        let path = dir.join("merged.ply");
        marching_cubes(&field, 0.0).save_ply(&path)?;
        return Ok(HlmReport {
            written: vec![path],
            notice: Some("no segmentation maps configured; hair layering skipped, wrote a single mesh".into()),
        });
    };
    let layers = hlm_split(&field, &SegMap::load_png(front)?, &SegMap::load_png(right)?)?;
    let mut written = Vec::new();
    for (name, mesh) in [("hair", &layers.hair), ("body", &layers.body), ("merged", &layers.merged)] {
        let path = dir.join(format!("{name}.ply"));
        mesh.save_ply(&path)?;
        written.push(path);
    }
    Ok(HlmReport { written, notice: None })
}

/// Rig, camera and rendered guidance for one configured project.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub rig: Rig,
    pub camera: OrthoCamera,
    pub bundle: GuidanceBundle,
}

/// Reference and contour-free reference, both RGB and at `width × height`.
pub fn load_references(
    reference: Option<&Path>,
    nc_reference: Option<&Path>,
    width: usize,
    height: usize,
) -> Result<(Image, Image)> {
    let reference = reference.ok_or_else(|| Error::InvalidArgument("config is missing `inputs.reference`".into()))?;
    let r = Image::load_png_rgb(reference)?;
    let nc = match nc_reference {
        Some(p) => Image::load_png_rgb(p)?,
        None => {
            log::warn!("no contour-free reference configured; using the reference image for every stage");
            r.clone()
        }
    };
    for (img, path) in [(&r, reference), (&nc, nc_reference.unwrap_or(reference))] {
        if (img.width, img.height) != (width, height) {
            return Err(Error::format(
                path,
                format!(
                    "image is {}x{} but guidance renders at {width}x{height}",
                    img.width, img.height
                ),
            ));
        }
    }
    Ok((r, nc))
}

/// Front and back SDI masks at `width × height`; a missing mask is empty.
pub fn load_masks(front: Option<&Path>, back: Option<&Path>, width: usize, height: usize) -> Result<(BinaryMap, BinaryMap)> {
    let load = |p: Option<&Path>| -> Result<BinaryMap> {
        let Some(p) = p else {
            return Ok(BinaryMap::new(width, height));
        };
        let m = BinaryMap::load_png(p)?;
        if (m.width, m.height) != (width, height) {
            return Err(Error::format(
                p,
                format!(
                    "SDI mask is {}x{} but the reference is {width}x{height}",
                    m.width, m.height
                ),
            ));
        }
        Ok(m)
    };
    Ok((load(front)?, load(back)?))
}

pub fn prepare_guidance(cfg: &ProjectConfig) -> Result<Prepared> {
    cfg.validate()?;
    let rig = Rig::load(cfg.require(&cfg.inputs.rig, "rig")?)?;
    let motion = MotionClip::load(cfg.require(&cfg.inputs.motion, "motion")?, rig.skeleton.len())?;
    let camera = cfg.camera.build(&rig.mesh.mesh)?;
    let (w, h) = (camera.width, camera.height);
    let (reference, nc_reference) = load_references(
        cfg.inputs.reference.as_deref(),
        cfg.inputs.nc_reference.as_deref(),
        w,
        h,
    )?;
    let (m_front, m_back) = load_masks(cfg.inputs.sdi_front.as_deref(), cfg.inputs.sdi_back.as_deref(), w, h)?;
    let bundle = render_guidance_sequence(&rig, &motion, &m_front, &m_back, reference, nc_reference, &camera)?;
    Ok(Prepared { rig, camera, bundle })
}

fn with_alpha(rgb: &Image, alpha: impl Fn(usize, usize) -> bool) -> Image {
    Image::from_fn(rgb.width, rgb.height, 4, |x, y, c| {
        if c == 3 {
            if alpha(x, y) {
                1.0
            } else {
                0.0
            }
        } else {
            rgb.get(x, y, c)
        }
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidArgument(format!("cannot serialize {}: {e}", path.display())))?;
    fsutil::write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&fsutil::read_to_string(path)?).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes `pose_`, `sdi_`, `coarse_` and `coarse_masked_` PNGs per frame and
/// `ref_pose.json`. Coarse colors carry coverage as alpha; masked pixels are
/// fully transparent in the masked sequence.
pub fn write_guidance(dir: &Path, bundle: &GuidanceBundle) -> Result<()> {
    fsutil::create_dir_all(dir)?;
    let results = parallel::map_range(bundle.len(), |i| -> Result<()> {
        let f = &bundle.frames[i];
        bundle.poses[i].save_png(&numbered(dir, "pose", i, "png"))?;
        f.sdi.save_png(&numbered(dir, "sdi", i, "png"))?;
        with_alpha(&f.coarse, |x, y| f.coverage.get(x, y)).save_png(&numbered(dir, "coarse", i, "png"))?;
        with_alpha(&f.coarse_masked, |x, y| f.coverage.get(x, y) && !f.sdi.get(x, y))
            .save_png(&numbered(dir, "coarse_masked", i, "png"))
    });
    results.into_iter().collect::<Result<Vec<_>>>()?;
    write_json(&dir.join("ref_pose.json"), &bundle.ref_pose)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheIndex {
    pub frames: usize,
    pub vertices: usize,
    pub camera: OrthoCamera,
    pub ref_pose: PoseFrame,
}

/// Stores what edit propagation needs to re-render without re-skinning:
/// per-frame deformed vertex positions and keypoints, the camera and the
/// reference pose.
pub fn write_cache(dir: &Path, prepared: &Prepared) -> Result<()> {
    let b = &prepared.bundle;
    fsutil::create_dir_all(dir)?;
    let results = parallel::map_range(b.len(), |i| -> Result<()> {
        b.meshes[i].save_ply(&numbered(dir, "frame", i, "ply"))?;
        write_json(&numbered(dir, "keypoints", i, "json"), &b.pose_frames[i])
    });
    results.into_iter().collect::<Result<Vec<_>>>()?;
    write_json(
        &dir.join("index.json"),
        &CacheIndex {
            frames: b.len(),
            vertices: prepared.rig.mesh.mesh.vertices.len(),
            camera: prepared.camera,
            ref_pose: b.ref_pose.clone(),
        },
    )
}

#[derive(Debug, Clone)]
pub struct GuidanceReport {
    pub dir: PathBuf,
    pub frames: usize,
}

pub fn cmd_render_guidance(cfg: &ProjectConfig) -> Result<GuidanceReport> {
    let prepared = prepare_guidance(cfg)?;
    let dir = Layout::new(&cfg.output_dir).guidance();
    write_guidance(&dir, &prepared.bundle)?;
    Ok(GuidanceReport {
        dir,
        frames: prepared.bundle.len(),
    })
}

/// Builds a denoiser from its config name.
pub fn build_denoiser(spec: &str, codec: Codec, nc_reference: &Image, fill: Option<&Path>) -> Result<Box<dyn Denoiser>> {
    if let Some(path) = spec.strip_prefix("oracle:") {
        return Ok(Box::new(OracleDenoiser::new(LatentVideo::load(Path::new(path))?)?));
    }
    if let Some(cmd) = spec.strip_prefix("external:") {
        return Ok(Box::new(ExternalDenoiser::parse(cmd)?));
    }
    match spec {
        "conditional-oracle" => {
            let fill = match fill {
                Some(p) => LatentVideo::load(p)?,
                None => codec.encode(&[nc_reference.with_channels(3)])?,
            };
            Ok(Box::new(ConditionalOracle { fill, codec }))
        }
        "reference-oracle" => Ok(Box::new(ReferenceOracle { codec })),
        _ => Err(Error::InvalidArgument(format!(
            "unknown denoiser `{spec}` (expected conditional-oracle, reference-oracle, oracle:<latv> or external:<command>)"
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct AnimateReport {
    pub layout: Layout,
    pub output: LongOutput,
}

/// The CSV step log: one row per logged estimate and frame.
pub fn log_csv(output: &LongOutput) -> String {
    let mut s = String::from("segment,stage,step,frame,norm\n");
    for (i, seg) in output.segments.iter().enumerate() {
        for entry in &seg.log {
            for (n, norm) in entry.norms.iter().enumerate() {
                let _ = writeln!(s, "{i},{},{},{},{norm:?}", entry.stage, entry.step, seg.start + n);
            }
        }
    }
    s
}

/// Samples `inputs` and writes frames, inpainted coarse frames, the step
/// log and a manifest under `layout`.
pub fn run_sampling(cfg: &ProjectConfig, inputs: SdiInputs, layout: Layout, command: &str) -> Result<AnimateReport> {
    let codec = cfg.model.codec()?;
    let v = build_denoiser(&cfg.model.v_theta, codec, &inputs.nc_reference, cfg.model.fill.as_deref())?;
    let u = build_denoiser(&cfg.model.u_theta, codec, &inputs.nc_reference, cfg.model.fill.as_deref())?;
    let output = generate_long(cfg.sampler, v.as_ref(), u.as_ref(), codec, &inputs, cfg.model.window, cfg.model.overlap)
        .stage("sampling")?;

    let (frames_dir, inpainted_dir) = (layout.frames(), layout.inpainted());
    let results = parallel::map_range(output.frames.len(), |i| -> Result<()> {
        output.frames[i].save_png(&numbered(&frames_dir, "frame", i, "png"))?;
        output.c_inpainted[i].save_png(&numbered(&inpainted_dir, "inpainted", i, "png"))
    });
    results.into_iter().collect::<Result<Vec<_>>>()?;
    if cfg.model.log_csv {
        fsutil::write_atomic(&layout.root.join("log.csv"), log_csv(&output).as_bytes())?;
    }
    if cfg.model.dump_latents {
        let dir = layout.latents();
        let first = &output.first;
        first.noise.save(&dir.join("noise.latv"))?;
        first.z_tau2.save(&dir.join("z_tau2.latv"))?;
        first.blend.save(&dir.join("blend.latv"))?;
        first.latents.save(&dir.join("final.latv"))?;
    }

    let mut manifest = cfg.clone();
    manifest.output_dir = layout.root.clone();
    manifest.run = Some(RunInfo {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        frames: output.frames.len(),
        segments: output.segments.iter().map(|s| [s.start, s.end]).collect(),
        v_theta: v.describe(),
        u_theta: u.describe(),
    });
    manifest.save(&layout.manifest())?;
    Ok(AnimateReport { layout, output })
}

pub fn sdi_inputs(bundle: &GuidanceBundle) -> SdiInputs {
    SdiInputs {
        reference: bundle.ref_image.clone(),
        nc_reference: bundle.nc_ref_image.clone(),
        ref_pose: bundle.ref_pose.clone(),
        poses: bundle.poses.clone(),
        coarse_masked: bundle.coarse_masked(),
        masks: bundle.sdi(),
    }
}

/// Renders guidance, caches the deformed geometry and samples the clip.
pub fn cmd_animate(cfg: &ProjectConfig) -> Result<AnimateReport> {
    let prepared = prepare_guidance(cfg).stage("guidance")?;
    let layout = Layout::new(&cfg.output_dir);
    write_guidance(&layout.guidance(), &prepared.bundle)?;
    write_cache(&layout.cache(), &prepared)?;
    run_sampling(cfg, sdi_inputs(&prepared.bundle), layout, "animate")
}

/// Replacement inputs for edit propagation; unset fields keep the
/// configured value.
#[derive(Debug, Clone, Default)]
pub struct EditRequest {
    pub reference: Option<PathBuf>,
    pub nc_reference: Option<PathBuf>,
    pub sdi_front: Option<PathBuf>,
    pub sdi_back: Option<PathBuf>,
}

/// Re-renders SDI masks and masked coarse colors over the cached geometry,
/// swaps in the edited references and samples again into `edit/`. The
/// geometry cache is only read.
pub fn cmd_edit_propagate(cfg: &ProjectConfig, edit: &EditRequest) -> Result<AnimateReport> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let cache = layout.cache();
    let index_path = cache.join("index.json");
    if !index_path.exists() {
        return Err(Error::InvalidArgument(format!(
            "no geometry cache at {}; run `animate` first",
            cache.display()
        )));
    }
    let index: CacheIndex = read_json(&index_path)?;

    let mut cfg = cfg.clone();
    let i = &mut cfg.inputs;
    for (slot, new) in [
        (&mut i.reference, &edit.reference),
        (&mut i.nc_reference, &edit.nc_reference),
        (&mut i.sdi_front, &edit.sdi_front),
        (&mut i.sdi_back, &edit.sdi_back),
    ] {
        if new.is_some() {
            *slot = new.clone();
        }
    }

    let rig = Rig::load(cfg.require(&cfg.inputs.rig, "rig")?)?;
    let rest = &rig.mesh.mesh;
    if rest.vertices.len() != index.vertices {
        return Err(Error::format(
            &index_path,
            format!(
                "cache holds {} vertices per frame but the rig mesh has {}",
                index.vertices,
                rest.vertices.len()
            ),
        ));
    }
    let camera = index.camera;
    let (w, h) = (camera.width, camera.height);
    let (reference, nc_reference) = load_references(
        cfg.inputs.reference.as_deref(),
        cfg.inputs.nc_reference.as_deref(),
        w,
        h,
    )?;
    let (m_front, m_back) = load_masks(cfg.inputs.sdi_front.as_deref(), cfg.inputs.sdi_back.as_deref(), w, h)?;
    let painted = backproject_sdi_mask(rest, &camera, &m_front, &m_back);

    let per_frame = parallel::map_range(index.frames, |f| -> Result<_> {
        let ply = numbered(&cache, "frame", f, "ply");
        let cached = TriMesh::load_ply(&ply)?;
        if cached.vertices.len() != rest.vertices.len() {
            return Err(Error::format(&ply, "vertex count differs from the rig mesh"));
        }
        let mut mesh = painted.clone();
        mesh.vertices = cached.vertices;
        let guidance = render_frame(&mesh, &camera)?;
        let pose: PoseFrame = read_json(&numbered(&cache, "keypoints", f, "json"))?;
        let map = render_pose_map(&pose, w, h);
        Ok((mesh, guidance, pose, map))
    });
    let mut bundle = GuidanceBundle {
        ref_image: reference,
        nc_ref_image: nc_reference,
        ref_pose: index.ref_pose.clone(),
        pose_frames: Vec::new(),
        poses: Vec::new(),
        frames: Vec::new(),
        meshes: Vec::new(),
    };
    for r in per_frame {
        let (mesh, guidance, pose, map) = r?;
        bundle.meshes.push(mesh);
        bundle.frames.push(guidance);
        bundle.pose_frames.push(pose);
        bundle.poses.push(map);
    }

    let out = layout.edit();
    write_guidance(&out.guidance(), &bundle)?;
    run_sampling(&cfg, sdi_inputs(&bundle), out, "edit-propagate")
}

/// Seamlessly clones `source` into `target` inside `mask` and writes RGB.
pub fn cmd_poisson_blend(target: &Path, source: &Path, mask: &Path, out: &Path, opts: SolverOptions) -> Result<Image> {
    let t = Image::load_png_rgb(target)?;
    let s = Image::load_png_rgb(source)?;
    let m = BinaryMap::load_png(mask)?;
    let blended = seamless_clone(&t, &s, &m, opts)?;
    blended.save_png(out)?;
    Ok(blended)
}
