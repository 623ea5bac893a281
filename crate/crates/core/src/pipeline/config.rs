//! Project configuration: one TOML file, paths relative to its directory,
//! with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::Codec;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::TriMesh;
use crate::guidance::OrthoCamera;
use crate::sdi::{BlendMode, SdiConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    /// Reference drawing with contour lines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Contour-free reference. Falls back to `reference` with a warning.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nc_reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seg_front: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seg_right: Option<PathBuf>,
    /// Signed distance grid (SDF1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdf: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rig: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub motion: Option<PathBuf>,
    /// SDI masks drawn on the front and back views. Missing masks are empty.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdi_front: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sdi_back: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub width: usize,
    pub height: usize,
    /// Explicit `[left, right, bottom, top]` view volume. Without it the view
    /// is fitted to the rest mesh.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frustum: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eye_z: Option<f64>,
    /// Fractional border around the fitted mesh.
    pub margin: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 768,
            height: 512,
            frustum: None,
            eye_z: None,
            margin: 0.1,
        }
    }
}

impl CameraConfig {
    pub fn build(&self, rest: &TriMesh) -> Result<OrthoCamera> {
        let mut cam = match self.frustum {
            Some([l, r, b, t]) => OrthoCamera::new(l, r, b, t, self.width, self.height)?,
            None => {
                let (lo, hi) = rest
                    .bounds()
                    .ok_or_else(|| Error::InvalidArgument("cannot fit a camera to an empty mesh".into()))?;
                OrthoCamera::fit(lo, hi, self.width, self.height, self.margin)?
            }
        };
        if let Some(z) = self.eye_z {
            cam.eye_z = z;
        }
        cam.validate()?;
        Ok(cam)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// `identity` or `avgpool:N`.
    pub codec: String,
    /// `conditional-oracle`, `reference-oracle`, `oracle:<latv>` or
    /// `external:<command>`.
    pub v_theta: String,
    pub u_theta: String,
    /// LATV latent the conditional oracle fills masked regions with.
    /// Defaults to the encoded contour-free reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill: Option<PathBuf>,
    pub window: usize,
    pub overlap: usize,
    /// Write stage snapshots of the first window as LATV files.
    pub dump_latents: bool,
    /// Write the per-step estimate norms as CSV.
    pub log_csv: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            codec: "identity".into(),
            v_theta: "conditional-oracle".into(),
            u_theta: "reference-oracle".into(),
            fill: None,
            window: 16,
            overlap: 4,
            dump_latents: false,
            log_csv: true,
        }
    }
}

impl ModelConfig {
    pub fn codec(&self) -> Result<Codec> {
        self.codec.parse()
    }
}

/// Provenance echoed into run manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub frames: usize,
    pub segments: Vec<[usize; 2]>,
    pub v_theta: String,
    pub u_theta: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub inputs: InputPaths,
    #[serde(default)]
    pub camera: CameraConfig,
    #[serde(default)]
    pub sampler: SdiConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig {
            output_dir: default_output_dir(),
            inputs: InputPaths::default(),
            camera: CameraConfig::default(),
            sampler: SdiConfig::default(),
            model: ModelConfig::default(),
            run: None,
        }
    }
}

/// Command-line values that win over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub blend_mode: Option<BlendMode>,
    pub output_dir: Option<PathBuf>,
}

impl ProjectConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Reads a config and makes every path absolute against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = ProjectConfig::parse(&fsutil::read_to_string(path)?, path)?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let base = std::path::absolute(base).map_err(|e| Error::io(base, e))?;
        cfg.resolve(&base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut self.output_dir);
        let i = &mut self.inputs;
        for p in [
            &mut i.reference,
            &mut i.nc_reference,
            &mut i.seg_front,
            &mut i.seg_right,
            &mut i.sdf,
            &mut i.rig,
            &mut i.motion,
            &mut i.sdi_front,
            &mut i.sdi_back,
            &mut self.model.fill,
        ]
        .into_iter()
        .flatten()
        {
            abs(p);
        }
        for spec in [&mut self.model.v_theta, &mut self.model.u_theta] {
            if let Some(rest) = spec.strip_prefix("oracle:") {
                let mut p = PathBuf::from(rest);
                abs(&mut p);
                *spec = format!("oracle:{}", p.display());
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.sampler.seed = s;
        }
        if let Some(a) = o.alpha {
            self.sampler.alpha = a;
        }
        if let Some(b) = o.beta {
            self.sampler.beta = b;
        }
        if let Some(m) = o.blend_mode {
            self.sampler.blend_mode = m;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        let codec = self.model.codec()?;
        codec.check_dims(self.camera.width, self.camera.height)?;
        if self.camera.width == 0 || self.camera.height == 0 {
            return Err(Error::InvalidArgument("camera resolution must be positive".into()));
        }
        if self.model.window == 0 || self.model.overlap >= self.model.window {
            return Err(Error::InvalidArgument(format!(
                "window ({}) must be positive and larger than the overlap ({})",
                self.model.window, self.model.overlap
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::InvalidArgument(format!("cannot serialize config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_toml()?.as_bytes())
    }

    /// A required input path, or a validation error naming the key.
    pub fn require<'a>(&self, p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        let p = p
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("config is missing `inputs.{key}`")))?;
        if !p.exists() {
            return Err(Error::io(
                p,
                std::io::Error::new(std::io::ErrorKind::NotFound, format!("`inputs.{key}` does not exist")),
            ));
        }
        Ok(p)
    }
}
