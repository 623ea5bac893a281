//! The velocity-predictor contract and analytic stand-ins for trained
//! networks.

use std::borrow::Cow;
use std::process::Command;

use crate::diffusion::codec::{downsample_mask, Codec};
use crate::diffusion::latent::LatentVideo;
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::guidance::PoseFrame;
use crate::raster::{BinaryMap, Image};

/// Everything a denoiser may look at besides the noisy latent.
#[derive(Debug, Clone)]
pub struct Conditioning {
    /// RGB reference image.
    pub reference: Image,
    pub ref_pose: PoseFrame,
    pub poses: Vec<Image>,
    /// Coarse color frames (masked or inpainted), when the model takes them.
    pub coarse: Option<Vec<Image>>,
    /// Enhancement masks; absent means all-zero.
    pub masks: Option<Vec<BinaryMap>>,
}

impl Conditioning {
    pub fn frames(&self) -> usize {
        self.poses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.poses.len();
        if let Some(c) = &self.coarse {
            if c.len() != n {
                return Err(Error::shape("conditioning coarse frames", n, c.len()));
            }
        }
        if let Some(m) = &self.masks {
            if m.len() != n {
                return Err(Error::shape("conditioning mask frames", n, m.len()));
            }
        }
        Ok(())
    }

    /// Copy without coarse frames or masks, as seen by a model with no coarse
    /// input.
    pub fn without_coarse(&self) -> Conditioning {
        Conditioning {
            coarse: None,
            masks: None,
            ..self.clone()
        }
    }
}

/// Predicts the velocity `v` for a noisy latent at sampling step `t`.
pub trait Denoiser: Send + Sync {
    fn predict_velocity(
        &self,
        z_t: &LatentVideo,
        t: usize,
        schedule: &NoiseSchedule,
        cond: &Conditioning,
    ) -> Result<LatentVideo>;

    /// Short description recorded in run manifests.
    fn describe(&self) -> String;
}

/// The velocity whose latent estimate is exactly `target`:
/// `v = (α_t z_t − target) / σ_t`, and zero at `σ_t = 0`.
pub fn oracle_velocity(z_t: &LatentVideo, target: &LatentVideo, t: usize, schedule: &NoiseSchedule) -> Result<LatentVideo> {
    z_t.check_shape(target, "oracle denoiser")?;
    let (a, s) = (schedule.alpha(t), schedule.sigma(t));
    if s == 0.0 {
        return Ok(LatentVideo::zeros(z_t.frames, z_t.channels, z_t.height, z_t.width));
    }
    Ok(LatentVideo::from_fn_like(z_t, |i| (a * z_t.data[i] - target.data[i]) / s))
}

/// `target` repeated over `frames` when it holds a single frame.
fn broadcast(target: &LatentVideo, frames: usize) -> Cow<'_, LatentVideo> {
    if target.frames == 1 && frames > 1 {
        let mut data = Vec::with_capacity(frames * target.len());
        for _ in 0..frames {
            data.extend_from_slice(&target.data);
        }
        Cow::Owned(LatentVideo {
            frames,
            data,
            ..target.slice_frames(0, 0)
        })
    } else {
        Cow::Borrowed(target)
    }
}

/// Always denoises toward a fixed latent; a one-frame target applies to
/// every frame.
#[derive(Debug, Clone)]
pub struct OracleDenoiser {
    pub target: LatentVideo,
}

impl OracleDenoiser {
    pub fn new(target: LatentVideo) -> Result<Self> {
        target.validate()?;
        Ok(OracleDenoiser { target })
    }
}

impl Denoiser for OracleDenoiser {
    fn predict_velocity(&self, z_t: &LatentVideo, t: usize, schedule: &NoiseSchedule, _: &Conditioning) -> Result<LatentVideo> {
        oracle_velocity(z_t, &broadcast(&self.target, z_t.frames), t, schedule)
    }

    fn describe(&self) -> String {
        format!("oracle({})", self.target.shape_str())
    }
}

/// Denoises toward the encoded coarse frames, replaced by `fill` wherever
/// the (max-pooled) conditioning mask is set. A one-frame `fill` applies to
/// every frame.
#[derive(Debug, Clone)]
pub struct ConditionalOracle {
    pub fill: LatentVideo,
    pub codec: Codec,
}

impl ConditionalOracle {
    pub fn target(&self, cond: &Conditioning) -> Result<LatentVideo> {
        let coarse = cond
            .coarse
            .as_ref()
            .ok_or(Error::MissingConditioning("coarse frames"))?;
        let rgb: Vec<Image> = coarse.iter().map(|c| c.with_channels(3)).collect();
        let enc = self.codec.encode(&rgb)?;
        let fill = broadcast(&self.fill, enc.frames);
        enc.check_shape(&fill, "conditional oracle fill")?;
        let Some(masks) = &cond.masks else {
            return Ok(enc);
        };
        let down = masks
            .iter()
            .map(|m| downsample_mask(m, self.codec.factor()))
            .collect::<Result<Vec<_>>>()?;
        let (h, w) = (enc.height, enc.width);
        let plane = h * w;
        Ok(LatentVideo::from_fn_like(&enc, |i| {
            let n = i / enc.frame_len();
            let p = i % plane;
            if down[n].bits[p] {
                fill.data[i]
            } else {
                enc.data[i]
            }
        }))
    }
}

impl Denoiser for ConditionalOracle {
    fn predict_velocity(&self, z_t: &LatentVideo, t: usize, schedule: &NoiseSchedule, cond: &Conditioning) -> Result<LatentVideo> {
        oracle_velocity(z_t, &self.target(cond)?, t, schedule)
    }

    fn describe(&self) -> String {
        format!("conditional-oracle(fill {}, codec {})", self.fill.shape_str(), self.codec)
    }
}

/// Denoises every frame toward the encoded reference image: a stand-in for
/// a model that redraws the character freely.
#[derive(Debug, Clone)]
pub struct ReferenceOracle {
    pub codec: Codec,
}

impl Denoiser for ReferenceOracle {
    fn predict_velocity(&self, z_t: &LatentVideo, t: usize, schedule: &NoiseSchedule, cond: &Conditioning) -> Result<LatentVideo> {
        let frames = vec![cond.reference.with_channels(3); z_t.frames];
        oracle_velocity(z_t, &self.codec.encode(&frames)?, t, schedule)
    }

    fn describe(&self) -> String {
        format!("reference-oracle(codec {})", self.codec)
    }
}

/// Runs an external program per step:
/// `<program> <args…> <in.latv> <out.latv> <step> <alpha> <sigma>`.
/// The program reads `z_t` and writes the predicted velocity. Latents cross
/// the process boundary as f32.
#[derive(Debug, Clone)]
pub struct ExternalDenoiser {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalDenoiser {
    pub fn parse(command: &str) -> Result<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidArgument("external denoiser command is empty".into()))?;
        Ok(ExternalDenoiser {
            program,
            args: parts.collect(),
        })
    }
}

impl Denoiser for ExternalDenoiser {
    fn predict_velocity(&self, z_t: &LatentVideo, t: usize, schedule: &NoiseSchedule, _: &Conditioning) -> Result<LatentVideo> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let input = dir.path().join("z_t.latv");
        let output = dir.path().join("v.latv");
        z_t.save(&input)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .arg(t.to_string())
            .arg(format!("{:?}", schedule.alpha(t)))
            .arg(format!("{:?}", schedule.sigma(t)))
            .status()
            .map_err(|e| Error::io(&self.program, e))?;
        if !status.success() {
            return Err(Error::InvalidArgument(format!(
                "external denoiser `{}` exited with {status}",
                self.program
            )));
        }
        let v = LatentVideo::load(&output)?;
        z_t.check_shape(&v, "external denoiser output")?;
        Ok(v)
    }

    fn describe(&self) -> String {
        format!("external({} {})", self.program, self.args.join(" "))
    }
}
