//! Three-phase sampling: free denoising to τ₂, dual-chain estimate blending
//! to τ₁, Poisson inpainting of the coarse frames, then a full re-denoise of
//! the original noise conditioned on the inpainted frames.

use crate::diffusion::{
    ddim_step, downsample_mask, latent_estimate, make_schedule, Codec, Conditioning, Denoiser, LatentVideo,
    NoiseSchedule,
};
use crate::error::{Error, Result, StageExt};
use crate::guidance::PoseFrame;
use crate::parallel;
use crate::poisson::{seamless_clone, SolverOptions};
use crate::raster::{BinaryMap, Image};
use crate::sdi::config::{BlendMode, SdiConfig};

/// Per-element `(1 − m)·est_v + m·est_u` with binary `m` broadcast over
/// channels.
pub fn blend_estimates(est_v: &LatentVideo, est_u: &LatentVideo, masks: &[BinaryMap]) -> Result<LatentVideo> {
    est_v.check_shape(est_u, "blend_estimates")?;
    if masks.len() != est_v.frames {
        return Err(Error::shape("blend_estimates masks", est_v.frames, masks.len()));
    }
    for m in masks {
        if m.width != est_v.width || m.height != est_v.height {
            return Err(Error::shape(
                "blend_estimates mask",
                format!("{}x{}", est_v.width, est_v.height),
                format!("{}x{}", m.width, m.height),
            ));
        }
    }
    let plane = est_v.height * est_v.width;
    let fl = est_v.frame_len();
    Ok(LatentVideo::from_fn_like(est_v, |i| {
        if masks[i / fl].bits[i % plane] {
            est_u.data[i]
        } else {
            est_v.data[i]
        }
    }))
}

/// Sampler inputs shared by every stage.
#[derive(Debug, Clone)]
pub struct SdiInputs {
    /// Reference with contour lines, used for the final pass.
    pub reference: Image,
    /// Contour-free reference, used while dynamics are injected.
    pub nc_reference: Image,
    pub ref_pose: PoseFrame,
    pub poses: Vec<Image>,
    pub coarse_masked: Vec<Image>,
    pub masks: Vec<BinaryMap>,
}

impl SdiInputs {
    pub fn frames(&self) -> usize {
        self.poses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.poses.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no frames to generate".into()));
        }
        if self.coarse_masked.len() != n {
            return Err(Error::shape("coarse frames", n, self.coarse_masked.len()));
        }
        if self.masks.len() != n {
            return Err(Error::shape("SDI mask frames", n, self.masks.len()));
        }
        let r = &self.reference;
        let res = |w: usize, h: usize| format!("{w}x{h}");
        let mut dims = vec![("contour-free reference", self.nc_reference.width, self.nc_reference.height)];
        dims.extend(self.poses.iter().map(|p| ("pose map", p.width, p.height)));
        dims.extend(self.coarse_masked.iter().map(|c| ("coarse frame", c.width, c.height)));
        dims.extend(self.masks.iter().map(|m| ("SDI mask", m.width, m.height)));
        for (what, w, h) in dims {
            if (w, h) != (r.width, r.height) {
                return Err(Error::InvalidArgument(format!(
                    "{what} is {} but the reference is {}",
                    res(w, h),
                    res(r.width, r.height)
                )));
            }
        }
        Ok(())
    }

    /// Frames `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> SdiInputs {
        SdiInputs {
            reference: self.reference.clone(),
            nc_reference: self.nc_reference.clone(),
            ref_pose: self.ref_pose.clone(),
            poses: self.poses[start..end].to_vec(),
            coarse_masked: self.coarse_masked[start..end].to_vec(),
            masks: self.masks[start..end].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepLog {
    pub stage: &'static str,
    /// Sampling step the estimate was taken at.
    pub step: usize,
    /// RMS of the noise-free estimate per frame.
    pub norms: Vec<f64>,
}

/// One sampler invocation.
pub struct SdiRun<'a> {
    pub config: SdiConfig,
    pub schedule: NoiseSchedule,
    pub v_theta: &'a dyn Denoiser,
    pub u_theta: &'a dyn Denoiser,
    pub codec: Codec,
    pub inputs: SdiInputs,
    /// `z_T`, drawn once and reused by stage 3.
    pub noise: LatentVideo,
    /// Latent-resolution masks.
    pub masks_down: Vec<BinaryMap>,
}

impl<'a> SdiRun<'a> {
    pub fn new(
        config: SdiConfig,
        v_theta: &'a dyn Denoiser,
        u_theta: &'a dyn Denoiser,
        codec: Codec,
        inputs: SdiInputs,
    ) -> Result<Self> {
        config.validate()?;
        inputs.validate()?;
        let (w, h) = codec.latent_dims(inputs.reference.width, inputs.reference.height)?;
        let noise = LatentVideo::gaussian(inputs.frames(), 3, h, w, config.seed);
        Self::with_noise(config, v_theta, u_theta, codec, inputs, noise)
    }

    pub fn with_noise(
        config: SdiConfig,
        v_theta: &'a dyn Denoiser,
        u_theta: &'a dyn Denoiser,
        codec: Codec,
        inputs: SdiInputs,
        noise: LatentVideo,
    ) -> Result<Self> {
        config.validate()?;
        inputs.validate()?;
        let (w, h) = codec.latent_dims(inputs.reference.width, inputs.reference.height)?;
        if noise.shape() != [inputs.frames(), noise.channels, h, w] {
            return Err(Error::shape(
                "initial noise",
                format!("{}x*x{h}x{w}", inputs.frames()),
                noise.shape_str(),
            ));
        }
        let schedule = make_schedule(config.schedule, config.train_steps)?.subsample(config.steps)?;
        let masks_down = inputs
            .masks
            .iter()
            .map(|m| downsample_mask(m, codec.factor()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SdiRun {
            config,
            schedule,
            v_theta,
            u_theta,
            codec,
            inputs,
            noise,
            masks_down,
        })
    }

    /// v_θ's view during stages 1–2: contour-free reference, masked coarse
    /// frames and their masks.
    pub fn injection_conditioning(&self) -> Conditioning {
        Conditioning {
            reference: self.inputs.nc_reference.clone(),
            ref_pose: self.inputs.ref_pose.clone(),
            poses: self.inputs.poses.clone(),
            coarse: Some(self.inputs.coarse_masked.clone()),
            masks: Some(self.inputs.masks.clone()),
        }
    }

    /// v_θ's view during the final pass: contoured reference, the given coarse
    /// frames and an all-zero mask.
    pub fn refine_conditioning(&self, coarse: &[Image]) -> Conditioning {
        let r = &self.inputs.reference;
        Conditioning {
            reference: r.clone(),
            ref_pose: self.inputs.ref_pose.clone(),
            poses: self.inputs.poses.clone(),
            coarse: Some(coarse.to_vec()),
            masks: Some(vec![BinaryMap::new(r.width, r.height); self.inputs.frames()]),
        }
    }

    fn estimate(&self, d: &dyn Denoiser, z: &LatentVideo, k: usize, cond: &Conditioning) -> Result<LatentVideo> {
        let v = d.predict_velocity(z, k, &self.schedule, cond)?;
        z.check_shape(&v, "denoiser output")?;
        latent_estimate(z, &v, k, &self.schedule)
    }

    /// DDIM from `z` at step `from` down to step `to`.
    #[allow(clippy::too_many_arguments)]
    fn denoise(
        &self,
        d: &dyn Denoiser,
        mut z: LatentVideo,
        from: usize,
        to: usize,
        cond: &Conditioning,
        stage: &'static str,
        log: &mut Vec<StepLog>,
    ) -> Result<LatentVideo> {
        for k in (to + 1..=from).rev() {
            let est = self.estimate(d, &z, k, cond)?;
            log.push(StepLog {
                stage,
                step: k,
                norms: est.frame_rms(),
            });
            z = ddim_step(&z, &est, k, k - 1, &self.schedule)?;
        }
        Ok(z)
    }

    /// Latents at τ₂.
    pub fn stage1(&self, log: &mut Vec<StepLog>) -> Result<LatentVideo> {
        let cond = self.injection_conditioning();
        self.denoise(self.v_theta, self.noise.clone(), self.config.steps, self.config.tau2(), &cond, "stage1", log)
    }

    /// Blended noise-free estimate from the last step before τ₁.
    pub fn stage2(&self, z_tau2: &LatentVideo, log: &mut Vec<StepLog>) -> Result<LatentVideo> {
        let cond_v = self.injection_conditioning();
        let cond_u = cond_v.without_coarse();
        let mut z_v = z_tau2.clone();
        let mut z_u = z_tau2.clone();
        let mut blend = None;
        for k in (self.config.tau1() + 1..=self.config.tau2()).rev() {
            let (est_v, est_u) = parallel::join(
                || self.estimate(self.v_theta, &z_v, k, &cond_v),
                || self.estimate(self.u_theta, &z_u, k, &cond_u),
            );
            let (est_v, est_u) = (est_v?, est_u?);
            let b = blend_estimates(&est_v, &est_u, &self.masks_down)?;
            for (stage, e) in [("stage2_v", &est_v), ("stage2_u", &est_u), ("stage2_blend", &b)] {
                log.push(StepLog {
                    stage,
                    step: k,
                    norms: e.frame_rms(),
                });
            }
            match self.config.blend_mode {
                BlendMode::DdimConsistent => {
                    let (nv, nu) = parallel::join(
                        || ddim_step(&z_v, &b, k, k - 1, &self.schedule),
                        || ddim_step(&z_u, &b, k, k - 1, &self.schedule),
                    );
                    z_v = nv?;
                    z_u = nu?;
                }
                BlendMode::Literal => {
                    z_v = b.clone();
                    z_u = b.clone();
                }
            }
            blend = Some(b);
        }
        blend.ok_or_else(|| Error::InvalidArgument("stage 2 covers no steps".into()))
    }

    /// Final latents from the stored initial noise.
    pub fn stage3(&self, coarse: &[Image], log: &mut Vec<StepLog>) -> Result<LatentVideo> {
        let cond = self.refine_conditioning(coarse);
        self.denoise(self.v_theta, self.noise.clone(), self.config.steps, 0, &cond, "stage3", log)
    }
}

/// Poisson-blends decoded content into the masked coarse frames.
pub fn inpaint_coarse(
    coarse_masked: &[Image],
    decoded: &[Image],
    masks: &[BinaryMap],
    opts: SolverOptions,
) -> Result<Vec<Image>> {
    if decoded.len() != coarse_masked.len() || masks.len() != coarse_masked.len() {
        return Err(Error::shape(
            "inpaint_coarse",
            coarse_masked.len(),
            format!("{} decoded, {} masks", decoded.len(), masks.len()),
        ));
    }
    parallel::map_range(coarse_masked.len(), |n| {
        let target = coarse_masked[n].with_channels(3);
        seamless_clone(&target, &decoded[n], &masks[n], opts)
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone)]
pub struct SdiOutput {
    pub frames: Vec<Image>,
    pub latents: LatentVideo,
    pub c_inpainted: Vec<Image>,
    pub blend: LatentVideo,
    pub z_tau2: LatentVideo,
    pub noise: LatentVideo,
    pub log: Vec<StepLog>,
}

pub fn sdi_generate(run: &SdiRun) -> Result<SdiOutput> {
    let mut log = Vec::new();
    let z_tau2 = run.stage1(&mut log).stage("stage 1")?;
    let blend = run.stage2(&z_tau2, &mut log).stage("stage 2")?;
    let decoded = run.codec.decode(&blend);
    let c_inpainted = inpaint_coarse(&run.inputs.coarse_masked, &decoded, &run.inputs.masks, run.config.solver())
        .stage("inpainting")?;
    let latents = run.stage3(&c_inpainted, &mut log).stage("stage 3")?;
    Ok(SdiOutput {
        frames: run.codec.decode(&latents),
        latents,
        c_inpainted,
        blend,
        z_tau2,
        noise: run.noise.clone(),
        log,
    })
}

/// A single conditioned DDIM pass over the run's noise, with no dynamics
/// injection.
pub fn conditioned_run(run: &SdiRun, coarse: &[Image]) -> Result<Vec<Image>> {
    let latents = run.stage3(coarse, &mut Vec::new())?;
    Ok(run.codec.decode(&latents))
}

/// Schedule-free helper for tests and tools: `S` DDIM steps with one
/// denoiser.
pub fn sample(
    d: &dyn Denoiser,
    noise: &LatentVideo,
    schedule: &NoiseSchedule,
    cond: &Conditioning,
) -> Result<LatentVideo> {
    let mut z = noise.clone();
    for k in (1..=schedule.steps()).rev() {
        let v = d.predict_velocity(&z, k, schedule, cond)?;
        let est = latent_estimate(&z, &v, k, schedule)?;
        z = ddim_step(&z, &est, k, k - 1, schedule)?;
    }
    Ok(z)
}
