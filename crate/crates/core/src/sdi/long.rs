//! Sliding-window generation for clips longer than the model window.

use crate::diffusion::{Codec, Denoiser};
use crate::error::{Error, Result};
use crate::raster::Image;
use crate::sdi::config::SdiConfig;
use crate::sdi::sampler::{sdi_generate, SdiInputs, SdiOutput, SdiRun, StepLog};

/// First frame of each window. Windows advance by `window − overlap`; the
/// last one is pulled back to end on the final frame.
pub fn segment_starts(total: usize, window: usize, overlap: usize) -> Result<Vec<usize>> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must hold at least one frame".into()));
    }
    if overlap >= window {
        return Err(Error::InvalidArgument(format!(
            "overlap ({overlap}) must be smaller than the window ({window})"
        )));
    }
    if total <= window {
        return Ok(vec![0]);
    }
    let stride = window - overlap;
    let mut starts = vec![0];
    while starts.last().unwrap() + window < total {
        let next = (starts.last().unwrap() + stride).min(total - window);
        starts.push(next);
    }
    Ok(starts)
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub seed: u64,
    /// Coarse conditioning the segment was sampled with, after overlap
    /// substitution.
    pub coarse_conditioning: Vec<Image>,
    pub log: Vec<StepLog>,
}

#[derive(Debug, Clone)]
pub struct LongOutput {
    pub frames: Vec<Image>,
    pub c_inpainted: Vec<Image>,
    pub segments: Vec<Segment>,
    /// Full sampler output of the first segment (the only one for short clips).
    pub first: SdiOutput,
}

/// Generates `inputs` window by window. Overlapping slots of each later
/// window are conditioned on the inpainted coarse frames already produced,
/// and keep the frames generated first. Window `i` uses seed `seed + i`.
pub fn generate_long(
    config: SdiConfig,
    v_theta: &dyn Denoiser,
    u_theta: &dyn Denoiser,
    codec: Codec,
    inputs: &SdiInputs,
    window: usize,
    overlap: usize,
) -> Result<LongOutput> {
    inputs.validate()?;
    let total = inputs.frames();
    let starts = segment_starts(total, window, overlap)?;
    let mut frames: Vec<Image> = Vec::with_capacity(total);
    let mut c_inpainted: Vec<Image> = Vec::with_capacity(total);
    let mut segments = Vec::with_capacity(starts.len());
    let mut first = None;
    for (i, &start) in starts.iter().enumerate() {
        let end = (start + window).min(total);
        let mut seg = inputs.slice(start, end);
        let done = frames.len();
        if done > start {
            let shared = done.min(end);
            seg.coarse_masked[..shared - start].clone_from_slice(&c_inpainted[start..shared]);
        }
        let seed = config.seed.wrapping_add(i as u64);
        let cfg = SdiConfig { seed, ..config };
        let coarse_conditioning = seg.coarse_masked.clone();
        let run = SdiRun::new(cfg, v_theta, u_theta, codec, seg)?;
        let out = sdi_generate(&run).map_err(|e| Error::Stage {
            stage: "segment",
            source: Box::new(e),
        })?;
        for g in done.max(start)..end {
            frames.push(out.frames[g - start].clone());
            c_inpainted.push(out.c_inpainted[g - start].clone());
        }
        segments.push(Segment {
            start,
            end,
            seed,
            coarse_conditioning,
            log: out.log.clone(),
        });
        if first.is_none() {
            first = Some(out);
        }
    }
    Ok(LongOutput {
        frames,
        c_inpainted,
        segments,
        first: first.expect("at least one segment"),
    })
}
