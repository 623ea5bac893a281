use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Front-view orthographic camera looking down −z.
///
/// World `x` maps to image columns, world `y` to image rows (top row = `top`).
/// View depth is `eye_z − z`: smaller depth is nearer the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthoCamera {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub eye_z: f64,
}

impl OrthoCamera {
    pub fn new(left: f64, right: f64, bottom: f64, top: f64, width: usize, height: usize) -> Result<Self> {
        let cam = OrthoCamera {
            left,
            right,
            bottom,
            top,
            width,
            height,
            eye_z: 0.0,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// One world unit per pixel with the origin at the bottom-left corner.
    pub fn pixel_aligned(width: usize, height: usize) -> Self {
        OrthoCamera {
            left: 0.0,
            right: width as f64,
            bottom: 0.0,
            top: height as f64,
            width,
            height,
            eye_z: 0.0,
        }
    }

    /// Frames an x/y bounding box with square pixels and a relative margin.
    pub fn fit(lo: [f64; 3], hi: [f64; 3], width: usize, height: usize, margin: f64) -> Result<Self> {
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        let scale = ((hi[0] - lo[0]) / width as f64)
            .max((hi[1] - lo[1]) / height as f64)
            .max(f64::MIN_POSITIVE)
            * (1.0 + margin);
        let hw = 0.5 * scale * width as f64;
        let hh = 0.5 * scale * height as f64;
        let mut cam = OrthoCamera::new(cx - hw, cx + hw, cy - hh, cy + hh, width, height)?;
        cam.eye_z = hi[2] + 1.0;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.right > self.left) || !(self.top > self.bottom) {
            return Err(Error::InvalidArgument(format!(
                "degenerate camera frustum {:?}",
                self
            )));
        }
        Ok(())
    }

    /// Continuous image coordinates; pixel `(i, j)` covers `[i, i+1) × [j, j+1)`.
    #[inline]
    pub fn to_screen(&self, p: [f64; 3]) -> [f64; 2] {
        [
            (p[0] - self.left) / (self.right - self.left) * self.width as f64,
            (self.top - p[1]) / (self.top - self.bottom) * self.height as f64,
        ]
    }

    #[inline]
    pub fn to_world_xy(&self, s: [f64; 2]) -> [f64; 2] {
        [
            self.left + s[0] / self.width as f64 * (self.right - self.left),
            self.top - s[1] / self.height as f64 * (self.top - self.bottom),
        ]
    }

    #[inline]
    pub fn depth(&self, z: f64) -> f64 {
        self.eye_z - z
    }

    #[inline]
    pub fn world_z(&self, depth: f64) -> f64 {
        self.eye_z - depth
    }
}
