use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fsutil::{self, LeReader};
use crate::parallel;

pub const LATV_MAGIC: &[u8; 4] = b"LATV";

/// `N × C × h × w` latent tensor, frame-major then channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVideo {
    pub frames: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl LatentVideo {
    pub fn zeros(frames: usize, channels: usize, height: usize, width: usize) -> Self {
        LatentVideo {
            frames,
            channels,
            height,
            width,
            data: vec![0.0; frames * channels * height * width],
        }
    }

    pub fn new(frames: usize, channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let v = LatentVideo {
            frames,
            channels,
            height,
            width,
            data,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 || self.channels == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument(format!("latent shape {} has a zero dimension", self.shape_str())));
        }
        if self.data.len() != self.len() {
            return Err(Error::shape("LatentVideo", self.len(), self.data.len()));
        }
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("latent holds non-finite values".into()));
        }
        Ok(())
    }

    /// Same-shaped latent built elementwise, possibly in parallel.
    pub fn from_fn_like(like: &LatentVideo, f: impl Fn(usize) -> f64 + Sync + Send) -> Self {
        like.with_data(parallel::build_vec(like.len(), f))
    }

    /// Same shape, new values.
    pub fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.len());
        LatentVideo {
            frames: self.frames,
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Standard normal samples from a seeded ChaCha8 stream.
    pub fn gaussian(frames: usize, channels: usize, height: usize, width: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = frames * channels * height * width;
        LatentVideo {
            frames,
            channels,
            height,
            width,
            data: (0..n).map(|_| StandardNormal.sample(&mut rng)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.frames * self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.channels, self.height, self.width]
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}x{}x{}", self.frames, self.channels, self.height, self.width)
    }

    pub fn same_shape(&self, other: &LatentVideo) -> bool {
        self.shape() == other.shape()
    }

    pub fn check_shape(&self, other: &LatentVideo, op: &'static str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(op, self.shape_str(), other.shape_str()))
        }
    }

    pub fn frame_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let l = self.frame_len();
        &self.data[n * l..(n + 1) * l]
    }

    pub fn frame_mut(&mut self, n: usize) -> &mut [f64] {
        let l = self.frame_len();
        &mut self.data[n * l..(n + 1) * l]
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, y: usize, x: usize) -> usize {
        ((n * self.channels + c) * self.height + y) * self.width + x
    }

    /// Frames `start..end` as a new latent.
    pub fn slice_frames(&self, start: usize, end: usize) -> LatentVideo {
        let l = self.frame_len();
        LatentVideo {
            frames: end - start,
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data[start * l..end * l].to_vec(),
        }
    }

    pub fn max_abs_diff(&self, other: &LatentVideo) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Root-mean-square value of each frame.
    pub fn frame_rms(&self) -> Vec<f64> {
        (0..self.frames)
            .map(|n| {
                let f = self.frame(n);
                (f.iter().map(|v| v * v).sum::<f64>() / f.len() as f64).sqrt()
            })
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + 4 * self.data.len());
        out.extend_from_slice(LATV_MAGIC);
        for d in self.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(path, m);
        let mut r = LeReader::new(bytes);
        let magic = r.take(4).ok_or_else(|| bad("truncated header".into()))?;
        if magic != LATV_MAGIC {
            return Err(bad(format!(
                "bad magic {:?}, expected \"LATV\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = r.u32().ok_or_else(|| bad("truncated header".into()))? as usize;
        }
        let n: usize = dims.iter().product();
        if r.remaining() != 4 * n {
            return Err(bad(format!(
                "expected {n} values, file holds {} bytes of data",
                r.remaining()
            )));
        }
        let data = (0..n).map(|_| f64::from(r.f32().unwrap())).collect();
        LatentVideo::new(dims[0], dims[1], dims[2], dims[3], data).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fsutil::read(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_noise_is_reproducible() {
        let a = LatentVideo::gaussian(2, 3, 4, 5, 7);
        let b = LatentVideo::gaussian(2, 3, 4, 5, 7);
        let c = LatentVideo::gaussian(2, 3, 4, 5, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mean = a.data.iter().sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 0.5);
    }

    #[test]
    fn latv_round_trip() {
        let mut v = LatentVideo::gaussian(2, 3, 2, 4, 1);
        v.data.iter_mut().for_each(|x| *x = (*x as f32) as f64);
        let back = LatentVideo::from_bytes(&v.to_bytes(), Path::new("a.latv")).unwrap();
        assert_eq!(back, v);
        let mut bad = v.to_bytes();
        bad[0] = b'X';
        let err = LatentVideo::from_bytes(&bad, Path::new("a.latv")).unwrap_err().to_string();
        assert!(err.contains("a.latv") && err.contains("LATV"), "{err}");
        assert!(LatentVideo::from_bytes(&v.to_bytes()[..30], Path::new("a.latv")).is_err());
    }

    #[test]
    fn indexing_and_slices() {
        let v = LatentVideo::new(3, 2, 2, 2, (0..24).map(f64::from).collect()).unwrap();
        assert_eq!(v.data[v.index(1, 1, 0, 1)], 13.0);
        assert_eq!(v.slice_frames(1, 3).data[0], 8.0);
        assert_eq!(v.frame(2)[0], 16.0);
        assert!(LatentVideo::new(1, 1, 1, 2, vec![0.0]).is_err());
    }
}
