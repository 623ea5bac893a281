//! Toy latent codecs: exact identity and f×f average pooling with bilinear
//! decoding.

use std::fmt;
use std::str::FromStr;

use crate::diffusion::latent::LatentVideo;
use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{BinaryMap, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Codec {
    #[default]
    Identity,
    AvgPool { factor: usize },
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Codec::Identity => write!(f, "identity"),
            Codec::AvgPool { factor } => write!(f, "avgpool:{factor}"),
        }
    }
}

impl FromStr for Codec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown codec `{s}` (expected identity or avgpool:<factor>)"));
        if s == "identity" {
            return Ok(Codec::Identity);
        }
        let factor = s
            .strip_prefix("avgpool:")
            .and_then(|f| f.parse::<usize>().ok())
            .ok_or_else(bad)?;
        Codec::avgpool(factor)
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Clamped sample position and blend weight for bilinear upsampling.
fn taps(x: usize, f: usize, n: usize) -> (usize, usize, f64) {
    let u = ((x as f64 + 0.5) / f as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let i = u.floor() as usize;
    (i, (i + 1).min(n - 1), u - i as f64)
}

impl Codec {
    pub fn avgpool(factor: usize) -> Result<Codec> {
        match factor {
            0 => Err(Error::InvalidArgument("codec factor must be at least 1".into())),
            1 => Ok(Codec::Identity),
            f => Ok(Codec::AvgPool { factor: f }),
        }
    }

    pub fn factor(&self) -> usize {
        match self {
            Codec::Identity => 1,
            Codec::AvgPool { factor } => *factor,
        }
    }

    pub fn check_dims(&self, width: usize, height: usize) -> Result<()> {
        let f = self.factor();
        for dim in [width, height] {
            if dim == 0 || dim % f != 0 {
                return Err(Error::NotDivisible {
                    what: "raster",
                    dim,
                    factor: f,
                });
            }
        }
        Ok(())
    }

    pub fn encode(&self, frames: &[Image]) -> Result<LatentVideo> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("cannot encode an empty sequence".into()))?;
        for f in frames {
            if !f.same_size(first) {
                return Err(Error::shape("encode", first.dims(), f.dims()));
            }
        }
        self.check_dims(first.width, first.height)?;
        let f = self.factor();
        let (c, h, w) = (first.channels, first.height / f, first.width / f);
        let mut out = LatentVideo::zeros(frames.len(), c, h, w);
        let per_frame = c * h * w;
        let inv = 1.0 / (f * f) as f64;
        parallel::for_each_mut(&mut out.data, |i, v| {
            let n = i / per_frame;
            let r = i % per_frame;
            let (ch, y, x) = (r / (h * w), (r / w) % h, r % w);
            let img = &frames[n];
            let mut acc = 0.0;
            for dy in 0..f {
                for dx in 0..f {
                    acc += img.get(x * f + dx, y * f + dy, ch);
                }
            }
            *v = if f == 1 { acc } else { acc * inv };
        });
        Ok(out)
    }

    pub fn decode(&self, z: &LatentVideo) -> Vec<Image> {
        let f = self.factor();
        let (c, h, w) = (z.channels, z.height, z.width);
        parallel::map_range(z.frames, |n| {
            let plane = |ch: usize, y: usize, x: usize| z.data[z.index(n, ch, y, x)];
            Image::from_fn(w * f, h * f, c, |x, y, ch| {
                if f == 1 {
                    return plane(ch, y, x);
                }
                let (x0, x1, tx) = taps(x, f, w);
                let (y0, y1, ty) = taps(y, f, h);
                lerp(
                    lerp(plane(ch, y0, x0), plane(ch, y0, x1), tx),
                    lerp(plane(ch, y1, x0), plane(ch, y1, x1), tx),
                    ty,
                )
            })
        })
    }

    pub fn latent_dims(&self, width: usize, height: usize) -> Result<(usize, usize)> {
        self.check_dims(width, height)?;
        Ok((width / self.factor(), height / self.factor()))
    }
}

/// f×f max-pool of a binary mask: a latent cell is set when any pixel in its
/// block is set.
pub fn downsample_mask(mask: &BinaryMap, f: usize) -> Result<BinaryMap> {
    if f == 0 {
        return Err(Error::InvalidArgument("mask factor must be at least 1".into()));
    }
    for dim in [mask.width, mask.height] {
        if dim % f != 0 {
            return Err(Error::NotDivisible { what: "mask", dim, factor: f });
        }
    }
    Ok(BinaryMap::from_fn(mask.width / f, mask.height / f, |x, y| {
        (0..f).any(|dy| (0..f).any(|dx| mask.get(x * f + dx, y * f + dy)))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_round_trip_is_exact() {
        let frames: Vec<Image> = (0..3)
            .map(|n| Image::from_fn(6, 4, 3, |x, y, c| ((x * 5 + y * 3 + c + n) % 7) as f64 / 7.0))
            .collect();
        let z = Codec::Identity.encode(&frames).unwrap();
        assert_eq!(z.shape(), [3, 3, 4, 6]);
        assert_eq!(Codec::Identity.decode(&z), frames);
    }

    #[test]
    fn avgpool_constant_and_checkerboard() {
        let codec = Codec::avgpool(2).unwrap();
        let c = [0.3, 0.6, 0.9];
        let z = codec.encode(&[Image::filled(8, 6, &c)]).unwrap();
        assert_eq!(z.shape(), [1, 3, 3, 4]);
        for ch in 0..3 {
            for y in 0..3 {
                for x in 0..4 {
                    assert!((z.data[z.index(0, ch, y, x)] - c[ch]).abs() < 1e-15);
                }
            }
        }
        let back = codec.decode(&z);
        assert!(back[0].data.chunks(3).all(|p| (0..3).all(|k| (p[k] - c[k]).abs() < 1e-15)));

        let checker = Image::from_fn(8, 8, 1, |x, y, _| ((x + y) % 2) as f64);
        let z = codec.encode(&[checker]).unwrap();
        assert!(z.data.iter().all(|v| *v == 0.5));
    }

    #[test]
    fn non_divisible_dims_are_rejected() {
        let codec = Codec::avgpool(4).unwrap();
        assert!(matches!(
            codec.encode(&[Image::zeros(10, 8, 3)]),
            Err(Error::NotDivisible { dim: 10, factor: 4, .. })
        ));
        assert_eq!("avgpool:4".parse::<Codec>().unwrap(), codec);
        assert_eq!("identity".parse::<Codec>().unwrap(), Codec::Identity);
        assert!("avgpool:x".parse::<Codec>().is_err());
    }

    #[test]
    fn mask_maxpool() {
        assert!(downsample_mask(&BinaryMap::new(16, 16), 8).unwrap().is_empty());
        let mut m = BinaryMap::new(16, 16);
        m.set(11, 3, true);
        let d = downsample_mask(&m, 8).unwrap();
        assert_eq!(d.count(), 1);
        assert!(d.get(1, 0));
        let m = BinaryMap::from_fn(6, 4, |x, y| (x * y) % 3 == 1);
        assert_eq!(downsample_mask(&m, 1).unwrap(), m);
        assert!(downsample_mask(&m, 4).is_err());
    }
}
