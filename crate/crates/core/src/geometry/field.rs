use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil::{self, LeReader};

/// Value marking a voxel as strictly outside every surface.
///
/// Chosen as `f32::MAX` so it survives the f32 on-disk format unchanged.
pub const LARGE: f64 = f32::MAX as f64;

pub const SDF_MAGIC: &[u8; 4] = b"SDF1";

/// Placement of a regular voxel grid in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub spacing: f64,
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], origin: [f64; 3], spacing: f64) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 samples per axis, got {dims:?}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "grid spacing must be positive, got {spacing}"
            )));
        }
        Ok(GridGeometry {
            dims,
            origin,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// x-fastest linear index.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims[1] + y) * self.dims[0] + x
    }

    #[inline]
    pub fn position(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            self.origin[0] + x as f64 * self.spacing,
            self.origin[1] + y as f64 * self.spacing,
            self.origin[2] + z as f64 * self.spacing,
        ]
    }
}

/// Signed distance samples on a regular grid, negative inside.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField3D {
    pub geom: GridGeometry,
    pub values: Vec<f64>,
}

impl ScalarField3D {
    pub fn new(geom: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.len() {
            return Err(Error::shape("ScalarField3D", geom.len(), values.len()));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidArgument(
                "field values must be finite or +LARGE".into(),
            ));
        }
        Ok(ScalarField3D { geom, values })
    }

    pub fn from_fn(geom: GridGeometry, f: impl Fn([f64; 3]) -> f64) -> Self {
        let mut values = Vec::with_capacity(geom.len());
        for z in 0..geom.dims[2] {
            for y in 0..geom.dims[1] {
                for x in 0..geom.dims[0] {
                    values.push(f(geom.position(x, y, z)));
                }
            }
        }
        ScalarField3D { geom, values }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.geom.index(x, y, z)]
    }

    pub fn negated(&self) -> ScalarField3D {
        ScalarField3D {
            geom: self.geom,
            values: self.values.iter().map(|v| -v).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 4 * self.values.len());
        out.extend_from_slice(SDF_MAGIC);
        for d in self.geom.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for o in self.geom.origin {
            out.extend_from_slice(&(o as f32).to_le_bytes());
        }
        out.extend_from_slice(&(self.geom.spacing as f32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m.to_string());
        let mut r = LeReader::new(bytes);
        let magic = r.take(4).ok_or_else(|| bad("truncated header"))?;
        if magic != SDF_MAGIC {
            return Err(bad(&format!(
                "bad magic {:?}, expected \"SDF1\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            *d = r.u32().ok_or_else(|| bad("truncated header"))? as usize;
        }
        let mut origin = [0.0; 3];
        for o in &mut origin {
            *o = f64::from(r.f32().ok_or_else(|| bad("truncated header"))?);
        }
        let spacing = f64::from(r.f32().ok_or_else(|| bad("truncated header"))?);
        let geom = GridGeometry::new(dims, origin, spacing).map_err(|e| bad(&e.to_string()))?;
        if r.remaining() != 4 * geom.len() {
            return Err(bad(&format!(
                "expected {} values, file holds {} bytes of data",
                geom.len(),
                r.remaining()
            )));
        }
        let values = (0..geom.len())
            .map(|_| f64::from(r.f32().unwrap()))
            .collect();
        ScalarField3D::new(geom, values).map_err(|e| bad(&e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fsutil::read(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes())
    }
}

/// Samples the signed distance of a sphere.
pub fn sphere_sdf(center: [f64; 3], radius: f64) -> impl Fn([f64; 3]) -> f64 {
    move |p| {
        let d = [p[0] - center[0], p[1] - center[1], p[2] - center[2]];
        (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt() - radius
    }
}
