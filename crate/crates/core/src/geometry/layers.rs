//! Segmentation maps, their lift into voxel masks, and the hair/body set
//! algebra applied to the implicit field.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::geometry::field::{GridGeometry, ScalarField3D, LARGE};
use crate::raster::BinaryMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SegLabel {
    Background = 0,
    Body = 1,
    Hair = 2,
}

impl SegLabel {
    /// Gray level used on disk: 0, 128, 255.
    pub fn gray(self) -> u8 {
        match self {
            SegLabel::Background => 0,
            SegLabel::Body => 128,
            SegLabel::Hair => 255,
        }
    }

    pub fn from_gray(v: u8) -> SegLabel {
        match v {
            0..=63 => SegLabel::Background,
            64..=191 => SegLabel::Body,
            _ => SegLabel::Hair,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<SegLabel>,
}

impl SegMap {
    pub fn new(width: usize, height: usize) -> Self {
        SegMap {
            width,
            height,
            labels: vec![SegLabel::Background; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> SegLabel) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(f(x, y));
            }
        }
        SegMap {
            width,
            height,
            labels,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> SegLabel {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, l: SegLabel) {
        self.labels[y * self.width + x] = l;
    }

    pub fn load_png(path: &Path) -> Result<SegMap> {
        let img = image::open(path)
            .map_err(|e| Error::format(path, format!("cannot read PNG: {e}")))?
            .to_luma8();
        let (w, h) = img.dimensions();
        Ok(SegMap::from_fn(w as usize, h as usize, |x, y| {
            SegLabel::from_gray(img.get_pixel(x as u32, y as u32)[0])
        }))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([self.get(x as usize, y as usize).gray()])
        });
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .map_err(|e| Error::format(path, e.to_string()))?;
        fsutil::write_atomic(path, &bytes)
    }
}

/// Splits a labeled map into its hair and body indicator maps.
pub fn split_segmentation(map: &SegMap) -> (BinaryMap, BinaryMap) {
    let hair = BinaryMap::from_fn(map.width, map.height, |x, y| map.get(x, y) == SegLabel::Hair);
    let body = BinaryMap::from_fn(map.width, map.height, |x, y| map.get(x, y) == SegLabel::Body);
    (hair, body)
}

/// Adds every pixel that the border cannot reach through unset pixels
/// (4-connected flood fill).
pub fn fill_interior(mask: &BinaryMap) -> BinaryMap {
    let (w, h) = (mask.width, mask.height);
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    let seed = |x: usize, y: usize, outside: &mut Vec<bool>, queue: &mut VecDeque<(usize, usize)>| {
        let i = y * w + x;
        if !mask.bits[i] && !outside[i] {
            outside[i] = true;
            queue.push_back((x, y));
        }
    };
    for x in 0..w {
        seed(x, 0, &mut outside, &mut queue);
        if h > 1 {
            seed(x, h - 1, &mut outside, &mut queue);
        }
    }
    for y in 0..h {
        seed(0, y, &mut outside, &mut queue);
        if w > 1 {
            seed(w - 1, y, &mut outside, &mut queue);
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        if x > 0 {
            seed(x - 1, y, &mut outside, &mut queue);
        }
        if x + 1 < w {
            seed(x + 1, y, &mut outside, &mut queue);
        }
        if y > 0 {
            seed(x, y - 1, &mut outside, &mut queue);
        }
        if y + 1 < h {
            seed(x, y + 1, &mut outside, &mut queue);
        }
    }
    BinaryMap {
        width: w,
        height: h,
        bits: outside.iter().map(|o| !o).collect(),
    }
}

/// Orthographic view a 2D map was authored in.
///
/// Image rows always run from world +y (top) to −y. Columns run along +x for
/// the front view (looking down −z), −z for the right view (looking down −x)
/// and −x for the back view (looking down +z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewAxis {
    Front,
    Right,
    Back,
}

/// Voxel-resolution boolean mask sharing a field's grid geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeMask {
    pub geom: GridGeometry,
    pub bits: Vec<bool>,
}

impl VolumeMask {
    pub fn empty(geom: GridGeometry) -> Self {
        VolumeMask {
            geom,
            bits: vec![false; geom.len()],
        }
    }

    pub fn full(geom: GridGeometry) -> Self {
        VolumeMask {
            geom,
            bits: vec![true; geom.len()],
        }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Maps sample `i` of `n` onto one of `pixels` cells spanning the same extent.
#[inline]
fn sample_to_pixel(i: usize, n: usize, pixels: usize) -> usize {
    ((2 * i + 1) * pixels) / (2 * n)
}

/// Lifts a 2D mask into a voxel mask by orthographic extrusion along `axis`.
pub fn extrude_mask(mask: &BinaryMap, axis: ViewAxis, geom: &GridGeometry) -> Result<VolumeMask> {
    if mask.width == 0 || mask.height == 0 {
        return Err(Error::InvalidArgument(
            "cannot extrude a zero-sized mask".into(),
        ));
    }
    let [nx, ny, nz] = geom.dims;
    let (w, h) = (mask.width, mask.height);
    let mut bits = vec![false; geom.len()];
    for z in 0..nz {
        for y in 0..ny {
            let py = sample_to_pixel(ny - 1 - y, ny, h);
            for x in 0..nx {
                let px = match axis {
                    ViewAxis::Front => sample_to_pixel(x, nx, w),
                    ViewAxis::Back => sample_to_pixel(nx - 1 - x, nx, w),
                    ViewAxis::Right => sample_to_pixel(nz - 1 - z, nz, w),
                };
                bits[geom.index(x, y, z)] = mask.get(px, py);
            }
        }
    }
    Ok(VolumeMask { geom: *geom, bits })
}

fn check_geom(op: &'static str, a: &GridGeometry, b: &GridGeometry) -> Result<()> {
    if a != b {
        return Err(Error::GeometryMismatch { op });
    }
    Ok(())
}

/// `front ∪ (back ∩ right)`
pub fn combine_hair_volumes(
    front: &VolumeMask,
    back: &VolumeMask,
    right: &VolumeMask,
) -> Result<VolumeMask> {
    check_geom("combine_hair_volumes", &front.geom, &back.geom)?;
    check_geom("combine_hair_volumes", &front.geom, &right.geom)?;
    let bits = front
        .bits
        .iter()
        .zip(&back.bits)
        .zip(&right.bits)
        .map(|((f, b), r)| *f || (*b && *r))
        .collect();
    Ok(VolumeMask {
        geom: front.geom,
        bits,
    })
}

/// `front ∩ right`
pub fn combine_body_volumes(front: &VolumeMask, right: &VolumeMask) -> Result<VolumeMask> {
    check_geom("combine_body_volumes", &front.geom, &right.geom)?;
    let bits = front
        .bits
        .iter()
        .zip(&right.bits)
        .map(|(f, r)| *f && *r)
        .collect();
    Ok(VolumeMask {
        geom: front.geom,
        bits,
    })
}

/// Restricts a field to a mask: voxels outside the mask become [`LARGE`].
pub fn mask_field(field: &ScalarField3D, mask: &VolumeMask) -> Result<ScalarField3D> {
    check_geom("mask_field", &field.geom, &mask.geom)?;
    let values = field
        .values
        .iter()
        .zip(&mask.bits)
        .map(|(v, m)| if *m { *v } else { LARGE })
        .collect();
    Ok(ScalarField3D {
        geom: field.geom,
        values,
    })
}
