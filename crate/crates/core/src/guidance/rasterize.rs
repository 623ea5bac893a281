//! Z-buffered triangle rasterization with barycentric attribute
//! interpolation. Pixel centers are sampled; edges follow the top-left rule
//! so a pixel on an edge shared by two triangles is drawn exactly once.

use crate::geometry::TriMesh;
use crate::guidance::camera::OrthoCamera;
use crate::raster::{BinaryMap, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attribute {
    Color,
    Sdi,
}

/// Winning triangle and barycentric weights per pixel.
#[derive(Debug, Clone)]
pub struct Fragments {
    pub width: usize,
    pub height: usize,
    pub hits: Vec<Option<(u32, [f64; 3])>>,
    pub depth: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Rendered {
    /// RGB for [`Attribute::Color`], one channel in `{0, 1}` for [`Attribute::Sdi`].
    pub image: Image,
    pub coverage: BinaryMap,
    /// View depth, `+∞` where nothing was drawn.
    pub depth: Vec<f64>,
}

/// Barycentric interpolation written relative to the first vertex so that a
/// constant attribute is reproduced exactly.
#[inline]
pub(crate) fn lerp3(l: [f64; 3], a: [f64; 3]) -> f64 {
    a[0] + l[1] * (a[1] - a[0]) + l[2] * (a[2] - a[0])
}

#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Top or left edge for the positively oriented (y-down) winding.
#[inline]
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let dy = b[1] - a[1];
    let dx = b[0] - a[0];
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

pub fn rasterize_fragments(mesh: &TriMesh, camera: &OrthoCamera) -> Fragments {
    let (w, h) = (camera.width, camera.height);
    let mut hits = vec![None; w * h];
    let mut depth = vec![f64::INFINITY; w * h];
    let screen: Vec<[f64; 2]> = mesh.vertices.iter().map(|v| camera.to_screen(*v)).collect();
    let depths: Vec<f64> = mesh.vertices.iter().map(|v| camera.depth(v[2])).collect();

    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let mut idx = tri.map(|i| i as usize);
        let mut s = idx.map(|i| screen[i]);
        let mut area = edge(s[0], s[1], s[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        // normalize winding; remember the swap so weights map back
        let swapped = area < 0.0;
        if swapped {
            idx.swap(1, 2);
            s.swap(1, 2);
            area = -area;
        }
        let min_x = s.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let y0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let x1 = ((max_x - 0.5).floor() + 1.0).clamp(0.0, w as f64) as usize;
        let y1 = ((max_y - 0.5).floor() + 1.0).clamp(0.0, h as f64) as usize;
        let tl = [
            is_top_left(s[1], s[2]),
            is_top_left(s[2], s[0]),
            is_top_left(s[0], s[1]),
        ];
        let d = idx.map(|i| depths[i]);
        for py in y0..y1 {
            for px in x0..x1 {
                let p = [px as f64 + 0.5, py as f64 + 0.5];
                let e = [edge(s[1], s[2], p), edge(s[2], s[0], p), edge(s[0], s[1], p)];
                if !(0..3).all(|k| e[k] > 0.0 || (e[k] == 0.0 && tl[k])) {
                    continue;
                }
                let l = e.map(|x| x / area);
                let z = lerp3(l, d);
                let i = py * w + px;
                if z < depth[i] {
                    depth[i] = z;
                    let bary = if swapped { [l[0], l[2], l[1]] } else { l };
                    hits[i] = Some((ti as u32, bary));
                }
            }
        }
    }
    Fragments {
        width: w,
        height: h,
        hits,
        depth,
    }
}

impl Fragments {
    pub fn coverage(&self) -> BinaryMap {
        BinaryMap {
            width: self.width,
            height: self.height,
            bits: self.hits.iter().map(|h| h.is_some()).collect(),
        }
    }

    /// Interpolated vertex colors; black where uncovered.
    pub fn shade_color(&self, mesh: &TriMesh) -> Image {
        let white = vec![[1.0; 3]; mesh.vertices.len()];
        let colors = mesh.colors.as_deref().unwrap_or(&white);
        let mut img = Image::zeros(self.width, self.height, 3);
        for (i, hit) in self.hits.iter().enumerate() {
            if let Some((t, l)) = hit {
                let tri = mesh.triangles[*t as usize];
                for c in 0..3 {
                    img.data[i * 3 + c] = lerp3(*l, tri.map(|v| colors[v as usize][c]));
                }
            }
        }
        img
    }

    /// Interpolated SDI attribute binarized at 0.5.
    pub fn shade_sdi(&self, mesh: &TriMesh) -> BinaryMap {
        let zeros = vec![0.0; mesh.vertices.len()];
        let sdi = mesh.sdi.as_deref().unwrap_or(&zeros);
        BinaryMap {
            width: self.width,
            height: self.height,
            bits: self
                .hits
                .iter()
                .map(|hit| match hit {
                    Some((t, l)) => {
                        let tri = mesh.triangles[*t as usize];
                        lerp3(*l, tri.map(|v| sdi[v as usize])) >= 0.5
                    }
                    None => false,
                })
                .collect(),
        }
    }
}

pub fn rasterize(mesh: &TriMesh, camera: &OrthoCamera, attribute: Attribute) -> Rendered {
    let frags = rasterize_fragments(mesh, camera);
    let image = match attribute {
        Attribute::Color => frags.shade_color(mesh),
        Attribute::Sdi => frags.shade_sdi(mesh).to_image(),
    };
    Rendered {
        image,
        coverage: frags.coverage(),
        depth: frags.depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64, z: f64, color: [f64; 3]) -> TriMesh {
        let mut m = TriMesh::new(
            vec![[x0, y0, z], [x1, y0, z], [x1, y1, z], [x0, y1, z]],
            vec![[0, 1, 2], [0, 2, 3]],
        );
        m.colors = Some(vec![color; 4]);
        m
    }

    #[test]
    fn empty_mesh_is_background() {
        let cam = OrthoCamera::pixel_aligned(8, 6);
        let r = rasterize(&TriMesh::default(), &cam, Attribute::Color);
        assert!(r.image.data.iter().all(|v| *v == 0.0));
        assert!(r.coverage.is_empty());
    }

    #[test]
    fn full_square_constant_color() {
        let cam = OrthoCamera::pixel_aligned(8, 8);
        let c = [0.2, 0.4, 0.6];
        let r = rasterize(&square(0.0, 0.0, 8.0, 8.0, -1.0, c), &cam, Attribute::Color);
        assert_eq!(r.coverage.count(), 64);
        for y in 0..8 {
            for x in 0..8 {
                for k in 0..3 {
                    assert!((r.image.get(x, y, k) - c[k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn shared_edges_cover_each_pixel_once() {
        // fan of triangles around a pixel center with vertices on pixel centers
        let cam = OrthoCamera::pixel_aligned(16, 16);
        let c = [8.5, 7.5];
        let ring = [[2.5, 1.5], [14.5, 1.5], [14.5, 13.5], [8.5, 15.5], [2.5, 13.5], [0.5, 7.5]];
        let mut counts = vec![0u32; 256];
        for k in 0..ring.len() {
            let a = ring[k];
            let b = ring[(k + 1) % ring.len()];
            let m = TriMesh::new(
                vec![[c[0], 16.0 - c[1], 0.0], [a[0], 16.0 - a[1], 0.0], [b[0], 16.0 - b[1], 0.0]],
                vec![[0, 1, 2]],
            );
            let cov = rasterize(&m, &cam, Attribute::Color).coverage;
            for (i, b) in cov.bits.iter().enumerate() {
                counts[i] += *b as u32;
            }
        }
        assert!(counts.iter().all(|c| *c <= 1));
        // the fan center is inside the union, so it is covered
        assert_eq!(counts[7 * 16 + 8], 1);
    }

    #[test]
    fn nearer_square_wins() {
        let cam = OrthoCamera::pixel_aligned(10, 10);
        // depth = eye_z − z = −z; depths 1 and 2
        let near = square(0.0, 0.0, 6.0, 6.0, -1.0, [1.0, 0.0, 0.0]);
        let far = square(3.0, 3.0, 10.0, 10.0, -2.0, [0.0, 0.0, 1.0]);
        for mesh in [TriMesh::concat(&[&near, &far]), TriMesh::concat(&[&far, &near])] {
            let r = rasterize(&mesh, &cam, Attribute::Color);
            // painter's oracle: draw far first, then near on top
            for y in 0..10 {
                for x in 0..10 {
                    let wy = 10.0 - (y as f64 + 0.5);
                    let wx = x as f64 + 0.5;
                    let in_near = wx < 6.0 && wy < 6.0;
                    let in_far = wx > 3.0 && wy > 3.0;
                    let expect = if in_near {
                        [1.0, 0.0, 0.0]
                    } else if in_far {
                        [0.0, 0.0, 1.0]
                    } else {
                        [0.0; 3]
                    };
                    assert_eq!(r.image.pixel(x, y), &expect, "{x},{y}");
                }
            }
        }
    }

    #[test]
    fn sdi_is_binarized() {
        let cam = OrthoCamera::pixel_aligned(8, 1);
        let mut m = square(0.0, 0.0, 8.0, 1.0, 0.0, [1.0; 3]);
        m.sdi = Some(vec![0.0, 1.0, 1.0, 0.0]);
        let r = rasterize(&m, &cam, Attribute::Sdi);
        let row: Vec<f64> = (0..8).map(|x| r.image.get(x, 0, 0)).collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn deterministic() {
        let cam = OrthoCamera::new(-1.0, 1.0, -1.0, 1.0, 33, 21).unwrap();
        let mut m = TriMesh::new(
            vec![[-0.9, -0.8, 0.1], [0.7, -0.3, 0.5], [0.1, 0.9, -0.2], [0.8, 0.8, 0.0]],
            vec![[0, 1, 2], [1, 3, 2]],
        );
        m.colors = Some(vec![[0.1, 0.2, 0.3], [0.9, 0.1, 0.5], [0.3, 0.3, 0.8], [0.0, 1.0, 0.0]]);
        let a = rasterize(&m, &cam, Attribute::Color);
        let b = rasterize(&m, &cam, Attribute::Color);
        assert_eq!(a.image, b.image);
    }
}
