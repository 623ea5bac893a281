use crate::geometry::mesh::{cross, sub};
use crate::geometry::TriMesh;
use crate::guidance::camera::OrthoCamera;
use crate::raster::BinaryMap;

/// z component of each vertex's accumulated face normal. Contributions are
/// sorted before summing so the result does not depend on triangle order.
fn normal_z(mesh: &TriMesh) -> Vec<f64> {
    let mut parts: Vec<Vec<f64>> = vec![Vec::new(); mesh.vertices.len()];
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
        let nz = cross(sub(b, a), sub(c, a))[2];
        for &v in tri {
            parts[v as usize].push(nz);
        }
    }
    parts
        .into_iter()
        .map(|mut p| {
            p.sort_by(f64::total_cmp);
            p.iter().sum()
        })
        .collect()
}

fn sample(mask: &BinaryMap, camera: &OrthoCamera, s: [f64; 2], mirrored: bool) -> bool {
    let u = s[0] / camera.width as f64 * mask.width as f64;
    let v = s[1] / camera.height as f64 * mask.height as f64;
    if !(u >= 0.0 && v >= 0.0 && u < mask.width as f64 && v < mask.height as f64) {
        return false;
    }
    let (x, y) = (u.floor() as usize, v.floor() as usize);
    let x = if mirrored { mask.width - 1 - x } else { x };
    mask.get(x, y)
}

/// Paints the per-vertex SDI attribute from two hand-authored views.
///
/// Vertices whose normal faces the camera (z ≥ 0) read the front mask at
/// their projection; the rest read the back mask, which is drawn as seen
/// from behind and therefore mirrored horizontally.
pub fn backproject_sdi_mask(
    mesh: &TriMesh,
    camera: &OrthoCamera,
    m_front: &BinaryMap,
    m_back: &BinaryMap,
) -> TriMesh {
    let nz = normal_z(mesh);
    let sdi = mesh
        .vertices
        .iter()
        .zip(&nz)
        .map(|(v, nz)| {
            let s = camera.to_screen(*v);
            let hit = if *nz >= 0.0 {
                sample(m_front, camera, s, false)
            } else {
                sample(m_back, camera, s, true)
            };
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mut out = mesh.clone();
    out.sdi = Some(sdi);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Front-facing grid of vertices at pixel centers.
    fn grid_plane(n: usize, z: f64) -> TriMesh {
        let mut v = Vec::new();
        for y in 0..n {
            for x in 0..n {
                v.push([x as f64 + 0.5, y as f64 + 0.5, z]);
            }
        }
        let mut t = Vec::new();
        for y in 0..n - 1 {
            for x in 0..n - 1 {
                let i = (y * n + x) as u32;
                let n = n as u32;
                t.push([i, i + 1, i + n + 1]);
                t.push([i, i + n + 1, i + n]);
            }
        }
        TriMesh::new(v, t)
    }

    #[test]
    fn constant_masks() {
        let cam = OrthoCamera::pixel_aligned(8, 8);
        let m = grid_plane(8, 0.0);
        let zero = BinaryMap::new(8, 8);
        let one = BinaryMap::filled(8, 8, true);
        let out = backproject_sdi_mask(&m, &cam, &zero, &zero);
        assert!(out.sdi.unwrap().iter().all(|s| *s == 0.0));
        let out = backproject_sdi_mask(&m, &cam, &one, &one);
        assert!(out.sdi.unwrap().iter().all(|s| *s == 1.0));
    }

    #[test]
    fn lower_half_front_mask() {
        let cam = OrthoCamera::pixel_aligned(8, 8);
        let m = grid_plane(8, 0.0);
        assert!(normal_z(&m).iter().all(|z| *z > 0.0));
        let lower = BinaryMap::from_fn(8, 8, |_, y| y >= 4);
        let out = backproject_sdi_mask(&m, &cam, &lower, &BinaryMap::new(8, 8));
        for (v, s) in m.vertices.iter().zip(out.sdi.unwrap()) {
            // image row of the vertex's projection
            let row = (8.0 - v[1]).floor() as usize;
            assert_eq!(s, if row >= 4 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn back_facing_reads_mirrored_back_mask() {
        let cam = OrthoCamera::pixel_aligned(8, 8);
        let mut m = grid_plane(8, 0.0);
        for t in &mut m.triangles {
            t.swap(1, 2);
        }
        let left_cols = BinaryMap::from_fn(8, 8, |x, _| x < 2);
        let out = backproject_sdi_mask(&m, &cam, &BinaryMap::new(8, 8), &left_cols);
        for (v, s) in m.vertices.iter().zip(out.sdi.unwrap()) {
            let col = v[0].floor() as usize;
            assert_eq!(s, if col >= 6 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn independent_of_triangle_order() {
        let cam = OrthoCamera::pixel_aligned(8, 8);
        let mut m = grid_plane(8, 0.0);
        // bend the plane so some normals flip
        for v in &mut m.vertices {
            v[2] = ((v[0] - 4.0) * 0.9).sin() * 3.0;
        }
        let front = BinaryMap::from_fn(8, 8, |x, y| (x + y) % 3 == 0);
        let back = BinaryMap::from_fn(8, 8, |x, y| (x * y) % 2 == 1);
        let a = backproject_sdi_mask(&m, &cam, &front, &back);
        m.triangles.reverse();
        let b = backproject_sdi_mask(&m, &cam, &front, &back);
        assert_eq!(a.sdi, b.sdi);
    }

    #[test]
    fn outside_image_is_zero() {
        let cam = OrthoCamera::pixel_aligned(4, 4);
        let m = TriMesh::new(vec![[-1.0, 1.0, 0.0], [9.0, 1.0, 0.0], [1.0, 9.0, 0.0]], vec![[0, 1, 2]]);
        let one = BinaryMap::filled(4, 4, true);
        assert_eq!(backproject_sdi_mask(&m, &cam, &one, &one).sdi.unwrap(), vec![0.0; 3]);
    }
}
