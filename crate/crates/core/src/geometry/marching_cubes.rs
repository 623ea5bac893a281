//! Iso-surface extraction with the classic 256-case lookup table.
//!
//! Vertices are shared between cells through a per-edge key and emitted in
//! cell-major order (z slab, then y, then x, then local edge index), so the
//! output is deterministic whether slabs are processed in parallel or not.

use std::collections::HashMap;

use crate::geometry::field::ScalarField3D;
use crate::geometry::mesh::TriMesh;
use crate::geometry::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use crate::parallel;

/// Local edge triples for a cube case, wound so that face normals point
/// toward increasing field values.
pub(crate) fn case_triangles(case: usize) -> Vec<[usize; 3]> {
    let (row, reverse) = if case < 128 {
        (&TRI_TABLE[case], true)
    } else {
        (&TRI_TABLE[255 - case], false)
    };
    row.chunks(3)
        .take_while(|t| t[0] >= 0)
        .map(|t| {
            let t = [t[0] as usize, t[1] as usize, t[2] as usize];
            if reverse {
                [t[0], t[2], t[1]]
            } else {
                t
            }
        })
        .collect()
}

#[derive(Default)]
struct SlabOut {
    /// (edge key, lower corner value, upper corner value, lower corner index)
    edges: Vec<(u64, f64, f64, [usize; 3], usize)>,
    triangles: Vec<[u64; 3]>,
}

/// Extracts the `iso` level set of `field`. Cells containing [`LARGE`]
/// corners are handled like any other; the crossing then sits next to the
/// finite corner.
///
/// [`LARGE`]: crate::geometry::field::LARGE
pub fn marching_cubes(field: &ScalarField3D, iso: f64) -> TriMesh {
    let [nx, ny, nz] = field.geom.dims;
    let key = |c: [usize; 3], axis: usize| -> u64 {
        (((c[2] * ny + c[1]) * nx + c[0]) * 3 + axis) as u64
    };

    let slabs: Vec<SlabOut> = parallel::map_range(nz - 1, |z| {
        let mut out = SlabOut::default();
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let corner = |c: usize| {
                    let o = CORNER_OFFSETS[c];
                    [x + o[0], y + o[1], z + o[2]]
                };
                let vals: [f64; 8] = std::array::from_fn(|c| {
                    let p = corner(c);
                    field.at(p[0], p[1], p[2])
                });
                let mut case = 0usize;
                for (c, v) in vals.iter().enumerate() {
                    if *v < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let mut edge_keys = [u64::MAX; 12];
                for (e, [a, b]) in EDGE_CORNERS.iter().enumerate() {
                    if (vals[*a] < iso) == (vals[*b] < iso) {
                        continue;
                    }
                    let (pa, pb) = (corner(*a), corner(*b));
                    let axis = (0..3).find(|&k| pa[k] != pb[k]).unwrap();
                    let (lo, vlo, vhi) = if pa[axis] < pb[axis] {
                        (pa, vals[*a], vals[*b])
                    } else {
                        (pb, vals[*b], vals[*a])
                    };
                    let k = key(lo, axis);
                    edge_keys[e] = k;
                    out.edges.push((k, vlo, vhi, lo, axis));
                }
                for t in case_triangles(case) {
                    out.triangles
                        .push([edge_keys[t[0]], edge_keys[t[1]], edge_keys[t[2]]]);
                }
            }
        }
        out
    });

    let mut index: HashMap<u64, u32> = HashMap::new();
    let mut mesh = TriMesh::default();
    let h = field.geom.spacing;
    for slab in &slabs {
        for &(k, vlo, vhi, lo, axis) in &slab.edges {
            index.entry(k).or_insert_with(|| {
                let t = ((iso - vlo) / (vhi - vlo)).clamp(0.0, 1.0);
                let mut p = field.geom.position(lo[0], lo[1], lo[2]);
                p[axis] += t * h;
                mesh.vertices.push(p);
                (mesh.vertices.len() - 1) as u32
            });
        }
        mesh.triangles
            .extend(slab.triangles.iter().map(|t| t.map(|k| index[&k])));
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::field::{sphere_sdf, GridGeometry};
    use crate::geometry::mesh::{cross, dot, sub};
    use std::collections::HashMap as Map;

    fn unit_cell(case: usize) -> ScalarField3D {
        let geom = GridGeometry::new([2, 2, 2], [0.0; 3], 1.0).unwrap();
        let mut values = vec![0.0; 8];
        for (c, o) in CORNER_OFFSETS.iter().enumerate() {
            values[geom.index(o[0], o[1], o[2])] = if case & (1 << c) != 0 { -1.0 } else { 1.0 };
        }
        ScalarField3D { geom, values }
    }

    #[test]
    fn table_uses_exactly_the_crossing_edges() {
        for case in 1..255 {
            let used: std::collections::BTreeSet<usize> =
                case_triangles(case).into_iter().flatten().collect();
            let crossing: std::collections::BTreeSet<usize> = EDGE_CORNERS
                .iter()
                .enumerate()
                .filter(|(_, [a, b])| ((case >> a) & 1) != ((case >> b) & 1))
                .map(|(e, _)| e)
                .collect();
            assert_eq!(used, crossing, "case {case}");
        }
    }

    #[test]
    fn every_case_is_oriented_toward_positive_values() {
        // The trilinear interpolant of the corner values must increase along
        // each triangle normal.
        for case in 1..255 {
            let trilinear = |p: [f64; 3]| {
                (0..8)
                    .map(|c| {
                        let o = CORNER_OFFSETS[c];
                        let w: f64 = (0..3)
                            .map(|k| if o[k] == 1 { p[k] } else { 1.0 - p[k] })
                            .product();
                        w * if case & (1 << c) != 0 { -1.0 } else { 1.0 }
                    })
                    .sum::<f64>()
            };
            let mesh = marching_cubes(&unit_cell(case), 0.0);
            for t in &mesh.triangles {
                let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
                let n = cross(sub(b, a), sub(c, a));
                let centroid = [0, 1, 2].map(|k| (a[k] + b[k] + c[k]) / 3.0);
                let eps = 1e-4 / dot(n, n).sqrt();
                let fwd = trilinear([0, 1, 2].map(|k| centroid[k] + eps * n[k]));
                let back = trilinear([0, 1, 2].map(|k| centroid[k] - eps * n[k]));
                assert!(fwd > back, "case {case}");
            }
        }
    }

    #[test]
    fn all_positive_field_is_empty() {
        let geom = GridGeometry::new([5, 5, 5], [0.0; 3], 1.0).unwrap();
        let f = ScalarField3D::from_fn(geom, |_| 1.0);
        assert!(marching_cubes(&f, 0.0).is_empty());
    }

    #[test]
    fn single_negative_corner_gives_one_triangle() {
        let mesh = marching_cubes(&unit_cell(1), 0.0);
        assert_eq!(mesh.triangles.len(), 1);
        assert_eq!(mesh.vertices.len(), 3);
    }

    #[test]
    fn sphere_is_closed_manifold() {
        let geom = GridGeometry::new([24, 24, 24], [-11.5; 3], 1.0).unwrap();
        let f = ScalarField3D::from_fn(geom, sphere_sdf([0.1, 0.2, -0.3], 7.0));
        let mesh = marching_cubes(&f, 0.0);
        let mut edges: Map<(u32, u32), i32> = Map::new();
        for t in &mesh.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += if a < b { 1 } else { -1 };
            }
        }
        // each undirected edge used once in each direction
        assert!(edges.values().all(|v| *v == 0));
    }

    #[test]
    fn vertices_sit_on_sign_changing_edges() {
        let geom = GridGeometry::new([12, 12, 12], [-5.5; 3], 1.0).unwrap();
        let f = ScalarField3D::from_fn(geom, sphere_sdf([0.0; 3], 4.2));
        let mesh = marching_cubes(&f, 0.0);
        for v in &mesh.vertices {
            let g: Vec<f64> = (0..3).map(|k| (v[k] - geom.origin[k]) / geom.spacing).collect();
            let axis = (0..3).find(|&k| (g[k] - g[k].round()).abs() > 1e-12);
            let Some(axis) = axis else { continue };
            let lo: [usize; 3] = std::array::from_fn(|k| {
                if k == axis { g[k].floor() as usize } else { g[k].round() as usize }
            });
            let mut hi = lo;
            hi[axis] += 1;
            assert!((f.at(lo[0], lo[1], lo[2]) < 0.0) != (f.at(hi[0], hi[1], hi[2]) < 0.0));
        }
    }
}
