use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;

/// Indexed triangle mesh with optional per-vertex color and SDI attribute.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    /// RGB in `[0, 1]`.
    pub colors: Option<Vec<[f64; 3]>>,
    /// Secondary-dynamics mask value per vertex, in `[0, 1]`.
    pub sdi: Option<Vec<f64>>,
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[u32; 3]>) -> Self {
        TriMesh {
            vertices,
            triangles,
            colors: None,
            sdi: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {i} references a vertex out of range"
                )));
            }
            if t[0] == t[1] && t[1] == t[2] {
                return Err(Error::InvalidArgument(format!("triangle {i} is degenerate")));
            }
        }
        if let Some(c) = &self.colors {
            if c.len() != self.vertices.len() {
                return Err(Error::shape("TriMesh colors", self.vertices.len(), c.len()));
            }
        }
        if let Some(s) = &self.sdi {
            if s.len() != self.vertices.len() {
                return Err(Error::shape("TriMesh sdi", self.vertices.len(), s.len()));
            }
        }
        Ok(())
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i as usize]);
        let u = sub(b, a);
        let v = sub(c, a);
        norm(cross(u, v)) * 0.5
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Axis-aligned bounds, `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                std::array::from_fn(|k| lo[k].min(v[k])),
                std::array::from_fn(|k| hi[k].max(v[k])),
            )
        }))
    }

    /// Concatenates meshes, offsetting triangle indices. No vertex welding.
    pub fn concat(meshes: &[&TriMesh]) -> TriMesh {
        let mut out = TriMesh::default();
        let any_colors = meshes.iter().any(|m| m.colors.is_some());
        let any_sdi = meshes.iter().any(|m| m.sdi.is_some());
        let mut colors = Vec::new();
        let mut sdi = Vec::new();
        for m in meshes {
            let base = out.vertices.len() as u32;
            out.vertices.extend_from_slice(&m.vertices);
            out.triangles
                .extend(m.triangles.iter().map(|t| t.map(|i| i + base)));
            if any_colors {
                match &m.colors {
                    Some(c) => colors.extend_from_slice(c),
                    None => colors.extend(std::iter::repeat_n([1.0; 3], m.vertices.len())),
                }
            }
            if any_sdi {
                match &m.sdi {
                    Some(s) => sdi.extend_from_slice(s),
                    None => sdi.extend(std::iter::repeat_n(0.0, m.vertices.len())),
                }
            }
        }
        out.colors = any_colors.then_some(colors);
        out.sdi = any_sdi.then_some(sdi);
        out
    }

    /// ASCII PLY. Positions are written as doubles in shortest round-trip form.
    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
        s.push_str("property float sdi\n");
        let _ = writeln!(s, "element face {}", self.triangles.len());
        s.push_str("property list uchar int vertex_indices\nend_header\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let c = self.colors.as_ref().map_or([1.0; 3], |c| c[i]);
            let q = |x: f64| (x.clamp(0.0, 1.0) * 255.0).round() as u8;
            let sdi = self.sdi.as_ref().map_or(0.0, |s| s[i]) as f32;
            let _ = writeln!(
                s,
                "{:?} {:?} {:?} {} {} {} {:?}",
                v[0],
                v[1],
                v[2],
                q(c[0]),
                q(c[1]),
                q(c[2]),
                sdi
            );
        }
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn save_ply(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, self.to_ply().as_bytes())
    }

    pub fn load_ply(path: &Path) -> Result<TriMesh> {
        TriMesh::parse_ply(&fsutil::read_to_string(path)?, path)
    }

    /// Parses ASCII PLY with `x y z` and optional `red green blue` / `sdi`
    /// vertex properties. Polygons are fan-triangulated.
    pub fn parse_ply(text: &str, path: &Path) -> Result<TriMesh> {
        let bad = |line: usize, m: &str| Error::format(path, format!("line {line}: {m}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, "ply")) => {}
            _ => return Err(bad(1, "missing `ply` magic")),
        }
        let mut n_vertices = 0usize;
        let mut n_faces = 0usize;
        let mut props: Vec<String> = Vec::new();
        let mut current = "";
        loop {
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "missing end_header"))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            match parts.as_slice() {
                ["format", "ascii", _] => {}
                ["format", ..] => return Err(bad(ln, "only ascii PLY is supported")),
                ["comment", ..] | ["obj_info", ..] | [] => {}
                ["element", name, count] => {
                    let count = count.parse().map_err(|_| bad(ln, "bad element count"))?;
                    match *name {
                        "vertex" => {
                            n_vertices = count;
                            current = "vertex";
                        }
                        "face" => {
                            n_faces = count;
                            current = "face";
                        }
                        _ => return Err(bad(ln, &format!("unsupported element `{name}`"))),
                    }
                }
                ["property", "list", ..] => {
                    if current != "face" {
                        return Err(bad(ln, "list property outside face element"));
                    }
                }
                ["property", _, name] => {
                    if current == "vertex" {
                        props.push((*name).to_string());
                    }
                }
                ["end_header"] => break,
                _ => return Err(bad(ln, &format!("unexpected header line `{line}`"))),
            }
        }
        let col = |name: &str| props.iter().position(|p| p == name);
        let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => return Err(bad(0, "vertex element lacks x/y/z")),
        };
        let rgb = match (col("red"), col("green"), col("blue")) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        let isdi = col("sdi");

        let mut mesh = TriMesh {
            colors: rgb.map(|_| Vec::with_capacity(n_vertices)),
            sdi: isdi.map(|_| Vec::with_capacity(n_vertices)),
            ..TriMesh::default()
        };
        for _ in 0..n_vertices {
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated vertex list"))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "bad vertex value"))?;
            if vals.len() != props.len() {
                return Err(bad(ln, "vertex has wrong number of values"));
            }
            mesh.vertices.push([vals[ix], vals[iy], vals[iz]]);
            if let (Some(c), Some(idx)) = (&mut mesh.colors, rgb) {
                c.push(idx.map(|k| vals[k] / 255.0));
            }
            if let (Some(s), Some(k)) = (&mut mesh.sdi, isdi) {
                s.push(vals[k]);
            }
        }
        for _ in 0..n_faces {
            let (ln, line) = lines.next().ok_or_else(|| bad(0, "truncated face list"))?;
            let idx: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "bad face index"))?;
            let (&n, rest) = idx.split_first().ok_or_else(|| bad(ln, "empty face"))?;
            if rest.len() != n as usize || n < 3 {
                return Err(bad(ln, "face index count mismatch"));
            }
            for k in 1..rest.len() - 1 {
                mesh.triangles.push([rest[0], rest[k], rest[k + 1]]);
            }
        }
        mesh.validate().map_err(|e| bad(0, &e.to_string()))?;
        Ok(mesh)
    }
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}
