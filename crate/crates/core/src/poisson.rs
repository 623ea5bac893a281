//! Gradient-domain seamless cloning: a 4-neighbor discrete Poisson equation
//! per channel, Dirichlet data from the target, solved by conjugate
//! gradients.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::parallel;
use crate::raster::{BinaryMap, Image};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 20_000;

#[derive(Debug, Clone, Copy)]
pub struct PoissonProblem<'a> {
    /// Supplies the boundary values and everything outside the mask.
    pub target: &'a Image,
    /// Supplies the gradients inside the mask.
    pub source: &'a Image,
    pub mask: &'a BinaryMap,
}

impl PoissonProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        let (t, s, m) = (self.target, self.source, self.mask);
        if !t.same_size(s) || t.channels != s.channels {
            return Err(Error::shape(
                "seamless_clone source",
                format!("{}x{}", t.dims(), t.channels),
                format!("{}x{}", s.dims(), s.channels),
            ));
        }
        if t.width != m.width || t.height != m.height {
            return Err(Error::shape(
                "seamless_clone mask",
                t.dims(),
                format!("{}x{}", m.width, m.height),
            ));
        }
        Ok(())
    }
}

/// One sparse system `A f = b_c` per channel, shared matrix.
///
/// `A` has 4 on the diagonal and −1 between 4-adjacent unknowns.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSystem {
    pub width: usize,
    /// Pixel index (`y * width + x`) of each unknown, row-major.
    pub omega: Vec<usize>,
    /// Unknown indices of in-domain neighbors.
    pub neighbors: Vec<Vec<u32>>,
    /// Right-hand side per channel.
    pub rhs: Vec<Vec<f64>>,
}

/// Ω: mask pixels that do not touch the image border.
pub fn interior_domain(mask: &BinaryMap) -> Vec<usize> {
    let (w, h) = (mask.width, mask.height);
    let mut out = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            if mask.get(x, y) {
                out.push(y * w + x);
            }
        }
    }
    out
}

pub fn build_system(problem: &PoissonProblem) -> Result<PoissonSystem> {
    problem.validate()?;
    let (t, s) = (problem.target, problem.source);
    let w = t.width;
    let omega = interior_domain(problem.mask);
    let mut slot = vec![u32::MAX; t.width * t.height];
    for (k, &p) in omega.iter().enumerate() {
        slot[p] = k as u32;
    }
    let nbrs = |p: usize| [p - w, p - 1, p + 1, p + w];
    let neighbors = omega
        .iter()
        .map(|&p| {
            nbrs(p)
                .into_iter()
                .filter(|q| slot[*q] != u32::MAX)
                .map(|q| slot[q])
                .collect()
        })
        .collect();
    let ch = t.channels;
    let rhs = (0..ch)
        .map(|c| {
            omega
                .iter()
                .map(|&p| {
                    let mut b = 0.0;
                    for q in nbrs(p) {
                        b += s.data[p * ch + c] - s.data[q * ch + c];
                        if slot[q] == u32::MAX {
                            b += t.data[q * ch + c];
                        }
                    }
                    b
                })
                .collect()
        })
        .collect();
    Ok(PoissonSystem {
        width: w,
        omega,
        neighbors,
        rhs,
    })
}

impl PoissonSystem {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (k, nb) in self.neighbors.iter().enumerate() {
            let mut acc = 4.0 * x[k];
            for &j in nb {
                acc -= x[j as usize];
            }
            y[k] = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut a = DMatrix::zeros(n, n);
        for (k, nb) in self.neighbors.iter().enumerate() {
            a[(k, k)] = 4.0;
            for &j in nb {
                a[(k, j as usize)] = -1.0;
            }
        }
        a
    }

    /// `‖b − A x‖∞`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; x.len()];
        self.apply(x, &mut ax);
        ax.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conjugate gradients on `A x = b` until `‖r‖₂ ≤ tol·‖b‖₂`.
pub fn solve(system: &PoissonSystem, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = system.len();
    if b.len() != n {
        return Err(Error::shape("poisson solve", n, b.len()));
    }
    let mut x = vec![0.0; n];
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        system.apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    if rr.sqrt() <= tol * b_norm {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Poisson solution written into a copy of the target, without clamping.
pub fn clone_unclamped(problem: &PoissonProblem, opts: SolverOptions) -> Result<Image> {
    let system = build_system(problem)?;
    let mut out = problem.target.clone();
    if system.is_empty() {
        return Ok(out);
    }
    let solutions = parallel::map_range(system.rhs.len(), |c| solve(&system, &system.rhs[c], opts.tol, opts.max_iter));
    let ch = out.channels;
    for (c, sol) in solutions.into_iter().enumerate() {
        for (k, v) in sol?.into_iter().enumerate() {
            out.data[system.omega[k] * ch + c] = v;
        }
    }
    Ok(out)
}

/// Pastes the gradients of `source` into `target` over `mask`; values are
/// clamped to `[0, 1]` and pixels outside the domain are copied from
/// `target` untouched.
pub fn seamless_clone(target: &Image, source: &Image, mask: &BinaryMap, opts: SolverOptions) -> Result<Image> {
    let problem = PoissonProblem { target, source, mask };
    let mut out = clone_unclamped(&problem, opts)?;
    let ch = out.channels;
    for p in interior_domain(mask) {
        for v in &mut out.data[p * ch..(p + 1) * ch] {
            *v = v.clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Image {
        Image::from_fn(w, h, 1, |x, y, _| f(x, y))
    }

    #[test]
    fn empty_domain() {
        let t = img(5, 5, |x, y| (x + y) as f64 / 10.0);
        let s = img(5, 5, |x, _| x as f64);
        // only border pixels set: Ω is empty
        let m = BinaryMap::from_fn(5, 5, |x, y| x == 0 || y == 4);
        let sys = build_system(&PoissonProblem { target: &t, source: &s, mask: &m }).unwrap();
        assert!(sys.is_empty());
        assert_eq!(seamless_clone(&t, &s, &m, SolverOptions::default()).unwrap(), t);
    }

    #[test]
    fn single_pixel_hand_expansion() {
        let t = img(3, 3, |x, y| (3 * y + x) as f64 * 0.1);
        let s = img(3, 3, |x, y| ((x * 7 + y * 5) % 4) as f64 * 0.2);
        let mut m = BinaryMap::new(3, 3);
        m.set(1, 1, true);
        let sys = build_system(&PoissonProblem { target: &t, source: &s, mask: &m }).unwrap();
        let nb = [(1, 0), (0, 1), (2, 1), (1, 2)];
        let sp = s.get(1, 1, 0);
        let expect: f64 = nb.iter().map(|&(x, y)| t.get(x, y, 0) + sp - s.get(x, y, 0)).sum();
        assert_eq!(sys.len(), 1);
        assert!((sys.rhs[0][0] - expect).abs() < 1e-15);
        let x = solve(&sys, &sys.rhs[0], 1e-12, 10).unwrap();
        assert!((x[0] - expect / 4.0).abs() < 1e-15);
    }

    #[test]
    fn block_matches_dense_assembly() {
        let t = img(5, 5, |x, y| ((x * 3 + y) % 5) as f64 / 5.0);
        let s = img(5, 5, |x, y| ((x + y * 2) % 3) as f64 / 3.0);
        let m = BinaryMap::from_fn(5, 5, |x, y| (1..4).contains(&x) && (1..4).contains(&y));
        let sys = build_system(&PoissonProblem { target: &t, source: &s, mask: &m }).unwrap();
        assert_eq!(sys.len(), 9);
        // dense oracle: unknown k = (y-1)*3 + (x-1)
        let mut a = DMatrix::<f64>::zeros(9, 9);
        let mut b = vec![0.0; 9];
        for y in 1..4 {
            for x in 1..4 {
                let k = (y - 1) * 3 + (x - 1);
                a[(k, k)] = 4.0;
                for (dx, dy) in [(-1i32, 0i32), (1, 0), (0, -1), (0, 1)] {
                    let (qx, qy) = ((x as i32 + dx) as usize, (y as i32 + dy) as usize);
                    b[k] += s.get(x, y, 0) - s.get(qx, qy, 0);
                    if (1..4).contains(&qx) && (1..4).contains(&qy) {
                        a[(k, (qy - 1) * 3 + (qx - 1))] = -1.0;
                    } else {
                        b[k] += t.get(qx, qy, 0);
                    }
                }
            }
        }
        assert_eq!(sys.to_dense(), a);
        for k in 0..9 {
            assert!((sys.rhs[0][k] - b[k]).abs() < 1e-15);
        }
        let dense = a.lu().solve(&nalgebra::DVector::from(b)).unwrap();
        let cg = solve(&sys, &sys.rhs[0], 1e-12, 100).unwrap();
        for k in 0..9 {
            assert!((cg[k] - dense[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let z = img(6, 6, |_, _| 0.0);
        let m = BinaryMap::filled(6, 6, true);
        let sys = build_system(&PoissonProblem { target: &z, source: &z, mask: &m }).unwrap();
        assert!(solve(&sys, &sys.rhs[0], 1e-8, 100).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn consistent_and_offset_sources_reproduce_target() {
        let t = Image::from_fn(8, 8, 3, |x, y, c| 0.2 + 0.05 * x as f64 + 0.03 * y as f64 + 0.1 * c as f64);
        let m = BinaryMap::from_fn(8, 8, |x, y| (2..7).contains(&x) && (1..6).contains(&y));
        let out = seamless_clone(&t, &t, &m, SolverOptions::default()).unwrap();
        assert!(out.max_abs_diff(&t) < 1e-6);
        let shifted = Image {
            data: t.data.iter().map(|v| v + 0.25).collect(),
            ..t.clone()
        };
        let out = seamless_clone(&t, &shifted, &m, SolverOptions::default()).unwrap();
        assert!(out.max_abs_diff(&t) < 1e-6);
    }

    #[test]
    fn harmonic_fill_for_flat_source() {
        // zero guidance: interior is the discrete harmonic interpolant
        let t = img(9, 9, |x, _| x as f64 / 8.0);
        let s = img(9, 9, |_, _| 0.7);
        let m = BinaryMap::filled(9, 9, true);
        let out = seamless_clone(&t, &s, &m, SolverOptions::default()).unwrap();
        // a linear ramp is harmonic, so it is reproduced
        assert!(out.max_abs_diff(&t) < 1e-7);
    }

    #[test]
    fn outside_pixels_are_untouched_and_clamped_inside() {
        let t = img(7, 7, |x, y| ((x * y) % 5) as f64 / 5.0);
        let s = img(7, 7, |x, y| if x == 3 && y == 3 { 40.0 } else { 0.0 });
        let m = BinaryMap::from_fn(7, 7, |x, y| (2..5).contains(&x) && (2..5).contains(&y));
        let out = seamless_clone(&t, &s, &m, SolverOptions::default()).unwrap();
        for y in 0..7 {
            for x in 0..7 {
                if !m.get(x, y) {
                    assert_eq!(out.get(x, y, 0).to_bits(), t.get(x, y, 0).to_bits());
                }
                assert!((0.0..=1.0).contains(&out.get(x, y, 0)));
            }
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let t = img(12, 12, |x, y| ((x * 7 + y * 3) % 11) as f64 / 11.0);
        let s = img(12, 12, |x, y| ((x * 5 + y * 2) % 13) as f64 / 13.0);
        let m = BinaryMap::filled(12, 12, true);
        let sys = build_system(&PoissonProblem { target: &t, source: &s, mask: &m }).unwrap();
        let err = solve(&sys, &sys.rhs[0], 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
        assert!(err.is_numerical());
    }

    #[test]
    fn mismatched_sizes_are_rejected() {
        let t = img(4, 4, |_, _| 0.0);
        let s = img(5, 4, |_, _| 0.0);
        assert!(seamless_clone(&t, &s, &BinaryMap::new(4, 4), SolverOptions::default()).is_err());
        assert!(seamless_clone(&t, &t, &BinaryMap::new(4, 5), SolverOptions::default()).is_err());
    }
}
