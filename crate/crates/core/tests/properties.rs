use proptest::prelude::*;

use inkmotion::diffusion::{
    downsample_mask, forward_diffuse, latent_estimate, make_schedule, velocity_target, Codec, LatentVideo,
    ScheduleKind,
};
use inkmotion::geometry::TriMesh;
use inkmotion::guidance::pose::{limb_paint_order, LIMBS};
use inkmotion::guidance::rig::Joint;
use inkmotion::guidance::{lbs_deform, mask_coarse, Keypoint, PoseFrame, RiggedMesh, Skeleton, Transform};
use inkmotion::poisson::{clone_unclamped, PoissonProblem, SolverOptions};
use inkmotion::sdi::{blend_estimates, segment_starts};
use inkmotion::{BinaryMap, Image};

fn image(w: usize, h: usize, c: usize, data: Vec<f64>) -> Image {
    let mut img = Image::zeros(w, h, c);
    img.data = data;
    img
}

fn tight() -> SolverOptions {
    SolverOptions {
        tol: 1e-12,
        max_iter: 10_000,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn limb_order_is_an_explicit_depth_sort(
        depths in prop::collection::vec(prop_oneof![(-3i32..3).prop_map(f64::from), -5.0..5.0f64], 18),
        valid in prop::collection::vec(prop::bool::weighted(0.85), 18),
    ) {
        let mut frame = PoseFrame::default();
        for k in 0..18 {
            frame.keypoints[k] = Keypoint { x: 1.0, y: 1.0, depth: depths[k], valid: valid[k] };
        }
        // selection sort: repeatedly take the farthest remaining limb, lowest index first
        let mut left: Vec<usize> = (0..LIMBS.len()).filter(|&i| valid[LIMBS[i].0] && valid[LIMBS[i].1]).collect();
        let mean = |i: usize| 0.5 * (depths[LIMBS[i].0] + depths[LIMBS[i].1]);
        let mut expected = Vec::new();
        while !left.is_empty() {
            let mut best = 0;
            for k in 1..left.len() {
                if mean(left[k]) > mean(left[best]) {
                    best = k;
                }
            }
            expected.push(left.remove(best));
        }
        prop_assert_eq!(limb_paint_order(&frame), expected);
    }

    #[test]
    fn identity_skinning_is_exact(
        verts in prop::collection::vec(prop::array::uniform3(-100.0..100.0f64), 3..30),
        raw in prop::collection::vec((0usize..3, 0usize..3, 0.05..1.0f64), 30),
    ) {
        let n = verts.len();
        let tris = vec![[0u32, 1, 2]];
        let mesh = TriMesh::new(verts.clone(), tris);
        let weights = (0..n).map(|v| {
            let (a, b, x) = raw[v];
            if a == b { vec![(a, 1.0)] } else { vec![(a, x), (b, 1.0 - x)] }
        }).collect();
        let rig = RiggedMesh::new(mesh, weights).unwrap();
        let skel = Skeleton::new(vec![
            Joint { name: "a".into(), parent: None, bind: Transform::identity() },
            Joint { name: "b".into(), parent: Some(0), bind: Transform::translation([0.0, 1.0, 0.0]) },
            Joint { name: "c".into(), parent: Some(1), bind: Transform::translation([0.0, 2.0, 0.0]) },
        ]).unwrap();
        let out = lbs_deform(&rig, &skel, &[Transform::identity(); 3]).unwrap();
        prop_assert_eq!(out.vertices, verts);
    }

    #[test]
    fn poisson_is_linear_and_ignores_source_offset(
        (w, h) in (3usize..9, 3usize..9),
        seed in any::<u64>(),
        offset in -2.0..2.0f64,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut field = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (t1, t2, s1, s2) = (field(w * h), field(w * h), field(w * h), field(w * h));
        let bits = field(w * h);
        let mask = BinaryMap::from_fn(w, h, |x, y| bits[y * w + x] > -0.4);
        let img = |d: &[f64]| image(w, h, 1, d.to_vec());
        let sum = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        let solve = |t: &Image, s: &Image| clone_unclamped(&PoissonProblem { target: t, source: s, mask: &mask }, tight()).unwrap();

        let a = solve(&img(&t1), &img(&s1));
        let b = solve(&img(&t2), &img(&s2));
        let ab = solve(&img(&sum(&t1, &t2)), &img(&sum(&s1, &s2)));
        for i in 0..w * h {
            prop_assert!((ab.data[i] - a.data[i] - b.data[i]).abs() < 1e-8);
        }
        let shifted: Vec<f64> = s1.iter().map(|v| v + offset).collect();
        let c = solve(&img(&t1), &img(&shifted));
        prop_assert!(c.max_abs_diff(&a) < 1e-8);
    }

    #[test]
    fn blend_selects_by_mask(
        (n, h, w) in (1usize..4, 1usize..6, 1usize..6),
        seed in any::<u64>(),
        p in 0.0..1.0f64,
    ) {
        let a = LatentVideo::gaussian(n, 3, h, w, seed);
        let b = LatentVideo::gaussian(n, 3, h, w, seed ^ 1);
        let masks: Vec<BinaryMap> = (0..n)
            .map(|f| BinaryMap::from_fn(w, h, |x, y| ((x * 31 + y * 17 + f * 7) % 100) as f64 / 100.0 < p))
            .collect();
        prop_assert_eq!(&blend_estimates(&a, &a, &masks).unwrap(), &a);
        prop_assert_eq!(&blend_estimates(&a, &b, &vec![BinaryMap::new(w, h); n]).unwrap(), &a);
        prop_assert_eq!(&blend_estimates(&a, &b, &vec![BinaryMap::filled(w, h, true); n]).unwrap(), &b);
        let mixed = blend_estimates(&a, &b, &masks).unwrap();
        let again = blend_estimates(&mixed, &b, &masks).unwrap();
        prop_assert_eq!(mixed, again);
    }

    #[test]
    fn schedules_satisfy_the_unit_identity(steps in 1usize..2000, linear in any::<bool>()) {
        let kind = if linear { ScheduleKind::Linear } else { ScheduleKind::Cosine };
        let s = make_schedule(kind, steps).unwrap();
        for t in 0..=steps {
            let (a, g) = (s.alpha(t), s.sigma(t));
            prop_assert!((a * a + g * g - 1.0).abs() < 1e-12);
            if t > 0 {
                prop_assert!(a <= s.alpha(t - 1));
            }
        }
    }

    #[test]
    fn latent_estimate_inverts_the_forward_process(seed in any::<u64>(), t in 0usize..=1000) {
        let s = make_schedule(ScheduleKind::Cosine, 1000).unwrap();
        let z0 = LatentVideo::gaussian(2, 3, 4, 4, seed);
        let eps = LatentVideo::gaussian(2, 3, 4, 4, seed.wrapping_add(1));
        let zt = forward_diffuse(&z0, &eps, t, &s).unwrap();
        let v = velocity_target(&z0, &eps, t, &s).unwrap();
        prop_assert!(latent_estimate(&zt, &v, t, &s).unwrap().max_abs_diff(&z0) < 1e-10);
    }

    #[test]
    fn masking_zeroes_exactly_the_mask(
        (w, h) in (1usize..10, 1usize..10),
        seed in any::<u64>(),
    ) {
        let c = Image::from_fn(w, h, 3, |x, y, k| ((seed as usize).wrapping_add(x * 13 + y * 7 + k) % 251) as f64 / 250.0);
        let m = BinaryMap::from_fn(w, h, |x, y| (seed >> ((x + y * w) % 60)) & 1 == 1);
        let out = mask_coarse(&c, &m).unwrap();
        for y in 0..h {
            for x in 0..w {
                let keep = if m.get(x, y) { 0.0 } else { 1.0 };
                for k in 0..3 {
                    prop_assert_eq!(out.get(x, y, k), c.get(x, y, k) * keep);
                }
            }
        }
    }

    #[test]
    fn windows_cover_the_clip(total in 1usize..200, window in 1usize..32, overlap in 0usize..31) {
        prop_assume!(overlap < window);
        let starts = segment_starts(total, window, overlap).unwrap();
        prop_assert_eq!(starts[0], 0);
        prop_assert_eq!((starts.last().unwrap() + window).min(total), total);
        for pair in starts.windows(2) {
            // consecutive windows share at least the overlap and advance
            prop_assert!(pair[1] > pair[0]);
            prop_assert!(pair[0] + window >= pair[1] + overlap);
        }
    }

    #[test]
    fn max_pool_keeps_every_marked_pixel(
        (bw, bh) in (1usize..6, 1usize..6),
        f in 1usize..4,
        seed in any::<u64>(),
    ) {
        let (w, h) = (bw * f, bh * f);
        let m = BinaryMap::from_fn(w, h, |x, y| (seed.rotate_left((x * 7 + y * 3) as u32 % 64)) & 3 == 0);
        let d = downsample_mask(&m, f).unwrap();
        for y in 0..h {
            for x in 0..w {
                let block: bool = (0..f).any(|dy| (0..f).any(|dx| m.get((x / f) * f + dx, (y / f) * f + dy)));
                prop_assert_eq!(d.get(x / f, y / f), block);
            }
        }
    }

    #[test]
    fn avgpool_round_trips_constants(value in 0.0..1.0f64, f in 1usize..5) {
        let codec = Codec::avgpool(f).unwrap();
        let frame = Image::filled(4 * f, 2 * f, &[value, 1.0 - value, 0.5]);
        let z = codec.encode(std::slice::from_ref(&frame)).unwrap();
        let back = codec.decode(&z);
        prop_assert!(back[0].max_abs_diff(&frame) < 1e-12);
    }
}
