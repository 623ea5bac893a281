use std::path::Path;
use std::process::{Command, Output};

use inkmotion::{BinaryMap, Image};

fn inkmotion(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_inkmotion")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn demo(dir: &Path, extra: &[&str]) -> String {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec!["demo", "--out", out_dir, "--frames", "6", "--width", "32", "--height", "32"];
    args.extend_from_slice(extra);
    let out = inkmotion(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    dir.join("project.toml").to_str().unwrap().to_owned()
}

fn blend_inputs(dir: &Path) -> [String; 3] {
    let target = Image::from_fn(16, 16, 3, |x, y, c| ((x + 2 * y + c) % 7) as f64 / 6.0);
    let source = Image::from_fn(16, 16, 3, |x, _, c| if c == 0 { x as f64 / 15.0 } else { 0.5 });
    let mask = BinaryMap::from_fn(16, 16, |x, y| (4..12).contains(&x) && (4..12).contains(&y));
    let paths = ["target.png", "source.png", "mask.png"].map(|n| dir.join(n));
    target.save_png(&paths[0]).unwrap();
    source.save_png(&paths[1]).unwrap();
    mask.save_png(&paths[2]).unwrap();
    paths.map(|p| p.to_str().unwrap().to_owned())
}

#[test]
fn demo_then_animate_writes_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let config = demo(&tmp.path().join("project"), &[]);
    let out_dir = tmp.path().join("run");
    let out = inkmotion(&["animate", "--config", &config, "--out", out_dir.to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for i in 0..6 {
        assert!(out_dir.join(format!("frames/frame_{i:04}.png")).is_file());
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 3"));
    assert!(manifest.contains("command = \"animate\""));
}

#[test]
fn hlm_without_segmentation_prints_notice() {
    let tmp = tempfile::tempdir().unwrap();
    let config = demo(&tmp.path().join("project"), &[]);
    let text = std::fs::read_to_string(&config).unwrap();
    let stripped: String = text.lines().filter(|l| !l.starts_with("seg_")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&config, stripped).unwrap();
    let out = inkmotion(&["hlm", "--config", &config]);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("notice: no segmentation maps configured"), "{stdout}");
    assert!(tmp.path().join("project/out/hlm/merged.ply").is_file());
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let config = demo(&tmp.path().join("project"), &[]);
    let out = inkmotion(&["animate", "--config", &config, "--alpha", "0.2", "--beta", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error:"));

    let missing = tmp.path().join("nope.toml");
    let out = inkmotion(&["render-guidance", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope.toml"), "{}", stderr(&out));

    let out = inkmotion(&["animate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn poisson_blend_writes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let [t, s, m] = blend_inputs(tmp.path());
    let dest = tmp.path().join("out.png");
    let out = inkmotion(&["poisson-blend", "--target", &t, "--source", &s, "--mask", &m, "--out", dest.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let result = Image::load_png_rgb(&dest).unwrap();
    let target = Image::load_png_rgb(Path::new(&t)).unwrap();
    // border of the image lies outside the mask and keeps the target
    assert_eq!(result.get(0, 0, 1), target.get(0, 0, 1));
    assert_eq!(result.get(15, 15, 2), target.get(15, 15, 2));
}

#[test]
fn poisson_blend_without_convergence_exits_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let [t, s, m] = blend_inputs(tmp.path());
    let dest = tmp.path().join("out.png");
    let out = inkmotion(&[
        "poisson-blend", "--target", &t, "--source", &s, "--mask", &m, "--out", dest.to_str().unwrap(), "--max-iter", "1",
        "--tol", "1e-14",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!dest.exists());
}
