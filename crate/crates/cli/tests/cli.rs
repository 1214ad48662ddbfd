use laaca_core::frequency::blur;
use laaca_core::image::{load_image, save_image, ImageTensor};
use laaca_core::synth;
use laaca_core::{Architecture, Encoder};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn laaca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laaca"))
        .args(args)
        .output()
        .expect("failed to spawn laaca")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, img: &ImageTensor) -> PathBuf {
    let p = dir.join(name);
    save_image(img, &p).unwrap();
    p
}

/// Integer-valued textured image, so it survives an 8-bit round trip unchanged.
fn textured(seed: u64, side: usize) -> ImageTensor {
    synth::textured(seed, side, side).map(|v| v.round())
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn protect_with_zero_budget_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let x = textured(1, 32);
    let input = write(dir.path(), "art.png", &x);
    let out = dir.path().join("safe.png");
    let o = laaca(&["protect", s(&input), "--out", s(&out), "--arch", "desk", "--epsilon", "0", "--iters", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(load_image(&out).unwrap(), x);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("safe.report.json")).unwrap()).unwrap();
    assert_eq!(report["linf"], 0.0);
    assert_eq!(report["loss_trace"].as_array().unwrap().len(), 6);
}

#[test]
fn protect_constant_image_reports_empty_mask() {
    let dir = tempfile::tempdir().unwrap();
    let x = ImageTensor::filled(3, 24, 24, 140.0);
    let input = write(dir.path(), "flat.png", &x);
    let out = dir.path().join("flat_out.png");
    let o = laaca(&["protect", s(&input), "--out", s(&out), "--arch", "desk", "--iters", "3", "--json"]);
    assert!(o.status.success());
    let report = json(&o);
    assert_eq!(report["mask_density"], 0.0);
    assert_eq!(load_image(&out).unwrap(), x);
}

#[test]
fn protect_defaults_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "art.png", &textured(3, 32));
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    for out in [&a, &b] {
        let o = laaca(&["protect", s(&input), "--out", s(out), "--arch", "desk", "--seed", "0"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let ra: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.report.json")).unwrap()).unwrap();
    let rb: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("b.report.json")).unwrap()).unwrap();
    assert_eq!(ra["loss_trace"], rb["loss_trace"]);
    assert_eq!(ra["params"], serde_json::json!({"k": 4, "alpha": 8.0, "epsilon": 80.0, "iterations": 100, "seed": 0}));
    assert_eq!(ra["loss_trace"].as_array().unwrap().len(), 101);
    assert!(ra["linf"].as_f64().unwrap() <= 80.0);
}

#[test]
fn protect_refuses_to_overwrite_and_leaves_nothing_on_failure() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "art.png", &textured(4, 24));
    let out = dir.path().join("art_out.png");
    std::fs::write(&out, b"keep me").unwrap();
    let o = laaca(&["protect", s(&input), "--out", s(&out), "--arch", "desk", "--iters", "2"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--force"));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), b"keep me");

    let o = laaca(&["protect", s(&input), "--out", s(&out), "--arch", "desk", "--iters", "2", "--force"]);
    assert!(o.status.success());
    assert!(load_image(&out).is_ok());

    // too small for the encoder: fails after loading, must not leave partial files
    let tiny = write(dir.path(), "tiny.png", &textured(5, 4));
    let before = files_in(dir.path());
    let o = laaca(&["protect", s(&tiny), "--out", s(&dir.path().join("tiny_out.png")), "--arch", "desk"]);
    assert!(!o.status.success());
    assert_eq!(files_in(dir.path()), before);

    let o = laaca(&["protect", s(&dir.path().join("missing.png")), "--arch", "desk"]);
    assert!(!o.status.success());
    assert_eq!(files_in(dir.path()), before);
}

#[test]
fn protect_with_external_weights() {
    let dir = tempfile::tempdir().unwrap();
    let arch = Architecture::desk();
    let arch_path = dir.path().join("desk.arch");
    std::fs::write(&arch_path, arch.to_text()).unwrap();
    let weights = dir.path().join("desk.laac");
    Encoder::init_weights(&arch, 99).save_weights(&weights).unwrap();
    let input = write(dir.path(), "art.png", &textured(6, 24));
    let out = dir.path().join("out.png");
    let o = laaca(&[
        "protect", s(&input), "--out", s(&out), "--weights", s(&weights), "--arch", s(&arch_path), "--iters", "3", "--json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&o)["encoder"]["weights"], s(&weights));

    let bytes = std::fs::read(&weights).unwrap();
    std::fs::write(&weights, &bytes[..bytes.len() / 2]).unwrap();
    let o = laaca(&[
        "protect", s(&input), "--out", s(&dir.path().join("out2.png")), "--weights", s(&weights), "--arch", s(&arch_path),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn batch_protect_writes_reports_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("in");
    std::fs::create_dir(&src).unwrap();
    write(&src, "b.png", &textured(7, 24));
    write(&src, "a.png", &textured(8, 24));
    std::fs::write(src.join("notes.txt"), "ignored").unwrap();
    let dst = dir.path().join("out");
    let o = laaca(&["protect", s(&src), "--out", s(&dst), "--arch", "desk", "--iters", "4", "--json"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        files_in(&dst),
        vec!["a.png", "a.report.json", "b.png", "b.report.json", "summary.json"]
    );
    let summary = json(&o);
    assert_eq!(summary["images"], 2);
    let reports: Vec<&str> = summary["reports"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(reports[0].ends_with("a.report.json") && reports[1].ends_with("b.report.json"));
    assert!(summary["max_linf"].as_f64().unwrap() <= 80.0);
}

#[test]
fn eval_identity() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.png", &textured(9, 32));
    let o = laaca(&["eval", s(&x), s(&x), "--json"]);
    assert!(o.status.success());
    let r = json(&o);
    assert_eq!(r["ssimc"], 1.0);
    assert_eq!(r["acdm"]["total"], 0.0);
    assert_eq!(r["l2"], 0.0);
    assert_eq!(r["linf"], 0.0);
    let o = laaca(&["eval", s(&x), s(&x)]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("SSIMc   1.0000"), "{text}");
    assert!(text.contains("ACDM    0.0000"), "{text}");
}

#[test]
fn eval_against_blur_and_protection() {
    let dir = tempfile::tempdir().unwrap();
    let x = textured(10, 48);
    let xp = write(dir.path(), "x.png", &x);
    let blurred = write(dir.path(), "blur.png", &blur(&x, 3).unwrap().map(|v| v.round()));
    let r = json(&laaca(&["eval", s(&xp), s(&blurred), "--json"]));
    assert!(r["ssimc"].as_f64().unwrap() < 1.0);
    let acdm = r["acdm"]["total"].as_f64().unwrap();
    assert!(acdm > 0.0 && acdm < 0.5, "{acdm}");

    let prot = dir.path().join("prot.png");
    assert!(laaca(&["protect", s(&xp), "--out", s(&prot), "--arch", "desk", "--iters", "10"]).status.success());
    let r = json(&laaca(&["eval", s(&xp), s(&prot), "--json"]));
    assert!(r["linf"].as_f64().unwrap() <= 80.0);
}

#[test]
fn eval_with_different_sizes_keeps_acdm() {
    let dir = tempfile::tempdir().unwrap();
    let x = write(dir.path(), "x.png", &textured(11, 32));
    let y = write(dir.path(), "y.png", &textured(12, 40));
    let o = laaca(&["eval", s(&x), s(&y), "--json"]);
    assert!(o.status.success());
    let r = json(&o);
    assert!(r["ssimc"].is_null() && r["l2"].is_null() && r["linf"].is_null());
    assert!(r["acdm"]["total"].as_f64().unwrap() > 0.0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unavailable"));
}

#[test]
fn acdm_and_ssimc_output_formats() {
    let dir = tempfile::tempdir().unwrap();
    let black = write(dir.path(), "black.png", &ImageTensor::zeros(3, 16, 16));
    let white = write(dir.path(), "white.png", &ImageTensor::filled(3, 16, 16, 255.0));
    let o = laaca(&["acdm", s(&black), s(&white)]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout), "1.0000\n");
    let r = json(&laaca(&["acdm", s(&black), s(&white), "--json"]));
    assert_eq!(r["per_channel"]["L"], 1.0);
    assert_eq!(r["total"], 1.0);

    let x = write(dir.path(), "x.png", &textured(13, 24));
    let o = laaca(&["ssimc", s(&x), s(&x)]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "1.0000\n");
    assert_eq!(json(&laaca(&["ssimc", s(&x), s(&x), "--json"]))["ssimc"], 1.0);
    let o = laaca(&["ssimc", s(&x), s(&black)]);
    assert!(!o.status.success());
    assert!(o.stdout.is_empty());
}

#[test]
fn split_freq_of_constant_image() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "flat.png", &ImageTensor::filled(3, 20, 20, 90.0));
    let prefix = dir.path().join("flat");
    let o = laaca(&["split-freq", s(&input), "--out", s(&prefix)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res = load_image(dir.path().join("flat.residual.png")).unwrap();
    assert!(res.data().iter().all(|&v| v == 128.0));
    let mask = load_image(dir.path().join("flat.mask.png")).unwrap();
    assert!(mask.data().iter().all(|&v| v == 0.0));
    let low = load_image(dir.path().join("flat.low.png")).unwrap();
    assert!(low.data().iter().all(|&v| v == 90.0));
}

fn positive_residual_mass(path: &Path) -> f64 {
    let res = load_image(path).unwrap();
    res.data().iter().map(|v| (v - 128.0).max(0.0)).sum::<f64>() / res.len() as f64
}

#[test]
fn blur_then_split_leaves_little_high_frequency() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "x.png", &textured(14, 48));
    let blurred = dir.path().join("x_blur.png");
    let o = laaca(&["blur", s(&input), "--out", s(&blurred), "--k", "2"]);
    assert!(o.status.success());
    assert!(laaca(&["split-freq", s(&input), "--out", s(&dir.path().join("orig")), "--k", "2"]).status.success());
    assert!(laaca(&["split-freq", s(&blurred), "--out", s(&dir.path().join("blr")), "--k", "2"]).status.success());
    let before = positive_residual_mass(&dir.path().join("orig.residual.png"));
    let after = positive_residual_mass(&dir.path().join("blr.residual.png"));
    assert!(after < 0.5 * before, "before {before} after {after}");
}

#[test]
fn blur_defaults_to_k3() {
    let dir = tempfile::tempdir().unwrap();
    let x = textured(15, 32);
    let input = write(dir.path(), "x.png", &x);
    let out = dir.path().join("y.png");
    assert!(laaca(&["blur", s(&input), "--out", s(&out)]).status.success());
    let expect = blur(&x, 3).unwrap().map(|v| v.round());
    assert_eq!(load_image(&out).unwrap(), expect);
    let o = laaca(&["blur", s(&input), "--out", s(&out)]);
    assert!(!o.status.success());
}
