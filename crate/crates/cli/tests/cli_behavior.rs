//! Black-box checks of the command-line contracts: exit codes, default
//! parameters, per-pair failure isolation, and report consistency.

use std::path::Path;
use std::process::{Command, Output};

use bayesfusion::plane::{ImagePlane, IntensityScale};
use bayesfusion::save_grayscale;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bayesfusion"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bayesfusion")
}

fn write_random_png(path: &Path, seed: u64, h: usize, w: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect();
    let plane = ImagePlane::from_vec(h, w, data).unwrap();
    save_grayscale(&plane, path, IntensityScale::Unit).unwrap();
}

#[test]
fn fuse_of_identical_inputs_reproduces_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("v.png");
    write_random_png(&input, 1, 24, 32);
    let out = dir.path().join("fused.png");
    let output = run(&[
        "fuse",
        "--ir",
        input.to_str().unwrap(),
        "--vis",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    // The fixed point lands exactly on the 8-bit grid, so the written file
    // decodes to the same pixels.
    let a = image::open(&input).unwrap().into_luma8();
    let b = image::open(&out).unwrap().into_luma8();
    assert_eq!(a.as_raw(), b.as_raw());

    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("ssim_mean=1.00000"), "stdout was: {stdout}");
}

#[test]
fn missing_input_exits_2_and_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let vis = dir.path().join("v.png");
    write_random_png(&vis, 2, 16, 16);
    let output = run(&[
        "fuse",
        "--ir",
        "/no/such/ir.png",
        "--vis",
        vis.to_str().unwrap(),
        "--out",
        dir.path().join("o.png").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("/no/such/ir.png"), "stderr was: {stderr}");
    assert!(!dir.path().join("o.png").exists(), "no partial output");
}

#[test]
fn invalid_params_exit_3_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let output = run(&[
        "fuse",
        "--ir",
        "/also/missing.png",
        "--vis",
        "/also/missing.png",
        "--out",
        dir.path().join("o.png").to_str().unwrap(),
        "--rho",
        "0",
    ]);
    // Parameter validation precedes file access: exit 3, not 2.
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn default_invocation_equals_explicit_reference_settings() {
    let dir = tempfile::tempdir().unwrap();
    let ir = dir.path().join("ir.png");
    let vis = dir.path().join("vis.png");
    write_random_png(&ir, 3, 24, 24);
    write_random_png(&vis, 4, 24, 24);
    let out_default = dir.path().join("default.png");
    let out_explicit = dir.path().join("explicit.png");

    let a = run(&[
        "fuse",
        "--ir",
        ir.to_str().unwrap(),
        "--vis",
        vis.to_str().unwrap(),
        "--out",
        out_default.to_str().unwrap(),
    ]);
    let b = run(&[
        "fuse",
        "--ir",
        ir.to_str().unwrap(),
        "--vis",
        vis.to_str().unwrap(),
        "--out",
        out_explicit.to_str().unwrap(),
        "--lambda-g",
        "0.5",
        "--rho",
        "0.001",
        "--t-out",
        "15",
        "--t-in",
        "2",
        "--eps",
        "1e-6",
        "--scale",
        "unit",
    ]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout, "defaults drifted from the reference settings");
    assert_eq!(
        std::fs::read(&out_default).unwrap(),
        std::fs::read(&out_explicit).unwrap()
    );
}

#[test]
fn batch_writes_rows_plus_mean_and_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for (k, seed) in [(0, 10u64), (1, 11), (2, 12)] {
        write_random_png(&data.join(format!("p{k}_ir.png")), seed, 16, 16);
        write_random_png(&data.join(format!("p{k}_vis.png")), seed + 100, 16, 16);
    }
    // A corrupt pair: the ir file is not a decodable image.
    std::fs::write(data.join("bad_ir.png"), b"not an image").unwrap();
    write_random_png(&data.join("bad_vis.png"), 99, 16, 16);

    let out_dir = dir.path().join("out");
    let csv = dir.path().join("report.csv");
    let output = run(&[
        "batch",
        "--dataset",
        data.to_str().unwrap(),
        "--layout",
        "flat",
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "one bad pair must not fail the run");

    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6, "header + 4 rows + mean, got: {text}");
    assert_eq!(lines[0], "id,en,mi,qabf,sd,ssim_sum,ssim_mean,wall_ms,error");
    assert!(lines[1].starts_with("bad,") && lines[1].contains("error:"));
    assert!(lines.last().unwrap().starts_with("mean,"));

    // The mean row is the column average of the successful rows.
    let parse = |line: &str, col: usize| -> f64 { line.split(',').nth(col).unwrap().parse().unwrap() };
    for col in 1..=6 {
        let expected: f64 = (2..5).map(|r| parse(lines[r], col)).sum::<f64>() / 3.0;
        let got = parse(lines[5], col);
        assert!(
            (got - expected).abs() <= 1e-4 * expected.abs().max(1.0),
            "mean column {col}: {got} vs {expected}"
        );
    }

    // Fused images exist for the good pairs only.
    for k in 0..3 {
        assert!(out_dir.join(format!("p{k}_fused.png")).exists());
    }
    assert!(!out_dir.join("bad_fused.png").exists());
}

#[test]
fn batch_fails_only_when_every_pair_fails() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    std::fs::write(data.join("x_ir.png"), b"garbage").unwrap();
    std::fs::write(data.join("x_vis.png"), b"garbage").unwrap();
    let output = run(&[
        "batch",
        "--dataset",
        data.to_str().unwrap(),
        "--layout",
        "flat",
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn batch_empty_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let output = run(&[
        "batch",
        "--dataset",
        data.to_str().unwrap(),
        "--layout",
        "flat",
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("no pairs found"));
}

#[test]
fn batch_id_list_restricts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for k in 0..3 {
        write_random_png(&data.join(format!("p{k}_ir.png")), 20 + k, 16, 16);
        write_random_png(&data.join(format!("p{k}_vis.png")), 30 + k, 16, 16);
    }
    let ids = dir.path().join("ids.txt");
    std::fs::write(&ids, "p1\n# a comment\n\nmissing_id\n").unwrap();
    let csv = dir.path().join("report.csv");
    let output = run(&[
        "batch",
        "--dataset",
        data.to_str().unwrap(),
        "--layout",
        "flat",
        "--out-dir",
        dir.path().join("out").to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
        "--ids",
        ids.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3, "header + p1 + mean: {text}");
    assert!(text.lines().nth(1).unwrap().starts_with("p1,"));
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("missing_id"));
}

#[test]
fn metrics_identity_triple_reports_unit_ssim() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.png");
    write_random_png(&v, 40, 16, 16);
    let csv = dir.path().join("m.csv");
    let output = run(&[
        "metrics",
        "--ir",
        v.to_str().unwrap(),
        "--vis",
        v.to_str().unwrap(),
        "--fused",
        v.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("ssim_mean=1.00000"), "stdout: {stdout}");

    // The CSV row echoes the values printed to stdout.
    let text = std::fs::read_to_string(&csv).unwrap();
    let row = text.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    for (key, field_idx) in [
        ("en", 1),
        ("mi", 2),
        ("qabf", 3),
        ("sd", 4),
        ("ssim_sum", 5),
        ("ssim_mean", 6),
    ] {
        let printed = stdout
            .lines()
            .find(|l| l.starts_with(&format!("{key}=")))
            .unwrap()
            .split('=')
            .nth(1)
            .unwrap();
        assert_eq!(printed, fields[field_idx], "CSV/stdout drift for {key}");
    }
}

#[test]
fn metrics_dimension_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    write_random_png(&a, 50, 16, 16);
    write_random_png(&b, 51, 16, 20);
    let output = run(&[
        "metrics",
        "--ir",
        a.to_str().unwrap(),
        "--vis",
        a.to_str().unwrap(),
        "--fused",
        b.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
}
