use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use evident_motion::evaluation::read_roc_csv;
use evident_motion::scan_io::{read_label_file, read_metrics_csv, read_raster};
use evident_motion::Label;

const FRAMES: usize = 4;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_evident-motion"));
    c.env("RUST_LOG", "warn")
        .env_remove("EVIDENT_MOTION_THREADS");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fail(cmd: &mut Command) -> String {
    let out = cmd.output().expect("binary runs");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// One synthetic sequence shared by every test; tests only read it.
fn sequence() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        run(bin()
            .args([
                "synth",
                "--scene",
                "validation",
                "--frames",
                &FRAMES.to_string(),
                "--seed",
                "3",
                "--output",
            ])
            .arg(dir.path()));
        dir
    })
    .path()
}

fn detect(out: &Path, extra: &[&str]) {
    run(bin()
        .args(["detect", "--k-half", "1", "--input"])
        .arg(sequence())
        .arg("--output")
        .arg(out)
        .args(extra));
}

fn labels(out: &Path, frame: usize) -> Vec<Label> {
    read_label_file(out.join("labels").join(format!("{frame:06}.bin"))).unwrap()
}

fn copy_dir(from: &Path, to: &Path, skip: &[&str]) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let name = e.file_name();
        if skip.iter().any(|s| name == *s) {
            continue;
        }
        let dst: PathBuf = to.join(&name);
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &dst, &[]);
        } else {
            std::fs::copy(e.path(), dst).unwrap();
        }
    }
}

#[test]
fn synth_detect_eval_composes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    detect(&out, &[]);
    for f in 0..FRAMES {
        let scan_len = std::fs::metadata(sequence().join("velodyne").join(format!("{f:06}.bin")))
            .unwrap()
            .len();
        assert_eq!(labels(&out, f).len() as u64 * 16, scan_len);
    }
    let timing = std::fs::read_to_string(out.join("timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), FRAMES + 1);
    assert!(timing.starts_with("frame,preprocess,ground,index,dedup,detect,validate,total"));

    let eval_dir = tmp.path().join("eval");
    run(bin()
        .args(["eval", "--input"])
        .arg(sequence())
        .arg("--labels")
        .arg(out.join("labels"))
        .arg("--output")
        .arg(&eval_dir));
    let rows = read_metrics_csv(eval_dir.join("metrics.csv")).unwrap();
    assert_eq!(rows.len(), FRAMES);
    for (f, r) in rows.iter().enumerate() {
        assert_eq!(r.frame, f);
        assert!((0.0..=1.0).contains(&r.precision) && (0.0..=1.0).contains(&r.recall));
    }

    let mask_dir = tmp.path().join("mask");
    run(bin()
        .args(["eval", "--truth", "mask", "--input"])
        .arg(sequence())
        .arg("--labels")
        .arg(out.join("labels"))
        .arg("--output")
        .arg(&mask_dir));
    assert_eq!(
        read_metrics_csv(mask_dir.join("metrics.csv"))
            .unwrap()
            .len(),
        FRAMES
    );
}

#[test]
fn rerun_is_byte_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    detect(&a, &["--seed", "7"]);
    run(bin()
        .env("EVIDENT_MOTION_THREADS", "2")
        .args(["detect", "--k-half", "1", "--seed", "7", "--input"])
        .arg(sequence())
        .arg("--output")
        .arg(&b));
    for f in 0..FRAMES {
        let name = format!("{f:06}.bin");
        let x = std::fs::read(a.join("labels").join(&name)).unwrap();
        let y = std::fs::read(b.join("labels").join(&name)).unwrap();
        assert_eq!(x, y, "frame {f}");
    }
}

#[test]
fn skipping_validation_only_adds_detections() {
    let tmp = tempfile::tempdir().unwrap();
    let with = tmp.path().join("with");
    let without = tmp.path().join("without");
    detect(&with, &[]);
    detect(&without, &["--no-image-validation"]);
    // Later frames dedup against differently labeled history, so the first
    // frame is the one that compares point for point.
    for (a, b) in labels(&without, 0).iter().zip(&labels(&with, 0)) {
        if a != b {
            assert_eq!((*a, *b), (Label::Moving, Label::Static));
        }
    }
}

#[test]
fn roc_writes_one_row_per_grid_cell() {
    let tmp = tempfile::tempdir().unwrap();
    run(bin()
        .args(["roc", "--k-half", "1", "--no-image-validation", "--input"])
        .arg(sequence())
        .arg("--output")
        .arg(tmp.path()));
    let rows = read_roc_csv(tmp.path().join("roc.csv")).unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!((rows[0].sigma_r, rows[0].theta), (0.1, 0.0035));
    assert_eq!((rows[8].sigma_r, rows[8].theta), (0.45, 0.0088));
}

#[test]
fn depthmap_writes_pgm_and_names_empty_frame() {
    let tmp = tempfile::tempdir().unwrap();
    run(bin()
        .args(["depthmap", "--frame", "1", "--input"])
        .arg(sequence())
        .arg("--output")
        .arg(tmp.path()));
    let r = read_raster(tmp.path().join("depth_000001.pgm")).unwrap();
    assert_eq!(r.channels, 1);
    assert!(r.nonzero_pixels() > 0);

    let err = fail(
        bin()
            .args(["depthmap", "--frame", "2", "--crop-tau", "0.5", "--input"])
            .arg(sequence())
            .arg("--output")
            .arg(tmp.path().join("empty")),
    );
    assert!(err.contains("frame 2"), "{err}");
}

#[test]
fn missing_inputs_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let no_poses = tmp.path().join("no_poses");
    copy_dir(sequence(), &no_poses, &["poses.txt"]);
    let err = fail(
        bin()
            .args(["detect", "--input"])
            .arg(&no_poses)
            .arg("--output")
            .arg(tmp.path().join("o1")),
    );
    assert!(err.contains("ICP"), "{err}");

    let no_images = tmp.path().join("no_images");
    copy_dir(sequence(), &no_images, &["image"]);
    let err = fail(
        bin()
            .args(["detect", "--input"])
            .arg(&no_images)
            .arg("--output")
            .arg(tmp.path().join("o2")),
    );
    assert!(err.contains("image validation"), "{err}");
    detect_in(
        &no_images,
        &tmp.path().join("o3"),
        &["--no-image-validation"],
    );
}

fn detect_in(input: &Path, out: &Path, extra: &[&str]) {
    run(bin()
        .args(["detect", "--k-half", "1", "--input"])
        .arg(input)
        .arg("--output")
        .arg(out)
        .args(extra));
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "k-half = 0\nno-image-validation = true\n").unwrap();
    let err = fail(
        bin()
            .arg("--config")
            .arg(&cfg)
            .args(["detect", "--input"])
            .arg(sequence())
            .arg("--output")
            .arg(tmp.path().join("a")),
    );
    assert!(err.contains("k_half"), "{err}");
    run(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["detect", "--k-half", "1", "--input"])
        .arg(sequence())
        .arg("--output")
        .arg(tmp.path().join("b")));
    assert!(
        tmp.path()
            .join("b")
            .join("labels")
            .join("000000.bin")
            .metadata()
            .unwrap()
            .len()
            > 0
    );
}

#[test]
fn bad_thread_count_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let err = fail(
        bin()
            .env("EVIDENT_MOTION_THREADS", "many")
            .args(["synth", "--frames", "1", "--output"])
            .arg(tmp.path()),
    );
    assert!(err.contains("EVIDENT_MOTION_THREADS"), "{err}");
}
