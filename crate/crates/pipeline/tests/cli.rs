use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use maskflow_core::flow::{synthetic_flow, write_flo, SyntheticMotion};
use maskflow_core::io::{load_flow_sequence, load_mask, load_mask_sequence, save_mask, save_mask_sequence, save_video};
use maskflow_core::{FlowField, Frame, MaskFrame, MaskSequence, Video};

fn maskflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskflow")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn square(w: usize, h: usize, x0: usize, y0: usize, side: usize) -> MaskFrame {
    MaskFrame::from_fn(w, h, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side).unwrap()
}

fn textured_video(frames: usize, shift: usize) -> Video {
    let (w, h) = (40, 32);
    let frames = (0..frames)
        .map(|t| {
            let data = (0..w * h)
                .map(|i| {
                    let (x, y) = ((i % w) as f64 - (t * shift) as f64, (i / w) as f64);
                    (120.0 + 60.0 * (x / 3.0).sin() * (y / 4.0).cos()) as u8
                })
                .collect();
            Frame::new(w, h, 1, data).unwrap()
        })
        .collect();
    Video::new(frames, 16.0).unwrap()
}

#[test]
fn usage_and_help_exit_codes() {
    assert_eq!(maskflow(&["--help"]).status.code(), Some(0));
    assert_eq!(maskflow(&["--version"]).status.code(), Some(0));
    assert_eq!(maskflow(&[]).status.code(), Some(1));
    assert_eq!(maskflow(&["flow", "estimate"]).status.code(), Some(1));
    assert_eq!(maskflow(&["filter", "--area", "x", "--flow", "1"]).status.code(), Some(1));
}

#[test]
fn filter_reports_json() {
    let out = maskflow(&["filter", "--area", "0.1", "--flow", "0.1"]);
    assert_eq!(out.status.code(), Some(0));
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["keep"], true);
    assert_eq!(r["flow_pass"], true);
    let out = maskflow(&["filter", "--area", "0.6", "--flow", "2"]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["area_pass"], false);
    assert_eq!(r["keep"], false);
    let bad = maskflow(&["filter", "--area", "0.1", "--flow", "2", "--alpha-min", "0.9"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn flow_mask_and_eval_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    save_video(&textured_video(4, 1), &d.join("frames")).unwrap();
    let out = maskflow(&["flow", "estimate", "--frames", p(&d.join("frames")), "--out", p(&d.join("flows"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_flow_sequence(&d.join("flows")).unwrap().len(), 3);

    let stats = maskflow(&["flow", "stats", "--flows", p(&d.join("flows"))]);
    let s: serde_json::Value = serde_json::from_slice(&stats.stdout).unwrap();
    let mean = s["mean_magnitude"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 0.4, "{mean}");

    save_mask(&square(40, 32, 10, 10, 8), &d.join("src.png")).unwrap();
    let init = maskflow(&["mask", "init", "--task", "remove", "--source-mask", p(&d.join("src.png")), "--out", p(&d.join("init.png"))]);
    assert!(init.status.success(), "{}", String::from_utf8_lossy(&init.stderr));
    assert_eq!(load_mask(&d.join("init.png")).unwrap().area(), 64.0);
    let missing = maskflow(&["mask", "init", "--task", "add", "--source-mask", p(&d.join("src.png")), "--out", p(&d.join("x.png"))]);
    assert_eq!(missing.status.code(), Some(2));

    let prop = maskflow(&["mask", "propagate", "--init", p(&d.join("init.png")), "--flows", p(&d.join("flows")), "--out", p(&d.join("masks"))]);
    assert!(prop.status.success(), "{}", String::from_utf8_lossy(&prop.stderr));
    let masks = load_mask_sequence(&d.join("masks")).unwrap();
    assert_eq!(masks.len(), 4);

    let truth = MaskSequence::new((0..4).map(|t| square(40, 32, 10 + t, 10, 8)).collect()).unwrap();
    save_mask_sequence(&truth, &d.join("truth")).unwrap();
    let iou = maskflow(&["eval", "iou", "--pred", p(&d.join("masks")), "--ref", p(&d.join("truth"))]);
    assert!(iou.status.success());
    let text = String::from_utf8(iou.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "frame,iou");
    assert_eq!(lines.len(), 6);
    let mean: f64 = lines[5].strip_prefix("mean,").unwrap().parse().unwrap();
    assert!(mean > 0.8, "{text}");

    let overlay = maskflow(&["render", "overlay", "--frames", p(&d.join("frames")), "--masks", p(&d.join("masks")), "--out", p(&d.join("ov")), "--alpha", "0.5"]);
    assert!(overlay.status.success());
    assert!(d.join("ov/000004.png").is_file());
}

#[test]
fn epe_on_flo_files() {
    let dir = tempfile::tempdir().unwrap();
    let truth = synthetic_flow(&SyntheticMotion::Translation { dx: 1.0, dy: 0.0 }, 6, 5).unwrap();
    let est = FlowField::constant(6, 5, 1.3, 0.4).unwrap();
    write_flo(&truth, &dir.path().join("t.flo")).unwrap();
    write_flo(&est, &dir.path().join("e.flo")).unwrap();
    let out = maskflow(&["eval", "epe", "--flow", p(&dir.path().join("e.flo")), "--truth", p(&dir.path().join("t.flo"))]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], 1.0);
    assert!((row[1] - 0.5).abs() < 1e-6, "{text}");
}

#[test]
fn pipeline_commands_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let demo = maskflow(&["pipeline", "demo", "--out", p(dir.path())]);
    assert!(demo.status.success());
    let cfg = String::from_utf8(demo.stdout).unwrap().trim().to_string();
    let run = maskflow(&["pipeline", "run", "--config", &cfg]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let manifest = dir.path().join("dataset/manifest.jsonl");
    let ok = maskflow(&["pipeline", "validate", p(&manifest)]);
    assert_eq!(ok.status.code(), Some(0));

    let body = fs::read_to_string(&manifest).unwrap();
    let first = body.lines().next().unwrap();
    fs::write(&manifest, format!("{body}{first}\n")).unwrap();
    let dup = maskflow(&["pipeline", "validate", p(&manifest)]);
    assert_eq!(dup.status.code(), Some(2));
    let r: serde_json::Value = serde_json::from_slice(&dup.stdout).unwrap();
    assert!(r["errors"][0].as_str().unwrap().contains("duplicate"));

    let text = fs::read_to_string(&cfg).unwrap();
    fs::write(&cfg, text.replace("add-small_target.png", "gone.png")).unwrap();
    fs::remove_dir_all(dir.path().join("dataset")).unwrap();
    let partial = maskflow(&["pipeline", "run", "--config", &cfg]);
    assert_eq!(partial.status.code(), Some(3));

    fs::write(&cfg, "output_dir = \"x\"\n").unwrap();
    assert_eq!(maskflow(&["pipeline", "run", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn dmp_train_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = maskflow(&["dmp", "train", "--out", p(dir.path()), "--steps", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curve = fs::read_to_string(dir.path().join("loss_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 4);
    assert!(dir.path().join("params.bin").is_file());
    let s: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["config"]["train"]["steps"], 3);
    assert_eq!(maskflow(&["dmp", "train", "--out", p(dir.path()), "--lr=-1"]).status.code(), Some(2));
}
