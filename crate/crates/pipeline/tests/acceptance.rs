//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maskflow_core::eval::{endpoint_error, propagation_drift, smooth_texture, DriftScenario, FlowSource, MaskShape};
use maskflow_core::flow::{estimate_flow_hs, read_flo, write_flo, HsParams, SyntheticMotion};
use maskflow_core::propagate::PropagationConfig;
use maskflow_core::warp::{backward_warp, fb_consistency, ConsistencyParams};
use maskflow_core::{EditInstruction, EditPair, EditTask, FlowField, GrayFrame, MaskFrame, PairStats, PairStatus, VideoMeta};
use maskflow_dmp::gradcheck::toy_grad_check;
use maskflow_dmp::train::random_batch;
use maskflow_dmp::{
    forward, loss_diff, loss_mask, loss_pred, make_synthetic_task, run_reference, total_loss, LatentGrid, LossWeights,
    ModelConfig, ModelParams, ReferenceConfig,
};
use maskflow_pipeline::manifest::{HEADER_FILE, RECORDS_FILE};
use maskflow_pipeline::{demo, keep, read_manifest, run_pipeline, validate_manifest, DatasetManifest, FilterThresholds};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.2}s]", o.detail, took.as_secs_f64());
    if let Some(limit) = limit {
        if took > limit {
            o.pass = false;
            o.detail.push_str(&format!(" exceeds {}s", limit.as_secs()));
        }
    }
    o
}

fn warp_identity_and_equivariance() -> Outcome {
    let (w, h) = (23, 17);
    let m = MaskFrame::from_fn(w, h, |x, y| (x * 7 + y * 3) % 5 < 2).unwrap();
    let g = GrayFrame::from_fn(w, h, |x, y| smooth_texture(x as f64, y as f64)).unwrap();
    let zero = FlowField::zeros(w, h).unwrap();
    let mut ok = backward_warp(&m, &zero).unwrap().values() == m.values();
    ok &= backward_warp(&g, &zero).unwrap().data() == g.data();
    let mut checked = 0usize;
    for a in -4i64..=4 {
        for b in -4i64..=4 {
            let out = backward_warp(&g, &FlowField::constant(w, h, a as f64, b as f64).unwrap()).unwrap();
            for y in 0..h as i64 {
                for x in 0..w as i64 {
                    let (sx, sy) = (x + a, y + b);
                    if sx >= 0 && sy >= 0 && sx < w as i64 && sy < h as i64 {
                        ok &= out.at(x as usize, y as usize) == g.at(sx as usize, sy as usize);
                        checked += 1;
                    }
                }
            }
        }
    }
    outcome(ok, format!("zero flow bit-exact, {checked} shifted in-bounds pixels exact"))
}

fn rigid_propagation() -> Outcome {
    let analytic = DriftScenario {
        width: 64,
        height: 64,
        frames: 16,
        motion: SyntheticMotion::Translation { dx: 1.0, dy: 0.0 },
        shape: MaskShape::Square {
            x0: 16.0,
            y0: 24.0,
            side: 16.0,
        },
        flow_source: FlowSource::Analytic,
    };
    let estimated = DriftScenario {
        flow_source: FlowSource::Estimated(HsParams::default()),
        ..analytic
    };
    let cfg = PropagationConfig::default();
    let a = propagation_drift(&cfg, &analytic).unwrap().mean;
    let e = propagation_drift(&cfg, &estimated).unwrap().mean;
    outcome(
        a >= 0.99 && e >= 0.95,
        format!("analytic IoU {a:.4} (>= 0.99), estimated IoU {e:.4} (>= 0.95)"),
    )
}

fn translation_epe(dx: f64) -> f64 {
    let n = 64;
    let a = GrayFrame::from_fn(n, n, |x, y| smooth_texture(x as f64, y as f64)).unwrap();
    let b = GrayFrame::from_fn(n, n, |x, y| smooth_texture(x as f64 - dx, y as f64)).unwrap();
    let est = estimate_flow_hs(&a, &b, &HsParams::default()).unwrap();
    endpoint_error(&est, &FlowField::constant(n, n, dx, 0.0).unwrap()).unwrap().mean
}

fn flow_estimator() -> Outcome {
    let one = translation_epe(1.0);
    let three = translation_epe(3.0);
    outcome(
        one <= 0.3 && three <= 0.5,
        format!("1 px EPE {one:.4} (<= 0.3), 3 px EPE {three:.4} (<= 0.5)"),
    )
}

fn occlusion_detection() -> Outcome {
    let (w, h) = (16, 12);
    let params = ConsistencyParams::default();
    let fwd = FlowField::constant(w, h, 2.0, 0.0).unwrap();
    let mismatch = fb_consistency(&fwd, &FlowField::zeros(w, h).unwrap(), &params).unwrap();
    let all = mismatch.flags().iter().all(|&f| f);
    let consistent = fb_consistency(&fwd, &fwd.negated(), &params).unwrap();
    let band: Vec<bool> = (0..w * h).map(|i| i % w >= w - 2).collect();
    let exact = consistent.flags() == band.as_slice();
    outcome(
        all && exact,
        format!(
            "mismatch flags {}/{}, consistent case equals the 2-column boundary band: {exact}",
            mismatch.count(),
            w * h
        ),
    )
}

fn flo_round_trip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact = 0;
    for i in 0..100 {
        let (w, h) = (rng.random_range(1..40usize), rng.random_range(1..40usize));
        let mut draw = |n| (0..n).map(|_| rng.random_range(-500.0..500.0)).collect::<Vec<f64>>();
        let f = FlowField::new(w, h, draw(w * h), draw(w * h)).unwrap();
        let path = dir.path().join(format!("{i}.flo"));
        write_flo(&f, &path).unwrap();
        let back = read_flo(&path).unwrap();
        let same = back.dims() == f.dims()
            && f.u()
                .iter()
                .chain(f.v())
                .zip(back.u().iter().chain(back.v()))
                .all(|(a, b)| (*a as f32).to_bits() == (*b as f32).to_bits());
        exact += usize::from(same);
    }
    let good = dir.path().join("0.flo");
    let bytes = fs::read(&good).unwrap();
    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0x01;
    let magic_path = dir.path().join("magic.flo");
    fs::write(&magic_path, bad_magic).unwrap();
    let cut_path = dir.path().join("cut.flo");
    fs::write(&cut_path, &bytes[..bytes.len() - 1]).unwrap();
    let rejected = read_flo(&magic_path).is_err() && read_flo(&cut_path).is_err();
    outcome(
        exact == 100 && rejected,
        format!("{exact}/100 fields bit-exact at f32, bad magic and truncation rejected: {rejected}"),
    )
}

fn filter_equivalence() -> Outcome {
    let th = FilterThresholds::default();
    let areas: Vec<f64> = (0..20)
        .map(|i| match i {
            5 => th.alpha_min,
            14 => th.alpha_max,
            _ => -0.05 + 0.65 * i as f64 / 19.0,
        })
        .collect();
    let flows: Vec<f64> = (0..20)
        .map(|i| match i {
            2 => th.beta_min,
            15 => th.beta_max,
            _ => -1.0 + 26.0 * i as f64 / 19.0,
        })
        .collect();
    let mut agree = 0;
    let mut kept = 0;
    for &a in &areas {
        for &f in &flows {
            let brute = !(a < th.alpha_min || a > th.alpha_max) && !(f < th.beta_min || f > th.beta_max);
            let r = keep(&PairStats { area_ratio: a, flow_mag: f }, &th);
            agree += usize::from(r.keep == brute && r.keep == (r.area_pass && r.flow_pass));
            kept += usize::from(brute);
        }
    }
    outcome(agree == 400, format!("{agree}/400 agree ({kept} kept)"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let shape = [2, 4, 4, 8, 8];
    let grid = |rng: &mut ChaCha8Rng| LatentGrid::from_fn(shape, |_, _, _, _, _| rng.random_range(-2.0..2.0)).unwrap();
    let (v, s) = (grid(&mut rng), grid(&mut rng));
    let ones = LatentGrid::filled([2, 1, 4, 8, 8], 1.0).unwrap();
    let mask_err = rel(loss_mask(&v, &s, &ones).unwrap(), loss_diff(&v, &s).unwrap());

    let target = LatentGrid::from_fn([1, 1, 8, 32, 32], |_, _, f, y, x| f64::from(u8::from((x + y + f) % 3 == 0))).unwrap();
    let bce_err = (loss_pred(&LatentGrid::zeros(target.shape()).unwrap(), &target).unwrap() - std::f64::consts::LN_2).abs();

    let data = make_synthetic_task(3, 4).unwrap();
    let params = ModelParams::init(&ModelConfig::default(), &mut rng);
    let batch = random_batch(&data, &[0, 1, 2, 3], &mut rng).unwrap();
    let mut add_err: f64 = 0.0;
    for w in [
        LossWeights::default(),
        LossWeights { lambda1: 0.0, lambda2: 0.0 },
        LossWeights { lambda1: 2.5, lambda2: 0.3 },
    ] {
        let b = forward(&params, &batch, &w).unwrap().losses;
        add_err = add_err.max(rel(b.total, b.l_diff + w.lambda1 * b.l_mask + w.lambda2 * b.l_pred));
        let t = total_loss(b.l_diff, b.l_mask, b.l_pred, &w);
        add_err = add_err.max(rel(t.total, b.total));
    }
    outcome(
        mask_err <= 1e-12 && bce_err <= 1e-12 && add_err <= 1e-12,
        format!("L_mask(1) vs L_diff rel {mask_err:.1e}, BCE(0) - ln 2 {bce_err:.1e}, additivity rel {add_err:.1e} (all <= 1e-12)"),
    )
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut groups = 0;
    for seed in 0..5 {
        let r = toy_grad_check(seed, &LossWeights::default(), 1e-4).unwrap();
        groups = r.groups.len();
        worst = worst.max(r.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max));
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over {groups} groups x 5 seeds (<= 1e-4)"))
}

fn toy_training() -> Outcome {
    let cfg = ReferenceConfig::default();
    let report = run_reference(&cfg).unwrap();
    let again = run_reference(&cfg).unwrap();
    let deterministic = again.outcome == report.outcome && again.mask_iou == report.mask_iou;
    outcome(
        report.reduction >= 0.5 && report.mask_iou >= 0.7 && deterministic,
        format!(
            "{} steps, loss reduction {:.3} (>= 0.5), mask IoU {:.3} (>= 0.7), deterministic: {deterministic}",
            report.outcome.curve.len(),
            report.reduction,
            report.mask_iou
        ),
    )
}

fn pipeline_dry_run() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo::write_demo(dir.path(), &PathBuf::from(env!("CARGO_BIN_EXE_maskflow"))).unwrap();
    let out = dir.path().join("dataset");
    let first = run_pipeline(&cfg).unwrap();
    let files = |d: &std::path::Path| (fs::read(d.join(HEADER_FILE)).unwrap(), fs::read(d.join(RECORDS_FILE)).unwrap());
    let before = files(&out);
    let persisted = read_manifest(&out).unwrap();
    let report = validate_manifest(&persisted, Some(&out));
    let consistent = persisted
        .records
        .iter()
        .all(|r| r.stats.is_some_and(|s| keep(&s, &persisted.thresholds).keep == r.keep));
    let second = run_pipeline(&cfg).unwrap();
    let idempotent = second == first && files(&out) == before;
    let complete = persisted.records.iter().filter(|r| r.status == PairStatus::Complete).count();
    outcome(
        persisted.records.len() == 3 && complete == 3 && report.errors.is_empty() && consistent && idempotent,
        format!(
            "{complete}/3 complete, {} validation errors, keep recomputable: {consistent}, rerun idempotent: {idempotent}",
            report.errors.len()
        ),
    )
}

fn table_conformance() -> Outcome {
    let mut rec = EditPair::failed(
        "clip",
        EditInstruction::new("remove the lamp", None, EditTask::Remove).unwrap(),
        "s.png".into(),
        "t.png".into(),
        "",
    );
    rec.status = PairStatus::Complete;
    rec.error = None;
    rec.source_video = Some("clip/source".into());
    rec.target_video = Some("clip/target".into());
    rec.masks = Some("clip/masks".into());
    rec.flows = Some("clip/flows".into());
    rec.stats = Some(PairStats {
        area_ratio: 0.2,
        flow_mag: 3.0,
    });
    rec.keep = true;
    rec.video = Some(VideoMeta {
        width: 1280,
        height: 720,
        frames: 81,
        fps: 16.0,
    });
    let mut m = DatasetManifest::new(FilterThresholds::default(), Default::default());
    m.records = vec![rec.clone()];
    let clean = validate_manifest(&m, None);
    m.records[0].video.as_mut().unwrap().fps = 30.0;
    let fast = validate_manifest(&m, None);
    let one_fps = fast.warnings.len() == 1 && fast.warnings[0].contains("fps");
    outcome(
        clean.errors.is_empty() && clean.warnings.is_empty() && fast.errors.is_empty() && one_fps,
        format!(
            "1280x720/16 fps/81 frames: {} warnings; 30 fps: {} warning(s), fps warning: {one_fps}",
            clean.warnings.len(),
            fast.warnings.len()
        ),
    )
}

#[test]
fn acceptance() {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        ("warp identity and equivariance", timed(secs(1), warp_identity_and_equivariance)),
        ("rigid propagation", timed(secs(30), rigid_propagation)),
        ("flow estimator", timed(secs(60), flow_estimator)),
        ("occlusion detection", timed(None, occlusion_detection)),
        (".flo round trip", timed(None, flo_round_trip)),
        ("filter equivalence", timed(None, filter_equivalence)),
        ("loss identities", timed(None, loss_identities)),
        ("gradient verification", timed(secs(120), gradient_check)),
        ("toy mask predictor training", timed(secs(600), toy_training)),
        ("pipeline dry run", timed(secs(60), pipeline_dry_run)),
        ("manifest shape conformance", timed(None, table_conformance)),
    ];
    for (i, (name, o)) in results.iter().enumerate() {
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, (_, o))| !o.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
