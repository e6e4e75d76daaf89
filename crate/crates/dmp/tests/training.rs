use maskflow_dmp::train::{load_params, mask_iou, save_params, write_loss_curve};
use maskflow_dmp::{make_synthetic_task, run_reference, train_toy, DmpError, ReferenceConfig, TrainConfig};

#[test]
fn reference_run_learns_the_mask() {
    let started = std::time::Instant::now();
    let report = run_reference(&ReferenceConfig::default()).unwrap();
    assert_eq!(report.outcome.curve.len(), 2000);
    assert!(report.reduction >= 0.5, "loss reduction {}", report.reduction);
    assert!(report.mask_iou >= 0.7, "mask IoU {}", report.mask_iou);
    assert!(started.elapsed().as_secs() <= 300);
}

#[test]
fn training_is_deterministic() {
    let data = make_synthetic_task(3, 6).unwrap();
    let cfg = TrainConfig {
        steps: 15,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let a = train_toy(&data, &cfg).unwrap();
    let b = train_toy(&data, &cfg).unwrap();
    assert_eq!(a, b);
    let c = train_toy(&data, &TrainConfig { seed: 9, ..cfg }).unwrap();
    assert_ne!(a.curve, c.curve);
}

#[test]
fn huge_learning_rate_is_reported_as_divergence() {
    let data = make_synthetic_task(3, 4).unwrap();
    let cfg = TrainConfig {
        steps: 200,
        batch_size: 2,
        learning_rate: 1e6,
        ..TrainConfig::default()
    };
    match train_toy(&data, &cfg) {
        Err(DmpError::Diverged { step, .. }) => assert!(step > 0),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.curve.len())),
    }
}

#[test]
fn params_and_curve_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = make_synthetic_task(4, 3).unwrap();
    let cfg = TrainConfig {
        steps: 5,
        batch_size: 2,
        ..TrainConfig::default()
    };
    let out = train_toy(&data, &cfg).unwrap();

    let params = dir.path().join("params.bin");
    save_params(&params, &out.params).unwrap();
    let back = load_params(&params).unwrap();
    assert_eq!(back, out.params);
    let bytes = std::fs::read(&params).unwrap();
    let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    assert_eq!(bytes.len(), 8 + hlen + 8 * out.params.num_params());
    std::fs::write(&params, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(load_params(&params), Err(DmpError::ParamFormat { .. })));

    let curve = dir.path().join("loss.csv");
    write_loss_curve(&curve, &out.curve).unwrap();
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,l_diff,l_mask,l_pred,total"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert_eq!(first[4], out.curve[0].total);
    assert_eq!(text.lines().count(), 6);

    let iou = mask_iou(&out.params, &data, 0.5, 1).unwrap();
    assert!((0.0..=1.0).contains(&iou));
}
