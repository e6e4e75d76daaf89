use maskflow_core::eval::{endpoint_error, propagation_drift, smooth_texture, DriftScenario, FlowSource, MaskShape};
use maskflow_core::flow::{estimate_flow_hs, HsParams, SyntheticMotion};
use maskflow_core::propagate::PropagationConfig;
use maskflow_core::{FlowField, GrayFrame};

fn shifted_pair(n: usize, dx: f64, dy: f64) -> (GrayFrame, GrayFrame) {
    let a = GrayFrame::from_fn(n, n, |x, y| smooth_texture(x as f64, y as f64)).unwrap();
    let b = GrayFrame::from_fn(n, n, |x, y| smooth_texture(x as f64 - dx, y as f64 - dy)).unwrap();
    (a, b)
}

fn epe(dx: f64, dy: f64, params: &HsParams) -> f64 {
    let (a, b) = shifted_pair(64, dx, dy);
    let est = estimate_flow_hs(&a, &b, params).unwrap();
    let truth = FlowField::constant(64, 64, dx, dy).unwrap();
    endpoint_error(&est, &truth).unwrap().mean
}

#[test]
fn one_pixel_translation_epe() {
    let e = epe(1.0, 0.0, &HsParams::default());
    assert!(e <= 0.3, "epe {e}");
}

#[test]
fn three_pixel_translation_with_pyramid_epe() {
    let params = HsParams {
        pyramid_levels: 3,
        ..HsParams::default()
    };
    let e = epe(3.0, 0.0, &params);
    assert!(e <= 0.5, "epe {e}");
}

#[test]
fn rigid_square_with_estimated_flows() {
    let base = DriftScenario {
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
    let cfg = PropagationConfig::default();
    let analytic = propagation_drift(&cfg, &base).unwrap();
    assert!(analytic.mean >= 0.99, "analytic {}", analytic.mean);
    let estimated = DriftScenario {
        flow_source: FlowSource::Estimated(HsParams::default()),
        ..base
    };
    let report = propagation_drift(&cfg, &estimated).unwrap();
    assert!(report.mean >= 0.95, "estimated {}", report.mean);
}

#[test]
fn rotating_disk_drift() {
    let scenario = DriftScenario {
        width: 64,
        height: 64,
        frames: 16,
        motion: SyntheticMotion::Rotation {
            angle: 2f64.to_radians(),
        },
        shape: MaskShape::Disk {
            cx: 40.0,
            cy: 31.5,
            radius: 10.0,
        },
        flow_source: FlowSource::Analytic,
    };
    let cfg = PropagationConfig::default();
    let analytic = propagation_drift(&cfg, &scenario).unwrap();
    let estimated = propagation_drift(
        &cfg,
        &DriftScenario {
            flow_source: FlowSource::Estimated(HsParams::default()),
            ..scenario
        },
    )
    .unwrap();
    assert!(analytic.mean >= 0.90, "analytic {}", analytic.mean);
    assert!(estimated.mean >= 0.90, "estimated {}", estimated.mean);
}
