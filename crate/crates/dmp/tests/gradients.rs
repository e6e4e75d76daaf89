use maskflow_dmp::gradcheck::toy_grad_check;
use maskflow_dmp::LossWeights;

#[test]
fn analytic_gradients_match_central_differences() {
    for seed in 0..5 {
        let report = toy_grad_check(seed, &LossWeights::default(), 1e-4).unwrap();
        assert_eq!(report.groups.len(), 9);
        for g in &report.groups {
            assert!(g.max_rel_error <= 1e-4, "seed {seed} {}: {:e}", g.name, g.max_rel_error);
        }
    }
}

#[test]
fn gradients_hold_without_the_prediction_term() {
    let w = LossWeights { lambda1: 0.7, lambda2: 0.0 };
    let report = toy_grad_check(11, &w, 1e-4).unwrap();
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}
