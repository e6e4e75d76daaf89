//! Region-significance and motion filter.

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use maskflow_core::PairStats;

/// Closed acceptance intervals for mask area fraction and flow magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterThresholds {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// px/frame
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            alpha_min: 0.01,
            alpha_max: 0.5,
            beta_min: 0.1,
            beta_max: 20.0,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.alpha_min, self.alpha_max, self.beta_min, self.beta_max]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(PipelineError::invalid("thresholds", "non-finite bound"));
        }
        if !(0.0 <= self.alpha_min && self.alpha_min < self.alpha_max && self.alpha_max <= 1.0) {
            return Err(PipelineError::invalid(
                "thresholds",
                format!("need 0 <= alpha_min < alpha_max <= 1, got [{}, {}]", self.alpha_min, self.alpha_max),
            ));
        }
        if !(0.0 <= self.beta_min && self.beta_min < self.beta_max) {
            return Err(PipelineError::invalid(
                "thresholds",
                format!("need 0 <= beta_min < beta_max, got [{}, {}]", self.beta_min, self.beta_max),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub area_ratio: f64,
    pub flow_mag: f64,
    pub area_pass: bool,
    pub flow_pass: bool,
    pub keep: bool,
}

/// Both statistics must lie in their closed intervals.
pub fn keep(stats: &PairStats, th: &FilterThresholds) -> FilterReport {
    let area_pass = stats.area_ratio >= th.alpha_min && stats.area_ratio <= th.alpha_max;
    let flow_pass = stats.flow_mag >= th.beta_min && stats.flow_mag <= th.beta_max;
    FilterReport {
        area_ratio: stats.area_ratio,
        flow_mag: stats.flow_mag,
        area_pass,
        flow_pass,
        keep: area_pass && flow_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stats(area_ratio: f64, flow_mag: f64) -> PairStats {
        PairStats { area_ratio, flow_mag }
    }

    #[test]
    fn examples() {
        let th = FilterThresholds::default();
        let r = keep(&stats(0.10, 2.0), &th);
        assert!(r.area_pass && r.flow_pass && r.keep);

        let r = keep(&stats(0.6, 2.0), &th);
        assert!(!r.area_pass && !r.keep);

        let r = keep(&stats(0.10, th.beta_min), &th);
        assert!(r.flow_pass);
        assert!(keep(&stats(th.alpha_max, th.beta_max), &th).keep);
    }

    #[test]
    fn threshold_invariants() {
        assert!(FilterThresholds::default().validate().is_ok());
        let bad = [
            FilterThresholds { alpha_min: 0.5, alpha_max: 0.5, ..Default::default() },
            FilterThresholds { alpha_max: 1.5, ..Default::default() },
            FilterThresholds { alpha_min: -0.1, ..Default::default() },
            FilterThresholds { beta_min: 20.0, ..Default::default() },
            FilterThresholds { beta_max: f64::NAN, ..Default::default() },
        ];
        for th in bad {
            assert!(th.validate().is_err(), "{th:?}");
        }
    }

    #[test]
    fn non_finite_stats_never_pass() {
        let th = FilterThresholds::default();
        assert!(!keep(&stats(f64::NAN, 1.0), &th).keep);
        assert!(!keep(&stats(0.1, f64::INFINITY), &th).keep);
    }

    proptest! {
        #[test]
        fn keep_is_the_conjunction(a in -0.1f64..1.1, f in -1.0f64..30.0) {
            let th = FilterThresholds::default();
            let r = keep(&stats(a, f), &th);
            prop_assert_eq!(r.keep, r.area_pass && r.flow_pass);
            prop_assert_eq!(r.area_pass, (0.01..=0.5).contains(&a));
            prop_assert_eq!(r.flow_pass, (0.1..=20.0).contains(&f));
        }
    }
}
