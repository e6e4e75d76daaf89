use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FlowSequence;

/// Magnitude statistics over the forward fields of a sequence, in px/frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    /// Mean of `|w|` over every pixel of every forward field.
    pub mean_magnitude: f64,
    pub max_magnitude: f64,
    pub per_frame_means: Vec<f64>,
}

pub fn flow_magnitude_stats(flows: &FlowSequence) -> Result<FlowStats> {
    if flows.is_empty() {
        return Err(Error::invalid("flow sequence", "no forward fields"));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut max_magnitude: f64 = 0.0;
    let mut per_frame_means = Vec::with_capacity(flows.len());
    for field in flows.forward() {
        let mut sum = 0.0;
        for m in field.magnitudes() {
            sum += m;
            max_magnitude = max_magnitude.max(m);
        }
        let n = field.width() * field.height();
        per_frame_means.push(sum / n as f64);
        total += sum;
        count += n;
    }
    Ok(FlowStats {
        mean_magnitude: total / count as f64,
        max_magnitude,
        per_frame_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FlowField;
    use proptest::prelude::*;

    fn seq(fields: Vec<FlowField>) -> FlowSequence {
        let back = fields.iter().map(FlowField::negated).collect();
        FlowSequence::new(fields, back).unwrap()
    }

    #[test]
    fn zero_flow() {
        let s = flow_magnitude_stats(&seq(vec![FlowField::zeros(4, 4).unwrap()])).unwrap();
        assert_eq!((s.mean_magnitude, s.max_magnitude), (0.0, 0.0));
    }

    #[test]
    fn three_four_five() {
        let s = flow_magnitude_stats(&seq(vec![FlowField::constant(5, 3, 3.0, 4.0).unwrap()])).unwrap();
        assert_eq!((s.mean_magnitude, s.max_magnitude), (5.0, 5.0));
    }

    #[test]
    fn averages_over_fields() {
        let s = flow_magnitude_stats(&seq(vec![
            FlowField::zeros(4, 4).unwrap(),
            FlowField::constant(4, 4, 0.0, 2.0).unwrap(),
        ]))
        .unwrap();
        assert_eq!(s.mean_magnitude, 1.0);
        assert_eq!(s.per_frame_means, vec![0.0, 2.0]);
    }

    #[test]
    fn empty_sequence_is_an_error() {
        assert!(flow_magnitude_stats(&FlowSequence::new(vec![], vec![]).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn mean_is_permutation_invariant(vals in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 12), rot in 0usize..12) {
            let (u, v): (Vec<f64>, Vec<f64>) = vals.iter().copied().unzip();
            let mut u2 = u.clone();
            let mut v2 = v.clone();
            u2.rotate_left(rot);
            v2.rotate_left(rot);
            u2.reverse();
            v2.reverse();
            let a = flow_magnitude_stats(&seq(vec![FlowField::new(4, 3, u, v).unwrap()])).unwrap();
            let b = flow_magnitude_stats(&seq(vec![FlowField::new(3, 4, u2, v2).unwrap()])).unwrap();
            prop_assert!((a.mean_magnitude - b.mean_magnitude).abs() <= 1e-12);
            prop_assert_eq!(a.max_magnitude, b.max_magnitude);
        }
    }
}
