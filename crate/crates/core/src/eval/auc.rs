/// Description of the curve used by [`auc_single_point`], recorded in every
/// report.
pub const AUC_CONVENTION: &str =
    "single-point approximation: trapezoids through (recall 0, precision 1), (R, P), (recall 1, precision 0); equals (P + R) / 2; not comparable to confidence-sweep AUC";

/// Area under the two-segment precision-recall curve through (0, 1),
/// (recall, precision) and (1, 0). Inputs are clamped to [0, 1].
pub fn auc_single_point(precision: f64, recall: f64) -> f64 {
    let p = precision.clamp(0.0, 1.0);
    let r = recall.clamp(0.0, 1.0);
    let left = r * (1.0 + p) / 2.0;
    let right = (1.0 - r) * p / 2.0;
    left + right
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_cases() {
        assert_eq!(auc_single_point(1.0, 1.0), 1.0);
        assert_eq!(auc_single_point(0.0, 0.6), 0.3);
        assert_eq!(auc_single_point(0.0, 0.0), 0.0);
    }

    #[test]
    fn monotone_in_precision() {
        for ri in 0..=20 {
            let r = ri as f64 / 20.0;
            let mut prev = -1.0;
            for pi in 0..=20 {
                let a = auc_single_point(pi as f64 / 20.0, r);
                assert!(a >= prev);
                prev = a;
            }
        }
    }
}
