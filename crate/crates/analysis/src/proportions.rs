use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::effect::cohen_h;
use crate::error::StatsError;
use crate::TestResult;

/// Pooled two-sample proportions test reported in χ² form (χ² = z², one
/// degree of freedom). With `continuity`, Yates' correction shrinks the
/// absolute difference by ½(1/n₁ + 1/n₂), never past zero. The effect size is
/// Cohen's h of the two sample proportions.
pub fn proportions_ztest(
    k1: u64,
    n1: u64,
    k2: u64,
    n2: u64,
    continuity: bool,
) -> Result<TestResult, StatsError> {
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::ZeroDenominator);
    }
    if k1 > n1 || k2 > n2 {
        return Err(StatsError::InvalidInput(
            "successes exceed trials".into(),
        ));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let (p1, p2) = (k1 as f64 / n1f, k2 as f64 / n2f);
    let pooled = (k1 + k2) as f64 / (n1f + n2f);
    let inv = 1.0 / n1f + 1.0 / n2f;
    let var = pooled * (1.0 - pooled) * inv;

    let mut diff = (p1 - p2).abs();
    if continuity {
        diff = (diff - 0.5 * inv).max(0.0);
    }
    let chi2 = if var > 0.0 { diff * diff / var } else { 0.0 };
    let p = if chi2 > 0.0 {
        ChiSquared::new(1.0).expect("df = 1").sf(chi2)
    } else {
        1.0
    };
    let mut result = TestResult::new("proportions_ztest", chi2, p);
    result.effect_size = Some(cohen_h(p1, p2));
    result.df = Some(vec![1.0]);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_proportions() {
        let r = proportions_ztest(50, 100, 50, 100, true).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = proportions_ztest(0, 10, 0, 20, false).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn invalid_counts() {
        assert_eq!(proportions_ztest(1, 0, 1, 2, true), Err(StatsError::ZeroDenominator));
        assert!(proportions_ztest(3, 2, 1, 2, true).is_err());
    }

    #[test]
    fn correction_only_shrinks() {
        let raw = proportions_ztest(30, 50, 20, 50, false).unwrap();
        let yates = proportions_ztest(30, 50, 20, 50, true).unwrap();
        assert!(yates.statistic < raw.statistic);
        assert!(yates.p_value > raw.p_value);
    }
}
