//! Rank tests: Mann–Whitney U and the one-sample Wilcoxon signed-rank test.
//!
//! Small samples get exact p values from the permutation distribution of the
//! rank sum. Ties are handled by working with doubled midranks, which are
//! always integers, so the exact distributions stay integer-valued.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::StatsError;
use crate::ranks::{midranks, tie_correction_sum};
use crate::{Alternative, TestResult};

/// Largest combined sample size for which the Mann–Whitney p is exact.
pub const MWU_EXACT_MAX: usize = 20;
/// Largest number of nonzero differences for which the Wilcoxon p is exact.
pub const WILCOXON_EXACT_MAX: usize = 15;

fn doubled(rank: f64) -> i64 {
    (2.0 * rank).round() as i64
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Normal-approximation p value with a 0.5 continuity correction.
fn normal_p(stat: f64, mean: f64, sd: f64, alternative: Alternative) -> f64 {
    let n = std_normal();
    match alternative {
        Alternative::TwoSided => {
            let dev = (stat - mean).abs();
            let z = (dev - 0.5).max(0.0) / sd;
            (2.0 * n.sf(z)).min(1.0)
        }
        Alternative::Greater => n.sf((stat - mean - 0.5) / sd),
        Alternative::Less => n.cdf((stat - mean + 0.5) / sd),
    }
}

/// Exact tail probability from a count distribution over integer sums.
/// `center2` is twice the null mean of the sum.
fn exact_p(counts: &[f64], observed: i64, center2: i64, alternative: Alternative) -> f64 {
    let total: f64 = counts.iter().sum();
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, &c)| {
            c > 0.0 && {
                let s = s as i64;
                match alternative {
                    Alternative::TwoSided => (2 * s - center2).abs() >= (2 * observed - center2).abs(),
                    Alternative::Greater => s >= observed,
                    Alternative::Less => s <= observed,
                }
            }
        })
        .map(|(_, &c)| c)
        .sum();
    (hits / total).min(1.0)
}

/// Number of `k`-subsets of `weights` with each possible sum.
fn subset_sum_counts(weights: &[i64], k: usize) -> Vec<f64> {
    let max: usize = weights.iter().map(|&w| w as usize).sum();
    // dp[j][s] = number of j-subsets of the weights seen so far summing to s.
    let mut dp = vec![vec![0.0f64; max + 1]; k + 1];
    dp[0][0] = 1.0;
    for &w in weights {
        let w = w as usize;
        for j in (1..=k).rev() {
            for s in (w..=max).rev() {
                let add = dp[j - 1][s - w];
                if add != 0.0 {
                    dp[j][s] += add;
                }
            }
        }
    }
    dp.swap_remove(k)
}

/// Two-sample Mann–Whitney U test. The reported statistic is W, the U of
/// `x` (rank sum of `x` minus n₁(n₁+1)/2).
pub fn mann_whitney_u(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::InsufficientData(
            "both samples need at least one observation".into(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::InvalidInput("non-finite observation".into()));
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    if pooled.iter().all(|&v| v == pooled[0]) {
        return Err(StatsError::DegenerateSample);
    }
    let (n1, n2) = (x.len(), y.len());
    let n = n1 + n2;
    let ranks = midranks(&pooled);
    let rank_sum_x: f64 = ranks[..n1].iter().sum();
    let w = rank_sum_x - (n1 * (n1 + 1)) as f64 / 2.0;

    let p = if n <= MWU_EXACT_MAX {
        let weights: Vec<i64> = ranks.iter().map(|&r| doubled(r)).collect();
        let counts = subset_sum_counts(&weights, n1);
        let observed: i64 = weights[..n1].iter().sum();
        // Null mean of the doubled rank sum is n1 (N + 1).
        exact_p(&counts, observed, 2 * (n1 * (n + 1)) as i64, alternative)
    } else {
        let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
        let var = n1f * n2f / 12.0
            * ((nf + 1.0) - tie_correction_sum(&pooled) / (nf * (nf - 1.0)));
        normal_p(w, n1f * n2f / 2.0, var.sqrt(), alternative)
    };
    Ok(TestResult::new("mann_whitney_u", w, p))
}

/// One-sample Wilcoxon signed-rank test of `x` against location `mu`.
/// Zero differences are dropped; V is the sum of ranks of positive
/// differences.
pub fn wilcoxon_signed_rank(
    x: &[f64],
    mu: f64,
    alternative: Alternative,
) -> Result<TestResult, StatsError> {
    if x.iter().any(|v| !v.is_finite()) || !mu.is_finite() {
        return Err(StatsError::InvalidInput("non-finite observation".into()));
    }
    let diffs: Vec<f64> = x.iter().map(|v| v - mu).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = midranks(&abs);
    let v: f64 = ranks
        .iter()
        .zip(&diffs)
        .filter(|(_, d)| **d > 0.0)
        .map(|(r, _)| r)
        .sum();

    let p = if n <= WILCOXON_EXACT_MAX {
        let weights: Vec<i64> = ranks.iter().map(|&r| doubled(r)).collect();
        let total: i64 = weights.iter().sum();
        let mut counts = vec![0.0f64; total as usize + 1];
        counts[0] = 1.0;
        for &w in &weights {
            for s in (w as usize..=total as usize).rev() {
                counts[s] += counts[s - w as usize];
            }
        }
        exact_p(&counts, doubled(v), total, alternative)
    } else {
        let nf = n as f64;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction_sum(&abs) / 48.0;
        normal_p(v, nf * (nf + 1.0) / 4.0, var.sqrt(), alternative)
    };
    Ok(TestResult::new("wilcoxon_signed_rank", v, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mwu_examples() {
        let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.1).abs() < 1e-15);
        let same = mann_whitney_u(&[1.0, 2.0, 5.0], &[1.0, 2.0, 5.0], Alternative::TwoSided).unwrap();
        assert!(same.p_value >= 0.99);
        assert_eq!(
            mann_whitney_u(&[2.0, 2.0], &[2.0], Alternative::TwoSided),
            Err(StatsError::DegenerateSample)
        );
        assert!(mann_whitney_u(&[], &[1.0], Alternative::TwoSided).is_err());
    }

    #[test]
    fn mwu_one_sided_tails_complement() {
        let x = [1.0, 4.0, 4.0, 7.0];
        let y = [2.0, 3.0, 8.0, 9.0, 9.5];
        let g = mann_whitney_u(&x, &y, Alternative::Greater).unwrap().p_value;
        let l = mann_whitney_u(&x, &y, Alternative::Less).unwrap().p_value;
        // The two tails overlap on the observed value only.
        assert!(g + l > 1.0);
    }

    #[test]
    fn mwu_normal_branch_matches_reference() {
        // 20 vs 20 without ties; reference value from the standard
        // continuity-corrected normal approximation computed by hand:
        // U = 100, mu = 200, sd = sqrt(20*20*41/12) = 36.968...
        let x: Vec<f64> = (0..20).map(|i| (2 * i) as f64).collect();
        let y: Vec<f64> = (0..20).map(|i| (2 * i + 11) as f64).collect();
        let r = mann_whitney_u(&x, &y, Alternative::TwoSided).unwrap();
        let sd = (20.0f64 * 20.0 * 41.0 / 12.0).sqrt();
        let z = (200.0 - r.statistic - 0.5) / sd;
        let expected = 2.0 * Normal::standard().sf(z);
        assert!((r.p_value - expected).abs() < 1e-14);
    }

    #[test]
    fn wilcoxon_examples() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0], 0.0, Alternative::TwoSided).unwrap();
        assert_eq!(r.statistic, 6.0);
        assert!((r.p_value - 0.25).abs() < 1e-15);
        let sym = wilcoxon_signed_rank(&[-2.0, -1.0, 1.0, 2.0], 0.0, Alternative::TwoSided).unwrap();
        assert!(sym.p_value >= 0.99);
        assert_eq!(
            wilcoxon_signed_rank(&[3.0, 3.0], 3.0, Alternative::TwoSided),
            Err(StatsError::AllZeroDifferences)
        );
        let motives = wilcoxon_signed_rank(&[3.0, 3.0, 2.0, 2.0, 1.0], 0.0, Alternative::Greater).unwrap();
        assert_eq!(motives.statistic, 15.0);
        assert!((motives.p_value - 1.0 / 32.0).abs() < 1e-15);
    }
}
