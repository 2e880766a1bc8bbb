//! ANOVA, Tukey HSD, proportions, effect sizes and Spearman against direct
//! formula oracles.

use dilemma_analysis::{
    cohen_d, cohen_h, one_way_anova, proportions_ztest, spearman, tukey_hsd, StatsError,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

fn planted_groups(seed: u64, means: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    means
        .iter()
        .map(|&m| {
            let d = Normal::new(m, 1.0).unwrap();
            (0..n).map(|_| d.sample(&mut rng)).collect()
        })
        .collect()
}

fn f_by_definition(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let k = groups.len() as f64;
    let n = all.len() as f64;
    (ssb / (k - 1.0)) / (ssw / (n - k))
}

#[test]
fn anova_matches_sum_of_squares() {
    for seed in 0..20 {
        let groups = planted_groups(seed, &[0.0, 0.2, 0.5, -0.1], 144);
        let r = one_way_anova(&groups).unwrap();
        let expected = f_by_definition(&groups);
        assert!((r.statistic - expected).abs() < 1e-10 * expected.max(1.0));
        assert_eq!(r.df, Some(vec![3.0, 572.0]));
    }
    let same = vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
    let r = one_way_anova(&same).unwrap();
    assert!(r.statistic.abs() < 1e-12 && r.p_value > 0.999);
    assert!(matches!(one_way_anova(&[vec![1.0, 2.0]]), Err(StatsError::InsufficientData(_))));
}

/// Studentized range CDF by composite Simpson over both integrals.
fn ptukey_simpson(q: f64, k: usize, df: f64) -> f64 {
    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }
    let std_normal = statrs::distribution::Normal::standard();
    let kf = k as f64;
    let range_cdf = |w: f64| {
        kf * simpson(-9.0, 9.0, 1200, |z| {
            let phi = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
            phi * (std_normal.cdf(z) - std_normal.cdf(z - w)).powf(kf - 1.0)
        })
    };
    let log_c = 0.5 * df * df.ln() - ln_gamma(0.5 * df) - (0.5 * df - 1.0) * 2f64.ln();
    simpson(1e-12, 4.0, 1200, |s| {
        (log_c + (df - 1.0) * s.ln() - 0.5 * df * s * s).exp() * range_cdf(q * s)
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn mse(groups: &[Vec<f64>]) -> (f64, f64) {
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum();
    let n: usize = groups.iter().map(Vec::len).sum();
    let df = (n - groups.len()) as f64;
    (ssw / df, df)
}

#[test]
fn tukey_two_groups_match_students_t() {
    for seed in 0..5 {
        let groups = planted_groups(100 + seed, &[0.0, 0.4], 12);
        let rows = tukey_hsd(&groups).unwrap();
        let (mse, df) = mse(&groups);
        let diff = mean(&groups[1]) - mean(&groups[0]);
        let t = diff / (mse * (2.0 / 12.0)).sqrt();
        let expected = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().sf(t.abs());
        assert!((rows[0].difference - diff).abs() < 1e-12);
        assert!(
            (rows[0].p_adjusted - expected).abs() < 1e-6,
            "{} vs {expected}",
            rows[0].p_adjusted
        );
    }
}

#[test]
fn tukey_many_groups_match_double_integral() {
    let groups = planted_groups(9, &[0.0, 0.3, 0.9, 0.5], 8);
    let sizes = [8usize, 8, 8, 8];
    let rows = tukey_hsd(&groups).unwrap();
    assert_eq!(rows.len(), 6);
    let (mse, df) = mse(&groups);
    for r in &rows {
        let diff = mean(&groups[r.group_j]) - mean(&groups[r.group_i]);
        let se = (mse / 2.0 * (1.0 / sizes[r.group_i] as f64 + 1.0 / sizes[r.group_j] as f64)).sqrt();
        let expected = 1.0 - ptukey_simpson(diff.abs() / se, 4, df);
        assert!(
            (r.p_adjusted - expected).abs() < 1e-6,
            "({}, {}) {} vs {expected}",
            r.group_i,
            r.group_j,
            r.p_adjusted
        );
    }
}

fn pooled_z(k1: u64, n1: u64, k2: u64, n2: u64) -> f64 {
    let (p1, p2) = (k1 as f64 / n1 as f64, k2 as f64 / n2 as f64);
    let p = (k1 + k2) as f64 / (n1 + n2) as f64;
    (p1 - p2) / (p * (1.0 - p) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt()
}

proptest! {
    #[test]
    fn uncorrected_chi_square_is_z_squared(
        n1 in 1u64..3000, n2 in 1u64..3000, f1 in 0.0f64..=1.0, f2 in 0.0f64..=1.0,
    ) {
        let k1 = (f1 * n1 as f64).round() as u64;
        let k2 = (f2 * n2 as f64).round() as u64;
        let pooled = (k1 + k2) as f64 / (n1 + n2) as f64;
        prop_assume!(pooled > 0.0 && pooled < 1.0);
        let r = proportions_ztest(k1, n1, k2, n2, false).unwrap();
        let z = pooled_z(k1, n1, k2, n2);
        prop_assert!((r.statistic - z * z).abs() <= 1e-12 * (z * z).max(1.0));
    }

    #[test]
    fn effect_sizes_are_antisymmetric(
        p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0,
        x in proptest::collection::vec(-50.0f64..50.0, 2..20),
        y in proptest::collection::vec(-50.0f64..50.0, 2..20),
    ) {
        prop_assert!((cohen_h(p1, p2) + cohen_h(p2, p1)).abs() < 1e-15);
        if let (Ok(a), Ok(b)) = (cohen_d(&x, &y), cohen_d(&y, &x)) {
            prop_assert!((a + b).abs() < 1e-12);
        }
    }
}

#[test]
fn proportions_identical_rates() {
    let r = proportions_ztest(50, 100, 50, 100, true).unwrap();
    assert!(r.statistic.abs() < 1e-12 && r.p_value > 0.999);
    assert_eq!(proportions_ztest(1, 0, 1, 2, true), Err(StatsError::ZeroDenominator));
}

#[test]
fn effect_size_examples() {
    let d = cohen_d(&[0.0, 0.0, 1.0, 1.0], &[1.0, 1.0, 2.0, 2.0]).unwrap();
    // Pooled variance = (3·1/3 + 3·1/3) / 6 = 1/3.
    assert!((d + 3f64.sqrt()).abs() < 1e-12);
    assert!((cohen_h(0.25, 0.75) + std::f64::consts::PI / 3.0).abs() < 1e-12);
    assert!((cohen_h(1.0, 0.0) - std::f64::consts::PI).abs() < 1e-15);
    assert_eq!(cohen_d(&[2.0, 2.0], &[2.0, 2.0]), Err(StatsError::ZeroVariance));
}

#[test]
fn spearman_with_tie_matches_rank_table() {
    let x = [10.0, 20.0, 20.0, 40.0, 50.0];
    let y = [3.0, 1.0, 4.0, 2.0, 5.0];
    // Rank table written out by hand.
    let rx = [1.0, 2.5, 2.5, 4.0, 5.0];
    let ry = [3.0, 1.0, 4.0, 2.0, 5.0];
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    let expected = cov / (vx * vy).sqrt();
    let r = spearman(&x, &y).unwrap();
    assert!((r.statistic - expected).abs() < 1e-12);

    let same = spearman(&x, &x).unwrap();
    assert!((same.statistic - 1.0).abs() < 1e-15);
    let rev: Vec<f64> = y.iter().rev().copied().collect();
    let sorted = [1.0, 2.0, 3.0, 4.0, 5.0];
    let flipped = spearman(&sorted, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap();
    assert!((flipped.statistic + 1.0).abs() < 1e-15);
    assert!(spearman(&[1.0, 1.0, 1.0], &rev[..3]).is_err());
}
