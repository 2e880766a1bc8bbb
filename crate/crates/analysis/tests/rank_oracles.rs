//! Exact rank-test p values against brute-force enumeration of every
//! relabelling (Mann–Whitney) or sign pattern (Wilcoxon).

use dilemma_analysis::{mann_whitney_u, wilcoxon_signed_rank, Alternative, StatsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;
const EPS: f64 = 1e-9;

/// Midranks by counting: rank = #less + (#equal + 1) / 2.
fn ranks_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn tail_fraction(stats: &[f64], observed: f64, center: f64, alt: Alternative) -> f64 {
    let hits = stats
        .iter()
        .filter(|&&s| match alt {
            Alternative::TwoSided => (s - center).abs() >= (observed - center).abs() - EPS,
            Alternative::Greater => s >= observed - EPS,
            Alternative::Less => s <= observed + EPS,
        })
        .count();
    hits as f64 / stats.len() as f64
}

fn mwu_oracle(x: &[f64], y: &[f64], alt: Alternative) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = ranks_by_counting(&pooled);
    let n = pooled.len();
    let n1 = x.len();
    let mut sums = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == n1 {
            sums.push((0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum::<f64>());
        }
    }
    let observed: f64 = ranks[..n1].iter().sum();
    let center = n1 as f64 * (n as f64 + 1.0) / 2.0;
    tail_fraction(&sums, observed, center, alt)
}

fn wilcoxon_oracle(x: &[f64], alt: Alternative) -> f64 {
    let d: Vec<f64> = x.iter().copied().filter(|v| *v != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let ranks = ranks_by_counting(&abs);
    let n = d.len();
    let stats: Vec<f64> = (0u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum())
        .collect();
    let observed: f64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let center = ranks.iter().sum::<f64>() / 2.0;
    tail_fraction(&stats, observed, center, alt)
}

const ALTS: [Alternative; 3] = [Alternative::TwoSided, Alternative::Greater, Alternative::Less];

#[test]
fn mann_whitney_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 1500 {
        let n1 = rng.random_range(1..=5);
        let n2 = rng.random_range(1..=10 - n1);
        // Small integer support forces plenty of ties.
        let spread = rng.random_range(2..=12);
        let draw = |rng: &mut ChaCha8Rng, n| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(0..spread) as f64).collect()
        };
        let (x, y) = (draw(&mut rng, n1), draw(&mut rng, n2));
        for alt in ALTS {
            match mann_whitney_u(&x, &y, alt) {
                Ok(r) => {
                    let expected = mwu_oracle(&x, &y, alt);
                    assert!(
                        (r.p_value - expected).abs() < TOL,
                        "{x:?} {y:?} {alt:?}: {} vs {expected}",
                        r.p_value
                    );
                }
                Err(StatsError::DegenerateSample) => {
                    assert!(x.iter().chain(&y).all(|v| *v == x[0]));
                }
                Err(e) => panic!("unexpected {e:?}"),
            }
        }
        checked += 1;
    }
}

#[test]
fn mann_whitney_tied_example() {
    let r = mann_whitney_u(&[1.0, 2.0], &[2.0, 3.0], Alternative::TwoSided).unwrap();
    assert!((r.p_value - mwu_oracle(&[1.0, 2.0], &[2.0, 3.0], Alternative::TwoSided)).abs() < TOL);
    assert_eq!(r.statistic, 0.5);
}

#[test]
fn wilcoxon_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 1500 {
        let n = rng.random_range(1..=12);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4i32..=4) as f64).collect();
        if x.iter().all(|v| *v == 0.0) {
            assert_eq!(
                wilcoxon_signed_rank(&x, 0.0, Alternative::TwoSided),
                Err(StatsError::AllZeroDifferences)
            );
            continue;
        }
        for alt in ALTS {
            let r = wilcoxon_signed_rank(&x, 0.0, alt).unwrap();
            let expected = wilcoxon_oracle(&x, alt);
            assert!(
                (r.p_value - expected).abs() < TOL,
                "{x:?} {alt:?}: {} vs {expected}",
                r.p_value
            );
        }
        checked += 1;
    }
}

#[test]
fn wilcoxon_location_shift_equals_centered_sample() {
    let x = [3.5, 1.0, 2.0, 6.0, 2.5, 2.0, 4.0];
    let shifted = wilcoxon_signed_rank(&x, 2.0, Alternative::TwoSided).unwrap();
    let centered: Vec<f64> = x.iter().map(|v| v - 2.0).collect();
    let direct = wilcoxon_signed_rank(&centered, 0.0, Alternative::TwoSided).unwrap();
    assert_eq!(shifted, direct);
}
