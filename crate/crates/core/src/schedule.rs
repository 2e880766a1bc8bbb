//! Repeat-free pairing schedules.
//!
//! `build_schedule` draws rounds from the circle-method 1-factorization of the
//! complete graph K_n under a seeded relabeling of participants, so no
//! unordered pair can ever appear twice. `build_bipartite_schedule` uses the
//! cyclic Latin square on two shuffled groups.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScheduleError;

pub type ParticipantId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSchedule {
    pub rounds: u32,
    pub pairings: Vec<Vec<(ParticipantId, ParticipantId)>>,
    pub seed: u64,
}

/// A broken schedule invariant, reported by [`PairSchedule::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScheduleViolation {
    WrongRoundCount { expected: u32, found: usize },
    NotPerfectMatching { round: usize },
    RepeatedPair { round: usize, pair: (ParticipantId, ParticipantId) },
}

impl PairSchedule {
    /// Partner of `id` in round `round` (0-based).
    pub fn partner(&self, round: usize, id: ParticipantId) -> Option<ParticipantId> {
        self.pairings.get(round)?.iter().find_map(|&(a, b)| {
            if a == id {
                Some(b)
            } else if b == id {
                Some(a)
            } else {
                None
            }
        })
    }

    /// Checks that every round is a perfect matching of `participants` and
    /// that no unordered pair occurs twice.
    pub fn validate(&self, participants: &[ParticipantId]) -> Result<(), ScheduleViolation> {
        if self.pairings.len() != self.rounds as usize {
            return Err(ScheduleViolation::WrongRoundCount {
                expected: self.rounds,
                found: self.pairings.len(),
            });
        }
        let everyone: BTreeSet<ParticipantId> = participants.iter().copied().collect();
        let mut seen = HashSet::new();
        for (round, pairs) in self.pairings.iter().enumerate() {
            let mut covered = BTreeSet::new();
            for &(a, b) in pairs {
                if a == b || !covered.insert(a) || !covered.insert(b) {
                    return Err(ScheduleViolation::NotPerfectMatching { round });
                }
                let key = (a.min(b), a.max(b));
                if !seen.insert(key) {
                    return Err(ScheduleViolation::RepeatedPair { round, pair: key });
                }
            }
            if covered != everyone {
                return Err(ScheduleViolation::NotPerfectMatching { round });
            }
        }
        Ok(())
    }
}

/// Pairs participants `0..n` for `rounds` rounds without ever repeating a pair.
pub fn build_schedule(n: usize, rounds: u32, seed: u64) -> Result<PairSchedule, ScheduleError> {
    if n % 2 == 1 || n == 0 {
        return Err(ScheduleError::OddParticipantCount(n));
    }
    let max = (n - 1) as u32;
    if rounds > max {
        return Err(ScheduleError::TooManyRounds { rounds, max });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<ParticipantId> = (0..n as ParticipantId).collect();
    labels.shuffle(&mut rng);
    let mut factor_order: Vec<usize> = (0..n - 1).collect();
    factor_order.shuffle(&mut rng);

    let pairings = factor_order
        .into_iter()
        .take(rounds as usize)
        .map(|r| {
            let mut round: Vec<_> = circle_round(n, r)
                .map(|(x, y)| {
                    let (a, b) = (labels[x], labels[y]);
                    (a.min(b), a.max(b))
                })
                .collect();
            round.sort_unstable();
            round
        })
        .collect();

    Ok(PairSchedule {
        rounds,
        pairings,
        seed,
    })
}

/// Round `r` of the circle method: vertex `n-1` is fixed and the remaining
/// `n-1` vertices rotate.
fn circle_round(n: usize, r: usize) -> impl Iterator<Item = (usize, usize)> {
    let m = n - 1;
    std::iter::once((r, m)).chain((1..n / 2).map(move |i| ((r + i) % m, (r + m - i) % m)))
}

/// Pairs every member of `group_a` with a member of `group_b` in each round;
/// with `rounds == |group|` every cross pair occurs exactly once. Pairs are
/// reported as `(a, b)`.
pub fn build_bipartite_schedule(
    group_a: &[ParticipantId],
    group_b: &[ParticipantId],
    rounds: u32,
    seed: u64,
) -> Result<PairSchedule, ScheduleError> {
    if group_a.len() != group_b.len() {
        return Err(ScheduleError::SizeMismatch {
            a: group_a.len(),
            b: group_b.len(),
        });
    }
    let g = group_a.len();
    if rounds as usize > g {
        return Err(ScheduleError::TooManyRounds {
            rounds,
            max: g as u32,
        });
    }
    let distinct: HashSet<_> = group_a.iter().chain(group_b).collect();
    if distinct.len() != 2 * g {
        return Err(ScheduleError::DuplicateParticipant);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = group_a.to_vec();
    let mut b = group_b.to_vec();
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    let offset = if g > 0 { rng.random_range(0..g) } else { 0 };

    let pairings = (0..rounds as usize)
        .map(|r| {
            let mut round: Vec<_> = (0..g).map(|i| (a[i], b[(i + r + offset) % g])).collect();
            round.sort_unstable();
            round
        })
        .collect();

    Ok(PairSchedule {
        rounds,
        pairings,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_players_one_round() {
        let s = build_schedule(2, 1, 99).unwrap();
        assert_eq!(s.pairings, vec![vec![(0, 1)]]);
    }

    #[test]
    fn k4_three_rounds_uses_every_pair_once() {
        for seed in 0..20 {
            let s = build_schedule(4, 3, seed).unwrap();
            s.validate(&[0, 1, 2, 3]).unwrap();
            let mut all: Vec<_> = s.pairings.iter().flatten().copied().collect();
            all.sort_unstable();
            assert_eq!(all, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        }
    }

    #[test]
    fn k4_schedules_are_among_the_enumerated_factorizations() {
        // K4 has exactly three perfect matchings; any 3-round repeat-free
        // schedule must use each of them once, in some order.
        let pairs: Vec<(u32, u32)> = (0..4)
            .flat_map(|a| (a + 1..4).map(move |b| (a, b)))
            .collect();
        let mut matchings: Vec<Vec<(u32, u32)>> = Vec::new();
        for (i, &p) in pairs.iter().enumerate() {
            for &q in &pairs[i + 1..] {
                let used = [p.0, p.1, q.0, q.1];
                if used.iter().collect::<HashSet<_>>().len() == 4 {
                    matchings.push(vec![p, q]);
                }
            }
        }
        assert_eq!(matchings.len(), 3);
        for seed in 0..20 {
            let s = build_schedule(4, 3, seed).unwrap();
            let mut rounds = s.pairings.clone();
            rounds.sort();
            assert_eq!(rounds, matchings);
        }
    }

    #[test]
    fn pigeonhole_errors() {
        assert_eq!(
            build_schedule(4, 4, 0).unwrap_err(),
            ScheduleError::TooManyRounds { rounds: 4, max: 3 }
        );
        assert_eq!(
            build_schedule(5, 2, 0).unwrap_err(),
            ScheduleError::OddParticipantCount(5)
        );
        assert_eq!(
            build_schedule(0, 0, 0).unwrap_err(),
            ScheduleError::OddParticipantCount(0)
        );
    }

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(build_schedule(12, 7, 5), build_schedule(12, 7, 5));
        assert_ne!(
            build_schedule(12, 7, 5).unwrap().pairings,
            build_schedule(12, 7, 6).unwrap().pairings
        );
    }

    #[test]
    fn bipartite_two_by_two() {
        let s = build_bipartite_schedule(&[0, 1], &[10, 11], 2, 3).unwrap();
        let mut all: Vec<_> = s.pairings.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, vec![(0, 10), (0, 11), (1, 10), (1, 11)]);
    }

    #[test]
    fn bipartite_ten_by_ten_covers_all_cross_pairs() {
        let a: Vec<u32> = (0..10).collect();
        let b: Vec<u32> = (10..20).collect();
        let s = build_bipartite_schedule(&a, &b, 10, 42).unwrap();
        let all: HashSet<_> = s.pairings.iter().flatten().copied().collect();
        assert_eq!(all.len(), 100);
        assert!(s.pairings.iter().all(|r| r.len() == 10));
        let mut everyone = a.clone();
        everyone.extend(&b);
        s.validate(&everyone).unwrap();
        assert_eq!(
            build_bipartite_schedule(&a, &b, 11, 42).unwrap_err(),
            ScheduleError::TooManyRounds { rounds: 11, max: 10 }
        );
    }

    #[test]
    fn bipartite_rejects_bad_groups() {
        assert_eq!(
            build_bipartite_schedule(&[0, 1], &[2], 1, 0).unwrap_err(),
            ScheduleError::SizeMismatch { a: 2, b: 1 }
        );
        assert_eq!(
            build_bipartite_schedule(&[0, 1], &[1, 2], 1, 0).unwrap_err(),
            ScheduleError::DuplicateParticipant
        );
    }

    #[test]
    fn validate_catches_repeats() {
        let s = PairSchedule {
            rounds: 2,
            pairings: vec![vec![(0, 1), (2, 3)], vec![(1, 0), (2, 3)]],
            seed: 0,
        };
        assert!(matches!(
            s.validate(&[0, 1, 2, 3]),
            Err(ScheduleViolation::RepeatedPair { round: 1, .. })
        ));
        let s = PairSchedule {
            rounds: 1,
            pairings: vec![vec![(0, 1)]],
            seed: 0,
        };
        assert!(matches!(
            s.validate(&[0, 1, 2, 3]),
            Err(ScheduleViolation::NotPerfectMatching { round: 0 })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn schedules_are_sound(half in 1usize..=16, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let n = 2 * half;
            let rounds = ((n - 1) as f64 * frac).round() as u32;
            let s = build_schedule(n, rounds, seed).unwrap();
            let ids: Vec<u32> = (0..n as u32).collect();
            prop_assert!(s.validate(&ids).is_ok());
        }

        #[test]
        fn bipartite_is_sound(g in 1usize..=16, frac in 0.0f64..=1.0, seed in any::<u64>()) {
            let rounds = (g as f64 * frac).round() as u32;
            let a: Vec<u32> = (0..g as u32).collect();
            let b: Vec<u32> = (100..100 + g as u32).collect();
            let s = build_bipartite_schedule(&a, &b, rounds, seed).unwrap();
            let mut ids = a.clone();
            ids.extend(&b);
            prop_assert!(s.validate(&ids).is_ok());
            for round in &s.pairings {
                prop_assert!(round.iter().all(|(x, y)| *x < 100 && *y >= 100));
            }
        }
    }
}
