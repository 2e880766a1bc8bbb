//! Aggregate behavior metrics with exact fraction bookkeeping.

use std::collections::BTreeMap;
use std::fmt;

use dilemma_agents::Persona;
use serde::{Deserialize, Serialize};

use crate::matchup::SimRecord;

/// A rate kept as numerator and denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn rate(self) -> Option<f64> {
        (self.den > 0).then(|| self.num as f64 / self.den as f64)
    }

    fn add(&mut self, hit: bool) {
        self.num += u64::from(hit);
        self.den += 1;
    }

    fn merge(&mut self, other: Fraction) {
        self.num += other.num;
        self.den += other.den;
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Rates for one persona against one opponent persona.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cooperation: Fraction,
    /// Over records with agreement detection.
    pub agreement: Fraction,
    /// Breaches over agreements; `None` when there were no agreements.
    pub breach: Option<Fraction>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub rows: BTreeMap<(Persona, Persona), SummaryRow>,
}

/// Each record contributes once per side, keyed by (own, opponent) persona.
/// Buckets without records do not appear.
pub fn aggregate(records: &[SimRecord]) -> SummaryTable {
    let mut rows: BTreeMap<(Persona, Persona), SummaryRow> = BTreeMap::new();
    for r in records {
        for (k, other) in [(0usize, 1usize), (1, 0)] {
            let row = rows.entry((r.personas[k], r.personas[other])).or_default();
            row.cooperation.add(r.choices[k].is_cooperation());
            if let Some(agreed) = r.agreement {
                row.agreement.add(agreed);
                if agreed {
                    let breached = r.breach.map_or(false, |b| b[k]);
                    row.breach.get_or_insert_with(Fraction::default).add(breached);
                }
            }
        }
    }
    SummaryTable { rows }
}

impl SummaryTable {
    /// Pools every opponent for each persona.
    pub fn by_persona(&self) -> BTreeMap<Persona, SummaryRow> {
        let mut out: BTreeMap<Persona, SummaryRow> = BTreeMap::new();
        for (&(persona, _), row) in &self.rows {
            let acc = out.entry(persona).or_default();
            acc.cooperation.merge(row.cooperation);
            acc.agreement.merge(row.agreement);
            if let Some(b) = row.breach {
                acc.breach.get_or_insert_with(Fraction::default).merge(b);
            }
        }
        out
    }

    pub fn merge(&mut self, other: &SummaryTable) {
        for (key, row) in &other.rows {
            let acc = self.rows.entry(*key).or_default();
            acc.cooperation.merge(row.cooperation);
            acc.agreement.merge(row.agreement);
            if let Some(b) = row.breach {
                acc.breach.get_or_insert_with(Fraction::default).merge(b);
            }
        }
    }

    /// Checks the persona ordering expected of the mock policies: cooperation
    /// Cooperative > Fair > Selfish and breach Selfish > Fair >= Cooperative,
    /// both against every fixed opponent and between the two sides of every
    /// cross matchup. Returns one message per violated or untestable pair.
    pub fn ordering_violations(&self) -> Vec<String> {
        const ORDER: [Persona; 3] = [Persona::Cooperative, Persona::Fair, Persona::Selfish];
        let coop = |key: (Persona, Persona)| self.rows.get(&key).and_then(|r| r.cooperation.rate());
        let breach = |key: (Persona, Persona)| self.rows.get(&key).and_then(|r| r.breach?.rate());
        let mut out = Vec::new();
        let mut check = |hi: (Persona, Persona), lo: (Persona, Persona)| {
            let label = |k: (Persona, Persona)| format!("{}|{}", k.0.key(), k.1.key());
            match (coop(hi), coop(lo)) {
                (Some(a), Some(b)) if a > b => {}
                (a, b) => out.push(format!("cooperation {} {a:?} !> {} {b:?}", label(hi), label(lo))),
            }
            // Only Cooperative vs Fair may tie on breaches.
            let weak = hi.0 == Persona::Cooperative && lo.0 == Persona::Fair;
            match (breach(lo), breach(hi)) {
                (Some(a), Some(b)) if a > b || (weak && a >= b) => {}
                (a, b) => out.push(format!(
                    "breach {} {a:?} !{} {} {b:?}",
                    label(lo),
                    if weak { ">=" } else { ">" },
                    label(hi)
                )),
            }
        };
        for i in 0..ORDER.len() {
            for j in i + 1..ORDER.len() {
                let (hi, lo) = (ORDER[i], ORDER[j]);
                for opp in ORDER {
                    if self.rows.contains_key(&(hi, opp)) || self.rows.contains_key(&(lo, opp)) {
                        check((hi, opp), (lo, opp));
                    }
                }
                if self.rows.contains_key(&(hi, lo)) || self.rows.contains_key(&(lo, hi)) {
                    check((hi, lo), (lo, hi));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "persona",
            "opponent",
            "cooperations",
            "decisions",
            "cooperation_rate",
            "agreements",
            "conversations",
            "agreement_rate",
            "breaches",
            "breach_rate",
        ])
        .expect("in-memory write");
        let rate = |f: Fraction| f.rate().map(|r| format!("{r:.6}")).unwrap_or_default();
        for (&(p, o), row) in &self.rows {
            let breach = row.breach.unwrap_or_default();
            w.write_record([
                p.key().to_string(),
                o.key().to_string(),
                row.cooperation.num.to_string(),
                row.cooperation.den.to_string(),
                rate(row.cooperation),
                row.agreement.num.to_string(),
                row.agreement.den.to_string(),
                rate(row.agreement),
                row.breach.map(|b| b.num.to_string()).unwrap_or_default(),
                rate(breach),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dilemma_core::Choice;

    fn record(pa: Persona, pb: Persona, ca: Choice, cb: Choice, agreement: Option<bool>) -> SimRecord {
        SimRecord {
            matchup_id: "x".into(),
            backend: "mock".into(),
            repeat: 0,
            round: 1,
            pair: ["a".into(), "b".into()],
            personas: [pa, pb],
            messages: Default::default(),
            choices: [ca, cb],
            payoffs: [0, 0],
            decision_fallback: [false, false],
            agreement,
            breach: agreement.map(|ag| [ag && ca == Choice::B, ag && cb == Choice::B]),
        }
    }

    #[test]
    fn all_cooperation() {
        let recs = vec![record(Persona::Fair, Persona::Fair, Choice::A, Choice::A, Some(true)); 3];
        let t = aggregate(&recs);
        let row = t.rows[&(Persona::Fair, Persona::Fair)];
        assert_eq!(row.cooperation, Fraction { num: 6, den: 6 });
        assert_eq!(row.cooperation.rate(), Some(1.0));
        assert_eq!(row.breach, Some(Fraction { num: 0, den: 6 }));
    }

    #[test]
    fn empty_buckets_are_omitted() {
        let recs = vec![record(Persona::Cooperative, Persona::Selfish, Choice::A, Choice::B, Some(false))];
        let t = aggregate(&recs);
        assert_eq!(t.rows.len(), 2);
        assert!(!t.rows.contains_key(&(Persona::Fair, Persona::Fair)));
        // No agreement: the breach rate is undefined, not 0.
        assert_eq!(t.rows[&(Persona::Selfish, Persona::Cooperative)].breach, None);
        assert!(aggregate(&[]).rows.is_empty());
    }
}
