//! Dataset ingestion and the report bundle: plot-ready tables for every
//! figure-level aggregate plus a flat table of all test results.
//!
//! Input tables (all CSV with headers; extra columns are ignored):
//!
//! * `interactions.csv` — one row per participant-round: `session_id`,
//!   `interaction_id`, `pairing`, `labeling`, `participant_id`, `round`,
//!   `own_choice`, `associate_choice`, `own_payoff`, `associate_payoff`.
//! * `questionnaires.csv` (optional) — `participant_id`, `pairing`,
//!   `labeling`, `norm_estimate_lo`, `norm_estimate_hi` (percent) and one
//!   column per perception item.
//! * `annotations.csv` and `motives.csv` (optional) — expert coding.
//!
//! Every section is listed in the manifest; sections whose inputs are absent
//! are marked unavailable with a reason instead of failing the report.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use dilemma_core::{Choice, Labeling, Pairing};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::annotations::{
    derive_breach, load_annotations, load_motive_ratings, motive_summary, resolve_agreements,
    AnnotationRecord, MotiveRating,
};
use crate::anova::one_way_anova;
use crate::effect::{cohen_d, mean, variance};
use crate::error::StatsError;
use crate::glm::{bin_by_frequency, breach_response_curve, fit_binomial_glm, PolynomialLogit};
use crate::nonparametric::mann_whitney_u;
use crate::proportions::proportions_ztest;
use crate::questionnaire::{QuestionnaireRow, PERCEPTION_ITEMS, SEVEN_C_ITEMS, TRAIT_ITEMS};
use crate::tukey::tukey_hsd;
use crate::{Alternative, TestResult};

/// Bins used for the breach-frequency curve.
pub const BREACH_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRow {
    pub session_id: String,
    pub interaction_id: String,
    pub pairing: Pairing,
    pub labeling: Labeling,
    pub participant_id: String,
    pub round: u32,
    pub own_choice: Choice,
    pub associate_choice: Choice,
    pub own_payoff: i64,
    pub associate_payoff: i64,
}

/// One participant's post-game questionnaire. Items that were not asked are
/// absent from `items`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRow {
    pub participant_id: String,
    pub pairing: Pairing,
    pub labeling: Labeling,
    pub norm_estimate: Option<(u32, u32)>,
    pub items: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub interactions: Vec<InteractionRow>,
    pub surveys: Vec<SurveyRow>,
    pub annotations: Option<Vec<AnnotationRecord>>,
    pub motives: Option<Vec<MotiveRating>>,
}

fn schema(e: impl std::fmt::Display) -> StatsError {
    StatsError::Schema(e.to_string())
}

pub fn load_interactions(reader: impl Read) -> Result<Vec<InteractionRow>, StatsError> {
    csv::Reader::from_reader(reader)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(schema)
}

pub fn load_surveys(reader: impl Read) -> Result<Vec<SurveyRow>, StatsError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(schema)?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| col(name).ok_or_else(|| schema(format!("missing column {name}")));
    let (pid, pairing, labeling) = (
        required("participant_id")?,
        required("pairing")?,
        required("labeling")?,
    );
    let (lo, hi) = (col("norm_estimate_lo"), col("norm_estimate_hi"));
    let items: Vec<(&str, usize)> = PERCEPTION_ITEMS
        .iter()
        .filter_map(|&item| col(item).map(|c| (item, c)))
        .collect();

    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(schema)?;
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let number = |c: usize| -> Result<Option<f64>, StatsError> {
            match field(c) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| schema(format!("bad number {s:?}"))),
            }
        };
        let norm_estimate = match (lo, hi) {
            (Some(l), Some(h)) if !field(l).is_empty() && !field(h).is_empty() => Some((
                field(l).parse().map_err(schema)?,
                field(h).parse().map_err(schema)?,
            )),
            _ => None,
        };
        let mut values = BTreeMap::new();
        for &(item, c) in &items {
            if let Some(v) = number(c)? {
                values.insert(item.to_string(), v);
            }
        }
        out.push(SurveyRow {
            participant_id: field(pid).to_string(),
            pairing: field(pairing).parse().map_err(schema)?,
            labeling: match field(labeling) {
                "informed" => Labeling::Informed,
                "uninformed" => Labeling::Uninformed,
                other => return Err(schema(format!("unknown labeling {other:?}"))),
            },
            norm_estimate,
            items: values,
        });
    }
    Ok(out)
}

impl Dataset {
    /// Reads a dataset directory. Only `interactions.csv` is required.
    pub fn load_dir(dir: &Path) -> Result<Dataset, StatsError> {
        let open = |name: &str| -> Result<Option<fs::File>, StatsError> {
            match fs::File::open(dir.join(name)) {
                Ok(f) => Ok(Some(f)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
                Err(e) => Err(schema(format!("{name}: {e}"))),
            }
        };
        let interactions = match open("interactions.csv")? {
            Some(f) => load_interactions(f)?,
            None => return Err(StatsError::DatasetIncomplete("interactions.csv not found".into())),
        };
        Ok(Dataset {
            interactions,
            surveys: open("questionnaires.csv")?.map(load_surveys).transpose()?.unwrap_or_default(),
            annotations: open("annotations.csv")?.map(load_annotations).transpose()?,
            motives: open("motives.csv")?.map(load_motive_ratings).transpose()?,
        })
    }

    /// Cooperation counts per participant joined with questionnaire answers.
    /// Participants without a questionnaire are skipped.
    pub fn questionnaire_rows(&self) -> Vec<QuestionnaireRow> {
        let counts = participant_counts(&self.interactions);
        self.surveys
            .iter()
            .filter_map(|s| {
                let &(coop, rounds) = counts.get(s.participant_id.as_str())?;
                Some(QuestionnaireRow {
                    participant_id: s.participant_id.clone(),
                    pairing: s.pairing,
                    cooperation_count: coop,
                    rounds,
                    perceptions: s.items.clone(),
                    norm_expectation: s
                        .norm_estimate
                        .map(|(lo, hi)| f64::from(lo + hi) / 200.0),
                })
            })
            .collect()
    }
}

/// (cooperations, rounds) per participant.
fn participant_counts(rows: &[InteractionRow]) -> BTreeMap<&str, (u32, u32)> {
    let mut out: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    for r in rows {
        let e = out.entry(r.participant_id.as_str()).or_default();
        e.0 += u32::from(r.own_choice.is_cooperation());
        e.1 += 1;
    }
    out
}

type Treatment = (Pairing, Labeling);

fn treatment_label((p, l): Treatment) -> String {
    format!("{p}/{l}")
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        let s = format!("{x:.10}");
        if s == "-0.0000000000" {
            "0.0000000000".into()
        } else {
            s
        }
    } else {
        "NA".into()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// A CSV table assembled in memory.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Table {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionStatus {
    pub available: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub participants: usize,
    pub interaction_rows: usize,
    pub treatments: Vec<String>,
    pub sections: BTreeMap<String, SectionStatus>,
}

/// In-memory report: file name → file contents, plus the manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportBundle {
    pub manifest: Manifest,
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn manifest_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        s.push('\n');
        s
    }
}

struct Builder {
    files: BTreeMap<String, String>,
    sections: BTreeMap<String, SectionStatus>,
    tests: Table,
}

impl Builder {
    fn available(&mut self, section: &str, tables: Vec<(&str, Table)>) {
        let mut files = Vec::new();
        for (name, table) in tables {
            self.files.insert(name.to_string(), table.to_csv());
            files.push(name.to_string());
        }
        self.sections.insert(
            section.to_string(),
            SectionStatus { available: true, reason: None, files },
        );
    }

    fn unavailable(&mut self, section: &str, reason: impl Into<String>) {
        self.sections.insert(
            section.to_string(),
            SectionStatus { available: false, reason: Some(reason.into()), files: Vec::new() },
        );
    }

    fn test(&mut self, section: &str, comparison: &str, result: Result<TestResult, StatsError>) {
        let row = match result {
            Ok(t) => vec![
                section.to_string(),
                comparison.to_string(),
                t.test,
                fmt_num(t.statistic),
                fmt_num(t.p_value),
                fmt_opt(t.effect_size),
                t.df
                    .map(|d| d.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>().join(";"))
                    .unwrap_or_default(),
                String::new(),
            ],
            Err(e) => vec![
                section.to_string(),
                comparison.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                format!("{e:?}"),
            ],
        };
        self.tests.push(row);
    }
}

/// Builds the report bundle. Pure and deterministic.
pub fn emit_report(dataset: &Dataset) -> Result<ReportBundle, StatsError> {
    if dataset.interactions.is_empty() {
        return Err(StatsError::DatasetIncomplete("no interaction rows".into()));
    }
    let mut b = Builder {
        files: BTreeMap::new(),
        sections: BTreeMap::new(),
        tests: Table::new(&[
            "section",
            "comparison",
            "test",
            "statistic",
            "p_value",
            "effect_size",
            "df",
            "error",
        ]),
    };
    let treatments: BTreeSet<Treatment> =
        dataset.interactions.iter().map(|r| (r.pairing, r.labeling)).collect();

    cooperation_section(&mut b, dataset, &treatments);
    match &dataset.annotations {
        Some(ann) => {
            let resolved = resolve_agreements(ann);
            agreement_section(&mut b, dataset, &treatments, &resolved.agreements, resolved.excluded.len());
            curve_section(&mut b, dataset, &resolved.agreements);
        }
        None => {
            b.unavailable("fig2_agreement", "no annotations");
            b.unavailable("fig3_breach_curve", "no annotations");
        }
    }
    if dataset.surveys.is_empty() {
        b.unavailable("fig4_norms_traits", "no questionnaires");
        b.unavailable("figS1_seven_c", "no questionnaires");
    } else {
        survey_sections(&mut b, dataset);
    }
    match &dataset.motives {
        Some(m) if !m.is_empty() => {
            let mut t = Table::new(&["motive", "observations", "mean"]);
            let mut results = Vec::new();
            for (motive, result) in motive_summary(m, Alternative::TwoSided) {
                let scores: Vec<f64> = m.iter().map(|r| f64::from(r.score(motive))).collect();
                t.push(vec![motive.as_str().into(), scores.len().to_string(), fmt_num(mean(&scores))]);
                results.push((motive, result));
            }
            for (motive, result) in results {
                b.test("motives", motive.as_str(), result);
            }
            b.available("motives", vec![("motives.csv", t)]);
        }
        _ => b.unavailable("motives", "no motive ratings"),
    }

    let tests = std::mem::replace(&mut b.tests, Table::new(&[]));
    b.available("tests", vec![("tests.csv", tests)]);

    let participants = participant_counts(&dataset.interactions).len();
    Ok(ReportBundle {
        manifest: Manifest {
            format_version: 1,
            participants,
            interaction_rows: dataset.interactions.len(),
            treatments: treatments.iter().map(|&t| treatment_label(t)).collect(),
            sections: b.sections,
        },
        files: b.files,
    })
}

/// Per-participant cooperation rates grouped by treatment.
fn participant_rates(dataset: &Dataset) -> BTreeMap<Treatment, Vec<f64>> {
    let mut per: BTreeMap<(Treatment, &str), (u32, u32)> = BTreeMap::new();
    for r in &dataset.interactions {
        let e = per.entry(((r.pairing, r.labeling), &r.participant_id)).or_default();
        e.0 += u32::from(r.own_choice.is_cooperation());
        e.1 += 1;
    }
    let mut out: BTreeMap<Treatment, Vec<f64>> = BTreeMap::new();
    for ((t, _), (c, n)) in per {
        out.entry(t).or_default().push(f64::from(c) / f64::from(n));
    }
    out
}

/// Pairs of treatments sharing a labeling condition.
fn comparable_pairs(treatments: &BTreeSet<Treatment>) -> Vec<(Treatment, Treatment)> {
    let list: Vec<Treatment> = treatments.iter().copied().collect();
    let mut out = Vec::new();
    for (i, &a) in list.iter().enumerate() {
        for &b in &list[i + 1..] {
            if a.1 == b.1 {
                out.push((a, b));
            }
        }
    }
    out
}

fn cooperation_section(b: &mut Builder, dataset: &Dataset, treatments: &BTreeSet<Treatment>) {
    let rates = participant_rates(dataset);
    let mut t = Table::new(&[
        "pairing",
        "labeling",
        "participants",
        "interaction_rows",
        "cooperation_rate",
        "participant_rate_sd",
    ]);
    for &tr in treatments {
        let rows: Vec<&InteractionRow> = dataset
            .interactions
            .iter()
            .filter(|r| (r.pairing, r.labeling) == tr)
            .collect();
        let coop = rows.iter().filter(|r| r.own_choice.is_cooperation()).count();
        let pr = &rates[&tr];
        t.push(vec![
            tr.0.to_string(),
            tr.1.to_string(),
            pr.len().to_string(),
            rows.len().to_string(),
            fmt_num(coop as f64 / rows.len() as f64),
            if pr.len() > 1 { fmt_num(variance(pr).sqrt()) } else { String::new() },
        ]);
    }
    for (x, y) in comparable_pairs(treatments) {
        let (rx, ry) = (&rates[&x], &rates[&y]);
        let result = mann_whitney_u(rx, ry, Alternative::TwoSided).map(|mut r| {
            r.effect_size = cohen_d(rx, ry).ok();
            r
        });
        b.test("fig1_cooperation", &format!("{} vs {}", treatment_label(x), treatment_label(y)), result);
    }
    b.available("fig1_cooperation", vec![("fig1_cooperation.csv", t)]);
}

#[derive(Default, Clone, Copy)]
struct AgreementCounts {
    annotated: u64,
    agreements: u64,
    human_breaches: u64,
    agent_agreements: u64,
    agent_breaches: u64,
}

fn agreement_section(
    b: &mut Builder,
    dataset: &Dataset,
    treatments: &BTreeSet<Treatment>,
    agreements: &BTreeMap<String, bool>,
    excluded: usize,
) {
    let mut counts: BTreeMap<Treatment, AgreementCounts> =
        treatments.iter().map(|&t| (t, AgreementCounts::default())).collect();
    for r in &dataset.interactions {
        let Some(&agreed) = agreements.get(&r.interaction_id) else { continue };
        let c = counts.get_mut(&(r.pairing, r.labeling)).expect("treatment collected");
        c.annotated += 1;
        c.agreements += u64::from(agreed);
        c.human_breaches += u64::from(derive_breach(agreed, r.own_choice));
        if r.pairing.is_human_agent() {
            c.agent_agreements += u64::from(agreed);
            c.agent_breaches += u64::from(derive_breach(agreed, r.associate_choice));
        }
    }
    if counts.values().all(|c| c.annotated == 0) {
        b.unavailable("fig2_agreement", "annotations match no interaction");
        return;
    }
    let ratio = |k: u64, n: u64| if n > 0 { fmt_num(k as f64 / n as f64) } else { String::new() };
    let mut t = Table::new(&[
        "pairing",
        "labeling",
        "annotated_rows",
        "agreements",
        "agreement_rate",
        "human_breaches",
        "human_breach_rate",
        "agent_breaches",
        "agent_breach_rate",
        "excluded_interactions",
    ]);
    for (&tr, c) in &counts {
        t.push(vec![
            tr.0.to_string(),
            tr.1.to_string(),
            c.annotated.to_string(),
            c.agreements.to_string(),
            ratio(c.agreements, c.annotated),
            c.human_breaches.to_string(),
            ratio(c.human_breaches, c.agreements),
            if tr.0.is_human_agent() { c.agent_breaches.to_string() } else { String::new() },
            ratio(c.agent_breaches, c.agent_agreements),
            excluded.to_string(),
        ]);
    }
    for (x, y) in comparable_pairs(treatments) {
        let (cx, cy) = (counts[&x], counts[&y]);
        let label = format!("{} vs {}", treatment_label(x), treatment_label(y));
        b.test(
            "fig2_agreement",
            &format!("agreement {label}"),
            proportions_ztest(cx.agreements, cx.annotated, cy.agreements, cy.annotated, true),
        );
        b.test(
            "fig2_agreement",
            &format!("human breach {label}"),
            proportions_ztest(cx.human_breaches, cx.agreements, cy.human_breaches, cy.agreements, true),
        );
    }
    b.available("fig2_agreement", vec![("fig2_agreement.csv", t)]);
}

/// Human cooperation against the agent's breach frequency, one observation
/// per human–agent participant with at least one agreement.
fn curve_section(b: &mut Builder, dataset: &Dataset, agreements: &BTreeMap<String, bool>) {
    #[derive(Default)]
    struct Acc {
        agreements: u32,
        breaches: u32,
        cooperations: u32,
        rounds: u32,
    }
    let mut per: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in dataset.interactions.iter().filter(|r| r.pairing.is_human_agent()) {
        let a = per.entry(&r.participant_id).or_default();
        a.rounds += 1;
        a.cooperations += u32::from(r.own_choice.is_cooperation());
        if let Some(&agreed) = agreements.get(&r.interaction_id) {
            a.agreements += u32::from(agreed);
            a.breaches += u32::from(derive_breach(agreed, r.associate_choice));
        }
    }
    let observations: Vec<(f64, f64, f64)> = per
        .values()
        .filter(|a| a.agreements > 0)
        .map(|a| {
            (
                f64::from(a.breaches) / f64::from(a.agreements),
                f64::from(a.cooperations),
                f64::from(a.rounds),
            )
        })
        .collect();
    let bins = bin_by_frequency(&observations, BREACH_BINS);
    if bins.len() < 4 {
        b.unavailable(
            "fig3_breach_curve",
            format!("{} non-empty breach-frequency bins; a cubic needs 4", bins.len()),
        );
        return;
    }
    let names: Vec<String> = ["(Intercept)", "breach", "breach^2", "breach^3"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let x = DMatrix::from_fn(bins.len(), 4, |i, j| bins[i].0.powi(j as i32));
    let successes: Vec<f64> = bins.iter().map(|b| b.1).collect();
    let trials: Vec<f64> = bins.iter().map(|b| b.2).collect();
    let fit = match fit_binomial_glm(&x, &names, &successes, &trials) {
        Ok(f) => f,
        Err(e) => {
            b.unavailable("fig3_breach_curve", format!("cubic fit failed: {e:?}"));
            return;
        }
    };
    let model = PolynomialLogit::from_fit(&fit, "(Intercept)", &["breach", "breach^2", "breach^3"])
        .expect("terms named above");

    let mut binned = Table::new(&["breach_frequency", "cooperations", "rounds", "cooperation_rate"]);
    for &(mid, y, m) in &bins {
        binned.push(vec![fmt_num(mid), fmt_num(y), fmt_num(m), fmt_num(y / m)]);
    }
    let mut terms = Table::new(&["term", "estimate", "std_error", "z", "p_value"]);
    for term in &fit.terms {
        terms.push(vec![
            term.name.clone(),
            fmt_num(term.estimate),
            fmt_num(term.std_error),
            fmt_num(term.z),
            fmt_num(term.p_value),
        ]);
    }
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut curve = Table::new(&["breach_frequency", "cooperation_probability"]);
    for (x, p) in breach_response_curve(&model, &grid) {
        curve.push(vec![fmt_num(x), fmt_num(p)]);
    }
    b.available(
        "fig3_breach_curve",
        vec![
            ("fig3_bins.csv", binned),
            ("fig3_terms.csv", terms),
            ("fig3_curve.csv", curve),
        ],
    );
}

/// Likert summaries per treatment with one ANOVA and Tukey table per item
/// and labeling condition.
fn likert_tables(
    b: &mut Builder,
    section: &str,
    dataset: &Dataset,
    items: &[&str],
) -> (Table, Table) {
    let mut summary = Table::new(&["pairing", "labeling", "item", "n", "mean", "sd"]);
    let mut tukey = Table::new(&[
        "labeling",
        "item",
        "group_i",
        "group_j",
        "difference",
        "lower",
        "upper",
        "p_adjusted",
    ]);
    let labelings: BTreeSet<Labeling> = dataset.surveys.iter().map(|s| s.labeling).collect();
    for &item in items {
        for &labeling in &labelings {
            let mut groups: BTreeMap<Pairing, Vec<f64>> = BTreeMap::new();
            for s in dataset.surveys.iter().filter(|s| s.labeling == labeling) {
                if let Some(&v) = s.items.get(item) {
                    groups.entry(s.pairing).or_default().push(v);
                }
            }
            for (pairing, values) in &groups {
                summary.push(vec![
                    pairing.to_string(),
                    labeling.to_string(),
                    item.to_string(),
                    values.len().to_string(),
                    fmt_num(mean(values)),
                    if values.len() > 1 { fmt_num(variance(values).sqrt()) } else { String::new() },
                ]);
            }
            if groups.len() < 2 {
                continue;
            }
            let keys: Vec<Pairing> = groups.keys().copied().collect();
            let samples: Vec<Vec<f64>> = groups.into_values().collect();
            b.test(section, &format!("{item} across pairings/{labeling}"), one_way_anova(&samples));
            if let Ok(rows) = tukey_hsd(&samples) {
                for r in rows {
                    tukey.push(vec![
                        labeling.to_string(),
                        item.to_string(),
                        keys[r.group_i].to_string(),
                        keys[r.group_j].to_string(),
                        fmt_num(r.difference),
                        fmt_num(r.lower),
                        fmt_num(r.upper),
                        fmt_num(r.p_adjusted),
                    ]);
                }
            }
        }
    }
    (summary, tukey)
}

fn survey_sections(b: &mut Builder, dataset: &Dataset) {
    let mut norms = Table::new(&["pairing", "labeling", "bin_lo", "bin_hi", "count"]);
    let mut counts: BTreeMap<(Pairing, Labeling, u32, u32), u32> = BTreeMap::new();
    for s in &dataset.surveys {
        if let Some((lo, hi)) = s.norm_estimate {
            *counts.entry((s.pairing, s.labeling, lo, hi)).or_default() += 1;
        }
    }
    for ((p, l, lo, hi), n) in counts {
        norms.push(vec![p.to_string(), l.to_string(), lo.to_string(), hi.to_string(), n.to_string()]);
    }
    let (traits, trait_tukey) = likert_tables(b, "fig4_norms_traits", dataset, &TRAIT_ITEMS);
    b.available(
        "fig4_norms_traits",
        vec![
            ("fig4_norms.csv", norms),
            ("fig4_traits.csv", traits),
            ("fig4_tukey.csv", trait_tukey),
        ],
    );
    let (seven_c, seven_c_tukey) = likert_tables(b, "figS1_seven_c", dataset, &SEVEN_C_ITEMS);
    b.available(
        "figS1_seven_c",
        vec![("figS1_seven_c.csv", seven_c), ("figS1_tukey.csv", seven_c_tukey)],
    );
}

/// Writes every table and `manifest.json` into `dir`, creating it if needed.
pub fn write_report(bundle: &ReportBundle, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in &bundle.files {
        fs::write(dir.join(name), contents)?;
    }
    fs::write(dir.join("manifest.json"), bundle.manifest_json())
}
