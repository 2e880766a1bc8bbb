use std::fs;

use dilemma_analysis::{emit_report, write_report, Dataset, StatsError};

const ITEMS: [&str; 14] = [
    "clarity",
    "conciseness",
    "concreteness",
    "coherence",
    "courteousness",
    "correctness",
    "completeness",
    "trustworthiness",
    "intelligence",
    "cooperativeness",
    "likability",
    "fairness",
    "agency",
    "experience",
];

/// Writes a small two-treatment dataset; `with_annotations` adds expert
/// coding for every interaction.
fn write_dataset(dir: &std::path::Path, with_annotations: bool) {
    let mut interactions = String::from(
        "session_id,interaction_id,pairing,labeling,participant_id,round,own_choice,associate_choice,own_payoff,associate_payoff,own_message_1\n",
    );
    let mut survey = format!(
        "participant_id,pairing,labeling,norm_estimate_lo,norm_estimate_hi,{}\n",
        ITEMS.join(",")
    );
    let mut annotations = String::from(
        "interaction_id,annotator_id,p1_preferred,p2_preferred,p1_desires_from_p2,p2_desires_from_p1,agreement_reached,resolved_by_third\n",
    );
    for (s, pairing) in ["HF", "HS"].iter().enumerate() {
        for p in 0..12 {
            let pid = format!("s{s}-p{p}");
            for round in 1..=10 {
                let own = if (p * 3 + round + s) % 4 == 0 { "B" } else { "A" };
                let assoc = if *pairing == "HS" && (p + round) % 2 == 0 || p % 5 == round % 5 {
                    "B"
                } else {
                    "A"
                };
                let iid = format!("{pid}-r{round}");
                interactions.push_str(&format!(
                    "s{s},{iid},{pairing},informed,{pid},{round},{own},{assoc},0,0,\"hi, there\"\n"
                ));
                let agreed = (p + round) % 3 != 0;
                for who in ["a1", "a2"] {
                    annotations.push_str(&format!("{iid},{who},A,A,A,A,{agreed},false\n"));
                }
            }
            let lo = (p % 5) * 20;
            let values: Vec<String> =
                (0..ITEMS.len()).map(|k| (((p + k + s) % 7) as i32 - 3).to_string()).collect();
            survey.push_str(&format!(
                "{pid},{pairing},informed,{lo},{},{}\n",
                lo + 20,
                values.join(",")
            ));
        }
    }
    fs::write(dir.join("interactions.csv"), interactions).unwrap();
    fs::write(dir.join("questionnaires.csv"), survey).unwrap();
    if with_annotations {
        fs::write(dir.join("annotations.csv"), annotations).unwrap();
    }
}

#[test]
fn full_dataset_emits_every_section_deterministically() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), true);
    let ds = Dataset::load_dir(data.path()).unwrap();
    let a = emit_report(&ds).unwrap();
    let b = emit_report(&Dataset::load_dir(data.path()).unwrap()).unwrap();
    assert_eq!(a, b);
    for section in ["fig1_cooperation", "fig2_agreement", "fig3_breach_curve", "fig4_norms_traits", "figS1_seven_c", "tests"] {
        assert!(a.manifest.sections[section].available, "{section}: {:?}", a.manifest.sections[section]);
    }
    assert!(!a.manifest.sections["motives"].available);
    assert_eq!(a.manifest.participants, 24);

    let (out1, out2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_report(&a, out1.path()).unwrap();
    write_report(&b, out2.path()).unwrap();
    let mut names: Vec<_> = fs::read_dir(out1.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "manifest.json"));
    for name in names {
        assert_eq!(
            fs::read(out1.path().join(&name)).unwrap(),
            fs::read(out2.path().join(&name)).unwrap()
        );
    }
    let curve = &a.files["fig3_curve.csv"];
    assert_eq!(curve.lines().count(), 102);
}

#[test]
fn missing_annotations_degrade_gracefully() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), false);
    let bundle = emit_report(&Dataset::load_dir(data.path()).unwrap()).unwrap();
    let s = &bundle.manifest.sections;
    assert!(!s["fig2_agreement"].available);
    assert!(!s["fig3_breach_curve"].available);
    assert!(s["fig1_cooperation"].available && s["fig4_norms_traits"].available);
    assert!(!bundle.files.contains_key("fig2_agreement.csv"));
}

#[test]
fn agreement_table_satisfies_breach_identity() {
    let data = tempfile::tempdir().unwrap();
    write_dataset(data.path(), true);
    let bundle = emit_report(&Dataset::load_dir(data.path()).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_reader(bundle.files["fig2_agreement.csv"].as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let agreements: f64 = rec[col("agreements")].parse().unwrap();
        let breaches: f64 = rec[col("human_breaches")].parse().unwrap();
        let rate: f64 = rec[col("human_breach_rate")].parse().unwrap();
        assert!((rate - breaches / agreements).abs() < 1e-9);
    }
}

#[test]
fn missing_interactions_is_incomplete() {
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        Dataset::load_dir(empty.path()),
        Err(StatsError::DatasetIncomplete(_))
    ));
}
