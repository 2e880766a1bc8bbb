//! Session storage on disk and dataset export. Every exported table is
//! derived by replaying the event logs, never from live session state.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::SessionConfig;
use crate::error::OrchestratorError;
use crate::event::{read_events, EventRecord};
use crate::questionnaire::{SEVEN_C_ITEMS, TRAIT_ITEMS};
use crate::result::{replay, SessionResult};
use crate::session::Participant;

/// A directory of sessions, one sub-directory per session id holding
/// `config.toml`, `roster.json` and `events.jsonl`.
#[derive(Clone, Debug)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> SessionStore {
        SessionStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn events_path(&self, id: &str) -> PathBuf {
        self.session_dir(id).join("events.jsonl")
    }

    pub fn create(&self, id: &str, config: &SessionConfig, roster: &[Participant]) -> Result<PathBuf, OrchestratorError> {
        config.validate()?;
        let dir = self.session_dir(id);
        if dir.join("config.toml").exists() {
            return Err(OrchestratorError::ConfigInvalid(format!("session {id:?} already exists")));
        }
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("config.toml"), config.to_toml())?;
        fs::write(dir.join("roster.json"), serde_json::to_string_pretty(roster)? + "\n")?;
        Ok(dir)
    }

    pub fn load(&self, id: &str) -> Result<(SessionConfig, Vec<Participant>), OrchestratorError> {
        let dir = self.session_dir(id);
        let config = SessionConfig::load(&dir.join("config.toml"))?;
        let roster = serde_json::from_str(&fs::read_to_string(dir.join("roster.json"))?)?;
        Ok((config, roster))
    }

    pub fn events(&self, id: &str) -> Result<Vec<EventRecord>, OrchestratorError> {
        let path = self.events_path(id);
        if !path.exists() {
            return Err(OrchestratorError::SessionIncomplete(id.to_string()));
        }
        read_events(&path)
    }

    /// Session ids in lexicographic order.
    pub fn list(&self) -> Result<Vec<String>, OrchestratorError> {
        let mut ids = Vec::new();
        if !self.root.exists() {
            return Ok(ids);
        }
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join("config.toml").exists() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }
}

/// The three exported tables as CSV text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetTables {
    pub interactions: String,
    pub questionnaires: String,
    pub payouts: String,
}

impl DatasetTables {
    pub fn write_to(&self, dir: &Path) -> Result<(), OrchestratorError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("interactions.csv"), &self.interactions)?;
        fs::write(dir.join("questionnaires.csv"), &self.questionnaires)?;
        fs::write(dir.join("payouts.csv"), &self.payouts)?;
        Ok(())
    }
}

pub const INTERACTION_COLUMNS: [&str; 19] = [
    "session_id",
    "interaction_id",
    "pairing",
    "labeling",
    "communication",
    "participant_id",
    "round",
    "associate_id",
    "associate_is_agent",
    "own_choice",
    "associate_choice",
    "own_payoff",
    "associate_payoff",
    "own_choice_timed_out",
    "associate_choice_timed_out",
    "own_message_1",
    "own_message_2",
    "associate_message_1",
    "associate_message_2",
];

pub const PAYOUT_COLUMNS: [&str; 8] = [
    "session_id",
    "participant_id",
    "pairing",
    "labeling",
    "total_points",
    "realized_norm_rate",
    "correct_norm_guesses",
    "payout",
];

/// Replays and exports the given sessions. An unfinished session is an
/// error; an empty id list yields header-only tables.
pub fn export_dataset(store: &SessionStore, ids: &[String]) -> Result<DatasetTables, OrchestratorError> {
    let mut results = Vec::with_capacity(ids.len());
    for id in ids {
        results.push(replay(&store.events(id)?)?);
    }
    export_results(&results)
}

fn questionnaire_columns() -> Vec<String> {
    let mut cols: Vec<String> = ["session_id", "participant_id", "pairing", "labeling", "norm_estimate_lo", "norm_estimate_hi"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(SEVEN_C_ITEMS.iter().chain(TRAIT_ITEMS.iter()).map(|s| s.to_string()));
    cols.extend(
        ["humanness", "llm_familiarity", "svo_items", "age", "gender", "field"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, OrchestratorError> {
    let bytes = w.into_inner().map_err(|e| OrchestratorError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn export_results(results: &[SessionResult]) -> Result<DatasetTables, OrchestratorError> {
    let opt = |v: Option<String>| v.unwrap_or_default();
    let mut inter = csv::Writer::from_writer(Vec::new());
    let mut quest = csv::Writer::from_writer(Vec::new());
    let mut pay = csv::Writer::from_writer(Vec::new());
    inter.write_record(INTERACTION_COLUMNS)?;
    quest.write_record(questionnaire_columns())?;
    pay.write_record(PAYOUT_COLUMNS)?;

    for s in results {
        let t = s.treatment;
        for p in &s.participants {
            for r in &p.interactions {
                let msg = |v: &Vec<String>, k: usize| v.get(k).cloned().unwrap_or_default();
                inter.write_record([
                    s.session_id.clone(),
                    format!("{}-r{:02}-p{:02}", s.session_id, r.round, r.pair),
                    t.pairing.to_string(),
                    t.labeling.to_string(),
                    t.communication.to_string(),
                    p.participant_id.clone(),
                    r.round.to_string(),
                    r.associate.clone(),
                    r.associate_is_agent.to_string(),
                    r.own_choice.to_string(),
                    r.associate_choice.to_string(),
                    r.own_payoff.to_string(),
                    r.associate_payoff.to_string(),
                    r.own_choice_timed_out.to_string(),
                    r.associate_choice_timed_out.to_string(),
                    msg(&r.own_messages, 0),
                    msg(&r.own_messages, 1),
                    msg(&r.associate_messages, 0),
                    msg(&r.associate_messages, 1),
                ])?;
            }
            if let Some(q) = &p.questionnaire {
                let a = &q.answers;
                let mut row = vec![
                    s.session_id.clone(),
                    p.participant_id.clone(),
                    t.pairing.to_string(),
                    t.labeling.to_string(),
                    opt(a.norm_estimate.map(|b| b.lo.to_string())),
                    opt(a.norm_estimate.map(|b| b.hi.to_string())),
                ];
                row.extend(SEVEN_C_ITEMS.iter().map(|k| opt(a.seven_c_likerts.get(*k).map(|v| v.to_string()))));
                row.extend(TRAIT_ITEMS.iter().map(|k| opt(a.trait_likerts.get(*k).map(|v| v.to_string()))));
                row.push(opt(a.humanness.map(|v| v.to_string())));
                row.push(opt(a.llm_familiarity.map(|v| v.to_string())));
                row.push(a.svo_items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"));
                row.push(opt(a.demographics.age.map(|v| v.to_string())));
                row.push(opt(a.demographics.gender.clone()));
                row.push(opt(a.demographics.field.clone()));
                quest.write_record(row)?;
            }
            pay.write_record([
                s.session_id.clone(),
                p.participant_id.clone(),
                t.pairing.to_string(),
                t.labeling.to_string(),
                p.total_points.to_string(),
                opt(p.realized_norm_rate.map(|r| format!("{r:.6}"))),
                p.correct_norm_guesses.to_string(),
                p.payout.to_string(),
            ])?;
        }
    }
    Ok(DatasetTables {
        interactions: finish(inter)?,
        questionnaires: finish(quest)?,
        payouts: finish(pay)?,
    })
}
