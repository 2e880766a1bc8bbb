//! The full persona grid for every backend: three cross-persona matchups and
//! three self-plays, with agents only ever meeting agents on the same
//! backend.

use std::sync::Arc;

use dilemma_agents::{Backend, Persona};

use crate::error::SimError;
use crate::matchup::{mix, run_matchup, Matchup, RunOptions, SimRecord};
use crate::summary::{aggregate, SummaryTable};

/// The six matchups of one backend's grid.
pub fn grid() -> Vec<(Persona, Persona)> {
    let p = Persona::ALL;
    let mut out = Vec::new();
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            out.push((p[i], p[j]));
        }
    }
    out.extend(p.iter().map(|&x| (x, x)));
    out
}

#[derive(Clone, Debug)]
pub struct BackendResult {
    pub backend: String,
    pub matchups: Vec<(Matchup, Vec<SimRecord>)>,
    pub summary: SummaryTable,
}

/// Runs the grid on each backend. `template` supplies group size, repeats,
/// rounds and base seed; personas and backend id are filled in per matchup.
pub fn run_roster(
    backends: &[Arc<dyn Backend>],
    template: &Matchup,
    opts: &RunOptions,
) -> Result<Vec<BackendResult>, SimError> {
    backends
        .iter()
        .map(|backend| {
            let mut summary = SummaryTable::default();
            let mut matchups = Vec::new();
            for (k, (a, b)) in grid().into_iter().enumerate() {
                let m = Matchup {
                    persona_a: a,
                    persona_b: b,
                    backend_id: backend.id().to_string(),
                    seed: mix(&[template.seed, k as u64]),
                    ..template.clone()
                };
                tracing::info!(matchup = %m.id(), backend = backend.id(), "running matchup");
                let records = run_matchup(&m, backend.as_ref(), opts)?;
                summary.merge(&aggregate(&records));
                matchups.push((m, records));
            }
            Ok(BackendResult {
                backend: backend.id().to_string(),
                matchups,
                summary,
            })
        })
        .collect()
}
