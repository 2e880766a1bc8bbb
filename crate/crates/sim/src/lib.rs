//! Offline agent tournaments: persona groups meet in bipartite round-robin
//! schedules, every pair runs the full message and decision pipeline, and
//! the records aggregate into per-persona behavior rates.
//!
//! Pairs within a round are independent and run on the rayon pool when the
//! `parallel` feature is enabled and [`ExecMode::Parallel`] is selected;
//! results are identical in both modes.

pub mod agreement;
pub mod checkpoint;
pub mod error;
pub mod matchup;
pub mod ratelimit;
pub mod roster;
pub mod summary;

pub use agreement::{detect_agreement, proposes_mutual_a};
pub use checkpoint::{read_records, write_records, FileCheckpoint};
pub use dilemma_core::ExecMode;
pub use error::SimError;
pub use matchup::{
    resume_cursor, resume_matchup, run_matchup, Matchup, MemorySink, ResumeCursor, RoundSink,
    RunOptions, SimRecord,
};
pub use ratelimit::RateLimited;
pub use roster::{grid, run_roster, BackendResult};
pub use summary::{aggregate, Fraction, SummaryRow, SummaryTable};
