use serde::{Deserialize, Serialize};

/// How data-parallel work is executed. `Parallel` uses the rayon pool when
/// the consuming crate is built with its `parallel` feature and silently
/// degrades to `Sequential` otherwise. Results never depend on the mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}
