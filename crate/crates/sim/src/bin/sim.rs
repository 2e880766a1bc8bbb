use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dilemma_agents::{Backend, ChatCompletionsBackend, MockBackend, MockConfig, Persona};
use dilemma_sim::{
    aggregate, read_records, resume_cursor, resume_matchup, run_roster, write_records, ExecMode,
    FileCheckpoint, Matchup, RateLimited, RunOptions, SimRecord, SummaryTable,
};

#[derive(Parser)]
#[command(name = "sim", about = "Persona-vs-persona agent tournaments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Shape {
    #[arg(long, default_value_t = 10)]
    group_size: usize,
    #[arg(long, default_value_t = 5)]
    repeats: u32,
    #[arg(long, default_value_t = 10)]
    rounds: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run pairs one after another instead of on the thread pool.
    #[arg(long)]
    sequential: bool,
    /// Environment variable holding the API key of hosted backends.
    #[arg(long, default_value = "DILEMMA_API_KEY")]
    api_key_env: String,
    /// Request budget per minute for hosted backends.
    #[arg(long)]
    rpm: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) one matchup.
    Run {
        /// Two personas, e.g. `fair:selfish`.
        #[arg(long)]
        matchup: String,
        /// `mock` or `id=NAME,url=BASE_URL,model=MODEL`.
        #[arg(long, default_value = "mock")]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        shape: Shape,
    },
    /// Run the six-matchup grid on every backend.
    Roster {
        #[arg(long = "backend", default_value = "mock")]
        backends: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        shape: Shape,
    },
    /// Summarize every `records.jsonl` under a directory.
    Aggregate { dir: PathBuf },
}

fn backend(spec: &str, shape: &Shape) -> Result<Arc<dyn Backend>> {
    if spec == "mock" || spec.starts_with("mock:") {
        let seed = match spec.split_once(':') {
            Some((_, s)) => s.parse().context("mock seed")?,
            None => shape.seed,
        };
        return Ok(Arc::new(MockBackend::new(MockConfig { seed, ..MockConfig::default() })));
    }
    let mut id = None;
    let mut url = None;
    let mut model = None;
    for part in spec.split(',') {
        match part.split_once('=') {
            Some(("id", v)) => id = Some(v),
            Some(("url", v)) => url = Some(v),
            Some(("model", v)) => model = Some(v),
            _ => bail!("backend spec part {part:?} is not id=, url= or model="),
        }
    }
    let (Some(id), Some(url), Some(model)) = (id, url, model) else {
        bail!("backend spec needs id, url and model: {spec:?}");
    };
    let http = ChatCompletionsBackend::from_env(id, url, model, &shape.api_key_env)?;
    Ok(match shape.rpm {
        Some(rpm) => Arc::new(RateLimited::per_minute(http, rpm)),
        None => Arc::new(RateLimited::new(http, Duration::ZERO)),
    })
}

fn options(shape: &Shape) -> RunOptions {
    RunOptions {
        exec: if shape.sequential { ExecMode::Sequential } else { ExecMode::Parallel },
        ..RunOptions::default()
    }
}

fn run_one(m: &Matchup, backend: &dyn Backend, opts: &RunOptions, dir: &Path) -> Result<Vec<SimRecord>> {
    fs::create_dir_all(dir)?;
    let path = dir.join("records.jsonl");
    let previous = read_records(&path)?;
    let (cursor, keep) = resume_cursor(m, &previous)?;
    let previous = previous[..keep].to_vec();
    if !previous.is_empty() {
        eprintln!("resuming {} at repeat {} round {}", m.id(), cursor.repeat, cursor.round);
    }
    let mut sink = FileCheckpoint::new(&path, Some(dir.join("agent_log.jsonl")));
    sink.reset_to(&previous)?;
    let records = resume_matchup(m, backend, opts, previous, &mut sink)?;
    fs::write(dir.join("matchup.json"), serde_json::to_string_pretty(m)? + "\n")?;
    fs::write(dir.join("summary.csv"), aggregate(&records).to_csv())?;
    Ok(records)
}

fn collect_records(dir: &Path, out: &mut Vec<SimRecord>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect_records(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "records.jsonl") {
            out.extend(read_records(&path)?);
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { matchup, backend: spec, out, shape } => {
            let (a, b) = matchup.split_once(':').context("--matchup must look like fair:selfish")?;
            let backend = backend(&spec, &shape)?;
            let m = Matchup::new(a.parse::<Persona>()?, b.parse::<Persona>()?, backend.id())
                .with_shape(shape.group_size, shape.repeats, shape.rounds)
                .with_seed(shape.seed);
            let records = run_one(&m, backend.as_ref(), &options(&shape), &out)?;
            println!("{} records written to {}", records.len(), out.display());
            print!("{}", aggregate(&records).to_csv());
        }
        Command::Roster { backends, out, shape } => {
            let backends = backends.iter().map(|s| backend(s, &shape)).collect::<Result<Vec<_>>>()?;
            let template = Matchup::new(Persona::Fair, Persona::Fair, "")
                .with_shape(shape.group_size, shape.repeats, shape.rounds)
                .with_seed(shape.seed);
            for result in run_roster(&backends, &template, &options(&shape))? {
                let dir = out.join(&result.backend);
                for (m, records) in &result.matchups {
                    let mdir = dir.join(m.id());
                    fs::create_dir_all(&mdir)?;
                    write_records(&mdir.join("records.jsonl"), records)?;
                    fs::write(mdir.join("matchup.json"), serde_json::to_string_pretty(m)? + "\n")?;
                }
                fs::write(dir.join("summary.csv"), result.summary.to_csv())?;
                println!("{}: {} matchups", result.backend, result.matchups.len());
            }
        }
        Command::Aggregate { dir } => {
            let mut records = Vec::new();
            collect_records(&dir, &mut records)?;
            if records.is_empty() {
                bail!("no records.jsonl under {}", dir.display());
            }
            let mut by_backend: std::collections::BTreeMap<String, Vec<SimRecord>> = Default::default();
            for r in records {
                by_backend.entry(r.backend.clone()).or_default().push(r);
            }
            for (backend, records) in by_backend {
                let table: SummaryTable = aggregate(&records);
                println!("# {backend}");
                print!("{}", table.to_csv());
            }
        }
    }
    Ok(())
}
