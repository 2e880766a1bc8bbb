use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use dilemma_analysis::{
    emit_report, mann_whitney_u, proportions_ztest, questionnaire_glm, wilcoxon_signed_rank,
    write_report, Alternative, Dataset, GlmScope,
};

#[derive(Parser)]
#[command(name = "analyze", about = "Statistics and report bundles for dilemma session data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset directory and print a summary.
    Ingest {
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a single test and print the result as JSON.
    Stats {
        #[arg(long, value_enum)]
        test: TestName,
        /// Dataset directory (for `questionnaire-glm`).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated first sample, or `k/n` for proportions.
        #[arg(long)]
        x: Option<String>,
        /// Comma-separated second sample, or `k/n` for proportions.
        #[arg(long)]
        y: Option<String>,
        #[arg(long, value_enum, default_value = "two-sided")]
        alternative: Tail,
        /// Disable the Yates correction of the proportions test.
        #[arg(long)]
        no_continuity: bool,
        #[arg(long, value_enum, default_value = "pooled")]
        scope: Scope,
    },
    /// Emit the full report bundle.
    Report {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TestName {
    MannWhitney,
    Wilcoxon,
    Proportions,
    QuestionnaireGlm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tail {
    TwoSided,
    Greater,
    Less,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scope {
    HumanHuman,
    Pooled,
}

fn sample(arg: &Option<String>, name: &str) -> Result<Vec<f64>> {
    let raw = arg.as_deref().with_context(|| format!("--{name} is required"))?;
    raw.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad value {v:?} in --{name}")))
        .collect()
}

fn fraction(arg: &Option<String>, name: &str) -> Result<(u64, u64)> {
    let raw = arg.as_deref().with_context(|| format!("--{name} is required"))?;
    let Some((k, n)) = raw.split_once('/') else {
        bail!("--{name} must look like k/n");
    };
    Ok((k.trim().parse()?, n.trim().parse()?))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Ingest { data } => {
            let ds = Dataset::load_dir(&data).map_err(|e| anyhow::anyhow!("{e:?}"))?;
            println!("interaction rows: {}", ds.interactions.len());
            println!("questionnaires:   {}", ds.surveys.len());
            println!(
                "annotations:      {}",
                ds.annotations.as_ref().map_or(0, |a| a.len())
            );
            println!("motive ratings:   {}", ds.motives.as_ref().map_or(0, |m| m.len()));
        }
        Command::Stats { test, data, x, y, alternative, no_continuity, scope } => {
            let alternative = match alternative {
                Tail::TwoSided => Alternative::TwoSided,
                Tail::Greater => Alternative::Greater,
                Tail::Less => Alternative::Less,
            };
            let json = match test {
                TestName::MannWhitney => serde_json::to_string_pretty(
                    &mann_whitney_u(&sample(&x, "x")?, &sample(&y, "y")?, alternative)
                        .map_err(|e| anyhow::anyhow!("{e:?}"))?,
                )?,
                TestName::Wilcoxon => serde_json::to_string_pretty(
                    &wilcoxon_signed_rank(&sample(&x, "x")?, 0.0, alternative)
                        .map_err(|e| anyhow::anyhow!("{e:?}"))?,
                )?,
                TestName::Proportions => {
                    let ((k1, n1), (k2, n2)) = (fraction(&x, "x")?, fraction(&y, "y")?);
                    serde_json::to_string_pretty(
                        &proportions_ztest(k1, n1, k2, n2, !no_continuity)
                            .map_err(|e| anyhow::anyhow!("{e:?}"))?,
                    )?
                }
                TestName::QuestionnaireGlm => {
                    let dir = data.context("--data is required")?;
                    let ds = Dataset::load_dir(&dir).map_err(|e| anyhow::anyhow!("{e:?}"))?;
                    let scope = match scope {
                        Scope::HumanHuman => GlmScope::HumanHuman,
                        Scope::Pooled => GlmScope::Pooled,
                    };
                    serde_json::to_string_pretty(
                        &questionnaire_glm(&ds.questionnaire_rows(), scope)
                            .map_err(|e| anyhow::anyhow!("{e:?}"))?,
                    )?
                }
            };
            println!("{json}");
        }
        Command::Report { data, out } => {
            let ds = Dataset::load_dir(&data).map_err(|e| anyhow::anyhow!("{e:?}"))?;
            let bundle = emit_report(&ds).map_err(|e| anyhow::anyhow!("{e:?}"))?;
            write_report(&bundle, &out)
                .with_context(|| format!("writing report to {}", out.display()))?;
            for (name, section) in &bundle.manifest.sections {
                let status = if section.available { "ok" } else { "unavailable" };
                println!("{name:<20} {status}");
            }
        }
    }
    Ok(())
}
