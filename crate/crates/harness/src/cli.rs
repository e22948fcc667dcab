//! Command definitions and dispatch. Exit codes are part of the contract:
//! 0 success, 1 usage, 2 validation or acceptance failure, 3 transport.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use standoff_core::coding::{code_corpus, CodedCorpus};
use standoff_core::game::Treatment;
use standoff_core::stats::HcVariant;

use crate::config::{load_config, ExperimentConfig};
use crate::gateway::Gateway;
use crate::report::{
    computed_shares, replicate_paper, stats_markdown, write_report, ReportInputs, ReportOptions,
};
use crate::runner::{execute, load_corpus, ExperimentPlan, RunError};

#[derive(Debug, Parser)]
#[command(name = "standoff", version, about = "Repeated security-dilemma games: run, code, analyze")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play scripted-agent games offline and persist the corpus
    Simulate(RunArgs),
    /// Run the configured experiment, including remote models
    Run(RunArgs),
    /// Code a persisted corpus into outcome and label tables
    Code(CodeArgs),
    /// Print summary tables for a persisted corpus
    Stats(StatsArgs),
    /// Rebuild the published exhibits and check them against the targets
    ReplicatePaper(ReplicateArgs),
    /// Emit the full table and figure set for a persisted corpus
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment definition (TOML)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for game records (overrides the config)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base seed (overrides the config)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Restrict to these treatments (repeatable; overrides the config)
    #[arg(long)]
    pub treatment: Vec<String>,
    /// Replications per model-treatment cell (overrides the config)
    #[arg(long)]
    pub replications: Option<u32>,
    /// Worker thread count (overrides the config)
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Reject any non-canonical game shape before running
    #[arg(long)]
    pub strict_paper: bool,
}

#[derive(Debug, Args)]
pub struct CodeArgs {
    /// Directory of persisted game records
    pub corpus_dir: PathBuf,
    /// Output directory for the coded tables
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Directory of persisted game records
    pub corpus_dir: PathBuf,
    /// Robust covariance variant for the regression table
    #[arg(long, default_value = "hc1")]
    pub covariance: HcVariant,
    /// Reference model for the regression dummies (default: lexically first)
    #[arg(long)]
    pub reference_model: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// Output directory for exhibit tables and figures
    #[arg(long)]
    pub out: PathBuf,
    /// Robust covariance variant for the regression table
    #[arg(long, default_value = "hc1")]
    pub covariance: HcVariant,
    /// Reference model for the regression dummies (default: lexically first)
    #[arg(long)]
    pub reference_model: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of persisted game records
    pub corpus_dir: PathBuf,
    /// Output directory for tables and figures
    #[arg(long)]
    pub out: PathBuf,
    /// Robust covariance variant for the regression table
    #[arg(long, default_value = "hc1")]
    pub covariance: HcVariant,
    /// Reference model for the regression dummies (default: lexically first)
    #[arg(long)]
    pub reference_model: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Validation(String),
    Transport(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Transport(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Validation(msg) | CliError::Transport(msg) => {
                f.write_str(msg)
            }
        }
    }
}

impl std::error::Error for CliError {}

fn usage(err: impl fmt::Display) -> CliError {
    CliError::Usage(err.to_string())
}

fn validation(err: impl fmt::Display) -> CliError {
    CliError::Validation(err.to_string())
}

fn map_run_error(err: RunError) -> CliError {
    match &err {
        RunError::Plan(_) | RunError::Usage { .. } => CliError::Usage(err.to_string()),
        RunError::Transport { .. } => CliError::Transport(err.to_string()),
        RunError::Io { .. } | RunError::Serialize { .. } | RunError::Engine { .. } => {
            CliError::Validation(err.to_string())
        }
    }
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(args) => run_experiment(&args, true),
        Command::Run(args) => run_experiment(&args, false),
        Command::Code(args) => code_command(&args),
        Command::Stats(args) => stats_command(&args),
        Command::ReplicatePaper(args) => replicate_command(&args),
        Command::Report(args) => report_command(&args),
    }
}

fn resolve_treatments(
    args: &RunArgs,
    config: &ExperimentConfig,
) -> Result<Vec<Treatment>, CliError> {
    if args.treatment.is_empty() {
        return Ok(config.parsed_treatments());
    }
    args.treatment
        .iter()
        .map(|name| {
            Treatment::from_str_loose(name)
                .ok_or_else(|| CliError::Usage(format!("unknown treatment {name:?}")))
        })
        .collect()
}

fn run_experiment(args: &RunArgs, offline_only: bool) -> Result<(), CliError> {
    let config = load_config(&args.config).map_err(usage)?;
    if offline_only && config.has_remote_models() {
        return Err(CliError::Usage(
            "simulate is offline by contract; this config names remote models (use `run`)"
                .to_string(),
        ));
    }
    let output_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let plan = ExperimentPlan {
        models: config.models.clone(),
        treatments: resolve_treatments(args, &config)?,
        replications: args.replications.unwrap_or(config.replications),
        base_seed: args.seed.unwrap_or(config.base_seed),
        concurrency_limit: args.concurrency.unwrap_or(config.concurrency),
        output_dir: output_dir.clone(),
        strict_paper: args.strict_paper,
    };

    // scripted-only runs make no requests, so they get no audit file
    let audit_path = if config.has_remote_models() {
        Some(
            config
                .audit_log
                .clone()
                .unwrap_or_else(|| output_dir.join("audit.jsonl")),
        )
    } else {
        None
    };
    let gateway = Gateway::new(audit_path.as_deref()).map_err(validation)?;

    let summary = execute(&plan, Arc::new(gateway)).map_err(map_run_error)?;
    println!(
        "completed {} games, {} aborted, {} already present -> {}",
        summary.completed,
        summary.aborted,
        summary.skipped,
        output_dir.display()
    );
    Ok(())
}

fn coded_corpus_from(dir: &Path) -> Result<CodedCorpus, CliError> {
    let corpus = load_corpus(dir).map_err(validation)?;
    let (games, rejected) = corpus.coding_inputs();
    Ok(code_corpus(&games, &rejected))
}

fn report_inputs_from(coded: &CodedCorpus) -> ReportInputs {
    let (reasoning_shares, message_shares) = computed_shares(coded);
    ReportInputs {
        outcomes: coded.outcomes.clone(),
        reasoning_shares,
        message_shares,
        rejected: coded
            .rejected
            .iter()
            .map(|r| (r.run_key.clone(), r.reason.clone()))
            .collect(),
    }
}

fn code_command(args: &CodeArgs) -> Result<(), CliError> {
    let coded = coded_corpus_from(&args.corpus_dir)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| validation(format!("{}: {e}", args.out.display())))?;

    let write = |name: &str, rows: Vec<Vec<String>>| -> Result<(), CliError> {
        let path = args.out.join(name);
        let mut writer = csv::Writer::from_path(&path)
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        for row in rows {
            writer
                .write_record(&row)
                .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        }
        writer
            .flush()
            .map_err(|e| validation(format!("{}: {e}", path.display())))?;
        Ok(())
    };

    let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut rows = vec![vec![
        "run_key".to_string(),
        "model_id".to_string(),
        "treatment".to_string(),
        "war_started".to_string(),
        "war_period".to_string(),
        "peaceful_periods_before_war".to_string(),
        "n_attackers".to_string(),
        "attack_structure".to_string(),
        "terminal_profile".to_string(),
        "public_message_count".to_string(),
        "public_log_word_count".to_string(),
    ]];
    for rec in &coded.outcomes {
        rows.push(vec![
            rec.run_key.clone(),
            rec.model_id.clone(),
            rec.treatment.as_str().to_string(),
            rec.war_started.to_string(),
            opt(rec.war_period),
            opt(rec.peaceful_periods_before_war),
            rec.n_attackers.to_string(),
            rec.attack_structure.to_string(),
            rec.terminal_profile.to_string(),
            opt(rec.public_message_count),
            opt(rec.public_log_word_count),
        ]);
    }
    write("coded_outcomes.csv", rows)?;

    let label_header = || {
        vec![
            "run_key".to_string(),
            "model_id".to_string(),
            "treatment".to_string(),
            "agent_id".to_string(),
            "period".to_string(),
            "category".to_string(),
            "matched_terms".to_string(),
        ]
    };
    let mut rows = vec![label_header()];
    for row in &coded.reasoning_labels {
        rows.push(vec![
            row.run_key.clone(),
            row.model_id.clone(),
            row.treatment.as_str().to_string(),
            row.agent_id.to_string(),
            row.period.to_string(),
            row.category.as_str().to_string(),
            row.matched_terms.join("|"),
        ]);
    }
    write("reasoning_labels.csv", rows)?;

    let mut rows = vec![label_header()];
    for row in &coded.message_labels {
        rows.push(vec![
            row.run_key.clone(),
            row.model_id.clone(),
            row.treatment.as_str().to_string(),
            row.agent_id.to_string(),
            row.period.to_string(),
            row.category.as_str().to_string(),
            row.matched_terms.join("|"),
        ]);
    }
    write("message_labels.csv", rows)?;

    let mut rows = vec![vec!["run_key".to_string(), "reason".to_string()]];
    for rej in &coded.rejected {
        rows.push(vec![rej.run_key.clone(), rej.reason.clone()]);
    }
    write("rejected.csv", rows)?;

    println!(
        "coded {} games ({} rejected) -> {}",
        coded.outcomes.len(),
        coded.rejected.len(),
        args.out.display()
    );
    Ok(())
}

fn stats_command(args: &StatsArgs) -> Result<(), CliError> {
    let coded = coded_corpus_from(&args.corpus_dir)?;
    let inputs = report_inputs_from(&coded);
    let options = ReportOptions {
        covariance: args.covariance,
        reference_model: args.reference_model.clone(),
    };
    let markdown = stats_markdown(&inputs, &options).map_err(validation)?;
    print!("{markdown}");
    Ok(())
}

fn replicate_command(args: &ReplicateArgs) -> Result<(), CliError> {
    let options = ReportOptions {
        covariance: args.covariance,
        reference_model: args.reference_model.clone(),
    };
    let (artifacts, failures) = replicate_paper(&args.out, &options).map_err(validation)?;
    if !failures.is_empty() {
        let mut msg = format!("{} replication check(s) failed:\n", failures.len());
        for line in &failures {
            msg.push_str("  ");
            msg.push_str(line);
            msg.push('\n');
        }
        return Err(CliError::Validation(msg));
    }
    println!(
        "replication checks passed; wrote {} files -> {}",
        artifacts.files.len(),
        args.out.display()
    );
    Ok(())
}

fn report_command(args: &ReportArgs) -> Result<(), CliError> {
    let coded = coded_corpus_from(&args.corpus_dir)?;
    let inputs = report_inputs_from(&coded);
    let options = ReportOptions {
        covariance: args.covariance,
        reference_model: args.reference_model.clone(),
    };
    let artifacts = write_report(&args.out, &inputs, &options).map_err(validation)?;
    println!(
        "wrote {} files -> {}",
        artifacts.files.len(),
        args.out.display()
    );
    Ok(())
}
