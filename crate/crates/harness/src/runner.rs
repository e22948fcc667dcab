//! Full-factorial orchestration: models x treatments x replications. One
//! JSON file per game named by its run key, written atomically, so resume
//! and model filtering are file-level operations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use standoff_core::agents::{make_scripted, Agent, AgentError, PolicyError};
use standoff_core::coding::{CorpusGame, RejectedGame};
use standoff_core::game::{play, AgentId, GameConfig, PlayError, Transcript, TranscriptError, Treatment};
use standoff_core::prompts::template_checksum;
use standoff_core::seeds::{fnv1a64, mix_seed};

use crate::config::ModelConfig;
use crate::gateway::{Gateway, LlmAgent};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub model_id: String,
    pub treatment: Treatment,
    pub replication: u32,
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}__{}__r{:03}",
            self.model_id,
            self.treatment.as_str(),
            self.replication
        )
    }
}

impl RunKey {
    pub fn file_name(&self) -> String {
        format!("{self}.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GameRecord {
    Completed {
        schema_version: u32,
        run_key: RunKey,
        seed: u64,
        prompt_checksums: BTreeMap<String, String>,
        #[serde(flatten)]
        transcript: Transcript,
    },
    Aborted {
        schema_version: u32,
        run_key: RunKey,
        seed: u64,
        period: u32,
        agent: AgentId,
        error: String,
    },
}

impl GameRecord {
    pub fn run_key(&self) -> &RunKey {
        match self {
            GameRecord::Completed { run_key, .. } | GameRecord::Aborted { run_key, .. } => run_key,
        }
    }

    fn schema_version(&self) -> u32 {
        match self {
            GameRecord::Completed { schema_version, .. }
            | GameRecord::Aborted { schema_version, .. } => *schema_version,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub models: Vec<ModelConfig>,
    pub treatments: Vec<Treatment>,
    pub replications: u32,
    pub base_seed: u64,
    pub concurrency_limit: usize,
    pub output_dir: PathBuf,
    /// Reject non-canonical game shapes before running anything.
    pub strict_paper: bool,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("plan has no models")]
    NoModels,
    #[error("plan has no treatments")]
    NoTreatments,
    #[error("replications must be at least 1")]
    ZeroReplications,
    #[error("concurrency_limit must be at least 1")]
    ZeroConcurrency,
    #[error("duplicate model id {0:?}")]
    DuplicateModel(String),
    #[error("model {model}: {source}")]
    BadPolicy {
        model: String,
        source: PolicyError,
    },
}

pub fn plan_runs(plan: &ExperimentPlan) -> Result<Vec<RunKey>, PlanError> {
    validate_plan(plan)?;
    let mut keys = Vec::with_capacity(
        plan.models.len() * plan.treatments.len() * plan.replications as usize,
    );
    for model in &plan.models {
        for &treatment in &plan.treatments {
            for replication in 0..plan.replications {
                keys.push(RunKey {
                    model_id: model.id().to_string(),
                    treatment,
                    replication,
                });
            }
        }
    }
    Ok(keys)
}

fn validate_plan(plan: &ExperimentPlan) -> Result<(), PlanError> {
    if plan.models.is_empty() {
        return Err(PlanError::NoModels);
    }
    if plan.treatments.is_empty() {
        return Err(PlanError::NoTreatments);
    }
    if plan.replications == 0 {
        return Err(PlanError::ZeroReplications);
    }
    if plan.concurrency_limit == 0 {
        return Err(PlanError::ZeroConcurrency);
    }
    let mut seen = std::collections::BTreeSet::new();
    for model in &plan.models {
        if !seen.insert(model.id()) {
            return Err(PlanError::DuplicateModel(model.id().to_string()));
        }
        if let ModelConfig::Scripted { policy, .. } = model {
            policy
                .validate()
                .map_err(|source| PlanError::BadPolicy {
                    model: model.id().to_string(),
                    source,
                })?;
        }
    }
    Ok(())
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ExecSummary {
    pub completed: u32,
    pub aborted: u32,
    pub skipped: u32,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("serializing record for {run_key}: {source}")]
    Serialize {
        run_key: String,
        source: serde_json::Error,
    },
    #[error("run {run_key}: transport failure: {detail}")]
    Transport { run_key: String, detail: String },
    #[error("run {run_key}: {detail}")]
    Usage { run_key: String, detail: String },
    #[error("run {run_key}: engine rejected the game: {detail}")]
    Engine { run_key: String, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Runs every planned game not already on disk, up to concurrency_limit in
/// flight. Persisted keys are skipped before any agent work or network call.
pub fn execute(plan: &ExperimentPlan, gateway: Arc<Gateway>) -> Result<ExecSummary, RunError> {
    let runs = plan_runs(plan)?;
    std::fs::create_dir_all(&plan.output_dir).map_err(io_err(&plan.output_dir))?;

    let models: BTreeMap<&str, &ModelConfig> =
        plan.models.iter().map(|m| (m.id(), m)).collect();
    let queue: Mutex<std::collections::VecDeque<RunKey>> = Mutex::new(runs.into());
    let summary = Mutex::new(ExecSummary::default());
    let failure: Mutex<Option<RunError>> = Mutex::new(None);

    let workers = plan.concurrency_limit.min(queue.lock().expect("queue").len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failure.lock().expect("failure slot").is_some() {
                    return;
                }
                let Some(run_key) = queue.lock().expect("queue").pop_front() else {
                    return;
                };
                let path = plan.output_dir.join(run_key.file_name());
                if path.exists() {
                    summary.lock().expect("summary").skipped += 1;
                    continue;
                }
                let model = models[run_key.model_id.as_str()];
                match run_one(plan, model, &run_key, &gateway) {
                    Ok(record) => match persist(&path, &record) {
                        Ok(()) => {
                            let mut s = summary.lock().expect("summary");
                            match record {
                                GameRecord::Completed { .. } => s.completed += 1,
                                GameRecord::Aborted { .. } => s.aborted += 1,
                            }
                        }
                        Err(err) => {
                            failure.lock().expect("failure slot").get_or_insert(err);
                            return;
                        }
                    },
                    Err(err) => {
                        failure.lock().expect("failure slot").get_or_insert(err);
                        return;
                    }
                }
            });
        }
    });

    if let Some(err) = failure.into_inner().expect("failure slot") {
        return Err(err);
    }
    Ok(summary.into_inner().expect("summary"))
}

fn run_one(
    plan: &ExperimentPlan,
    model: &ModelConfig,
    run_key: &RunKey,
    gateway: &Arc<Gateway>,
) -> Result<GameRecord, RunError> {
    let config = GameConfig::paper(run_key.treatment);
    if plan.strict_paper {
        config.validate_strict().map_err(|e| RunError::Engine {
            run_key: run_key.to_string(),
            detail: e.to_string(),
        })?;
    }
    let seed = mix_seed(&[plan.base_seed, fnv1a64(&run_key.to_string())]);

    let mut roster: BTreeMap<AgentId, Box<dyn Agent>> = BTreeMap::new();
    for &seat in config.agent_ids() {
        let agent: Box<dyn Agent> = match model {
            ModelConfig::Scripted { policy, .. } => {
                Box::new(make_scripted(policy).map_err(|e| RunError::Usage {
                    run_key: run_key.to_string(),
                    detail: e.to_string(),
                })?)
            }
            ModelConfig::Remote { provider, .. } => Box::new(LlmAgent::new(
                Arc::clone(gateway),
                provider.clone(),
                run_key.to_string(),
            )),
        };
        roster.insert(seat, agent);
    }

    let mut checksums = BTreeMap::new();
    checksums.insert(
        run_key.treatment.as_str().to_string(),
        template_checksum(run_key.treatment),
    );

    match play(config, &mut roster, seed) {
        Ok(transcript) => Ok(GameRecord::Completed {
            schema_version: SCHEMA_VERSION,
            run_key: run_key.clone(),
            seed,
            prompt_checksums: checksums,
            transcript,
        }),
        Err(PlayError::Agent { agent, period, source }) => match source {
            // malformed output is behavioral data: persist the abort,
            // keep it out of coded denominators
            AgentError::MalformedOutput { .. } => Ok(GameRecord::Aborted {
                schema_version: SCHEMA_VERSION,
                run_key: run_key.clone(),
                seed,
                period,
                agent,
                error: source.to_string(),
            }),
            AgentError::Transport(detail) => Err(RunError::Transport {
                run_key: run_key.to_string(),
                detail,
            }),
            AgentError::Usage(detail) => Err(RunError::Usage {
                run_key: run_key.to_string(),
                detail,
            }),
        },
        Err(other) => Err(RunError::Engine {
            run_key: run_key.to_string(),
            detail: other.to_string(),
        }),
    }
}

/// Write-temp-then-rename so a crash never leaves a half-written record
/// visible to load_corpus.
fn persist(path: &Path, record: &GameRecord) -> Result<(), RunError> {
    let bytes = serde_json::to_vec_pretty(record).map_err(|source| RunError::Serialize {
        run_key: record.run_key().to_string(),
        source,
    })?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, &bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedGame {
    pub run_key: RunKey,
    pub seed: u64,
    pub prompt_checksums: BTreeMap<String, String>,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortReport {
    pub run_key: RunKey,
    pub seed: u64,
    pub period: u32,
    pub agent: AgentId,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct Corpus {
    pub games: Vec<LoadedGame>,
    pub aborted: Vec<AbortReport>,
}

impl Corpus {
    /// Rows for the coding module: completed games keyed by run key, aborts
    /// as rejections so they stay out of every denominator.
    pub fn coding_inputs(&self) -> (Vec<CorpusGame>, Vec<RejectedGame>) {
        let games = self
            .games
            .iter()
            .map(|g| CorpusGame {
                run_key: g.run_key.to_string(),
                model_id: g.run_key.model_id.clone(),
                transcript: g.transcript.clone(),
            })
            .collect();
        let rejected = self
            .aborted
            .iter()
            .map(|a| RejectedGame {
                run_key: a.run_key.to_string(),
                reason: a.error.clone(),
            })
            .collect();
        (games, rejected)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: not a game record: {source}")]
    Malformed {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{run_key}: schema version {found}, expected {expected}")]
    SchemaVersion {
        run_key: String,
        found: u32,
        expected: u32,
    },
    #[error("{run_key}: file name does not match its run key")]
    KeyMismatch { run_key: String },
    #[error("{run_key}: corrupt record: {source}")]
    CorruptRecord {
        run_key: String,
        source: TranscriptError,
    },
}

/// Loads every persisted game under `dir`, invariant-checking each
/// transcript. Aborted records are surfaced separately, never dropped.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusError> {
    let mut paths = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            paths.push(path);
        }
    }
    paths.sort();

    let mut corpus = Corpus::default();
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let record: GameRecord =
            serde_json::from_slice(&bytes).map_err(|source| CorpusError::Malformed {
                path: path.clone(),
                source,
            })?;
        if record.schema_version() != SCHEMA_VERSION {
            return Err(CorpusError::SchemaVersion {
                run_key: record.run_key().to_string(),
                found: record.schema_version(),
                expected: SCHEMA_VERSION,
            });
        }
        if path.file_name().and_then(|n| n.to_str()) != Some(&record.run_key().file_name()) {
            return Err(CorpusError::KeyMismatch {
                run_key: record.run_key().to_string(),
            });
        }
        match record {
            GameRecord::Completed {
                run_key,
                seed,
                prompt_checksums,
                transcript,
                ..
            } => {
                transcript
                    .validate()
                    .map_err(|source| CorpusError::CorruptRecord {
                        run_key: run_key.to_string(),
                        source,
                    })?;
                corpus.games.push(LoadedGame {
                    run_key,
                    seed,
                    prompt_checksums,
                    transcript,
                });
            }
            GameRecord::Aborted {
                run_key,
                seed,
                period,
                agent,
                error,
                ..
            } => corpus.aborted.push(AbortReport {
                run_key,
                seed,
                period,
                agent,
                error,
            }),
        }
    }
    Ok(corpus)
}
