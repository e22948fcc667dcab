//! Agent interface and the scripted reference policies used for offline runs
//! and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, AgentId, Decision, DecisionContext};
use crate::seeds::mix_seed;

pub const DEFAULT_DOMINANCE_PHRASE: &str = "dominates";
pub const PLEDGE_TEXT: &str = "I will do DO_NOTHING this period. Will you do the same?";

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("malformed output after {attempts} attempts: {last_error}")]
    MalformedOutput { attempts: u32, last_error: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("policy misuse: {0}")]
    Usage(String),
}

/// One seat in one game. `begin_game` fixes per-game identity before the
/// first decision; stochastic agents derive their stream from it.
pub trait Agent: Send {
    fn begin_game(&mut self, _game_seed: u64, _agent_id: AgentId) {}
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpec {
    AlwaysPeace,
    AlwaysAttack,
    AttackAtPeriod { k: u32 },
    BernoulliAttack { p: f64, seed: u64 },
    BackwardInduction,
    PledgeReciprocator {
        #[serde(default)]
        dominance_phrase: Option<String>,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("attack_at_period k must be in [1, 10], got {0}")]
    PeriodOutOfRange(u32),
    #[error("bernoulli_attack p must be a probability in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("pledge_reciprocator dominance phrase must be non-empty")]
    EmptyPhrase,
}

impl PolicySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::AlwaysPeace => "always_peace",
            PolicySpec::AlwaysAttack => "always_attack",
            PolicySpec::AttackAtPeriod { .. } => "attack_at_period",
            PolicySpec::BernoulliAttack { .. } => "bernoulli_attack",
            PolicySpec::BackwardInduction => "backward_induction",
            PolicySpec::PledgeReciprocator { .. } => "pledge_reciprocator",
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            PolicySpec::AttackAtPeriod { k } => {
                if !(1..=crate::game::PAPER_MAX_PERIODS).contains(k) {
                    return Err(PolicyError::PeriodOutOfRange(*k));
                }
            }
            PolicySpec::BernoulliAttack { p, .. } => {
                if !p.is_finite() || !(0.0..=1.0).contains(p) {
                    return Err(PolicyError::BadProbability(*p));
                }
            }
            PolicySpec::PledgeReciprocator { dominance_phrase } => {
                if let Some(phrase) = dominance_phrase {
                    if phrase.trim().is_empty() {
                        return Err(PolicyError::EmptyPhrase);
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }
}

pub fn make_scripted(spec: &PolicySpec) -> Result<ScriptedAgent, PolicyError> {
    spec.validate()?;
    Ok(ScriptedAgent {
        spec: spec.clone(),
        game_seed: 0,
        agent_id: AgentId::A,
    })
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    spec: PolicySpec,
    game_seed: u64,
    agent_id: AgentId,
}

impl ScriptedAgent {
    fn tagged(&self, detail: &str) -> String {
        format!("[{}] scripted policy: {detail}", self.spec.name())
    }

    /// Uniform draw for this (policy seed, game seed, agent, period). A fresh
    /// generator per decision keeps the stream independent of call order.
    fn bernoulli_draw(&self, policy_seed: u64, period: u32) -> f64 {
        let seed = mix_seed(&[
            policy_seed,
            self.game_seed,
            self.agent_id.index() as u64,
            u64::from(period),
        ]);
        ChaCha8Rng::seed_from_u64(seed).gen::<f64>()
    }
}

impl Agent for ScriptedAgent {
    fn begin_game(&mut self, game_seed: u64, agent_id: AgentId) {
        self.game_seed = game_seed;
        self.agent_id = agent_id;
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError> {
        let decision = match &self.spec {
            PolicySpec::AlwaysPeace => Decision::new(
                Action::DoNothing,
                "",
                self.tagged("never attack"),
            ),
            PolicySpec::AlwaysAttack => Decision::new(
                Action::Attack,
                "",
                self.tagged("attack every period"),
            ),
            PolicySpec::AttackAtPeriod { k } => {
                if ctx.current_period >= *k {
                    Decision::new(
                        Action::Attack,
                        "",
                        self.tagged(&format!("period {} reached threshold {k}", ctx.current_period)),
                    )
                } else {
                    Decision::new(
                        Action::DoNothing,
                        "",
                        self.tagged(&format!("waiting for period {k}")),
                    )
                }
            }
            PolicySpec::BernoulliAttack { p, seed } => {
                let draw = self.bernoulli_draw(*seed, ctx.current_period);
                if draw < *p {
                    Decision::new(
                        Action::Attack,
                        "",
                        self.tagged(&format!("draw {draw:.4} < p {p}")),
                    )
                } else {
                    Decision::new(
                        Action::DoNothing,
                        "",
                        self.tagged(&format!("draw {draw:.4} >= p {p}")),
                    )
                }
            }
            PolicySpec::BackwardInduction => {
                if ctx.rules.disclosed_horizon.is_some() {
                    Decision::new(
                        Action::Attack,
                        "",
                        self.tagged("horizon disclosed, attacking from period 1"),
                    )
                } else {
                    Decision::new(
                        Action::DoNothing,
                        "",
                        self.tagged("horizon unknown, holding"),
                    )
                }
            }
            PolicySpec::PledgeReciprocator { dominance_phrase } => {
                let log = ctx.public_log.as_ref().ok_or_else(|| {
                    AgentError::Usage(
                        "pledge_reciprocator requires a public message log".into(),
                    )
                })?;
                let phrase = dominance_phrase
                    .as_deref()
                    .unwrap_or(DEFAULT_DOMINANCE_PHRASE)
                    .to_lowercase();
                let provoked = log.iter().any(|m| m.text.to_lowercase().contains(&phrase));
                if provoked {
                    Decision::new(
                        Action::Attack,
                        "",
                        self.tagged("dominance phrase seen in public log"),
                    )
                } else {
                    Decision::new(
                        Action::DoNothing,
                        PLEDGE_TEXT,
                        self.tagged("no dominance talk, pledging restraint"),
                    )
                }
            }
        };
        Ok(decision)
    }
}
