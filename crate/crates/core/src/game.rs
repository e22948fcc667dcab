//! Period-by-period engine for the repeated standoff. A game runs until some
//! agent attacks or the period cap is reached, whichever comes first.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError};

pub const PAPER_MAX_PERIODS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Attack,
    DoNothing,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::Attack => "ATTACK",
            Action::DoNothing => "DO_NOTHING",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    Baseline,
    Multipolar,
    FinitePeriods,
    Communication,
}

impl Treatment {
    pub const ALL: [Treatment; 4] = [
        Treatment::Baseline,
        Treatment::Multipolar,
        Treatment::FinitePeriods,
        Treatment::Communication,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Treatment::Baseline => "baseline",
            Treatment::Multipolar => "multipolar",
            Treatment::FinitePeriods => "finite_periods",
            Treatment::Communication => "communication",
        }
    }

    pub fn from_str_loose(s: &str) -> Option<Treatment> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Treatment::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn n_agents(self) -> usize {
        match self {
            Treatment::Multipolar => 3,
            _ => 2,
        }
    }

    pub fn horizon_disclosed(self) -> bool {
        self == Treatment::FinitePeriods
    }

    pub fn communication_enabled(self) -> bool {
        self == Treatment::Communication
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentId {
    A,
    B,
    C,
}

impl AgentId {
    pub const ALL: [AgentId; 3] = [AgentId::A, AgentId::B, AgentId::C];

    /// Seat labels for an n-agent game, assigned in fixed order.
    pub fn seats(n: usize) -> &'static [AgentId] {
        &AgentId::ALL[..n]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::A => "A",
            AgentId::B => "B",
            AgentId::C => "C",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One agent's structured output for a single period. `message` is recorded in
/// every treatment but only enters the public log when communication is on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub message: String,
    pub reasoning: String,
}

impl Decision {
    pub fn new(action: Action, message: impl Into<String>, reasoning: impl Into<String>) -> Self {
        Decision {
            action,
            message: message.into(),
            reasoning: reasoning.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("treatment {treatment} requires {expected} agents, got {got}")]
    AgentCount {
        treatment: Treatment,
        expected: usize,
        got: usize,
    },
    #[error("max_periods must be at least 1")]
    ZeroPeriods,
    #[error("strict mode requires max_periods = {PAPER_MAX_PERIODS}, got {0}")]
    NonCanonicalHorizon(u32),
    #[error("flag {flag} must be {expected} under treatment {treatment}")]
    FlagMismatch {
        treatment: Treatment,
        flag: &'static str,
        expected: bool,
    },
    #[error("agent_ids must be the first {expected} seat labels in order")]
    BadSeats { expected: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    treatment: Treatment,
    n_agents: usize,
    max_periods: u32,
    horizon_disclosed: bool,
    communication_enabled: bool,
    agent_ids: Vec<AgentId>,
}

impl GameConfig {
    /// Canonical configuration for a treatment: seat count fixed by the
    /// treatment, 10-period cap.
    pub fn paper(treatment: Treatment) -> GameConfig {
        GameConfig::custom(treatment, treatment.n_agents(), PAPER_MAX_PERIODS)
            .expect("canonical config is valid")
    }

    pub fn custom(
        treatment: Treatment,
        n_agents: usize,
        max_periods: u32,
    ) -> Result<GameConfig, ConfigError> {
        let config = GameConfig {
            treatment,
            n_agents,
            max_periods,
            horizon_disclosed: treatment.horizon_disclosed(),
            communication_enabled: treatment.communication_enabled(),
            agent_ids: AgentId::ALL[..n_agents.min(3)].to_vec(),
        };
        config.validate()?;
        Ok(config)
    }

    /// Cross-field invariants. Also run on configs loaded from disk.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let expected = self.treatment.n_agents();
        if self.n_agents != expected {
            return Err(ConfigError::AgentCount {
                treatment: self.treatment,
                expected,
                got: self.n_agents,
            });
        }
        if self.max_periods == 0 {
            return Err(ConfigError::ZeroPeriods);
        }
        if self.horizon_disclosed != self.treatment.horizon_disclosed() {
            return Err(ConfigError::FlagMismatch {
                treatment: self.treatment,
                flag: "horizon_disclosed",
                expected: self.treatment.horizon_disclosed(),
            });
        }
        if self.communication_enabled != self.treatment.communication_enabled() {
            return Err(ConfigError::FlagMismatch {
                treatment: self.treatment,
                flag: "communication_enabled",
                expected: self.treatment.communication_enabled(),
            });
        }
        if self.agent_ids != AgentId::seats(self.n_agents) {
            return Err(ConfigError::BadSeats { expected: self.n_agents });
        }
        Ok(())
    }

    pub fn validate_strict(&self) -> Result<(), ConfigError> {
        self.validate()?;
        if self.max_periods != PAPER_MAX_PERIODS {
            return Err(ConfigError::NonCanonicalHorizon(self.max_periods));
        }
        Ok(())
    }

    pub fn treatment(&self) -> Treatment {
        self.treatment
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn max_periods(&self) -> u32 {
        self.max_periods
    }

    pub fn horizon_disclosed(&self) -> bool {
        self.horizon_disclosed
    }

    pub fn communication_enabled(&self) -> bool {
        self.communication_enabled
    }

    pub fn agent_ids(&self) -> &[AgentId] {
        &self.agent_ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Termination {
    /// At least one agent attacked in the final recorded period.
    AttackEnded,
    /// All periods elapsed with no attack.
    CapReached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u32,
    pub decisions: BTreeMap<AgentId, Decision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicMessage {
    pub period: u32,
    pub agent_id: AgentId,
    pub text: String,
}

/// What an agent is told about the game it is in. Fixed for the whole game.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulesDescriptor {
    pub treatment: Treatment,
    pub n_agents: usize,
    /// Some(cap) only when the horizon is disclosed to agents.
    pub disclosed_horizon: Option<u32>,
    pub communication_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivateHistoryEntry {
    pub period: u32,
    pub action: Action,
    pub message: String,
    pub reasoning: String,
}

/// Everything an agent may condition on when deciding. Own past output only;
/// other agents' actions and reasoning are never exposed, and the public log
/// is present only under communication.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionContext {
    pub agent_id: AgentId,
    pub current_period: u32,
    pub rules: RulesDescriptor,
    pub private_history: Vec<PrivateHistoryEntry>,
    pub public_log: Option<Vec<PublicMessage>>,
}

#[derive(Debug, Error)]
pub enum GameError {
    #[error("game already terminated")]
    AlreadyTerminated,
    #[error("game has not terminated yet")]
    NotTerminated,
    #[error("agent {0} is not seated in this game")]
    UnknownAgent(AgentId),
    #[error("duplicate decision for agent {0}")]
    DuplicateDecision(AgentId),
    #[error("missing decision for agent {0}")]
    MissingDecision(AgentId),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum PlayError {
    #[error("agent {agent} failed in period {period}: {source}")]
    Agent {
        agent: AgentId,
        period: u32,
        source: AgentError,
    },
    #[error("roster does not match config seats")]
    RosterMismatch,
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub config: GameConfig,
    pub periods: Vec<PeriodRecord>,
    pub termination: Termination,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TranscriptError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("transcript has no periods")]
    Empty,
    #[error("period {got} recorded where {expected} was expected")]
    PeriodNumbering { expected: u32, got: u32 },
    #[error("{got} periods recorded but the cap is {cap}")]
    OverCap { got: usize, cap: u32 },
    #[error("period {period} decisions do not match the seated agents")]
    SeatMismatch { period: u32 },
    #[error("attack recorded in non-terminal period {period}")]
    EarlyAttack { period: u32 },
    #[error("termination marker inconsistent with recorded periods")]
    BadTermination,
}

impl Transcript {
    pub fn validate(&self) -> Result<(), TranscriptError> {
        self.config.validate()?;
        if self.periods.is_empty() {
            return Err(TranscriptError::Empty);
        }
        if self.periods.len() > self.config.max_periods() as usize {
            return Err(TranscriptError::OverCap {
                got: self.periods.len(),
                cap: self.config.max_periods(),
            });
        }
        for (i, rec) in self.periods.iter().enumerate() {
            let expected = i as u32 + 1;
            if rec.period != expected {
                return Err(TranscriptError::PeriodNumbering {
                    expected,
                    got: rec.period,
                });
            }
            let seats: Vec<AgentId> = rec.decisions.keys().copied().collect();
            if seats != self.config.agent_ids() {
                return Err(TranscriptError::SeatMismatch { period: rec.period });
            }
            let any_attack = rec.decisions.values().any(|d| d.action == Action::Attack);
            let terminal = i + 1 == self.periods.len();
            if any_attack && !terminal {
                return Err(TranscriptError::EarlyAttack { period: rec.period });
            }
        }
        let last = self.periods.last().expect("non-empty");
        let last_attack = last.decisions.values().any(|d| d.action == Action::Attack);
        let consistent = match self.termination {
            Termination::AttackEnded => last_attack,
            Termination::CapReached => {
                !last_attack && self.periods.len() == self.config.max_periods() as usize
            }
        };
        if !consistent {
            return Err(TranscriptError::BadTermination);
        }
        Ok(())
    }

    pub fn n_periods(&self) -> u32 {
        self.periods.len() as u32
    }

    pub fn war_started(&self) -> bool {
        self.termination == Termination::AttackEnded
    }

    pub fn terminal_attackers(&self) -> Vec<AgentId> {
        self.periods
            .last()
            .map(|rec| {
                rec.decisions
                    .iter()
                    .filter(|(_, d)| d.action == Action::Attack)
                    .map(|(id, _)| *id)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Rebuild the public log as the engine would have accumulated it.
    /// Empty outside the communication treatment.
    pub fn public_log(&self) -> Vec<PublicMessage> {
        if !self.config.communication_enabled() {
            return Vec::new();
        }
        let mut log = Vec::new();
        for rec in &self.periods {
            for (id, decision) in &rec.decisions {
                if !decision.message.trim().is_empty() {
                    log.push(PublicMessage {
                        period: rec.period,
                        agent_id: *id,
                        text: decision.message.clone(),
                    });
                }
            }
        }
        log
    }
}

#[derive(Debug, Clone)]
pub struct GameState {
    config: GameConfig,
    periods: Vec<PeriodRecord>,
    public_log: Vec<PublicMessage>,
    termination: Option<Termination>,
}

impl GameState {
    pub fn new(config: GameConfig) -> Result<GameState, GameError> {
        config.validate()?;
        Ok(GameState {
            config,
            periods: Vec::new(),
            public_log: Vec::new(),
            termination: None,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn current_period(&self) -> u32 {
        self.periods.len() as u32 + 1
    }

    pub fn terminated(&self) -> Option<Termination> {
        self.termination
    }

    pub fn context_for(&self, agent_id: AgentId) -> Result<DecisionContext, GameError> {
        if self.termination.is_some() {
            return Err(GameError::AlreadyTerminated);
        }
        if !self.config.agent_ids().contains(&agent_id) {
            return Err(GameError::UnknownAgent(agent_id));
        }
        let private_history = self
            .periods
            .iter()
            .map(|rec| {
                let d = &rec.decisions[&agent_id];
                PrivateHistoryEntry {
                    period: rec.period,
                    action: d.action,
                    message: d.message.clone(),
                    reasoning: d.reasoning.clone(),
                }
            })
            .collect();
        Ok(DecisionContext {
            agent_id,
            current_period: self.current_period(),
            rules: RulesDescriptor {
                treatment: self.config.treatment(),
                n_agents: self.config.n_agents(),
                disclosed_horizon: self
                    .config
                    .horizon_disclosed()
                    .then_some(self.config.max_periods()),
                communication_enabled: self.config.communication_enabled(),
            },
            private_history,
            public_log: self
                .config
                .communication_enabled()
                .then(|| self.public_log.clone()),
        })
    }

    /// Record one simultaneous round of decisions. Order of the input pairs
    /// does not matter; each seated agent must appear exactly once.
    pub fn resolve_period(
        &mut self,
        decisions: Vec<(AgentId, Decision)>,
    ) -> Result<Option<Termination>, GameError> {
        if self.termination.is_some() {
            return Err(GameError::AlreadyTerminated);
        }
        let mut by_agent = BTreeMap::new();
        for (id, decision) in decisions {
            if !self.config.agent_ids().contains(&id) {
                return Err(GameError::UnknownAgent(id));
            }
            if by_agent.insert(id, decision).is_some() {
                return Err(GameError::DuplicateDecision(id));
            }
        }
        for id in self.config.agent_ids() {
            if !by_agent.contains_key(id) {
                return Err(GameError::MissingDecision(*id));
            }
        }

        let period = self.current_period();
        if self.config.communication_enabled() {
            for (id, decision) in &by_agent {
                if !decision.message.trim().is_empty() {
                    self.public_log.push(PublicMessage {
                        period,
                        agent_id: *id,
                        text: decision.message.clone(),
                    });
                }
            }
        }
        let any_attack = by_agent.values().any(|d| d.action == Action::Attack);
        self.periods.push(PeriodRecord {
            period,
            decisions: by_agent,
        });
        if any_attack {
            self.termination = Some(Termination::AttackEnded);
        } else if period == self.config.max_periods() {
            self.termination = Some(Termination::CapReached);
        }
        Ok(self.termination)
    }

    pub fn into_transcript(self) -> Result<Transcript, GameError> {
        let termination = self.termination.ok_or(GameError::NotTerminated)?;
        Ok(Transcript {
            config: self.config,
            periods: self.periods,
            termination,
        })
    }
}

/// Run one game to termination. The roster must seat exactly the configured
/// agents; the seed is forwarded to agents so stochastic policies stay
/// reproducible per game.
pub fn play(
    config: GameConfig,
    roster: &mut BTreeMap<AgentId, Box<dyn Agent>>,
    seed: u64,
) -> Result<Transcript, PlayError> {
    let seats: Vec<AgentId> = roster.keys().copied().collect();
    if seats != config.agent_ids() {
        return Err(PlayError::RosterMismatch);
    }
    let mut state = GameState::new(config).map_err(PlayError::Game)?;
    for (id, agent) in roster.iter_mut() {
        agent.begin_game(seed, *id);
    }
    while state.terminated().is_none() {
        let period = state.current_period();
        let mut decisions = Vec::with_capacity(seats.len());
        for id in &seats {
            let ctx = state.context_for(*id).map_err(PlayError::Game)?;
            let decision = roster
                .get_mut(id)
                .expect("seat checked above")
                .decide(&ctx)
                .map_err(|source| PlayError::Agent {
                    agent: *id,
                    period,
                    source,
                })?;
            decisions.push((*id, decision));
        }
        state.resolve_period(decisions).map_err(PlayError::Game)?;
    }
    state.into_transcript().map_err(PlayError::Game)
}
