//! Turns transcripts into behavioral outcome records and assigns taxonomy
//! labels to reasoning entries and public messages by dictionary rules. The
//! phrase lists live in one versioned fixture; precedence is the only
//! tie-breaker between categories.

use std::fmt;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Action, AgentId, Transcript, TranscriptError, Treatment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttackStructure {
    #[serde(rename = "NONE")]
    None,
    #[serde(rename = "UNILATERAL")]
    Unilateral,
    #[serde(rename = "SIMULTANEOUS_2")]
    Simultaneous2,
    #[serde(rename = "SIMULTANEOUS_3")]
    Simultaneous3,
}

impl AttackStructure {
    pub fn from_attacker_count(n: u32) -> AttackStructure {
        match n {
            0 => AttackStructure::None,
            1 => AttackStructure::Unilateral,
            2 => AttackStructure::Simultaneous2,
            _ => AttackStructure::Simultaneous3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AttackStructure::None => "NONE",
            AttackStructure::Unilateral => "UNILATERAL",
            AttackStructure::Simultaneous2 => "SIMULTANEOUS_2",
            AttackStructure::Simultaneous3 => "SIMULTANEOUS_3",
        }
    }
}

impl fmt::Display for AttackStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Action combination in the final period: named codes for two-agent games,
/// attacker counts for three-agent games.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalProfile {
    AttackNothing,
    AttackAttack,
    NothingNothing,
    Attackers(u8),
}

impl TerminalProfile {
    pub fn code(self) -> String {
        match self {
            TerminalProfile::AttackNothing => "attack-nothing".into(),
            TerminalProfile::AttackAttack => "attack-attack".into(),
            TerminalProfile::NothingNothing => "nothing-nothing".into(),
            TerminalProfile::Attackers(n) => format!("{n}-attackers"),
        }
    }

    pub fn parse(code: &str) -> Option<TerminalProfile> {
        match code {
            "attack-nothing" => Some(TerminalProfile::AttackNothing),
            "attack-attack" => Some(TerminalProfile::AttackAttack),
            "nothing-nothing" => Some(TerminalProfile::NothingNothing),
            _ => {
                let n = code.strip_suffix("-attackers")?.parse().ok()?;
                (n <= 3).then_some(TerminalProfile::Attackers(n))
            }
        }
    }
}

impl fmt::Display for TerminalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl Serialize for TerminalProfile {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for TerminalProfile {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = String::deserialize(deserializer)?;
        TerminalProfile::parse(&code)
            .ok_or_else(|| serde::de::Error::custom(format!("bad terminal profile {code:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub run_key: String,
    pub model_id: String,
    pub treatment: Treatment,
    pub war_started: bool,
    pub war_period: Option<u32>,
    pub peaceful_periods_before_war: Option<u32>,
    pub n_attackers: u32,
    pub attack_structure: AttackStructure,
    pub terminal_profile: TerminalProfile,
    pub public_message_count: Option<u32>,
    pub public_log_word_count: Option<u32>,
}

#[derive(Debug, Error)]
pub enum CodingError {
    #[error("transcript failed validation: {0}")]
    InvalidTranscript(#[from] TranscriptError),
}

/// Derive the behavioral outcome row for one completed game.
pub fn code_outcome(
    run_key: &str,
    model_id: &str,
    transcript: &Transcript,
) -> Result<OutcomeRecord, CodingError> {
    transcript.validate()?;
    let war_period = transcript
        .periods
        .iter()
        .find(|rec| rec.decisions.values().any(|d| d.action == Action::Attack))
        .map(|rec| rec.period);
    let terminal_attackers = transcript.terminal_attackers().len() as u32;
    let two_agents = transcript.config.n_agents() == 2;
    let terminal_profile = if two_agents {
        match terminal_attackers {
            0 => TerminalProfile::NothingNothing,
            1 => TerminalProfile::AttackNothing,
            _ => TerminalProfile::AttackAttack,
        }
    } else {
        TerminalProfile::Attackers(terminal_attackers as u8)
    };
    let (message_count, word_count) = if transcript.config.communication_enabled() {
        let log = transcript.public_log();
        let words: usize = log.iter().map(|m| m.text.split_whitespace().count()).sum();
        (Some(log.len() as u32), Some(words as u32))
    } else {
        (None, None)
    };
    Ok(OutcomeRecord {
        run_key: run_key.to_string(),
        model_id: model_id.to_string(),
        treatment: transcript.config.treatment(),
        war_started: war_period.is_some(),
        war_period,
        peaceful_periods_before_war: war_period.map(|p| p - 1),
        n_attackers: terminal_attackers,
        attack_structure: AttackStructure::from_attacker_count(terminal_attackers),
        terminal_profile,
        public_message_count: message_count,
        public_log_word_count: word_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ReasoningCategory {
    BackwardInduction,
    PrecautionaryPreemptive,
    TrustSignaling,
    UnknownHorizonCooperation,
    OtherUnclear,
}

impl ReasoningCategory {
    /// Precedence order, highest first; the fixture must list phrase-bearing
    /// categories in exactly this order.
    pub const PRECEDENCE: [ReasoningCategory; 4] = [
        ReasoningCategory::BackwardInduction,
        ReasoningCategory::PrecautionaryPreemptive,
        ReasoningCategory::TrustSignaling,
        ReasoningCategory::UnknownHorizonCooperation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningCategory::BackwardInduction => "BACKWARD_INDUCTION",
            ReasoningCategory::PrecautionaryPreemptive => "PRECAUTIONARY_PREEMPTIVE",
            ReasoningCategory::TrustSignaling => "TRUST_SIGNALING",
            ReasoningCategory::UnknownHorizonCooperation => "UNKNOWN_HORIZON_COOPERATION",
            ReasoningCategory::OtherUnclear => "OTHER_UNCLEAR",
        }
    }

    fn fixture_key(self) -> &'static str {
        match self {
            ReasoningCategory::BackwardInduction => "backward_induction",
            ReasoningCategory::PrecautionaryPreemptive => "precautionary_preemptive",
            ReasoningCategory::TrustSignaling => "trust_signaling",
            ReasoningCategory::UnknownHorizonCooperation => "unknown_horizon_cooperation",
            ReasoningCategory::OtherUnclear => "other_unclear",
        }
    }
}

impl fmt::Display for ReasoningCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageCategory {
    ProceduralRule,
    OpenDominance,
    ReciprocalPledge,
    CollectivePayoff,
    RelationalTrust,
    OtherUnclear,
}

impl MessageCategory {
    pub const PRECEDENCE: [MessageCategory; 5] = [
        MessageCategory::ProceduralRule,
        MessageCategory::OpenDominance,
        MessageCategory::ReciprocalPledge,
        MessageCategory::CollectivePayoff,
        MessageCategory::RelationalTrust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageCategory::ProceduralRule => "PROCEDURAL_RULE",
            MessageCategory::OpenDominance => "OPEN_DOMINANCE",
            MessageCategory::ReciprocalPledge => "RECIPROCAL_PLEDGE",
            MessageCategory::CollectivePayoff => "COLLECTIVE_PAYOFF",
            MessageCategory::RelationalTrust => "RELATIONAL_TRUST",
            MessageCategory::OtherUnclear => "OTHER_UNCLEAR",
        }
    }

    fn fixture_key(self) -> &'static str {
        match self {
            MessageCategory::ProceduralRule => "procedural_rule",
            MessageCategory::OpenDominance => "open_dominance",
            MessageCategory::ReciprocalPledge => "reciprocal_pledge",
            MessageCategory::CollectivePayoff => "collective_payoff",
            MessageCategory::RelationalTrust => "relational_trust",
            MessageCategory::OtherUnclear => "other_unclear",
        }
    }
}

impl fmt::Display for MessageCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningLabel {
    pub category: ReasoningCategory,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageLabel {
    pub category: MessageCategory,
    pub matched_terms: Vec<String>,
}

struct Dictionary {
    reasoning: Vec<(ReasoningCategory, Vec<String>)>,
    message: Vec<(MessageCategory, Vec<String>)>,
}

const TAXONOMY_FIXTURE: &str = include_str!("../fixtures/taxonomy.txt");

static DICTIONARY: LazyLock<Dictionary> =
    LazyLock::new(|| parse_taxonomy(TAXONOMY_FIXTURE).expect("taxonomy fixture is well-formed"));

fn parse_taxonomy(text: &str) -> Result<Dictionary, String> {
    enum Section {
        Reasoning,
        Message,
    }
    let mut reasoning: Vec<(ReasoningCategory, Vec<String>)> = Vec::new();
    let mut message: Vec<(MessageCategory, Vec<String>)> = Vec::new();
    let mut current: Option<Section> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(heading) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let (group, key) = heading
                .split_once('/')
                .ok_or_else(|| format!("line {}: heading without group", lineno + 1))?;
            current = Some(match group {
                "reasoning" => {
                    let cat = ReasoningCategory::PRECEDENCE
                        .into_iter()
                        .find(|c| c.fixture_key() == key)
                        .ok_or_else(|| format!("line {}: unknown category {key}", lineno + 1))?;
                    reasoning.push((cat, Vec::new()));
                    Section::Reasoning
                }
                "message" => {
                    let cat = MessageCategory::PRECEDENCE
                        .into_iter()
                        .find(|c| c.fixture_key() == key)
                        .ok_or_else(|| format!("line {}: unknown category {key}", lineno + 1))?;
                    message.push((cat, Vec::new()));
                    Section::Message
                }
                other => return Err(format!("line {}: unknown group {other}", lineno + 1)),
            });
            continue;
        }
        let phrase = line.to_lowercase();
        match &current {
            Some(Section::Reasoning) => reasoning.last_mut().expect("section open").1.push(phrase),
            Some(Section::Message) => message.last_mut().expect("section open").1.push(phrase),
            None => return Err(format!("line {}: phrase before any heading", lineno + 1)),
        }
    }
    let reasoning_order: Vec<ReasoningCategory> = reasoning.iter().map(|(c, _)| *c).collect();
    if reasoning_order != ReasoningCategory::PRECEDENCE {
        return Err("reasoning categories out of precedence order".into());
    }
    let message_order: Vec<MessageCategory> = message.iter().map(|(c, _)| *c).collect();
    if message_order != MessageCategory::PRECEDENCE {
        return Err("message categories out of precedence order".into());
    }
    if reasoning.iter().any(|(_, p)| p.is_empty()) || message.iter().any(|(_, p)| p.is_empty()) {
        return Err("empty phrase list".into());
    }
    Ok(Dictionary { reasoning, message })
}

fn scan<C: Copy>(lists: &[(C, Vec<String>)], text: &str) -> (Option<C>, Vec<String>) {
    let lower = text.to_lowercase();
    let mut first: Option<C> = None;
    let mut matched = Vec::new();
    for (category, phrases) in lists {
        let mut hit_here = false;
        for phrase in phrases {
            if lower.contains(phrase.as_str()) {
                matched.push(phrase.clone());
                hit_here = true;
            }
        }
        if hit_here && first.is_none() {
            first = Some(*category);
        }
    }
    (first, matched)
}

pub fn classify_reasoning(text: &str) -> ReasoningLabel {
    let (category, matched_terms) = scan(&DICTIONARY.reasoning, text);
    ReasoningLabel {
        category: category.unwrap_or(ReasoningCategory::OtherUnclear),
        matched_terms,
    }
}

pub fn classify_message(text: &str) -> MessageLabel {
    let (category, matched_terms) = scan(&DICTIONARY.message, text);
    MessageLabel {
        category: category.unwrap_or(MessageCategory::OtherUnclear),
        matched_terms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusGame {
    pub run_key: String,
    pub model_id: String,
    pub transcript: Transcript,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedGame {
    pub run_key: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRow {
    pub run_key: String,
    pub model_id: String,
    pub treatment: Treatment,
    pub agent_id: AgentId,
    pub period: u32,
    pub category: ReasoningCategory,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageRow {
    pub run_key: String,
    pub model_id: String,
    pub treatment: Treatment,
    pub agent_id: AgentId,
    pub period: u32,
    pub category: MessageCategory,
    pub matched_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CodedCorpus {
    pub outcomes: Vec<OutcomeRecord>,
    pub reasoning_labels: Vec<ReasoningRow>,
    pub message_labels: Vec<MessageRow>,
    pub rejected: Vec<RejectedGame>,
}

/// Code every completed game; aborted games pass straight into `rejected` so
/// they can never enter a statistics denominator.
pub fn code_corpus(games: &[CorpusGame], aborted: &[RejectedGame]) -> CodedCorpus {
    let mut coded = CodedCorpus {
        rejected: aborted.to_vec(),
        ..CodedCorpus::default()
    };
    for game in games {
        let outcome = match code_outcome(&game.run_key, &game.model_id, &game.transcript) {
            Ok(outcome) => outcome,
            Err(err) => {
                coded.rejected.push(RejectedGame {
                    run_key: game.run_key.clone(),
                    reason: err.to_string(),
                });
                continue;
            }
        };
        let treatment = game.transcript.config.treatment();
        coded.outcomes.push(outcome);
        for rec in &game.transcript.periods {
            for (agent_id, decision) in &rec.decisions {
                let label = classify_reasoning(&decision.reasoning);
                coded.reasoning_labels.push(ReasoningRow {
                    run_key: game.run_key.clone(),
                    model_id: game.model_id.clone(),
                    treatment,
                    agent_id: *agent_id,
                    period: rec.period,
                    category: label.category,
                    matched_terms: label.matched_terms,
                });
            }
        }
        for msg in game.transcript.public_log() {
            let label = classify_message(&msg.text);
            coded.message_labels.push(MessageRow {
                run_key: game.run_key.clone(),
                model_id: game.model_id.clone(),
                treatment,
                agent_id: msg.agent_id,
                period: msg.period,
                category: label.category,
                matched_terms: label.matched_terms,
            });
        }
    }
    coded
}
