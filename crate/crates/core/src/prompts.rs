//! Prompt templates, one per treatment, frozen as repository fixtures. The
//! variants are minimal edits of the baseline along each treatment's own
//! dimension; nothing else may differ between them.

use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{
    AgentId, DecisionContext, PrivateHistoryEntry, PublicMessage, RulesDescriptor, Treatment,
    PAPER_MAX_PERIODS,
};

/// Appended to the prompt when re-asking after a malformed reply.
pub const FORMAT_REMINDER: &str =
    "Reminder: return valid JSON only with exactly these keys: action, message, reasoning.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub treatment: Treatment,
    pub rules_block: &'static str,
    pub turn_block: &'static str,
}

macro_rules! fixture {
    ($name:literal) => {
        // fixtures end with one newline; templates are newline-free at the edges
        include_str!(concat!("../fixtures/prompts/", $name))
            .trim_end_matches('\n')
    };
}

static BASELINE: LazyLock<PromptTemplate> = LazyLock::new(|| PromptTemplate {
    treatment: Treatment::Baseline,
    rules_block: fixture!("baseline_rules.txt"),
    turn_block: fixture!("baseline_turn.txt"),
});
static MULTIPOLAR: LazyLock<PromptTemplate> = LazyLock::new(|| PromptTemplate {
    treatment: Treatment::Multipolar,
    rules_block: fixture!("multipolar_rules.txt"),
    turn_block: fixture!("multipolar_turn.txt"),
});
static FINITE_PERIODS: LazyLock<PromptTemplate> = LazyLock::new(|| PromptTemplate {
    treatment: Treatment::FinitePeriods,
    rules_block: fixture!("finite_periods_rules.txt"),
    turn_block: fixture!("finite_periods_turn.txt"),
});
static COMMUNICATION: LazyLock<PromptTemplate> = LazyLock::new(|| PromptTemplate {
    treatment: Treatment::Communication,
    rules_block: fixture!("communication_rules.txt"),
    turn_block: fixture!("communication_turn.txt"),
});

pub fn template_for(treatment: Treatment) -> &'static PromptTemplate {
    match treatment {
        Treatment::Baseline => &BASELINE,
        Treatment::Multipolar => &MULTIPOLAR,
        Treatment::FinitePeriods => &FINITE_PERIODS,
        Treatment::Communication => &COMMUNICATION,
    }
}

pub fn rules_for(treatment: Treatment) -> &'static str {
    template_for(treatment).rules_block
}

/// Hex digest of the composed template (slots unfilled). Embedded in every
/// persisted game for provenance.
pub fn template_checksum(treatment: Treatment) -> String {
    let t = template_for(treatment);
    let mut hasher = Sha256::new();
    hasher.update(t.rules_block.as_bytes());
    hasher.update(b"\n\n");
    hasher.update(t.turn_block.as_bytes());
    hex(&hasher.finalize())
}

pub fn sha256_hex(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateError {
    #[error("template is for {template} but the game is {game}")]
    TreatmentMismatch { template: Treatment, game: Treatment },
    #[error("public log must be supplied iff communication is enabled")]
    PublicLogSlot,
    #[error("frozen template states a {PAPER_MAX_PERIODS}-period horizon, config discloses {0}")]
    HorizonMismatch(u32),
}

fn history_lines(history: &[PrivateHistoryEntry]) -> String {
    if history.is_empty() {
        return "(none)".into();
    }
    history
        .iter()
        .map(|e| {
            format!(
                "Period {} — action: {}; message: {}; reasoning: {}",
                e.period, e.action, e.message, e.reasoning
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn log_lines(log: &[PublicMessage]) -> String {
    if log.is_empty() {
        return "(none)".into();
    }
    log.iter()
        .map(|m| format!("Period {} — Agent {} said: {}", m.period, m.agent_id, m.text))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render(
    template: &PromptTemplate,
    rules: &RulesDescriptor,
    agent_id: AgentId,
    period: u32,
    history: &[PrivateHistoryEntry],
    public_log: Option<&[PublicMessage]>,
) -> Result<String, TemplateError> {
    if template.treatment != rules.treatment {
        return Err(TemplateError::TreatmentMismatch {
            template: template.treatment,
            game: rules.treatment,
        });
    }
    if public_log.is_some() != rules.communication_enabled {
        return Err(TemplateError::PublicLogSlot);
    }
    if let Some(h) = rules.disclosed_horizon {
        if h != PAPER_MAX_PERIODS {
            return Err(TemplateError::HorizonMismatch(h));
        }
    }
    let turn = template
        .turn_block
        .replace("{agent_id}", agent_id.as_str())
        .replace("{current_period}", &period.to_string())
        .replace("{private_history}", &history_lines(history));
    let turn = match public_log {
        Some(log) => turn.replace("{public_log}", &log_lines(log)),
        None => turn,
    };
    Ok(format!("{}\n\n{}", template.rules_block, turn))
}

pub fn render_context(ctx: &DecisionContext) -> Result<String, TemplateError> {
    render(
        template_for(ctx.rules.treatment),
        &ctx.rules,
        ctx.agent_id,
        ctx.current_period,
        &ctx.private_history,
        ctx.public_log.as_deref(),
    )
}
