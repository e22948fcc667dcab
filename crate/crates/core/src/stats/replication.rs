//! The published experiment's outcome data, reconstructed row by row from the
//! reported counts, plus the reported target values the replicate command
//! checks itself against. Where a source table gives only a range (wars
//! "between periods 3 and 9"), the exact placement here is a documented
//! fixture choice; every aggregate the targets pin is reproduced exactly.

use crate::coding::{
    AttackStructure, MessageCategory, OutcomeRecord, ReasoningCategory, TerminalProfile,
};
use crate::game::Treatment;

pub const PAPER_MODELS: [&str; 4] = ["gpt-5", "gemini-2.5-pro", "gpt-5-mini", "claude-sonnet-4.5"];
pub const PAPER_REPLICATIONS: u32 = 20;

/// Wars out of 20 games per (treatment, model) cell, models in
/// `PAPER_MODELS` order.
fn war_counts(treatment: Treatment) -> [u32; 4] {
    match treatment {
        Treatment::Baseline => [19, 18, 15, 0],
        Treatment::Multipolar => [20, 20, 19, 6],
        Treatment::FinitePeriods => [20, 20, 20, 20],
        Treatment::Communication => [18, 10, 6, 0],
    }
}

/// War periods for every war game under a treatment, dealt to models in
/// `PAPER_MODELS` order.
fn period_pool(treatment: Treatment) -> Vec<u32> {
    let mut pool = Vec::new();
    let ones = |pool: &mut Vec<u32>, count: usize| pool.extend(std::iter::repeat(1).take(count));
    match treatment {
        Treatment::Baseline => {
            ones(&mut pool, 51);
            pool.push(2);
        }
        Treatment::Multipolar => {
            ones(&mut pool, 59);
            pool.extend([3, 4, 5, 5]);
            pool.extend([10, 10]);
        }
        Treatment::FinitePeriods => {
            ones(&mut pool, 60);
            pool.push(2);
            pool.extend([5, 5]);
            pool.extend([7, 7, 7]);
            pool.extend([8, 8, 8, 8]);
            pool.extend(std::iter::repeat(9).take(9));
            pool.push(10);
        }
        Treatment::Communication => {
            ones(&mut pool, 33);
            pool.push(2);
        }
    }
    pool
}

/// Attack structures for every war game under a treatment, dealt in the same
/// order as `period_pool`.
fn structure_pool(treatment: Treatment) -> Vec<AttackStructure> {
    let mut pool = Vec::new();
    let push = |pool: &mut Vec<AttackStructure>, s: AttackStructure, count: usize| {
        pool.extend(std::iter::repeat(s).take(count))
    };
    match treatment {
        Treatment::Baseline => {
            push(&mut pool, AttackStructure::Unilateral, 25);
            push(&mut pool, AttackStructure::Simultaneous2, 27);
        }
        Treatment::Multipolar => {
            push(&mut pool, AttackStructure::Unilateral, 14);
            push(&mut pool, AttackStructure::Simultaneous2, 18);
            push(&mut pool, AttackStructure::Simultaneous3, 33);
        }
        Treatment::FinitePeriods => {
            push(&mut pool, AttackStructure::Unilateral, 28);
            push(&mut pool, AttackStructure::Simultaneous2, 52);
        }
        Treatment::Communication => {
            push(&mut pool, AttackStructure::Unilateral, 27);
            push(&mut pool, AttackStructure::Simultaneous2, 7);
        }
    }
    pool
}

fn run_key(model: &str, treatment: Treatment, rep: u32) -> String {
    format!("paper-{model}-{}-r{rep:02}", treatment.as_str())
}

fn communication_counts(treatment: Treatment, periods_played: u32) -> (Option<u32>, Option<u32>) {
    if treatment == Treatment::Communication {
        let messages = 2 * periods_played;
        (Some(messages), Some(8 * messages))
    } else {
        (None, None)
    }
}

fn war_row(
    model: &str,
    treatment: Treatment,
    rep: u32,
    period: u32,
    structure: AttackStructure,
) -> OutcomeRecord {
    let n_attackers = match structure {
        AttackStructure::None => 0,
        AttackStructure::Unilateral => 1,
        AttackStructure::Simultaneous2 => 2,
        AttackStructure::Simultaneous3 => 3,
    };
    let terminal_profile = if treatment.n_agents() == 2 {
        match structure {
            AttackStructure::Unilateral => TerminalProfile::AttackNothing,
            AttackStructure::Simultaneous2 => TerminalProfile::AttackAttack,
            _ => unreachable!("two-agent war structure"),
        }
    } else {
        TerminalProfile::Attackers(n_attackers as u8)
    };
    let (public_message_count, public_log_word_count) = communication_counts(treatment, period);
    OutcomeRecord {
        run_key: run_key(model, treatment, rep),
        model_id: model.to_string(),
        treatment,
        war_started: true,
        war_period: Some(period),
        peaceful_periods_before_war: Some(period - 1),
        n_attackers,
        attack_structure: structure,
        terminal_profile,
        public_message_count,
        public_log_word_count,
    }
}

fn peace_row(model: &str, treatment: Treatment, rep: u32) -> OutcomeRecord {
    let terminal_profile = if treatment.n_agents() == 2 {
        TerminalProfile::NothingNothing
    } else {
        TerminalProfile::Attackers(0)
    };
    let (public_message_count, public_log_word_count) = communication_counts(treatment, 10);
    OutcomeRecord {
        run_key: run_key(model, treatment, rep),
        model_id: model.to_string(),
        treatment,
        war_started: false,
        war_period: None,
        peaceful_periods_before_war: None,
        n_attackers: 0,
        attack_structure: AttackStructure::None,
        terminal_profile,
        public_message_count,
        public_log_word_count,
    }
}

/// All 320 games of the published experiment as coded outcome rows: 4 models
/// x 4 treatments x 20 replications, war rows first within each cell.
pub fn paper_replication_dataset() -> Vec<OutcomeRecord> {
    let mut rows = Vec::with_capacity(320);
    for treatment in Treatment::ALL {
        let counts = war_counts(treatment);
        let periods = period_pool(treatment);
        let structures = structure_pool(treatment);
        debug_assert_eq!(periods.len(), structures.len());
        debug_assert_eq!(counts.iter().sum::<u32>() as usize, periods.len());
        let mut next = 0usize;
        for (mi, model) in PAPER_MODELS.iter().enumerate() {
            for rep in 0..PAPER_REPLICATIONS {
                if rep < counts[mi] {
                    rows.push(war_row(model, treatment, rep, periods[next], structures[next]));
                    next += 1;
                } else {
                    rows.push(peace_row(model, treatment, rep));
                }
            }
        }
    }
    rows
}

/// Reasoning-category shares as reported for the original runs, percent of
/// agent-period observations within a treatment. Only reported cells appear;
/// nothing here is recomputed.
pub fn reported_reasoning_shares() -> Vec<(Treatment, ReasoningCategory, f64)> {
    vec![
        (Treatment::Baseline, ReasoningCategory::UnknownHorizonCooperation, 50.8),
        (Treatment::Baseline, ReasoningCategory::PrecautionaryPreemptive, 27.9),
        (Treatment::Baseline, ReasoningCategory::TrustSignaling, 5.1),
        (Treatment::Baseline, ReasoningCategory::BackwardInduction, 1.2),
        (Treatment::Multipolar, ReasoningCategory::UnknownHorizonCooperation, 41.1),
        (Treatment::Multipolar, ReasoningCategory::PrecautionaryPreemptive, 34.4),
        (Treatment::Multipolar, ReasoningCategory::BackwardInduction, 1.8),
        (Treatment::FinitePeriods, ReasoningCategory::BackwardInduction, 27.3),
        (Treatment::Communication, ReasoningCategory::TrustSignaling, 14.0),
    ]
}

/// Message-category shares as reported for the original runs, percent of
/// public messages per model under communication.
pub fn reported_message_shares() -> Vec<(&'static str, MessageCategory, f64)> {
    vec![
        ("gpt-5", MessageCategory::ProceduralRule, 29.2),
        ("gpt-5", MessageCategory::OpenDominance, 48.6),
        ("gpt-5-mini", MessageCategory::ReciprocalPledge, 10.8),
        ("gemini-2.5-pro", MessageCategory::CollectivePayoff, 35.9),
        ("gemini-2.5-pro", MessageCategory::RelationalTrust, 25.5),
        ("gemini-2.5-pro", MessageCategory::OpenDominance, 9.1),
        ("claude-sonnet-4.5", MessageCategory::RelationalTrust, 37.0),
        ("claude-sonnet-4.5", MessageCategory::CollectivePayoff, 16.5),
        ("claude-sonnet-4.5", MessageCategory::OpenDominance, 0.2),
    ]
}

/// Pooled war rates by treatment, display strings after one-decimal
/// rounding, treatment enum order.
pub const PAPER_TREATMENT_RATES: [(Treatment, &str); 4] = [
    (Treatment::Baseline, "65.0"),
    (Treatment::Multipolar, "81.3"),
    (Treatment::FinitePeriods, "100.0"),
    (Treatment::Communication, "42.5"),
];

/// Pooled war rates by model across all treatments.
pub const PAPER_MODEL_RATES: [(&str, &str); 4] = [
    ("gpt-5", "96.3"),
    ("gemini-2.5-pro", "85.0"),
    ("gpt-5-mini", "75.0"),
    ("claude-sonnet-4.5", "32.5"),
];

/// Leave-one-model-out treatment rates, treatment enum order per row.
pub const PAPER_LOO_RATES: [(&str, [&str; 4]); 4] = [
    ("gpt-5", ["55.0", "75.0", "100.0", "26.7"]),
    ("gemini-2.5-pro", ["56.7", "75.0", "100.0", "40.0"]),
    ("gpt-5-mini", ["61.7", "76.7", "100.0", "46.7"]),
    ("claude-sonnet-4.5", ["86.7", "98.3", "100.0", "56.7"]),
];

/// Within-model war-rate change versus baseline, percentage points.
pub const PAPER_MULTIPOLAR_DELTAS_PP: [(&str, f64); 4] = [
    ("gpt-5", 5.0),
    ("gemini-2.5-pro", 10.0),
    ("gpt-5-mini", 20.0),
    ("claude-sonnet-4.5", 30.0),
];

pub const PAPER_COMMUNICATION_DELTAS_PP: [(&str, f64); 4] = [
    ("gpt-5", -5.0),
    ("gemini-2.5-pro", -40.0),
    ("gpt-5-mini", -45.0),
    ("claude-sonnet-4.5", 0.0),
];

/// Treatment coefficients from the linear probability model, percentage
/// points relative to baseline.
pub const PAPER_LPM_COEFF_PP: [(&str, f64); 3] = [
    ("treatment:multipolar", 16.25),
    ("treatment:finite_periods", 35.0),
    ("treatment:communication", -22.5),
];

/// Acceptance bands for the robust standard errors, percentage points.
pub const PAPER_LPM_SE_BANDS_PP: [(&str, f64, f64); 3] = [
    ("treatment:multipolar", 4.2, 5.2),
    ("treatment:finite_periods", 4.0, 5.0),
    ("treatment:communication", 5.3, 6.3),
];

pub const PAPER_R_SQUARED: f64 = 0.512;
pub const PAPER_R_SQUARED_TOL: f64 = 0.001;

/// Mean peaceful periods before war among war games, two-decimal display.
pub const PAPER_TIMING_MEANS: [(Treatment, &str); 4] = [
    (Treatment::Baseline, "0.02"),
    (Treatment::Multipolar, "0.48"),
    (Treatment::FinitePeriods, "1.70"),
    (Treatment::Communication, "0.03"),
];

/// War counts by attack structure: unilateral, two-sided, three-sided.
pub const PAPER_STRUCTURE_COUNTS: [(Treatment, [u32; 3]); 4] = [
    (Treatment::Baseline, [25, 27, 0]),
    (Treatment::Multipolar, [14, 18, 33]),
    (Treatment::FinitePeriods, [28, 52, 0]),
    (Treatment::Communication, [27, 7, 0]),
];
