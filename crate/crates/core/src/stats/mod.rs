//! Aggregation tables, the war-incidence regression, and the built-in
//! replication dataset. Display rounding is one decimal, half-up, computed in
//! integer arithmetic so 81.25 renders as "81.3" on every platform.

mod ols;
mod replication;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::{AttackStructure, OutcomeRecord};
use crate::game::Treatment;

pub use ols::{fit_lpm, FitError, HcVariant, RegressionResult, RegressionSpec};
pub use replication::{
    paper_replication_dataset, reported_message_shares, reported_reasoning_shares,
    PAPER_COMMUNICATION_DELTAS_PP, PAPER_LOO_RATES, PAPER_LPM_COEFF_PP, PAPER_LPM_SE_BANDS_PP,
    PAPER_MODELS, PAPER_MODEL_RATES, PAPER_MULTIPOLAR_DELTAS_PP, PAPER_REPLICATIONS,
    PAPER_R_SQUARED, PAPER_R_SQUARED_TOL, PAPER_STRUCTURE_COUNTS, PAPER_TIMING_MEANS,
    PAPER_TREATMENT_RATES,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("no outcome rows")]
    EmptyOutcomes,
}

/// Exact round-half-up percentage at one decimal: floor((1000w/g) + 1/2)
/// carried out in integers.
pub fn pct_1dp(wars: u32, games: u32) -> String {
    assert!(games > 0, "rate over an empty group");
    let tenths = (2000 * u64::from(wars) + u64::from(games)) / (2 * u64::from(games));
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Exact round-half-up mean at two decimals for a ratio of counts.
pub fn mean_2dp(sum: u32, count: u32) -> String {
    assert!(count > 0, "mean over an empty group");
    let hundredths = (200 * u64::from(sum) + u64::from(count)) / (2 * u64::from(count));
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub wars: u32,
    pub games: u32,
}

impl Rate {
    pub fn pct(self) -> f64 {
        100.0 * f64::from(self.wars) / f64::from(self.games)
    }

    pub fn display(self) -> String {
        pct_1dp(self.wars, self.games)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub model_id: String,
    pub treatment: Treatment,
    pub games: u32,
    pub wars: u32,
}

impl CellCount {
    pub fn rate(&self) -> Rate {
        Rate {
            wars: self.wars,
            games: self.games,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceTable {
    /// One row per (model, treatment) pair present, model-major, both sorted.
    pub cells: Vec<CellCount>,
    pub treatment_marginals: Vec<(Treatment, Rate)>,
    pub model_marginals: Vec<(String, Rate)>,
    pub overall: Rate,
}

pub fn incidence_table(outcomes: &[OutcomeRecord]) -> Result<IncidenceTable, StatsError> {
    if outcomes.is_empty() {
        return Err(StatsError::EmptyOutcomes);
    }
    let mut cells: BTreeMap<(String, Treatment), Rate> = BTreeMap::new();
    let mut by_treatment: BTreeMap<Treatment, Rate> = BTreeMap::new();
    let mut by_model: BTreeMap<String, Rate> = BTreeMap::new();
    let mut overall = Rate { wars: 0, games: 0 };
    for rec in outcomes {
        let war = u32::from(rec.war_started);
        for rate in [
            cells
                .entry((rec.model_id.clone(), rec.treatment))
                .or_insert(Rate { wars: 0, games: 0 }),
            by_treatment.entry(rec.treatment).or_insert(Rate { wars: 0, games: 0 }),
            by_model
                .entry(rec.model_id.clone())
                .or_insert(Rate { wars: 0, games: 0 }),
            &mut overall,
        ] {
            rate.games += 1;
            rate.wars += war;
        }
    }
    Ok(IncidenceTable {
        cells: cells
            .into_iter()
            .map(|((model_id, treatment), rate)| CellCount {
                model_id,
                treatment,
                games: rate.games,
                wars: rate.wars,
            })
            .collect(),
        treatment_marginals: by_treatment.into_iter().collect(),
        model_marginals: by_model.into_iter().collect(),
        overall,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingStat {
    pub treatment: Treatment,
    pub war_games: u32,
    pub peaceful_sum: u32,
    /// war_period -> count, war games only.
    pub histogram: BTreeMap<u32, u32>,
}

impl TimingStat {
    pub fn mean_peaceful(&self) -> Option<f64> {
        (self.war_games > 0)
            .then(|| f64::from(self.peaceful_sum) / f64::from(self.war_games))
    }

    pub fn display_mean(&self) -> Option<String> {
        (self.war_games > 0).then(|| mean_2dp(self.peaceful_sum, self.war_games))
    }
}

/// Mean peaceful periods before war and the war-period histogram, war games
/// only, one row per treatment present.
pub fn timing_stats(outcomes: &[OutcomeRecord]) -> Vec<TimingStat> {
    let mut rows: BTreeMap<Treatment, TimingStat> = BTreeMap::new();
    for rec in outcomes {
        let row = rows.entry(rec.treatment).or_insert_with(|| TimingStat {
            treatment: rec.treatment,
            war_games: 0,
            peaceful_sum: 0,
            histogram: BTreeMap::new(),
        });
        if let (Some(period), Some(peaceful)) = (rec.war_period, rec.peaceful_periods_before_war) {
            row.war_games += 1;
            row.peaceful_sum += peaceful;
            *row.histogram.entry(period).or_insert(0) += 1;
        }
    }
    rows.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureCounts {
    pub treatment: Treatment,
    pub unilateral: u32,
    pub simultaneous_2: u32,
    pub simultaneous_3: u32,
}

impl StructureCounts {
    pub fn total_wars(&self) -> u32 {
        self.unilateral + self.simultaneous_2 + self.simultaneous_3
    }
}

pub fn attack_structure_table(outcomes: &[OutcomeRecord]) -> Vec<StructureCounts> {
    let mut rows: BTreeMap<Treatment, StructureCounts> = BTreeMap::new();
    for rec in outcomes {
        let row = rows.entry(rec.treatment).or_insert(StructureCounts {
            treatment: rec.treatment,
            unilateral: 0,
            simultaneous_2: 0,
            simultaneous_3: 0,
        });
        match rec.attack_structure {
            AttackStructure::None => {}
            AttackStructure::Unilateral => row.unilateral += 1,
            AttackStructure::Simultaneous2 => row.simultaneous_2 += 1,
            AttackStructure::Simultaneous3 => row.simultaneous_3 += 1,
        }
    }
    rows.into_values().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model_id: String,
    pub treatment: Treatment,
    pub delta_pp: f64,
}

/// Treatment-minus-baseline war-rate difference per model, percentage points.
/// Models without a baseline cell contribute no rows.
pub fn within_model_deltas(outcomes: &[OutcomeRecord]) -> Vec<DeltaRow> {
    let table = match incidence_table(outcomes) {
        Ok(table) => table,
        Err(StatsError::EmptyOutcomes) => return Vec::new(),
    };
    let mut cells: BTreeMap<(String, Treatment), Rate> = BTreeMap::new();
    for cell in &table.cells {
        cells.insert((cell.model_id.clone(), cell.treatment), cell.rate());
    }
    let models: BTreeSet<String> = table.model_marginals.iter().map(|(m, _)| m.clone()).collect();
    let mut rows = Vec::new();
    for model in models {
        let Some(base) = cells.get(&(model.clone(), Treatment::Baseline)) else {
            continue;
        };
        for treatment in Treatment::ALL {
            if treatment == Treatment::Baseline {
                continue;
            }
            if let Some(rate) = cells.get(&(model.clone(), treatment)) {
                rows.push(DeltaRow {
                    model_id: model.clone(),
                    treatment,
                    delta_pp: rate.pct() - base.pct(),
                });
            }
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooRow {
    pub omitted_model: String,
    pub rates: Vec<(Treatment, Rate)>,
}

/// Pooled treatment rates recomputed with each model's games removed.
pub fn leave_one_model_out(outcomes: &[OutcomeRecord]) -> Vec<LooRow> {
    let models: BTreeSet<&str> = outcomes.iter().map(|r| r.model_id.as_str()).collect();
    let mut rows = Vec::new();
    for omitted in models {
        let remaining: Vec<OutcomeRecord> = outcomes
            .iter()
            .filter(|r| r.model_id != omitted)
            .cloned()
            .collect();
        let Ok(table) = incidence_table(&remaining) else {
            continue;
        };
        rows.push(LooRow {
            omitted_model: omitted.to_string(),
            rates: table.treatment_marginals,
        });
    }
    rows
}
