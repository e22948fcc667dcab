//! Table and figure emission. Every command that reports goes through
//! write_report so the schema is identical everywhere; replicate_paper adds a
//! self-check of the emitted values against the published targets.

use std::collections::BTreeMap;
use std::fmt::Write as FmtWrite;
use std::path::{Path, PathBuf};

use thiserror::Error;

use standoff_core::coding::{CodedCorpus, MessageCategory, OutcomeRecord, ReasoningCategory};
use standoff_core::game::Treatment;
use standoff_core::stats::{
    attack_structure_table, fit_lpm, incidence_table, leave_one_model_out,
    paper_replication_dataset, reported_message_shares, reported_reasoning_shares, timing_stats,
    within_model_deltas, DeltaRow, FitError, HcVariant, IncidenceTable, LooRow, RegressionResult,
    RegressionSpec, StructureCounts, TimingStat, PAPER_LOO_RATES, PAPER_LPM_COEFF_PP,
    PAPER_LPM_SE_BANDS_PP, PAPER_MODEL_RATES, PAPER_R_SQUARED, PAPER_R_SQUARED_TOL,
    PAPER_STRUCTURE_COUNTS, PAPER_TIMING_MEANS, PAPER_TREATMENT_RATES,
};

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub covariance: HcVariant,
    pub reference_model: Option<String>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            covariance: HcVariant::Hc1,
            reference_model: None,
        }
    }
}

/// One share-table row. `source` is "reported" when the number is a
/// published constant and "computed" when this harness derived it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareRow {
    pub group: String,
    pub category: String,
    pub share_pct: f64,
    pub source: &'static str,
}

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub outcomes: Vec<OutcomeRecord>,
    pub reasoning_shares: Vec<ShareRow>,
    pub message_shares: Vec<ShareRow>,
    /// (run_key, reason) for games excluded from every denominator.
    pub rejected: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("corpus has no completed games to report on")]
    EmptyCorpus,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        source: csv::Error,
    },
}

pub struct ReportArtifacts {
    pub files: Vec<PathBuf>,
    pub incidence: IncidenceTable,
    pub timing: Vec<TimingStat>,
    pub structure: Vec<StructureCounts>,
    pub lpm: Result<RegressionResult, FitError>,
}

/// Builds the share tables for a coded corpus, percent within each group.
pub fn computed_shares(coded: &CodedCorpus) -> (Vec<ShareRow>, Vec<ShareRow>) {
    let mut reasoning_totals: BTreeMap<Treatment, u32> = BTreeMap::new();
    let mut reasoning_counts: BTreeMap<(Treatment, ReasoningCategory), u32> = BTreeMap::new();
    for row in &coded.reasoning_labels {
        *reasoning_totals.entry(row.treatment).or_insert(0) += 1;
        *reasoning_counts.entry((row.treatment, row.category)).or_insert(0) += 1;
    }
    let mut reasoning = Vec::new();
    for (&treatment, &total) in &reasoning_totals {
        for category in ReasoningCategory::PRECEDENCE
            .into_iter()
            .chain([ReasoningCategory::OtherUnclear])
        {
            let count = reasoning_counts.get(&(treatment, category)).copied().unwrap_or(0);
            reasoning.push(ShareRow {
                group: treatment.as_str().to_string(),
                category: category.as_str().to_string(),
                share_pct: 100.0 * f64::from(count) / f64::from(total),
                source: "computed",
            });
        }
    }

    let mut message_totals: BTreeMap<&str, u32> = BTreeMap::new();
    let mut message_counts: BTreeMap<(&str, MessageCategory), u32> = BTreeMap::new();
    for row in &coded.message_labels {
        *message_totals.entry(row.model_id.as_str()).or_insert(0) += 1;
        *message_counts
            .entry((row.model_id.as_str(), row.category))
            .or_insert(0) += 1;
    }
    let mut messages = Vec::new();
    for (&model, &total) in &message_totals {
        for category in MessageCategory::PRECEDENCE
            .into_iter()
            .chain([MessageCategory::OtherUnclear])
        {
            let count = message_counts.get(&(model, category)).copied().unwrap_or(0);
            messages.push(ShareRow {
                group: model.to_string(),
                category: category.as_str().to_string(),
                share_pct: 100.0 * f64::from(count) / f64::from(total),
                source: "computed",
            });
        }
    }
    (reasoning, messages)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct Emitter {
    out_dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Emitter {
    fn write(&mut self, name: &str, content: &str) -> Result<(), ReportError> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, content).map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }

    fn write_csv(&mut self, name: &str, rows: &[Vec<String>]) -> Result<(), ReportError> {
        let path = self.out_dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|source| ReportError::Csv {
            path: path.clone(),
            source,
        })?;
        for row in rows {
            writer.write_record(row).map_err(|source| ReportError::Csv {
                path: path.clone(),
                source,
            })?;
        }
        writer.flush().map_err(io_err(&path))?;
        self.files.push(path);
        Ok(())
    }
}

struct Tables {
    incidence: IncidenceTable,
    timing: Vec<TimingStat>,
    structure: Vec<StructureCounts>,
    deltas: Vec<DeltaRow>,
    loo: Vec<LooRow>,
    lpm: Result<RegressionResult, FitError>,
}

fn compute_tables(inputs: &ReportInputs, options: &ReportOptions) -> Result<Tables, ReportError> {
    if inputs.outcomes.is_empty() {
        return Err(ReportError::EmptyCorpus);
    }
    Ok(Tables {
        incidence: incidence_table(&inputs.outcomes).expect("non-empty outcomes"),
        timing: timing_stats(&inputs.outcomes),
        structure: attack_structure_table(&inputs.outcomes),
        deltas: within_model_deltas(&inputs.outcomes),
        loo: leave_one_model_out(&inputs.outcomes),
        lpm: fit_lpm(
            &inputs.outcomes,
            &RegressionSpec {
                covariance: options.covariance,
                reference_model: options.reference_model.clone(),
            },
        ),
    })
}

/// The report.md body without touching the filesystem.
pub fn stats_markdown(
    inputs: &ReportInputs,
    options: &ReportOptions,
) -> Result<String, ReportError> {
    let t = compute_tables(inputs, options)?;
    Ok(report_markdown(
        inputs,
        &t.incidence,
        &t.timing,
        &t.structure,
        &t.deltas,
        &t.lpm,
        options,
    ))
}

pub fn write_report(
    out_dir: &Path,
    inputs: &ReportInputs,
    options: &ReportOptions,
) -> Result<ReportArtifacts, ReportError> {
    let Tables {
        incidence,
        timing,
        structure,
        deltas,
        loo,
        lpm,
    } = compute_tables(inputs, options)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut emit = Emitter {
        out_dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };

    // exhibit 1: war incidence
    let mut rows = vec![to_row(["scope", "model_id", "treatment", "games", "wars", "war_rate_pct"])];
    for cell in &incidence.cells {
        rows.push(to_row([
            "cell",
            &cell.model_id,
            cell.treatment.as_str(),
            &cell.games.to_string(),
            &cell.wars.to_string(),
            &cell.rate().display(),
        ]));
    }
    for (treatment, rate) in &incidence.treatment_marginals {
        rows.push(to_row([
            "treatment_marginal",
            "(all)",
            treatment.as_str(),
            &rate.games.to_string(),
            &rate.wars.to_string(),
            &rate.display(),
        ]));
    }
    for (model, rate) in &incidence.model_marginals {
        rows.push(to_row([
            "model_marginal",
            model,
            "(all)",
            &rate.games.to_string(),
            &rate.wars.to_string(),
            &rate.display(),
        ]));
    }
    rows.push(to_row([
        "overall",
        "(all)",
        "(all)",
        &incidence.overall.games.to_string(),
        &incidence.overall.wars.to_string(),
        &incidence.overall.display(),
    ]));
    emit.write_csv("exhibit1_incidence.csv", &rows)?;

    // exhibit 2: war timing among war games
    let mut rows = vec![to_row(["treatment", "war_games", "peaceful_periods_sum", "mean_peaceful_periods"])];
    for stat in &timing {
        rows.push(to_row([
            stat.treatment.as_str(),
            &stat.war_games.to_string(),
            &stat.peaceful_sum.to_string(),
            &stat.display_mean().unwrap_or_else(|| "no wars".to_string()),
        ]));
    }
    emit.write_csv("exhibit2_timing.csv", &rows)?;

    let mut rows = vec![to_row(["treatment", "war_period", "wars"])];
    for stat in &timing {
        for (&period, &count) in &stat.histogram {
            rows.push(to_row([
                stat.treatment.as_str(),
                &period.to_string(),
                &count.to_string(),
            ]));
        }
    }
    emit.write_csv("exhibit2_histogram.csv", &rows)?;

    // exhibit 3: attack structure
    let mut rows = vec![to_row(["treatment", "unilateral", "simultaneous_2", "simultaneous_3", "total_wars"])];
    for counts in &structure {
        rows.push(to_row([
            counts.treatment.as_str(),
            &counts.unilateral.to_string(),
            &counts.simultaneous_2.to_string(),
            &counts.simultaneous_3.to_string(),
            &counts.total_wars().to_string(),
        ]));
    }
    emit.write_csv("exhibit3_structure.csv", &rows)?;

    // exhibits 4 and 5: category shares
    share_csv(&mut emit, "exhibit4_reasoning_shares.csv", "treatment", &inputs.reasoning_shares)?;
    share_csv(&mut emit, "exhibit5_message_shares.csv", "model_id", &inputs.message_shares)?;

    // exhibit 6: linear probability model
    let mut rows = vec![to_row([
        "regressor",
        "coefficient_pp",
        "se_hc0_pp",
        "se_hc1_pp",
        "se_hc2_pp",
        "se_hc3_pp",
    ])];
    if let Ok(fit) = &lpm {
        for name in &fit.regressors {
            let mut row = vec![
                name.clone(),
                format!("{:+.2}", fit.coefficient_pp(name).unwrap()),
            ];
            for variant in HcVariant::ALL {
                row.push(format!("{:.2}", fit.se_pp_for(variant, name).unwrap()));
            }
            rows.push(row);
        }
    }
    emit.write_csv("exhibit6_lpm.csv", &rows)?;

    // robustness tables
    let mut rows = vec![to_row(["model_id", "treatment", "delta_pp"])];
    for delta in &deltas {
        rows.push(to_row([
            &delta.model_id,
            delta.treatment.as_str(),
            &format!("{:+.1}", delta.delta_pp),
        ]));
    }
    emit.write_csv("robustness_deltas.csv", &rows)?;

    let mut rows = vec![to_row(["omitted_model", "treatment", "games", "wars", "war_rate_pct"])];
    for row in &loo {
        for (treatment, rate) in &row.rates {
            rows.push(to_row([
                &row.omitted_model,
                treatment.as_str(),
                &rate.games.to_string(),
                &rate.wars.to_string(),
                &rate.display(),
            ]));
        }
    }
    emit.write_csv("robustness_loo.csv", &rows)?;

    let mut rows = vec![to_row(["run_key", "reason"])];
    for (run_key, reason) in &inputs.rejected {
        rows.push(vec![run_key.clone(), reason.clone()]);
    }
    emit.write_csv("rejected_games.csv", &rows)?;

    // figures
    let bars: Vec<(String, f64, String)> = incidence
        .treatment_marginals
        .iter()
        .map(|(t, r)| (t.as_str().to_string(), r.pct(), format!("{}%", r.display())))
        .collect();
    emit.write("exhibit1_incidence.svg", &svg_bar_chart("War incidence by treatment", &bars))?;

    let bars: Vec<(String, f64, String)> = timing
        .iter()
        .map(|s| {
            let (value, label) = match (s.mean_peaceful(), s.display_mean()) {
                (Some(mean), Some(display)) => (mean, display),
                _ => (0.0, "no wars".to_string()),
            };
            (s.treatment.as_str().to_string(), value, label)
        })
        .collect();
    emit.write(
        "exhibit2_timing.svg",
        &svg_bar_chart("Mean peaceful periods before war", &bars),
    )?;

    let mut bars = Vec::new();
    for counts in &structure {
        for (label, value) in [
            ("unilateral", counts.unilateral),
            ("simultaneous_2", counts.simultaneous_2),
            ("simultaneous_3", counts.simultaneous_3),
        ] {
            if value > 0 || counts.total_wars() > 0 {
                bars.push((
                    format!("{} {}", counts.treatment.as_str(), label),
                    f64::from(value),
                    value.to_string(),
                ));
            }
        }
    }
    emit.write("exhibit3_structure.svg", &svg_bar_chart("Attack structure counts", &bars))?;

    let bars = share_bars(&inputs.reasoning_shares);
    emit.write("exhibit4_reasoning_shares.svg", &svg_bar_chart("Reasoning category shares", &bars))?;
    let bars = share_bars(&inputs.message_shares);
    emit.write("exhibit5_message_shares.svg", &svg_bar_chart("Message category shares", &bars))?;

    let bars: Vec<(String, f64, String)> = match &lpm {
        Ok(fit) => fit
            .regressors
            .iter()
            .filter(|name| name.starts_with("treatment:"))
            .map(|name| {
                let pp = fit.coefficient_pp(name).unwrap();
                (name.clone(), pp, format!("{pp:+.2} pp"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    emit.write(
        "exhibit6_lpm.svg",
        &svg_bar_chart("Treatment effects on war probability", &bars),
    )?;

    let markdown = report_markdown(inputs, &incidence, &timing, &structure, &deltas, &lpm, options);
    emit.write("report.md", &markdown)?;

    Ok(ReportArtifacts {
        files: emit.files,
        incidence,
        timing,
        structure,
        lpm,
    })
}

fn to_row<const N: usize>(cells: [&str; N]) -> Vec<String> {
    cells.into_iter().map(str::to_string).collect()
}

fn share_csv(
    emit: &mut Emitter,
    name: &str,
    group_header: &str,
    shares: &[ShareRow],
) -> Result<(), ReportError> {
    let mut rows = vec![to_row([group_header, "category", "share_pct", "source"])];
    for share in shares {
        rows.push(vec![
            share.group.clone(),
            share.category.clone(),
            format!("{:.1}", share.share_pct),
            share.source.to_string(),
        ]);
    }
    emit.write_csv(name, &rows)
}

fn share_bars(shares: &[ShareRow]) -> Vec<(String, f64, String)> {
    shares
        .iter()
        .map(|s| {
            (
                format!("{} {}", s.group, s.category.to_lowercase()),
                s.share_pct,
                format!("{:.1}%", s.share_pct),
            )
        })
        .collect()
}

fn report_markdown(
    inputs: &ReportInputs,
    incidence: &IncidenceTable,
    timing: &[TimingStat],
    structure: &[StructureCounts],
    deltas: &[DeltaRow],
    lpm: &Result<RegressionResult, FitError>,
    options: &ReportOptions,
) -> String {
    let mut md = String::new();
    let _ = writeln!(md, "# Standoff report\n");
    let _ = writeln!(
        md,
        "{} completed games, {} rejected.\n",
        incidence.overall.games,
        inputs.rejected.len()
    );

    let _ = writeln!(md, "## War incidence\n");
    let _ = writeln!(md, "| treatment | wars/games | rate |");
    let _ = writeln!(md, "|---|---|---|");
    for (treatment, rate) in &incidence.treatment_marginals {
        let _ = writeln!(
            md,
            "| {} | {}/{} | {}% |",
            treatment.as_str(),
            rate.wars,
            rate.games,
            rate.display()
        );
    }
    let _ = writeln!(md, "\n| model | wars/games | rate |");
    let _ = writeln!(md, "|---|---|---|");
    for (model, rate) in &incidence.model_marginals {
        let _ = writeln!(md, "| {} | {}/{} | {}% |", model, rate.wars, rate.games, rate.display());
    }

    let _ = writeln!(md, "\n## Timing\n");
    let _ = writeln!(md, "| treatment | war games | mean peaceful periods |");
    let _ = writeln!(md, "|---|---|---|");
    for stat in timing {
        let _ = writeln!(
            md,
            "| {} | {} | {} |",
            stat.treatment.as_str(),
            stat.war_games,
            stat.display_mean().unwrap_or_else(|| "no wars".to_string())
        );
    }

    let _ = writeln!(md, "\n## Attack structure\n");
    let _ = writeln!(md, "| treatment | unilateral | simultaneous (2) | simultaneous (3) |");
    let _ = writeln!(md, "|---|---|---|---|");
    for counts in structure {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            counts.treatment.as_str(),
            counts.unilateral,
            counts.simultaneous_2,
            counts.simultaneous_3
        );
    }

    if !deltas.is_empty() {
        let _ = writeln!(md, "\n## Within-model deltas vs baseline (pp)\n");
        let _ = writeln!(md, "| model | treatment | delta |");
        let _ = writeln!(md, "|---|---|---|");
        for d in deltas {
            let _ = writeln!(
                md,
                "| {} | {} | {:+.1} |",
                d.model_id,
                d.treatment.as_str(),
                d.delta_pp
            );
        }
    }

    let _ = writeln!(md, "\n## Linear probability model\n");
    match lpm {
        Ok(fit) => {
            let _ = writeln!(
                md,
                "n = {}, reference model = {}, covariance = {}, R^2 = {:.3}{}\n",
                fit.n,
                fit.reference_model,
                options.covariance,
                fit.r_squared,
                if fit.tss_zero { " (constant outcome)" } else { "" }
            );
            let _ = writeln!(md, "| regressor | coefficient (pp) | robust SE (pp) |");
            let _ = writeln!(md, "|---|---|---|");
            for name in &fit.regressors {
                let _ = writeln!(
                    md,
                    "| {} | {:+.2} | {:.2} |",
                    name,
                    fit.coefficient_pp(name).unwrap(),
                    fit.se_pp(name).unwrap()
                );
            }
        }
        Err(err) => {
            let _ = writeln!(md, "not estimable: {err}");
        }
    }

    for (title, shares) in [
        ("Reasoning category shares", &inputs.reasoning_shares),
        ("Message category shares", &inputs.message_shares),
    ] {
        if shares.is_empty() {
            continue;
        }
        let _ = writeln!(md, "\n## {title}\n");
        let _ = writeln!(md, "| group | category | share | source |");
        let _ = writeln!(md, "|---|---|---|---|");
        for share in shares.iter() {
            let _ = writeln!(
                md,
                "| {} | {} | {:.1}% | {} |",
                share.group, share.category, share.share_pct, share.source
            );
        }
    }
    md
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bar chart with the numeric value as a text label beside each
/// bar, so figures diff like tables. Handles negative values with a zero
/// line.
fn svg_bar_chart(title: &str, rows: &[(String, f64, String)]) -> String {
    const WIDTH: f64 = 760.0;
    const LABEL_W: f64 = 260.0;
    const VALUE_W: f64 = 90.0;
    const ROW_H: f64 = 28.0;
    const TOP: f64 = 48.0;

    let height = TOP + rows.len() as f64 * ROW_H + 16.0;
    let plot_w = WIDTH - LABEL_W - VALUE_W;
    let min_v = rows.iter().map(|r| r.1).fold(0.0_f64, f64::min);
    let max_v = rows.iter().map(|r| r.1).fold(0.0_f64, f64::max);
    let span = (max_v - min_v).max(1e-9);
    let x_of = |v: f64| LABEL_W + (v - min_v) / span * plot_w;
    let zero_x = x_of(0.0);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(
        svg,
        r#"  <text x="12" y="28" font-size="16" font-weight="bold">{}</text>"#,
        xml_escape(title)
    );
    let _ = writeln!(
        svg,
        r##"  <line x1="{zero_x:.1}" y1="{TOP}" x2="{zero_x:.1}" y2="{:.1}" stroke="#999" stroke-width="1"/>"##,
        height - 12.0
    );
    for (i, (label, value, display)) in rows.iter().enumerate() {
        let y = TOP + i as f64 * ROW_H;
        let x = x_of(*value);
        let (bar_x, bar_w) = if *value >= 0.0 {
            (zero_x, x - zero_x)
        } else {
            (x, zero_x - x)
        };
        let _ = writeln!(
            svg,
            r#"  <text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{}</text>"#,
            LABEL_W - 8.0,
            y + 18.0,
            xml_escape(label)
        );
        let _ = writeln!(
            svg,
            r##"  <rect x="{bar_x:.1}" y="{:.1}" width="{:.1}" height="18" fill="#4878a8"/>"##,
            y + 4.0,
            bar_w.max(0.5)
        );
        let text_x = bar_x + bar_w + 6.0;
        let _ = writeln!(
            svg,
            r#"  <text x="{text_x:.1}" y="{:.1}" font-size="12">{}</text>"#,
            y + 18.0,
            xml_escape(display)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Emits all exhibits from the built-in replication dataset and checks the
/// emitted values against the published targets. Returns the list of
/// mismatches; an empty list is a pass.
pub fn replicate_paper(
    out_dir: &Path,
    options: &ReportOptions,
) -> Result<(ReportArtifacts, Vec<String>), ReportError> {
    let outcomes = paper_replication_dataset();
    let inputs = ReportInputs {
        outcomes,
        reasoning_shares: reported_reasoning_shares()
            .into_iter()
            .map(|(treatment, category, pct)| ShareRow {
                group: treatment.as_str().to_string(),
                category: category.as_str().to_string(),
                share_pct: pct,
                source: "reported",
            })
            .collect(),
        message_shares: reported_message_shares()
            .into_iter()
            .map(|(model, category, pct)| ShareRow {
                group: model.to_string(),
                category: category.as_str().to_string(),
                share_pct: pct,
                source: "reported",
            })
            .collect(),
        rejected: Vec::new(),
    };
    let artifacts = write_report(out_dir, &inputs, options)?;
    let failures = check_against_targets(&inputs.outcomes, &artifacts);
    Ok((artifacts, failures))
}

fn check_against_targets(outcomes: &[OutcomeRecord], artifacts: &ReportArtifacts) -> Vec<String> {
    let mut failures = Vec::new();
    let mut fail = |msg: String| failures.push(msg);

    for (treatment, want) in PAPER_TREATMENT_RATES {
        match artifacts
            .incidence
            .treatment_marginals
            .iter()
            .find(|(t, _)| *t == treatment)
        {
            Some((_, rate)) if rate.display() == want => {}
            Some((_, rate)) => fail(format!(
                "exhibit1 treatment {treatment}: got {}, want {want}",
                rate.display()
            )),
            None => fail(format!("exhibit1 treatment {treatment}: missing")),
        }
    }
    for (model, want) in PAPER_MODEL_RATES {
        match artifacts.incidence.model_marginals.iter().find(|(m, _)| m == model) {
            Some((_, rate)) if rate.display() == want => {}
            Some((_, rate)) => fail(format!(
                "exhibit1 model {model}: got {}, want {want}",
                rate.display()
            )),
            None => fail(format!("exhibit1 model {model}: missing")),
        }
    }

    for (treatment, want) in PAPER_TIMING_MEANS {
        match artifacts.timing.iter().find(|s| s.treatment == treatment) {
            Some(stat) => {
                let got = stat.display_mean().unwrap_or_else(|| "no wars".to_string());
                if got != want {
                    fail(format!("exhibit2 {treatment} mean: got {got}, want {want}"));
                }
            }
            None => fail(format!("exhibit2 {treatment}: missing")),
        }
    }

    for (treatment, want) in PAPER_STRUCTURE_COUNTS {
        match artifacts.structure.iter().find(|s| s.treatment == treatment) {
            Some(counts) => {
                let got = [counts.unilateral, counts.simultaneous_2, counts.simultaneous_3];
                if got != want {
                    fail(format!(
                        "exhibit3 {treatment}: got {got:?}, want {want:?}"
                    ));
                }
            }
            None => fail(format!("exhibit3 {treatment}: missing")),
        }
    }

    match &artifacts.lpm {
        Ok(fit) => {
            for (name, want) in PAPER_LPM_COEFF_PP {
                match fit.coefficient_pp(name) {
                    Some(got) if (got - want).abs() < 1e-9 => {}
                    Some(got) => fail(format!("exhibit6 {name}: got {got:.4}, want {want}")),
                    None => fail(format!("exhibit6 {name}: missing")),
                }
            }
            if (fit.r_squared - PAPER_R_SQUARED).abs() > PAPER_R_SQUARED_TOL {
                fail(format!(
                    "exhibit6 r_squared: got {:.4}, want {PAPER_R_SQUARED} +/- {PAPER_R_SQUARED_TOL}",
                    fit.r_squared
                ));
            }
            let some_variant_fits = HcVariant::ALL.into_iter().any(|variant| {
                PAPER_LPM_SE_BANDS_PP.into_iter().all(|(name, lo, hi)| {
                    fit.se_pp_for(variant, name)
                        .is_some_and(|se| (lo..=hi).contains(&se))
                })
            });
            if !some_variant_fits {
                fail("exhibit6 robust SEs: no HC variant lands in all published bands".to_string());
            }
        }
        Err(err) => fail(format!("exhibit6: fit failed: {err}")),
    }

    let loo = leave_one_model_out(outcomes);
    for (model, want) in PAPER_LOO_RATES {
        match loo.iter().find(|row| row.omitted_model == model) {
            Some(row) => {
                let got: Vec<String> = row.rates.iter().map(|(_, r)| r.display()).collect();
                if got != want {
                    fail(format!("robustness omit {model}: got {got:?}, want {want:?}"));
                }
            }
            None => fail(format!("robustness omit {model}: missing")),
        }
    }

    failures
}
