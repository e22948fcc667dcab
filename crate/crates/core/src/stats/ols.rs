//! War-incidence linear probability model. Ordinary least squares via
//! Householder QR with heteroskedasticity-robust standard errors (HC0 to
//! HC3). The design is an intercept, treatment dummies with baseline as the
//! reference category, and model dummies with a configurable reference.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coding::OutcomeRecord;
use crate::game::Treatment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HcVariant {
    Hc0,
    Hc1,
    Hc2,
    Hc3,
}

impl HcVariant {
    pub const ALL: [HcVariant; 4] = [HcVariant::Hc0, HcVariant::Hc1, HcVariant::Hc2, HcVariant::Hc3];

    pub fn as_str(self) -> &'static str {
        match self {
            HcVariant::Hc0 => "hc0",
            HcVariant::Hc1 => "hc1",
            HcVariant::Hc2 => "hc2",
            HcVariant::Hc3 => "hc3",
        }
    }
}

impl fmt::Display for HcVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str().to_uppercase())
    }
}

impl FromStr for HcVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hc0" => Ok(HcVariant::Hc0),
            "hc1" => Ok(HcVariant::Hc1),
            "hc2" => Ok(HcVariant::Hc2),
            "hc3" => Ok(HcVariant::Hc3),
            other => Err(format!("unknown covariance variant {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub covariance: HcVariant,
    /// Reference category for the model dummies. Defaults to the
    /// lexically first model in the data.
    pub reference_model: Option<String>,
}

impl Default for RegressionSpec {
    fn default() -> Self {
        RegressionSpec {
            covariance: HcVariant::Hc1,
            reference_model: None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("no outcome rows")]
    Empty,
    #[error("reference model {0:?} not present in the data")]
    UnknownReference(String),
    #[error("fewer rows than regressors: n={n}, k={k}")]
    TooFewRows { n: usize, k: usize },
    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    Singular { columns: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub regressors: Vec<String>,
    /// Probability scale; multiply by 100 for percentage points.
    pub coefficients: Vec<f64>,
    /// Standard errors under the requested covariance variant.
    pub robust_se: Vec<f64>,
    pub covariance: HcVariant,
    pub se_by_variant: Vec<(HcVariant, Vec<f64>)>,
    pub r_squared: f64,
    /// Outcome was constant, so R^2 is reported as a defined zero.
    pub tss_zero: bool,
    pub n: usize,
    pub n_models: usize,
    pub reference_model: String,
}

impl RegressionResult {
    fn index_of(&self, regressor: &str) -> Option<usize> {
        self.regressors.iter().position(|r| r == regressor)
    }

    pub fn coefficient(&self, regressor: &str) -> Option<f64> {
        Some(self.coefficients[self.index_of(regressor)?])
    }

    pub fn coefficient_pp(&self, regressor: &str) -> Option<f64> {
        Some(self.coefficient(regressor)? * 100.0)
    }

    pub fn se_pp(&self, regressor: &str) -> Option<f64> {
        Some(self.robust_se[self.index_of(regressor)?] * 100.0)
    }

    pub fn se_pp_for(&self, variant: HcVariant, regressor: &str) -> Option<f64> {
        let idx = self.index_of(regressor)?;
        let (_, ses) = self.se_by_variant.iter().find(|(v, _)| *v == variant)?;
        Some(ses[idx] * 100.0)
    }
}

pub fn treatment_regressor(treatment: Treatment) -> String {
    format!("treatment:{}", treatment.as_str())
}

pub fn model_regressor(model_id: &str) -> String {
    format!("model:{model_id}")
}

pub fn fit_lpm(outcomes: &[OutcomeRecord], spec: &RegressionSpec) -> Result<RegressionResult, FitError> {
    if outcomes.is_empty() {
        return Err(FitError::Empty);
    }
    let models: BTreeSet<&str> = outcomes.iter().map(|r| r.model_id.as_str()).collect();
    let reference = match &spec.reference_model {
        Some(name) => {
            if !models.contains(name.as_str()) {
                return Err(FitError::UnknownReference(name.clone()));
            }
            name.clone()
        }
        None => models.first().expect("non-empty").to_string(),
    };
    let treatments_present: BTreeSet<Treatment> = outcomes.iter().map(|r| r.treatment).collect();
    // baseline is the reference; on baseline-free subsets fall back to the
    // earliest treatment present so the intercept stays identified
    let reference_treatment = *treatments_present.first().expect("non-empty");

    let mut names = vec!["intercept".to_string()];
    let mut dummy_treatments = Vec::new();
    for treatment in Treatment::ALL {
        if treatment != reference_treatment && treatments_present.contains(&treatment) {
            names.push(treatment_regressor(treatment));
            dummy_treatments.push(treatment);
        }
    }
    let mut dummy_models = Vec::new();
    for model in &models {
        if *model != reference {
            names.push(model_regressor(model));
            dummy_models.push(model.to_string());
        }
    }

    let k = names.len();
    let n = outcomes.len();
    if n <= k {
        return Err(FitError::TooFewRows { n, k });
    }
    let mut x = vec![vec![0.0; k]; n];
    let mut y = vec![0.0; n];
    for (i, rec) in outcomes.iter().enumerate() {
        x[i][0] = 1.0;
        for (j, treatment) in dummy_treatments.iter().enumerate() {
            if rec.treatment == *treatment {
                x[i][1 + j] = 1.0;
            }
        }
        for (j, model) in dummy_models.iter().enumerate() {
            if rec.model_id == *model {
                x[i][1 + dummy_treatments.len() + j] = 1.0;
            }
        }
        y[i] = f64::from(u8::from(rec.war_started));
    }

    let core = solve_ols(&names, &x, &y)?;

    let mut se_by_variant = Vec::with_capacity(HcVariant::ALL.len());
    for variant in HcVariant::ALL {
        se_by_variant.push((variant, core.robust_se(variant)));
    }
    let robust_se = se_by_variant
        .iter()
        .find(|(v, _)| *v == spec.covariance)
        .map(|(_, se)| se.clone())
        .expect("all variants computed");

    Ok(RegressionResult {
        regressors: names,
        coefficients: core.beta.clone(),
        robust_se,
        covariance: spec.covariance,
        se_by_variant,
        r_squared: core.r_squared,
        tss_zero: core.tss_zero,
        n,
        n_models: models.len(),
        reference_model: reference,
    })
}

/// Fitted pieces shared by every covariance variant.
struct OlsCore {
    x: Vec<Vec<f64>>,
    beta: Vec<f64>,
    residuals: Vec<f64>,
    leverage: Vec<f64>,
    xtx_inv: Vec<Vec<f64>>,
    r_squared: f64,
    tss_zero: bool,
}

impl OlsCore {
    fn robust_se(&self, variant: HcVariant) -> Vec<f64> {
        let n = self.x.len();
        let k = self.beta.len();
        let mut meat = vec![vec![0.0; k]; k];
        for i in 0..n {
            let weight = match variant {
                HcVariant::Hc0 => 1.0,
                HcVariant::Hc1 => n as f64 / (n - k) as f64,
                HcVariant::Hc2 => 1.0 / (1.0 - self.leverage[i]),
                HcVariant::Hc3 => 1.0 / (1.0 - self.leverage[i]).powi(2),
            };
            let scale = weight * self.residuals[i] * self.residuals[i];
            for a in 0..k {
                if self.x[i][a] == 0.0 {
                    continue;
                }
                for b in 0..k {
                    meat[a][b] += scale * self.x[i][a] * self.x[i][b];
                }
            }
        }
        // cov = (X'X)^-1 meat (X'X)^-1
        let mut half = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in 0..k {
                let mut acc = 0.0;
                for m in 0..k {
                    acc += self.xtx_inv[a][m] * meat[m][b];
                }
                half[a][b] = acc;
            }
        }
        let mut se = vec![0.0; k];
        for (j, out) in se.iter_mut().enumerate() {
            let mut acc = 0.0;
            for m in 0..k {
                acc += half[j][m] * self.xtx_inv[m][j];
            }
            *out = acc.max(0.0).sqrt();
        }
        se
    }
}

fn solve_ols(names: &[String], x: &[Vec<f64>], y: &[f64]) -> Result<OlsCore, FitError> {
    let n = x.len();
    let k = names.len();
    let col_norms: Vec<f64> = (0..k)
        .map(|j| x.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt())
        .collect();

    // Householder QR, transforming y alongside the design.
    let mut a: Vec<Vec<f64>> = x.to_vec();
    let mut z: Vec<f64> = y.to_vec();
    for j in 0..k {
        let norm = a.iter().skip(j).map(|row| row[j] * row[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[j][j] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..n).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let v_norm2: f64 = v.iter().map(|t| t * t).sum();
        if v_norm2 > 0.0 {
            for c in j + 1..k {
                let dot: f64 = (j..n).map(|i| v[i - j] * a[i][c]).sum();
                let s = 2.0 * dot / v_norm2;
                for i in j..n {
                    a[i][c] -= s * v[i - j];
                }
            }
            let dot: f64 = (j..n).map(|i| v[i - j] * z[i]).sum();
            let s = 2.0 * dot / v_norm2;
            for i in j..n {
                z[i] -= s * v[i - j];
            }
        }
        a[j][j] = alpha;
        for row in a.iter_mut().take(n).skip(j + 1) {
            row[j] = 0.0;
        }
    }

    let collinear: Vec<String> = (0..k)
        .filter(|&j| a[j][j].abs() <= 1e-8 * col_norms[j].max(1.0))
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(FitError::Singular { columns: collinear });
    }

    let r: Vec<Vec<f64>> = (0..k).map(|i| a[i][..k].to_vec()).collect();
    let beta = back_substitute(&r, &z[..k]);

    // R^-1 column by column, then (X'X)^-1 = R^-1 R^-T.
    let mut r_inv = vec![vec![0.0; k]; k];
    for c in 0..k {
        let mut e = vec![0.0; k];
        e[c] = 1.0;
        let col = back_substitute(&r, &e);
        for (i, value) in col.into_iter().enumerate() {
            r_inv[i][c] = value;
        }
    }
    let mut xtx_inv = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            xtx_inv[i][j] = (0..k).map(|m| r_inv[i][m] * r_inv[j][m]).sum();
        }
    }

    let residuals: Vec<f64> = (0..n)
        .map(|i| y[i] - dot(&x[i], &beta))
        .collect();
    // Leverage h_i = ||R^-T x_i||^2 via one triangular solve per row.
    let leverage: Vec<f64> = x
        .iter()
        .map(|row| {
            let t = forward_substitute_transposed(&r, &row[..k]);
            t.iter().map(|v| v * v).sum()
        })
        .collect();

    let y_bar = y.iter().sum::<f64>() / n as f64;
    let tss: f64 = y.iter().map(|v| (v - y_bar) * (v - y_bar)).sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let (r_squared, tss_zero) = if tss == 0.0 {
        (0.0, true)
    } else {
        ((1.0 - rss / tss).clamp(0.0, 1.0), false)
    };

    Ok(OlsCore {
        x: x.to_vec(),
        beta,
        residuals,
        leverage,
        xtx_inv,
        r_squared,
        tss_zero,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves R t = b for upper-triangular R.
fn back_substitute(r: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut t = vec![0.0; k];
    for j in (0..k).rev() {
        let tail: f64 = (j + 1..k).map(|m| r[j][m] * t[m]).sum();
        t[j] = (b[j] - tail) / r[j][j];
    }
    t
}

/// Solves R^T t = b; R^T is lower triangular so this runs forward.
fn forward_substitute_transposed(r: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = b.len();
    let mut t = vec![0.0; k];
    for j in 0..k {
        let head: f64 = (0..j).map(|m| r[m][j] * t[m]).sum();
        t[j] = (b[j] - head) / r[j][j];
    }
    t
}
