//! Decision rules: causal (CL), CVaR-gated causal, CVaR-gated causal with the
//! forward-looking check, and prediction only.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::CustomerRecord;
use crate::error::{Error, Result};
use crate::learners::{fit_regressor, rmse, FittedRegressor, LearnerSpec};
use crate::matrix::{std_dev, Matrix};
use crate::metalearners::CateModel;
use crate::risk::{cvar, BootstrapEnsemble};
use crate::rng::stream;
use crate::treatments::DosagePartition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "CL")]
    Cl,
    #[serde(rename = "CL_CVAR")]
    ClCvar,
    #[serde(rename = "CL_CVAR_FL")]
    ClCvarFl,
    #[serde(rename = "PREDICT_ONLY")]
    PredictOnly,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::PredictOnly, Criterion::Cl, Criterion::ClCvar, Criterion::ClCvarFl];

    pub fn code(self) -> &'static str {
        match self {
            Criterion::Cl => "CL",
            Criterion::ClCvar => "CL_CVAR",
            Criterion::ClCvarFl => "CL_CVAR_FL",
            Criterion::PredictOnly => "PREDICT_ONLY",
        }
    }

    /// Command-line spelling.
    pub fn flag(self) -> &'static str {
        match self {
            Criterion::Cl => "cl",
            Criterion::ClCvar => "cl-cvar",
            Criterion::ClCvarFl => "cl-cvar-fl",
            Criterion::PredictOnly => "predict-only",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL
            .into_iter()
            .find(|c| c.code() == s || c.flag() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDecision {
    pub id: u64,
    pub criterion: Criterion,
    pub chosen_level: usize,
    pub chosen_dosage: f64,
    /// Value of each treatment level `1..=k`; `None` where undefined.
    pub values: Vec<Option<f64>>,
    pub y_r: Option<f64>,
    pub y_p_hat: Option<f64>,
}

/// Level with the largest value, control fixed at 0. Values are indexed by
/// level minus one and levels are in ascending dosage, so a strict
/// comparison resolves ties towards the smaller dosage.
pub fn argmax_level(values: &[Option<f64>]) -> usize {
    let mut best = (0usize, 0.0f64);
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if v > best.1 {
                best = (i + 1, v);
            }
        }
    }
    best.0
}

fn dosage_of(dosages: &[f64], level: usize) -> f64 {
    if level == 0 {
        0.0
    } else {
        dosages[level - 1]
    }
}

fn decision(id: u64, criterion: Criterion, level: usize, dosages: &[f64], values: Vec<Option<f64>>) -> PolicyDecision {
    PolicyDecision {
        id,
        criterion,
        chosen_level: level,
        chosen_dosage: dosage_of(dosages, level),
        values,
        y_r: None,
        y_p_hat: None,
    }
}

/// Gated effect estimate of every level; `models[j - 1]` belongs to level `j`.
pub fn cate_values(models: &[Option<CateModel>], x: &[f64]) -> Result<Vec<Option<f64>>> {
    models
        .iter()
        .map(|m| match m {
            Some(m) => Ok(m.predict_cate(x)?.value()),
            None => Ok(None),
        })
        .collect()
}

/// Gated bootstrap CVaR of every level.
pub fn cvar_values(ensembles: &[Option<BootstrapEnsemble>], x: &[f64], p: f64) -> Result<Vec<Option<f64>>> {
    ensembles
        .iter()
        .map(|e| match e {
            Some(e) => {
                if !e.gate().accepts(e.gate().predict_row(x)) {
                    return Ok(None);
                }
                Ok(Some(cvar(&e.distribution(x)?.values, p)?))
            }
            None => Ok(None),
        })
        .collect()
}

/// `dosages[j - 1]` is the dosage of level `j`.
pub fn recommend_cl(id: u64, effects: Vec<Option<f64>>, dosages: &[f64]) -> PolicyDecision {
    let level = argmax_level(&effects);
    decision(id, Criterion::Cl, level, dosages, effects)
}

pub fn recommend_cl_cvar(id: u64, cvars: Vec<Option<f64>>, dosages: &[f64]) -> PolicyDecision {
    let level = argmax_level(&cvars);
    decision(id, Criterion::ClCvar, level, dosages, cvars)
}

/// Keeps the upstream increase only if the predicted post-decision profit at
/// that level beats the observed pretreatment profit.
pub fn recommend_cl_cvar_fl(upstream: &PolicyDecision, y_r: f64, fm: &ForwardModel, x: &[f64]) -> Result<PolicyDecision> {
    if upstream.criterion != Criterion::ClCvar {
        return Err(Error::Domain(format!(
            "forward-looking check needs a {} decision, got {}",
            Criterion::ClCvar,
            upstream.criterion
        )));
    }
    let mut d = upstream.clone();
    d.criterion = Criterion::ClCvarFl;
    d.y_r = Some(y_r);
    if upstream.chosen_level == 0 {
        return Ok(d);
    }
    let y_p = fm.predict(x, upstream.chosen_dosage)?;
    d.y_p_hat = Some(y_p);
    if y_r >= y_p {
        d.chosen_level = 0;
        d.chosen_dosage = 0.0;
    }
    Ok(d)
}

/// Largest predicted post-decision profit over the defined levels, taken
/// only if it strictly exceeds `y_r`.
pub fn recommend_prediction_only(
    id: u64,
    fm: &ForwardModel,
    x: &[f64],
    dosages: &[Option<f64>],
    y_r: f64,
) -> Result<PolicyDecision> {
    let mut preds = Vec::with_capacity(dosages.len());
    for d in dosages {
        preds.push(match d {
            Some(d) => Some(fm.predict(x, *d)?),
            None => None,
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in preds.iter().enumerate() {
        if let Some(p) = *p {
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i + 1, p));
            }
        }
    }
    let (level, y_p) = match best {
        Some((l, p)) if p > y_r => (l, Some(p)),
        Some((_, p)) => (0, Some(p)),
        None => (0, None),
    };
    let flat: Vec<f64> = dosages.iter().map(|d| d.unwrap_or(f64::NAN)).collect();
    let mut d = decision(id, Criterion::PredictOnly, level, &flat, preds);
    d.y_r = Some(y_r);
    d.y_p_hat = y_p;
    Ok(d)
}

/// Regressor of the post-decision profit on pretreatment features plus the
/// dosage of the level applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardModel {
    pub regressor: FittedRegressor,
    /// Held-out root mean squared error.
    pub rmse: f64,
    /// Standard deviation of the held-out targets.
    pub target_sd: f64,
    pub n_train: usize,
    pub n_valid: usize,
}

pub const FORWARD_VALIDATION_SHARE: f64 = 0.2;

pub fn default_forward_learner(seed: u64) -> LearnerSpec {
    LearnerSpec::gbm(200, 0.1, 4).with_seed(seed)
}

fn forward_row(features: &[f64], dosage: f64) -> Vec<f64> {
    let mut r = features.to_vec();
    r.push(dosage);
    r
}

impl ForwardModel {
    pub fn predict(&self, features: &[f64], dosage: f64) -> Result<f64> {
        let row = forward_row(features, dosage);
        let n = self.regressor.n_features();
        if row.len() != n {
            return Err(Error::Dimension {
                expected: n - 1,
                got: features.len(),
            });
        }
        Ok(self.regressor.predict_row(&row))
    }

    pub fn relative_rmse(&self) -> f64 {
        if self.target_sd > 0.0 {
            self.rmse / self.target_sd
        } else if self.rmse == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Fits on a seeded share of the records and reports the error on the rest.
pub fn fit_forward_model(
    records: &[CustomerRecord],
    partition: &DosagePartition,
    learner: &LearnerSpec,
    seed: u64,
) -> Result<ForwardModel> {
    let mut rows = Vec::with_capacity(records.len());
    let mut y = Vec::with_capacity(records.len());
    for r in records {
        let level = partition.assign_level(r.observed_dosage)?;
        let dosage = partition
            .dosage(level)
            .ok_or_else(|| Error::Data(format!("record {} falls in empty level {level}", r.id)))?;
        rows.push(forward_row(&r.features(), dosage));
        y.push(r.ep_m6);
    }
    fit_forward_rows(rows, y, learner, seed)
}

pub(crate) fn fit_forward_rows(rows: Vec<Vec<f64>>, y: Vec<f64>, learner: &LearnerSpec, seed: u64) -> Result<ForwardModel> {
    if rows.len() < 5 {
        return Err(Error::Data(format!("{} training records for the forward model", rows.len())));
    }
    let n = rows.len();
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut stream(seed, 0));
    let n_valid = ((n as f64 * FORWARD_VALIDATION_SHARE).round() as usize).clamp(1, n - 1);
    let (valid, train) = order.split_at(n_valid);
    let mut train = train.to_vec();
    let mut valid = valid.to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    let x = Matrix::from_rows(&rows)?;
    let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| y[i]).collect() };
    let (yt, yv) = (pick(&train), pick(&valid));
    let regressor = if yt.iter().all(|&v| v == yt[0]) {
        // constant labels: a depth-0 tree is the exact constant predictor
        fit_regressor(&LearnerSpec::tree(0, 1), &x.select_rows(&train), &yt)?
    } else {
        fit_regressor(learner, &x.select_rows(&train), &yt)?
    };
    let xv = x.select_rows(&valid);
    let target_sd = std_dev(&yv);
    Ok(ForwardModel {
        rmse: rmse(&regressor, &xv, &yv)?,
        regressor,
        target_sd,
        n_train: train.len(),
        n_valid: valid.len(),
    })
}

pub const DECISION_COLUMNS: [&str; 7] = [
    "id",
    "criterion",
    "chosen_level",
    "chosen_dosage",
    "value_per_level_json",
    "y_r",
    "y_p_hat",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_decisions(decisions: &[PolicyDecision], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(DECISION_COLUMNS)?;
    for d in decisions {
        w.write_record([
            d.id.to_string(),
            d.criterion.code().to_string(),
            d.chosen_level.to_string(),
            d.chosen_dosage.to_string(),
            serde_json::to_string(&d.values)?,
            opt(d.y_r),
            opt(d.y_p_hat),
        ])?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_decisions(path: &Path) -> Result<Vec<PolicyDecision>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    })?;
    let header = r.headers()?.clone();
    if header.iter().ne(DECISION_COLUMNS) {
        return Err(Error::Cell {
            row: 0,
            column: "header".into(),
            message: format!("expected {}", DECISION_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize, message: String| Error::Cell {
            row,
            column: DECISION_COLUMNS[c].into(),
            message,
        };
        let num = |c: usize| -> Result<f64> { rec[c].parse::<f64>().map_err(|e| cell(c, e.to_string())) };
        let opt_num = |c: usize| -> Result<Option<f64>> {
            if rec[c].is_empty() {
                Ok(None)
            } else {
                num(c).map(Some)
            }
        };
        out.push(PolicyDecision {
            id: rec[0].parse().map_err(|e: std::num::ParseIntError| cell(0, e.to_string()))?,
            criterion: rec[1].parse().map_err(|_| cell(1, format!("unknown criterion {:?}", &rec[1])))?,
            chosen_level: rec[2].parse().map_err(|e: std::num::ParseIntError| cell(2, e.to_string()))?,
            chosen_dosage: num(3)?,
            values: serde_json::from_str(&rec[4]).map_err(|e| cell(4, e.to_string()))?,
            y_r: opt_num(5)?,
            y_p_hat: opt_num(6)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
