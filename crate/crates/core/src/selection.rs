//! Cross-validated PEHE estimates and per-level model ranking.
//!
//! Each validation fold gets its own plug-in distribution (forest outcome
//! models per arm plus a logistic propensity). The candidate is refit on the
//! complement and scored against the plug-in effect on the fold.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{fit_classifier, fit_regressor, FittedClassifier, FittedRegressor, LearnerSpec};
use crate::matrix::Matrix;
use crate::metalearners::{fit_cate, CateMethodSpec};
use crate::rng::{stream, sub_seed};
use crate::treatments::OverlapDataset;

pub const DEFAULT_FOLDS: usize = 5;
/// Minimum rows of each arm in a validation fold.
pub const MIN_FOLD_ARM: usize = 30;
/// Resamples used by [`CorrectionOrder::BootstrapDebiased`].
pub const DEBIAS_REPLICATES: usize = 8;
/// Parts used to cross-fit the plug-in inside a validation fold.
pub const PLUGIN_CROSS_FIT: usize = 5;
/// Propensity clip inside the correction term.
const PLUGIN_PROPENSITY_CLIP: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionOrder {
    /// Pure plug-in loss.
    PlugIn,
    /// Plug-in loss plus the first-order influence-function term.
    FirstOrder,
    /// First-order estimate minus its bootstrap bias. A stand-in for
    /// higher-order corrections, not a closed form.
    BootstrapDebiased,
}

impl CorrectionOrder {
    pub fn label(self) -> &'static str {
        match self {
            CorrectionOrder::PlugIn => "plug-in",
            CorrectionOrder::FirstOrder => "first-order",
            CorrectionOrder::BootstrapDebiased => "bootstrap-debiased",
        }
    }
}

/// Synthetic stand-in for the data distribution, fitted on one fold.
#[derive(Debug, Clone)]
pub struct PluginDistribution {
    pub mu0: FittedRegressor,
    pub mu1: FittedRegressor,
    pub g: FittedClassifier,
    /// Rows of the fold the components were fitted on.
    pub rows: Vec<usize>,
}

/// Outcome learners the plug-in chooses from, per arm, by inner
/// cross-validation.
pub fn plugin_outcome_learners(seed: u64) -> Vec<LearnerSpec> {
    vec![LearnerSpec::ridge(1.0), LearnerSpec::forest(40, 8, 10, 0.5, seed)]
}

const PLUGIN_INNER_FOLDS: usize = 3;

/// Fits the candidate with the lowest inner cross-validated squared error;
/// ties keep the earlier candidate.
fn fit_best_regressor(candidates: &[LearnerSpec], x: &Matrix, y: &[f64], seed: u64) -> Result<FittedRegressor> {
    if candidates.len() == 1 || y.len() < 2 * PLUGIN_INNER_FOLDS {
        return fit_regressor(&candidates[0], x, y);
    }
    let labels = crate::rng::fold_ids(y.len(), PLUGIN_INNER_FOLDS, seed);
    let mut best: Option<(f64, usize)> = None;
    for (c, spec) in candidates.iter().enumerate() {
        let mut sse = 0.0;
        for f in 0..PLUGIN_INNER_FOLDS {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| labels[i] == f);
            let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let m = fit_regressor(spec, &x.select_rows(&train), &yt)?;
            sse += val.iter().map(|&i| (m.predict_row(x.row(i)) - y[i]).powi(2)).sum::<f64>();
        }
        if best.is_none_or(|(b, _)| sse < b) {
            best = Some((sse, c));
        }
    }
    fit_regressor(&candidates[best.expect("non-empty").1], x, y)
}

impl PluginDistribution {
    pub fn fit(data: &OverlapDataset, rows: &[usize], seed: u64) -> Result<Self> {
        let (r0, r1): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| !data.treated()[i]);
        if r0.len() < 2 || r1.len() < 2 {
            return Err(Error::Data(format!(
                "plug-in fit needs both arms, got {} control and {} treated rows",
                r0.len(),
                r1.len()
            )));
        }
        let x = data.features();
        let y = data.outcomes();
        let ys = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| y[i]).collect() };
        let learners = plugin_outcome_learners(sub_seed(seed, 0));
        let mu0 = fit_best_regressor(&learners, &x.select_rows(&r0), &ys(&r0), sub_seed(seed, 2))?;
        let mu1 = fit_best_regressor(&learners, &x.select_rows(&r1), &ys(&r1), sub_seed(seed, 3))?;
        let t: Vec<bool> = rows.iter().map(|&i| data.treated()[i]).collect();
        let g = fit_classifier(&LearnerSpec::logistic(1.0), &x.select_rows(rows), &t)?;
        Ok(Self {
            mu0,
            mu1,
            g,
            rows: rows.to_vec(),
        })
    }

    pub fn tau(&self, row: &[f64]) -> f64 {
        self.mu1.predict_row(row) - self.mu0.predict_row(row)
    }
}

/// Plug-in predictions `(mu0, mu1, g)` for each row of a validation fold.
#[derive(Debug, Clone)]
struct FoldPlugin {
    rows: Vec<usize>,
    mu0: Vec<f64>,
    mu1: Vec<f64>,
    g: Vec<f64>,
}

impl FoldPlugin {
    fn from_fit(p: &PluginDistribution, data: &OverlapDataset, rows: &[usize]) -> Self {
        let x = data.features();
        let mut out = Self {
            rows: rows.to_vec(),
            mu0: Vec::with_capacity(rows.len()),
            mu1: Vec::with_capacity(rows.len()),
            g: Vec::with_capacity(rows.len()),
        };
        for &i in rows {
            let r = x.row(i);
            out.mu0.push(p.mu0.predict_row(r));
            out.mu1.push(p.mu1.predict_row(r));
            out.g.push(p.g.predict_row(r));
        }
        out
    }

    /// Components fitted on the whole fold and evaluated in-sample.
    fn in_sample(data: &OverlapDataset, rows: &[usize], seed: u64) -> Result<Self> {
        Ok(Self::from_fit(&PluginDistribution::fit(data, rows, seed)?, data, rows))
    }

    /// Components cross-fitted over `k` parts of the fold. Repeated rows
    /// (from a resample) always land in the same part.
    fn cross_fitted(data: &OverlapDataset, rows: &[usize], k: usize, seed: u64) -> Result<Self> {
        let mut unique = rows.to_vec();
        unique.sort_unstable();
        unique.dedup();
        let labels = stratified_folds(data, &unique, k, sub_seed(seed, 5));
        let part = |i: usize| labels[unique.binary_search(&i).expect("row present")];
        let mut out = Self {
            rows: rows.to_vec(),
            mu0: vec![0.0; rows.len()],
            mu1: vec![0.0; rows.len()],
            g: vec![0.0; rows.len()],
        };
        for h in 0..k {
            let fit_rows: Vec<usize> = rows.iter().copied().filter(|&i| part(i) != h).collect();
            let p = PluginDistribution::fit(data, &fit_rows, sub_seed(seed, 10 + h as u64))?;
            for (pos, &i) in rows.iter().enumerate().filter(|(_, &i)| part(i) == h) {
                let r = data.features().row(i);
                out.mu0[pos] = p.mu0.predict_row(r);
                out.mu1[pos] = p.mu1.predict_row(r);
                out.g[pos] = p.g.predict_row(r);
            }
        }
        Ok(out)
    }

    fn plug_in_loss(&self, tau_hat: &[f64]) -> f64 {
        mean(self.rows.iter().enumerate().map(|(pos, &i)| (tau_hat[i] - (self.mu1[pos] - self.mu0[pos])).powi(2)))
    }

    /// Plug-in loss plus the one-step term
    /// `2 (tau~ - tau^) [T / g~ (Y - mu~1) - (1 - T) / (1 - g~) (Y - mu~0)]`.
    fn first_order(&self, data: &OverlapDataset, tau_hat: &[f64]) -> f64 {
        mean(self.rows.iter().enumerate().map(|(pos, &i)| {
            let tau_tilde = self.mu1[pos] - self.mu0[pos];
            let g = self.g[pos].clamp(PLUGIN_PROPENSITY_CLIP, 1.0 - PLUGIN_PROPENSITY_CLIP);
            let y = data.outcomes()[i];
            let psi = if data.treated()[i] {
                (y - self.mu1[pos]) / g
            } else {
                -(y - self.mu0[pos]) / (1.0 - g)
            };
            (tau_hat[i] - tau_tilde).powi(2) + 2.0 * (tau_tilde - tau_hat[i]) * psi
        }))
    }
}

fn stratified_resample(data: &OverlapDataset, rows: &[usize], rng: &mut crate::rng::Rng) -> Vec<usize> {
    use rand::Rng as _;
    let (r0, r1): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| !data.treated()[i]);
    let mut out = Vec::with_capacity(rows.len());
    for arm in [&r0, &r1] {
        for _ in 0..arm.len() {
            out.push(arm[rng.random_range(0..arm.len())]);
        }
    }
    out
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Fold labels for `rows`, dealt separately within each arm so every fold
/// keeps the treated share.
fn stratified_folds(data: &OverlapDataset, rows: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed, 0);
    let mut labels = vec![0; rows.len()];
    let mut next = 0usize;
    for arm in [false, true] {
        let mut pos: Vec<usize> = (0..rows.len()).filter(|&p| data.treated()[rows[p]] == arm).collect();
        pos.shuffle(&mut rng);
        for p in pos {
            labels[p] = next % folds;
            next += 1;
        }
    }
    labels
}

/// Plug-in components of every validation fold, fitted once and shared by
/// all candidates.
pub struct PeheValidator<'a> {
    data: &'a OverlapDataset,
    pub labels: Vec<usize>,
    pub folds: usize,
    pub order: CorrectionOrder,
    plugins: Vec<FoldPlugin>,
    /// Per fold, the resampled plug-ins of the bootstrap-debiased variant.
    resampled: Vec<Vec<FoldPlugin>>,
}

impl<'a> PeheValidator<'a> {
    pub fn new(data: &'a OverlapDataset, folds: usize, order: CorrectionOrder, seed: u64) -> Result<Self> {
        let labels = validation_folds(data, folds, seed)?;
        let mut plugins = Vec::with_capacity(folds);
        let mut resampled = Vec::with_capacity(folds);
        for f in 0..folds {
            let rows: Vec<usize> = (0..data.len()).filter(|&i| labels[i] == f).collect();
            let fseed = sub_seed(seed, 100 + f as u64);
            match order {
                CorrectionOrder::PlugIn => plugins.push(FoldPlugin::in_sample(data, &rows, fseed)?),
                CorrectionOrder::FirstOrder | CorrectionOrder::BootstrapDebiased => {
                    plugins.push(FoldPlugin::cross_fitted(data, &rows, PLUGIN_CROSS_FIT, fseed)?)
                }
            }
            let mut reps = Vec::new();
            if order == CorrectionOrder::BootstrapDebiased {
                let mut rng = stream(fseed, 77);
                for b in 0..DEBIAS_REPLICATES {
                    let resample = stratified_resample(data, &rows, &mut rng);
                    if let Ok(p) =
                        FoldPlugin::cross_fitted(data, &resample, PLUGIN_CROSS_FIT, sub_seed(fseed, 1000 + b as u64))
                    {
                        reps.push(p);
                    }
                }
            }
            resampled.push(reps);
        }
        Ok(Self {
            data,
            labels,
            folds,
            order,
            plugins,
            resampled,
        })
    }

    /// Squared-error estimate of each fold for effects `tau_hat` (indexed
    /// like the data).
    pub fn fold_estimates(&self, tau_hat: &[f64]) -> Vec<f64> {
        self.plugins
            .iter()
            .zip(&self.resampled)
            .map(|(p, reps)| match self.order {
                CorrectionOrder::PlugIn => p.plug_in_loss(tau_hat),
                CorrectionOrder::FirstOrder => p.first_order(self.data, tau_hat),
                CorrectionOrder::BootstrapDebiased => {
                    let e = p.first_order(self.data, tau_hat);
                    if reps.is_empty() {
                        e
                    } else {
                        2.0 * e - mean(reps.iter().map(|r| r.first_order(self.data, tau_hat)))
                    }
                }
            })
            .collect()
    }

    pub fn score(&self, tau_hat: &[f64]) -> PeheEstimate {
        PeheEstimate::from_squared(&self.fold_estimates(tau_hat))
    }

    pub fn out_of_fold_effects(&self, spec: &CateMethodSpec) -> Result<Vec<f64>> {
        out_of_fold_effects(spec, self.data, &self.labels, self.folds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeheEstimate {
    /// Mean over folds of the per-fold root PEHE.
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub sd: f64,
    pub per_fold: Vec<f64>,
    /// Mean of the unclamped squared-error estimates; separates candidates
    /// whose root estimates are all clamped at zero.
    pub raw_squared: f64,
}

impl PeheEstimate {
    fn from_squared(squared: &[f64]) -> Self {
        let per_fold: Vec<f64> = squared.iter().map(|e| e.max(0.0).sqrt()).collect();
        let n = per_fold.len() as f64;
        let m = per_fold.iter().sum::<f64>() / n;
        let var = if per_fold.len() > 1 {
            per_fold.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            mean: m,
            sd: var.sqrt(),
            per_fold,
            raw_squared: squared.iter().sum::<f64>() / squared.len() as f64,
        }
    }
}

/// Effect predictions for every row of `data`, each from a model fitted
/// without the row's fold.
pub fn out_of_fold_effects(spec: &CateMethodSpec, data: &OverlapDataset, labels: &[usize], folds: usize) -> Result<Vec<f64>> {
    let mut tau_hat = vec![0.0; data.len()];
    for f in 0..folds {
        let (val, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| labels[i] == f);
        let model = fit_cate(spec, &data.subset(&train))?;
        let pred = model.predict_effects(&data.features().select_rows(&val))?;
        for (&i, p) in val.iter().zip(pred) {
            tau_hat[i] = p;
        }
    }
    Ok(tau_hat)
}

/// Fold labels used by [`estimate_pehe`]; checks the arm counts.
pub fn validation_folds(data: &OverlapDataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("folds = {folds}, need at least 2")));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let labels = stratified_folds(data, &all, folds, sub_seed(seed, 1));
    for f in 0..folds {
        let (mut n0, mut n1) = (0, 0);
        for i in (0..data.len()).filter(|&i| labels[i] == f) {
            if data.treated()[i] {
                n1 += 1;
            } else {
                n0 += 1;
            }
        }
        if n0 < MIN_FOLD_ARM || n1 < MIN_FOLD_ARM {
            return Err(Error::Data(format!(
                "level {} validation fold {f} has {n1} treated and {n0} control rows, need {MIN_FOLD_ARM} of each",
                data.level()
            )));
        }
    }
    Ok(labels)
}

/// Estimated root PEHE of a method with `folds`-fold validation.
pub fn estimate_pehe(
    spec: &CateMethodSpec,
    data: &OverlapDataset,
    folds: usize,
    order: CorrectionOrder,
    seed: u64,
) -> Result<PeheEstimate> {
    let v = PeheValidator::new(data, folds, order, seed)?;
    Ok(v.score(&v.out_of_fold_effects(spec)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub name: String,
    /// Position in the candidate list.
    pub index: usize,
    pub estimate: PeheEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSelection {
    pub level: usize,
    pub order: CorrectionOrder,
    /// Ascending by estimated root PEHE, then the raw squared estimate, then
    /// SD, then candidate order.
    pub ranking: Vec<CandidateScore>,
    pub chosen: String,
    pub chosen_spec: CateMethodSpec,
    pub n_rows: usize,
}

impl LevelSelection {
    pub fn score(&self, name: &str) -> Option<&CandidateScore> {
        self.ranking.iter().find(|c| c.name == name)
    }
}

pub fn rank(mut scores: Vec<CandidateScore>) -> Vec<CandidateScore> {
    scores.sort_by(|a, b| {
        a.estimate
            .mean
            .total_cmp(&b.estimate.mean)
            .then(a.estimate.raw_squared.total_cmp(&b.estimate.raw_squared))
            .then(a.estimate.sd.total_cmp(&b.estimate.sd))
            .then(a.index.cmp(&b.index))
    });
    scores
}

pub fn select_model(
    candidates: &[CateMethodSpec],
    data: &OverlapDataset,
    folds: usize,
    order: CorrectionOrder,
    seed: u64,
) -> Result<LevelSelection> {
    if candidates.len() < 2 {
        return Err(Error::Config(format!("{} candidate methods, need at least 2", candidates.len())));
    }
    let v = PeheValidator::new(data, folds, order, seed)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for (index, spec) in candidates.iter().enumerate() {
        scores.push(CandidateScore {
            name: spec.name.clone(),
            index,
            estimate: v.score(&v.out_of_fold_effects(spec)?),
        });
    }
    let ranking = rank(scores);
    let best = &candidates[ranking[0].index];
    Ok(LevelSelection {
        level: data.level(),
        order,
        chosen: best.name.clone(),
        chosen_spec: best.clone(),
        ranking,
        n_rows: data.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionReport {
    pub levels: Vec<LevelSelection>,
}

impl SelectionReport {
    pub fn level(&self, level: usize) -> Option<&LevelSelection> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Methods as rows, levels as columns, cells `mean ± SD`.
    pub fn to_markdown(&self) -> String {
        let mut methods: Vec<(usize, &str)> = Vec::new();
        for l in &self.levels {
            for c in &l.ranking {
                if !methods.iter().any(|(_, n)| *n == c.name) {
                    methods.push((c.index, &c.name));
                }
            }
        }
        methods.sort();
        let mut out = String::from("| Method |");
        for l in &self.levels {
            let _ = write!(out, " level {} |", l.level);
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(self.levels.len()));
        out.push('\n');
        for (_, name) in &methods {
            let _ = write!(out, "| {name} |");
            for l in &self.levels {
                match l.score(name) {
                    Some(c) => {
                        let mark = if c.name == l.chosen { "**" } else { "" };
                        let _ = write!(out, " {mark}{:.3} ± {:.3}{mark} |", c.estimate.mean, c.estimate.sd);
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Root PEHE of `tau_hat` against known effects.
pub fn true_root_pehe(tau_hat: &[f64], tau: &[f64]) -> f64 {
    mean(tau_hat.iter().zip(tau).map(|(a, b)| (a - b).powi(2))).sqrt()
}
