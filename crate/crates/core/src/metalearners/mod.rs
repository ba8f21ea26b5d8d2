//! CATE estimators for one `(level vs control)` contrast.
//!
//! Every fitted [`CateModel`] carries the propensity gate of its contrast:
//! outside the gate the effect is reported as [`CateEstimate::Undefined`].

mod causal_tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{
    fit_classifier, fit_regressor, fit_regressor_weighted, FittedClassifier, FittedRegressor, LearnerSpec, Tree,
};
use crate::matrix::Matrix;
use crate::rng::{fold_ids, sub_seed};
use crate::treatments::{OverlapDataset, PropensityModel};

pub const DEFAULT_CROSS_FIT_FOLDS: usize = 5;
/// Smallest training set accepted by [`fit_cate`].
pub const MIN_TRAIN_ROWS: usize = 50;
/// Residualised treatments are kept away from zero by clipping the nuisance
/// propensity to this band.
const NUISANCE_PROPENSITY_CLIP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CateMethod {
    /// One outcome model on `[x, t, t * x]`; the effect is `f(x, 1) - f(x, 0)`.
    Direct,
    TwoModel,
    CausalTree {
        max_depth: usize,
        min_leaf: usize,
    },
    XLearner {
        /// Replaces the fitted weighting propensity by a constant.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fixed_propensity: Option<f64>,
    },
    RLearner,
    CausalForestDml {
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
        feature_frac: f64,
    },
}

impl CateMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            CateMethod::Direct => "direct",
            CateMethod::TwoModel => "two_model",
            CateMethod::CausalTree { .. } => "causal_tree",
            CateMethod::XLearner { .. } => "x_learner",
            CateMethod::RLearner => "r_learner",
            CateMethod::CausalForestDml { .. } => "causal_forest_dml",
        }
    }
}

/// Estimator recipe. `outcome` fits the mu/m models, `effect` the tau
/// models of the X- and R-learner, `propensity` the internal g models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateMethodSpec {
    pub name: String,
    pub method: CateMethod,
    pub outcome: LearnerSpec,
    pub effect: LearnerSpec,
    pub propensity: LearnerSpec,
    #[serde(default = "default_folds")]
    pub cross_fit_folds: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_folds() -> usize {
    DEFAULT_CROSS_FIT_FOLDS
}

impl CateMethodSpec {
    pub fn new(name: impl Into<String>, method: CateMethod, outcome: LearnerSpec) -> Self {
        Self {
            name: name.into(),
            method,
            outcome,
            effect: outcome,
            propensity: LearnerSpec::logistic(1.0),
            cross_fit_folds: DEFAULT_CROSS_FIT_FOLDS,
            seed: 0,
        }
    }

    pub fn with_effect(mut self, effect: LearnerSpec) -> Self {
        self.effect = effect;
        self
    }

    pub fn with_propensity(mut self, propensity: LearnerSpec) -> Self {
        self.propensity = propensity;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.outcome.validate()?;
        self.effect.validate()?;
        self.propensity.validate()?;
        let uses_cross_fit = matches!(self.method, CateMethod::RLearner | CateMethod::CausalForestDml { .. });
        if uses_cross_fit && self.cross_fit_folds < 2 {
            return Err(Error::Config(format!("{}: cross_fit_folds must be >= 2", self.name)));
        }
        match self.method {
            CateMethod::CausalTree { min_leaf, .. } if min_leaf == 0 => {
                Err(Error::Config(format!("{}: min_leaf must be >= 1", self.name)))
            }
            CateMethod::XLearner {
                fixed_propensity: Some(g),
            } if !(0.0..=1.0).contains(&g) => Err(Error::Config(format!("{}: fixed propensity {g}", self.name))),
            CateMethod::CausalForestDml {
                n_trees,
                min_leaf,
                feature_frac,
                ..
            } if n_trees == 0 || min_leaf == 0 || !(feature_frac > 0.0 && feature_frac <= 1.0) => {
                Err(Error::Config(format!("{}: invalid forest parameters", self.name)))
            }
            _ => Ok(()),
        }
    }

    fn role(&self, learner: &LearnerSpec, tag: u64) -> LearnerSpec {
        learner.with_seed(sub_seed(self.seed ^ learner.seed, tag))
    }
}

/// The standard candidate set: the linear baselines plus tree, forest and
/// boosting variants.
pub fn default_candidates(seed: u64) -> Vec<CateMethodSpec> {
    let forest = LearnerSpec::forest(30, 6, 20, 0.5, 0);
    vec![
        CateMethodSpec::new("OLS/L1", CateMethod::Direct, LearnerSpec::linear()),
        CateMethodSpec::new("OLS/L2", CateMethod::TwoModel, LearnerSpec::linear()),
        CateMethodSpec::new("two-model-forest", CateMethod::TwoModel, forest),
        CateMethodSpec::new(
            "causal-tree",
            CateMethod::CausalTree {
                max_depth: 4,
                min_leaf: 40,
            },
            LearnerSpec::linear(),
        ),
        CateMethodSpec::new(
            "x-learner",
            CateMethod::XLearner {
                fixed_propensity: None,
            },
            forest,
        )
        .with_effect(LearnerSpec::forest(30, 5, 20, 0.5, 0)),
        CateMethodSpec::new("r-learner", CateMethod::RLearner, forest).with_effect(LearnerSpec::gbm(60, 0.1, 3)),
        CateMethodSpec::new(
            "causal-forest-dml",
            CateMethod::CausalForestDml {
                n_trees: 40,
                max_depth: 6,
                min_leaf: 20,
                feature_frac: 0.5,
            },
            forest,
        ),
    ]
    .into_iter()
    .map(|s| s.with_seed(seed))
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CateEstimate {
    Defined(f64),
    Undefined,
}

impl CateEstimate {
    pub fn value(self) -> Option<f64> {
        match self {
            CateEstimate::Defined(v) => Some(v),
            CateEstimate::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Weighting {
    Fitted(FittedClassifier),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Fitted {
    Direct {
        model: FittedRegressor,
    },
    TwoModel {
        mu0: FittedRegressor,
        mu1: FittedRegressor,
    },
    CausalTree {
        tree: Tree,
    },
    XLearner {
        mu0: FittedRegressor,
        mu1: FittedRegressor,
        tau0: FittedRegressor,
        tau1: FittedRegressor,
        g: Weighting,
    },
    /// R-learner and causal-forest DML share the residualised final stage.
    Residualized {
        tau: FittedRegressor,
        /// Cross-fitted `(m_hat, g_hat)` for each training row.
        nuisance: Vec<(f64, f64)>,
    },
}

/// Fitted estimator for one contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct CateModel {
    pub level: usize,
    pub spec: CateMethodSpec,
    pub n_train: usize,
    gate: PropensityModel,
    fitted: Fitted,
}

/// Parts of an X-learner prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XLearnerParts {
    pub g: f64,
    pub tau0: f64,
    pub tau1: f64,
}

fn split_arms(data: &OverlapDataset) -> (Vec<usize>, Vec<usize>) {
    (0..data.len()).partition(|&i| !data.treated()[i])
}

fn direct_design(x: &Matrix, t: impl Fn(usize) -> f64) -> Matrix {
    let d = x.n_cols();
    x.with_appended(d + 1, |i, row, out| {
        let ti = t(i);
        out.push(ti);
        out.extend(row.iter().map(|v| v * ti));
    })
}

fn direct_row(row: &[f64], t: f64, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(row);
    buf.push(t);
    buf.extend(row.iter().map(|v| v * t));
}

pub fn fit_cate(spec: &CateMethodSpec, data: &OverlapDataset) -> Result<CateModel> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::Degenerate(format!("level {} overlap set is empty", data.level())));
    }
    let (controls, treated) = split_arms(data);
    if controls.is_empty() || treated.is_empty() {
        return Err(Error::Degenerate(format!(
            "level {} overlap set has {} treated and {} control rows",
            data.level(),
            treated.len(),
            controls.len()
        )));
    }
    if data.len() < MIN_TRAIN_ROWS {
        return Err(Error::Degenerate(format!(
            "level {} overlap set has {} rows, need at least {MIN_TRAIN_ROWS}",
            data.level(),
            data.len()
        )));
    }
    let x = data.features();
    let y = data.outcomes();
    let t = data.treated();

    let fitted = match spec.method {
        CateMethod::Direct => {
            let design = direct_design(x, |i| if t[i] { 1.0 } else { 0.0 });
            Fitted::Direct {
                model: fit_regressor(&spec.role(&spec.outcome, 1), &design, y)?,
            }
        }
        CateMethod::TwoModel => {
            let (mu0, mu1) = fit_arms(spec, x, y, &controls, &treated)?;
            Fitted::TwoModel { mu0, mu1 }
        }
        CateMethod::CausalTree { max_depth, min_leaf } => {
            // Within a leaf, treated minus control on Y - m(x) is unbiased
            // for the effect whatever the propensity; raw means are not.
            let r = outcome_residuals(spec, data)?;
            Fitted::CausalTree {
                tree: causal_tree::fit(x, &r, t, max_depth, min_leaf),
            }
        }
        CateMethod::XLearner { fixed_propensity } => {
            let (mu0, mu1) = fit_arms(spec, x, y, &controls, &treated)?;
            let x1 = x.select_rows(&treated);
            let x0 = x.select_rows(&controls);
            // imputed effects: D(1) = Y(1) - mu0(x), D(0) = mu1(x) - Y(0)
            let d1: Vec<f64> = treated
                .iter()
                .map(|&i| y[i] - mu0.predict_row(x.row(i)))
                .collect();
            let d0: Vec<f64> = controls
                .iter()
                .map(|&i| mu1.predict_row(x.row(i)) - y[i])
                .collect();
            let tau1 = fit_regressor(&spec.role(&spec.effect, 4), &x1, &d1)?;
            let tau0 = fit_regressor(&spec.role(&spec.effect, 5), &x0, &d0)?;
            let g = match fixed_propensity {
                Some(c) => Weighting::Constant(c),
                None => Weighting::Fitted(fit_classifier(&spec.role(&spec.propensity, 6), x, t)?),
            };
            Fitted::XLearner {
                mu0,
                mu1,
                tau0,
                tau1,
                g,
            }
        }
        CateMethod::RLearner => {
            let (pseudo, weights, nuisance) = residualize(spec, data)?;
            let tau = fit_regressor_weighted(&spec.role(&spec.effect, 9), x, &pseudo, Some(&weights))?;
            Fitted::Residualized { tau, nuisance }
        }
        CateMethod::CausalForestDml {
            n_trees,
            max_depth,
            min_leaf,
            feature_frac,
        } => {
            let (pseudo, weights, nuisance) = residualize(spec, data)?;
            let forest = LearnerSpec::forest(n_trees, max_depth, min_leaf, feature_frac, sub_seed(spec.seed, 10));
            let tau = fit_regressor_weighted(&forest, x, &pseudo, Some(&weights))?;
            Fitted::Residualized { tau, nuisance }
        }
    };
    Ok(CateModel {
        level: data.level(),
        spec: spec.clone(),
        n_train: data.len(),
        gate: data.gate.clone(),
        fitted,
    })
}

fn fit_arms(
    spec: &CateMethodSpec,
    x: &Matrix,
    y: &[f64],
    controls: &[usize],
    treated: &[usize],
) -> Result<(FittedRegressor, FittedRegressor)> {
    let pick = |idx: &[usize]| -> Vec<f64> { idx.iter().map(|&i| y[i]).collect() };
    let mu0 = fit_regressor(&spec.role(&spec.outcome, 2), &x.select_rows(controls), &pick(controls))?;
    let mu1 = fit_regressor(&spec.role(&spec.outcome, 3), &x.select_rows(treated), &pick(treated))?;
    Ok((mu0, mu1))
}

/// Cross-fitted `m(x) = E[Y | x]` and `g(x)`, turned into the pseudo-outcome
/// `(Y - m) / (T - g)` with weights `(T - g)^2`. Weighted least squares on
/// these reproduces the residual-on-residual loss exactly.
/// Cross-fitted `Y - m(x)` with `m` the outcome learner fitted on both arms.
fn outcome_residuals(spec: &CateMethodSpec, data: &OverlapDataset) -> Result<Vec<f64>> {
    let n = data.len();
    let k = spec.cross_fit_folds.min(n);
    let folds = fold_ids(n, k, sub_seed(spec.seed, 7));
    let x = data.features();
    let y = data.outcomes();
    let mut r = vec![0.0; n];
    for f in 0..k {
        let (hold, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == f);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let m = fit_regressor(&spec.role(&spec.outcome, 100 + f as u64), &x.select_rows(&train), &yt)?;
        for &i in &hold {
            r[i] = y[i] - m.predict_row(x.row(i));
        }
    }
    Ok(r)
}

fn residualize(spec: &CateMethodSpec, data: &OverlapDataset) -> Result<(Vec<f64>, Vec<f64>, Vec<(f64, f64)>)> {
    let n = data.len();
    let k = spec.cross_fit_folds.min(n);
    let folds = fold_ids(n, k, sub_seed(spec.seed, 7));
    let x = data.features();
    let y = data.outcomes();
    let t = data.treated();
    let mut nuisance = vec![(0.0, 0.0); n];
    for f in 0..k {
        let (hold, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| folds[i] == f);
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let tt: Vec<bool> = train.iter().map(|&i| t[i]).collect();
        let m = fit_regressor(&spec.role(&spec.outcome, 100 + f as u64), &xt, &yt)?;
        let g = fit_classifier(&spec.role(&spec.propensity, 200 + f as u64), &xt, &tt).map_err(|e| match e {
            Error::Degenerate(m) => Error::Degenerate(format!("cross-fitting fold {f}: {m}")),
            other => other,
        })?;
        for &i in &hold {
            let row = x.row(i);
            nuisance[i] = (m.predict_row(row), g.predict_row(row));
        }
    }
    let mut pseudo = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let (m, g) = nuisance[i];
        let g = g.clamp(NUISANCE_PROPENSITY_CLIP, 1.0 - NUISANCE_PROPENSITY_CLIP);
        nuisance[i].1 = g;
        let tr = if t[i] { 1.0 } else { 0.0 } - g;
        pseudo.push((y[i] - m) / tr);
        weights.push(tr * tr);
    }
    Ok((pseudo, weights, nuisance))
}

impl CateModel {
    pub fn gate(&self) -> &PropensityModel {
        &self.gate
    }

    pub fn n_features(&self) -> usize {
        self.gate.n_features()
    }

    /// Effect estimate without the overlap gate.
    pub fn effect_row(&self, row: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Direct { model } => {
                let mut buf = Vec::with_capacity(2 * row.len() + 1);
                direct_row(row, 1.0, &mut buf);
                let on = model.predict_row(&buf);
                direct_row(row, 0.0, &mut buf);
                on - model.predict_row(&buf)
            }
            Fitted::TwoModel { mu0, mu1 } => mu1.predict_row(row) - mu0.predict_row(row),
            Fitted::CausalTree { tree } => tree.predict_row(row),
            Fitted::XLearner { .. } => {
                let p = self.x_learner_parts(row).expect("x-learner");
                p.g * p.tau0 + (1.0 - p.g) * p.tau1
            }
            Fitted::Residualized { tau, .. } => tau.predict_row(row),
        }
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got,
            });
        }
        Ok(())
    }

    pub fn predict_cate(&self, x: &[f64]) -> Result<CateEstimate> {
        self.check_dim(x.len())?;
        let g = self.gate.predict_row(x);
        if !self.gate.accepts(g) {
            return Ok(CateEstimate::Undefined);
        }
        Ok(CateEstimate::Defined(self.effect_row(x)))
    }

    /// Ungated effects for every row of `x`.
    pub fn predict_effects(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_dim(x.n_cols())?;
        Ok(x.rows().map(|r| self.effect_row(r)).collect())
    }

    pub fn x_learner_parts(&self, row: &[f64]) -> Option<XLearnerParts> {
        match &self.fitted {
            Fitted::XLearner { tau0, tau1, g, .. } => Some(XLearnerParts {
                g: match g {
                    Weighting::Fitted(c) => c.predict_row(row),
                    Weighting::Constant(c) => *c,
                },
                tau0: tau0.predict_row(row),
                tau1: tau1.predict_row(row),
            }),
            _ => None,
        }
    }

    /// `(mu0(x), mu1(x))` for the two-model estimator.
    pub fn arm_predictions(&self, row: &[f64]) -> Option<(f64, f64)> {
        match &self.fitted {
            Fitted::TwoModel { mu0, mu1 } => Some((mu0.predict_row(row), mu1.predict_row(row))),
            _ => None,
        }
    }

    pub fn causal_tree(&self) -> Option<&Tree> {
        match &self.fitted {
            Fitted::CausalTree { tree } => Some(tree),
            _ => None,
        }
    }

    /// Residual-on-residual objective on the training rows, for this model's
    /// effect function and for the zero function.
    pub fn r_objective(&self, data: &OverlapDataset) -> Option<(f64, f64)> {
        let Fitted::Residualized { nuisance, .. } = &self.fitted else {
            return None;
        };
        if nuisance.len() != data.len() {
            return None;
        }
        let mut fitted = 0.0;
        let mut zero = 0.0;
        for (i, &(m, g)) in nuisance.iter().enumerate() {
            let yr = data.outcomes()[i] - m;
            let tr = if data.treated()[i] { 1.0 } else { 0.0 } - g;
            let e = yr - tr * self.effect_row(data.features().row(i));
            fitted += e * e;
            zero += yr * yr;
        }
        let n = nuisance.len() as f64;
        Some((fitted / n, zero / n))
    }

    /// Metadata for reports.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "name": self.spec.name,
            "method": self.spec.method,
            "outcome": self.spec.outcome,
            "effect": self.spec.effect,
            "propensity": self.spec.propensity,
            "cross_fit_folds": self.spec.cross_fit_folds,
            "seed": self.spec.seed,
            "level": self.level,
            "n_train": self.n_train,
        })
    }
}

#[cfg(test)]
mod tests;
