//! Base supervised learners shared by the causal estimators, the plug-in
//! validator and the forward-looking outcome model.

mod ensemble;
pub(crate) mod linear;
pub(crate) mod tree;

use serde::{Deserialize, Serialize};

pub use ensemble::{Boosted, Forest};
pub use linear::{LinearModel, LogisticModel};
pub use tree::Tree;

use ensemble::{BoostParams, ForestParams};
use tree::{check_dim, grow, GrowParams, VarianceReduction};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerKind {
    Linear,
    Ridge {
        lambda: f64,
    },
    Logistic {
        lambda: f64,
    },
    Tree {
        max_depth: usize,
        min_leaf: usize,
    },
    Forest {
        n_trees: usize,
        max_depth: usize,
        min_leaf: usize,
        feature_frac: f64,
        #[serde(default = "default_true")]
        bootstrap: bool,
    },
    Gbm {
        n_rounds: usize,
        learning_rate: f64,
        max_depth: usize,
        #[serde(default = "default_min_leaf")]
        min_leaf: usize,
    },
}

fn default_true() -> bool {
    true
}

fn default_min_leaf() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    #[serde(flatten)]
    pub kind: LearnerKind,
    #[serde(default)]
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn linear() -> Self {
        Self::new(LearnerKind::Linear, 0)
    }

    pub fn ridge(lambda: f64) -> Self {
        Self::new(LearnerKind::Ridge { lambda }, 0)
    }

    pub fn logistic(lambda: f64) -> Self {
        Self::new(LearnerKind::Logistic { lambda }, 0)
    }

    pub fn tree(max_depth: usize, min_leaf: usize) -> Self {
        Self::new(LearnerKind::Tree { max_depth, min_leaf }, 0)
    }

    pub fn forest(n_trees: usize, max_depth: usize, min_leaf: usize, feature_frac: f64, seed: u64) -> Self {
        Self::new(
            LearnerKind::Forest {
                n_trees,
                max_depth,
                min_leaf,
                feature_frac,
                bootstrap: true,
            },
            seed,
        )
    }

    pub fn gbm(n_rounds: usize, learning_rate: f64, max_depth: usize) -> Self {
        Self::new(
            LearnerKind::Gbm {
                n_rounds,
                learning_rate,
                max_depth,
                min_leaf: default_min_leaf(),
            },
            0,
        )
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Short human-readable tag, e.g. `forest(50)`.
    pub fn label(&self) -> String {
        match self.kind {
            LearnerKind::Linear => "linear".into(),
            LearnerKind::Ridge { lambda } => format!("ridge({lambda})"),
            LearnerKind::Logistic { lambda } => format!("logistic({lambda})"),
            LearnerKind::Tree { max_depth, .. } => format!("tree(d{max_depth})"),
            LearnerKind::Forest { n_trees, .. } => format!("forest({n_trees})"),
            LearnerKind::Gbm { n_rounds, .. } => format!("gbm({n_rounds})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("{}: {m}", self.label())));
        match self.kind {
            LearnerKind::Linear => Ok(()),
            LearnerKind::Ridge { lambda } | LearnerKind::Logistic { lambda } => {
                if lambda >= 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    bad("lambda must be finite and >= 0")
                }
            }
            LearnerKind::Tree { min_leaf, .. } => {
                if min_leaf >= 1 {
                    Ok(())
                } else {
                    bad("min_leaf must be >= 1")
                }
            }
            LearnerKind::Forest {
                n_trees,
                min_leaf,
                feature_frac,
                ..
            } => {
                if n_trees == 0 || min_leaf == 0 || !(feature_frac > 0.0 && feature_frac <= 1.0) {
                    bad("forest needs n_trees >= 1, min_leaf >= 1 and feature_frac in (0, 1]")
                } else {
                    Ok(())
                }
            }
            LearnerKind::Gbm {
                n_rounds,
                learning_rate,
                min_leaf,
                ..
            } => {
                if n_rounds == 0 || min_leaf == 0 || !(learning_rate > 0.0 && learning_rate <= 1.0) {
                    bad("gbm needs n_rounds >= 1, min_leaf >= 1 and learning_rate in (0, 1]")
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedRegressor {
    Linear(LinearModel),
    Tree(Tree),
    Forest(Forest),
    Gbm(Boosted),
}

impl FittedRegressor {
    pub fn n_features(&self) -> usize {
        match self {
            FittedRegressor::Linear(m) => m.n_features(),
            FittedRegressor::Tree(m) => m.n_features(),
            FittedRegressor::Forest(m) => m.n_features(),
            FittedRegressor::Gbm(m) => m.n_features(),
        }
    }

    /// Prediction for one row; the caller guarantees the dimension.
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.n_features());
        match self {
            FittedRegressor::Linear(m) => m.predict_row(row),
            FittedRegressor::Tree(m) => m.predict_row(row),
            FittedRegressor::Forest(m) => m.predict_row(row),
            FittedRegressor::Gbm(m) => m.predict_row(row),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FittedClassifier {
    Logistic(LogisticModel),
    Tree(Tree),
    Forest(Forest),
    Gbm(Boosted),
}

impl FittedClassifier {
    pub fn n_features(&self) -> usize {
        match self {
            FittedClassifier::Logistic(m) => m.n_features(),
            FittedClassifier::Tree(m) => m.n_features(),
            FittedClassifier::Forest(m) => m.n_features(),
            FittedClassifier::Gbm(m) => m.n_features(),
        }
    }

    /// Probability of the positive class, always within `[0, 1]`.
    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let p = match self {
            FittedClassifier::Logistic(m) => m.predict_row(row),
            FittedClassifier::Tree(m) => m.predict_row(row),
            FittedClassifier::Forest(m) => m.predict_row(row),
            FittedClassifier::Gbm(m) => m.predict_row(row),
        };
        if p.is_nan() {
            0.5
        } else {
            p.clamp(0.0, 1.0)
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.n_features(), x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

fn check_design(x: &Matrix, n_targets: usize, w: Option<&[f64]>) -> Result<()> {
    if x.n_rows() != n_targets {
        return Err(Error::Data(format!(
            "{} feature rows but {} targets",
            x.n_rows(),
            n_targets
        )));
    }
    if x.n_rows() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 rows, got {}", x.n_rows())));
    }
    if let Some(w) = w {
        if w.len() != n_targets || w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Data("weights must be finite, nonnegative and one per row".into()));
        }
        if !(w.iter().sum::<f64>() > 0.0) {
            return Err(Error::Degenerate("all weights are zero".into()));
        }
    }
    Ok(())
}

pub fn fit_regressor(spec: &LearnerSpec, x: &Matrix, y: &[f64]) -> Result<FittedRegressor> {
    fit_regressor_weighted(spec, x, y, None)
}

/// Fits a regressor with optional per-row weights.
pub fn fit_regressor_weighted(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Result<FittedRegressor> {
    spec.validate()?;
    check_design(x, y.len(), weights)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite regression target".into()));
    }
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; y.len()];
            &ones
        }
    };
    Ok(match spec.kind {
        LearnerKind::Linear => FittedRegressor::Linear(LinearModel::fit(x, y, w, 0.0)?),
        LearnerKind::Ridge { lambda } => FittedRegressor::Linear(LinearModel::fit(x, y, w, lambda)?),
        LearnerKind::Logistic { .. } => {
            return Err(Error::Config("logistic is a classifier, not a regressor".into()))
        }
        LearnerKind::Tree { max_depth, min_leaf } => {
            let crit = VarianceReduction {
                y,
                w,
                min_leaf: min_leaf as f64,
            };
            let mult = vec![1.0; y.len()];
            FittedRegressor::Tree(grow(
                x,
                &mult,
                &crit,
                GrowParams {
                    max_depth,
                    features_per_node: None,
                },
                None,
                None,
            ))
        }
        LearnerKind::Forest {
            n_trees,
            max_depth,
            min_leaf,
            feature_frac,
            bootstrap,
        } => FittedRegressor::Forest(Forest::fit(
            x,
            y,
            w,
            ForestParams {
                n_trees,
                max_depth,
                min_leaf,
                feature_frac,
                bootstrap,
            },
            spec.seed,
        )),
        LearnerKind::Gbm {
            n_rounds,
            learning_rate,
            max_depth,
            min_leaf,
        } => FittedRegressor::Gbm(Boosted::fit_regression(
            x,
            y,
            w,
            BoostParams {
                n_rounds,
                learning_rate,
                max_depth,
                min_leaf,
            },
        )),
    })
}

/// Fits a probabilistic classifier. Both classes must be present.
pub fn fit_classifier(spec: &LearnerSpec, x: &Matrix, labels: &[bool]) -> Result<FittedClassifier> {
    fit_classifier_weighted(spec, x, labels, None)
}

pub fn fit_classifier_weighted(
    spec: &LearnerSpec,
    x: &Matrix,
    labels: &[bool],
    weights: Option<&[f64]>,
) -> Result<FittedClassifier> {
    spec.validate()?;
    check_design(x, labels.len(), weights)?;
    let positives = labels.iter().filter(|&&b| b).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Degenerate("classifier needs both classes in the training data".into()));
    }
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; labels.len()];
            &ones
        }
    };
    let y01: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Ok(match spec.kind {
        LearnerKind::Logistic { lambda } => FittedClassifier::Logistic(LogisticModel::fit(x, labels, w, lambda)?),
        LearnerKind::Linear | LearnerKind::Ridge { .. } => {
            return Err(Error::Config(format!("{} is not a classifier", spec.label())))
        }
        LearnerKind::Tree { .. } | LearnerKind::Forest { .. } => {
            match fit_regressor_weighted(spec, x, &y01, Some(w))? {
                FittedRegressor::Tree(t) => FittedClassifier::Tree(t),
                FittedRegressor::Forest(f) => FittedClassifier::Forest(f),
                _ => unreachable!("tree kinds fit trees"),
            }
        }
        LearnerKind::Gbm {
            n_rounds,
            learning_rate,
            max_depth,
            min_leaf,
        } => FittedClassifier::Gbm(Boosted::fit_classifier(
            x,
            labels,
            w,
            BoostParams {
                n_rounds,
                learning_rate,
                max_depth,
                min_leaf,
            },
        )),
    })
}

/// Root mean squared error of `model` on `(x, y)`.
pub fn rmse(model: &FittedRegressor, x: &Matrix, y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Data("rmse of an empty sample".into()));
    }
    let pred = model.predict(x)?;
    if pred.len() != y.len() {
        return Err(Error::Data("prediction/target length mismatch".into()));
    }
    Ok(rmse_of(&pred, y))
}

pub fn rmse_of(pred: &[f64], y: &[f64]) -> f64 {
    (pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64).sqrt()
}
