use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::linear::sigmoid;
use super::tree::{check_dim, grow, GrowParams, SortedColumns, Tree, VarianceReduction};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_frac: f64,
    pub bootstrap: bool,
}

/// Bagged regression trees; tree `t` draws from stream `t` of the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

impl Forest {
    pub(crate) fn fit(x: &Matrix, y: &[f64], w: &[f64], p: ForestParams, seed: u64) -> Self {
        let n = x.n_rows();
        let d = x.n_cols();
        let per_node = ((p.feature_frac * d as f64).ceil() as usize).clamp(1, d.max(1));
        let params = GrowParams {
            max_depth: p.max_depth,
            features_per_node: (per_node < d).then_some(per_node),
        };
        let crit = VarianceReduction {
            y,
            w,
            min_leaf: p.min_leaf as f64,
        };
        let full = SortedColumns::new(x, &vec![1.0; n]);
        let trees = (0..p.n_trees)
            .map(|t| {
                let mut rng = rng::stream(seed, t as u64);
                let mult = if p.bootstrap {
                    let mut m = vec![0.0; n];
                    for _ in 0..n {
                        m[rng.random_range(0..n)] += 1.0;
                    }
                    m
                } else {
                    vec![1.0; n]
                };
                let sorted = if p.bootstrap { full.filtered(&mult) } else { full.clone() };
                grow(x, &mult, &crit, params, Some(&sorted), Some(&mut rng))
            })
            .collect();
        Self { trees, n_features: d }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub(crate) struct BoostParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Gradient boosting with squared loss (regression) or logistic loss with
/// Newton leaf values (classification). Leaves already carry the shrinkage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    base: f64,
    trees: Vec<Tree>,
    n_features: usize,
    logistic: bool,
    /// Weighted training loss before the first round and after each round.
    train_loss: Vec<f64>,
}

impl Boosted {
    pub(crate) fn fit_regression(x: &Matrix, y: &[f64], w: &[f64], p: BoostParams) -> Self {
        let n = x.n_rows();
        let wsum: f64 = w.iter().sum();
        let base = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
        let ones = vec![1.0; n];
        let sorted = SortedColumns::new(x, &ones);
        let mut f = vec![base; n];
        let loss = |f: &[f64]| -> f64 {
            f.iter().zip(y).zip(w).map(|((fi, yi), wi)| wi * (yi - fi).powi(2)).sum::<f64>() / wsum
        };
        let mut train_loss = vec![loss(&f)];
        let mut trees = Vec::with_capacity(p.n_rounds);
        let mut resid = vec![0.0; n];
        for _ in 0..p.n_rounds {
            for i in 0..n {
                resid[i] = y[i] - f[i];
            }
            let crit = VarianceReduction {
                y: &resid,
                w,
                min_leaf: p.min_leaf as f64,
            };
            let params = GrowParams {
                max_depth: p.max_depth,
                features_per_node: None,
            };
            let mut tree = grow(x, &ones, &crit, params, Some(&sorted), None);
            tree.scale_leaves(p.learning_rate);
            for (i, row) in x.rows().enumerate() {
                f[i] += tree.predict_row(row);
            }
            train_loss.push(loss(&f));
            trees.push(tree);
        }
        Self {
            base,
            trees,
            n_features: x.n_cols(),
            logistic: false,
            train_loss,
        }
    }

    pub(crate) fn fit_classifier(x: &Matrix, labels: &[bool], w: &[f64], p: BoostParams) -> Self {
        let n = x.n_rows();
        let y: Vec<f64> = labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let wsum: f64 = w.iter().sum();
        let pbar = (y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum).clamp(1e-6, 1.0 - 1e-6);
        let base = (pbar / (1.0 - pbar)).ln();
        let ones = vec![1.0; n];
        let sorted = SortedColumns::new(x, &ones);
        let mut f = vec![base; n];
        let loss = |f: &[f64]| -> f64 {
            f.iter()
                .zip(&y)
                .zip(w)
                .map(|((fi, yi), wi)| {
                    let p = sigmoid(*fi).clamp(1e-15, 1.0 - 1e-15);
                    -wi * (yi * p.ln() + (1.0 - yi) * (1.0 - p).ln())
                })
                .sum::<f64>()
                / wsum
        };
        let mut train_loss = vec![loss(&f)];
        let mut trees = Vec::with_capacity(p.n_rounds);
        let mut target = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..p.n_rounds {
            for i in 0..n {
                let pi = sigmoid(f[i]);
                let h = (pi * (1.0 - pi)).max(1e-6);
                target[i] = (y[i] - pi) / h;
                hess[i] = w[i] * h;
            }
            // weighted mean of g/h with weights h is the Newton step
            let crit = VarianceReduction {
                y: &target,
                w: &hess,
                min_leaf: p.min_leaf as f64,
            };
            let params = GrowParams {
                max_depth: p.max_depth,
                features_per_node: None,
            };
            let mut tree = grow(x, &ones, &crit, params, Some(&sorted), None);
            tree.scale_leaves(p.learning_rate);
            for (i, row) in x.rows().enumerate() {
                f[i] += tree.predict_row(row);
            }
            train_loss.push(loss(&f));
            trees.push(tree);
        }
        Self {
            base,
            trees,
            n_features: x.n_cols(),
            logistic: true,
            train_loss,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn train_loss(&self) -> &[f64] {
        &self.train_loss
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let raw = self.base + self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>();
        if self.logistic {
            sigmoid(raw)
        } else {
            raw
        }
    }
}
