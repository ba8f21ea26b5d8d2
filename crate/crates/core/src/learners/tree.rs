//! CART-style trees grown on presorted feature orders.
//!
//! Splits scan every midpoint between consecutive distinct values. Among
//! equal-scoring candidates the lowest feature index wins, then the lowest
//! threshold, so trees are reproducible without any random tie-breaking.
//! The builder is generic over the split criterion: the same machinery grows
//! variance-reduction regression trees and treatment-effect trees.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    left: u32,
    right: u32,
    value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl Tree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return i;
            }
            i = if row[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value
    }

    /// Interval `(lo, hi]` of values of `feature` that keep `row` in its
    /// current leaf, all other coordinates fixed.
    pub fn cell_interval(&self, row: &[f64], feature: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.feature == LEAF {
                return (lo, hi);
            }
            let left = row[n.feature as usize] <= n.threshold;
            if n.feature as usize == feature {
                if left {
                    hi = hi.min(n.threshold);
                } else {
                    lo = lo.max(n.threshold);
                }
            }
            i = if left { n.left as usize } else { n.right as usize };
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if n.feature == LEAF {
                n.value *= factor;
            }
        }
    }
}

pub(crate) fn check_dim(expected: usize, x: &Matrix) -> Result<()> {
    if x.n_cols() != expected {
        return Err(Error::Dimension {
            expected,
            got: x.n_cols(),
        });
    }
    Ok(())
}

/// Statistics accumulated over the rows of a candidate child.
pub(crate) trait SplitCriterion {
    type Acc: Copy + Default;

    fn add(&self, acc: &mut Self::Acc, row: usize, multiplicity: f64);
    fn minus(&self, total: &Self::Acc, part: &Self::Acc) -> Self::Acc;
    /// Whether a child with these statistics may exist.
    fn admissible(&self, acc: &Self::Acc) -> bool;
    /// Higher is better; only strictly positive scores produce a split.
    fn score(&self, parent: &Self::Acc, left: &Self::Acc, right: &Self::Acc) -> f64;
    fn leaf_value(&self, acc: &Self::Acc) -> f64;
}

/// Weighted variance reduction.
pub(crate) struct VarianceReduction<'a> {
    pub y: &'a [f64],
    pub w: &'a [f64],
    pub min_leaf: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct MomentAcc {
    count: f64,
    weight: f64,
    sum: f64,
}

impl SplitCriterion for VarianceReduction<'_> {
    type Acc = MomentAcc;

    #[inline]
    fn add(&self, acc: &mut MomentAcc, row: usize, m: f64) {
        let w = self.w[row] * m;
        acc.count += m;
        acc.weight += w;
        acc.sum += w * self.y[row];
    }

    #[inline]
    fn minus(&self, t: &MomentAcc, p: &MomentAcc) -> MomentAcc {
        MomentAcc {
            count: t.count - p.count,
            weight: t.weight - p.weight,
            sum: t.sum - p.sum,
        }
    }

    #[inline]
    fn admissible(&self, a: &MomentAcc) -> bool {
        a.count >= self.min_leaf && a.weight > 0.0
    }

    #[inline]
    fn score(&self, p: &MomentAcc, l: &MomentAcc, r: &MomentAcc) -> f64 {
        let gain = l.sum * l.sum / l.weight + r.sum * r.sum / r.weight - p.sum * p.sum / p.weight;
        // Guard against splits that only move rounding noise around.
        let floor = 1e-12 * (p.sum * p.sum / p.weight).abs().max(1e-300);
        if gain > floor {
            gain
        } else {
            0.0
        }
    }

    #[inline]
    fn leaf_value(&self, a: &MomentAcc) -> f64 {
        if a.weight > 0.0 {
            a.sum / a.weight
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    /// Number of features examined per node; `None` means all of them.
    pub features_per_node: Option<usize>,
}

/// Presorted row orders for one design matrix, reusable across trees grown
/// on the same rows (boosting rounds).
#[derive(Debug, Clone)]
pub(crate) struct SortedColumns {
    /// `n_features` segments of `rows.len()` entries each.
    order: Vec<u32>,
    n_rows: usize,
}

impl SortedColumns {
    /// Sorts the rows with nonzero multiplicity along every feature.
    pub fn new(x: &Matrix, multiplicity: &[f64]) -> Self {
        let rows: Vec<u32> = (0..x.n_rows() as u32)
            .filter(|&i| multiplicity[i as usize] > 0.0)
            .collect();
        let mut order = Vec::with_capacity(rows.len() * x.n_cols());
        for f in 0..x.n_cols() {
            let mut seg = rows.clone();
            seg.sort_by(|&a, &b| {
                x.get(a as usize, f)
                    .total_cmp(&x.get(b as usize, f))
                    .then(a.cmp(&b))
            });
            order.extend_from_slice(&seg);
        }
        Self {
            order,
            n_rows: rows.len(),
        }
    }

    /// Restricts a full presort to the rows with nonzero multiplicity,
    /// keeping the sorted order without re-sorting.
    pub fn filtered(&self, multiplicity: &[f64]) -> Self {
        let n_features = if self.n_rows == 0 { 0 } else { self.order.len() / self.n_rows };
        let kept = multiplicity.iter().filter(|&&m| m > 0.0).count();
        let mut order = Vec::with_capacity(kept * n_features);
        for f in 0..n_features {
            let seg = &self.order[f * self.n_rows..(f + 1) * self.n_rows];
            order.extend(seg.iter().copied().filter(|&r| multiplicity[r as usize] > 0.0));
        }
        Self { order, n_rows: kept }
    }
}

/// Grows a tree. `multiplicity` gives each row's bootstrap count (1.0 for
/// plain fits, 0.0 to exclude a row).
pub(crate) fn grow<C: SplitCriterion>(
    x: &Matrix,
    multiplicity: &[f64],
    criterion: &C,
    params: GrowParams,
    sorted: Option<&SortedColumns>,
    mut rng: Option<&mut Rng>,
) -> Tree {
    let d = x.n_cols();
    let owned;
    let sorted = match sorted {
        Some(s) => s,
        None => {
            owned = SortedColumns::new(x, multiplicity);
            &owned
        }
    };
    let m = sorted.n_rows;
    let mut order = sorted.order.clone();
    let mut scratch = vec![0u32; m];
    let mut goes_left = vec![false; x.n_rows()];
    let mut nodes: Vec<Node> = Vec::new();

    // (node index, start, end, depth)
    let mut stack = vec![(0usize, 0usize, m, 0usize)];
    nodes.push(Node {
        feature: LEAF,
        threshold: 0.0,
        left: LEAF,
        right: LEAF,
        value: 0.0,
    });

    while let Some((node_id, start, end, depth)) = stack.pop() {
        let mut total = C::Acc::default();
        if d > 0 {
            for &r in &order[start..end] {
                criterion.add(&mut total, r as usize, multiplicity[r as usize]);
            }
        }
        nodes[node_id].value = criterion.leaf_value(&total);
        if depth >= params.max_depth || end - start < 2 || d == 0 {
            continue;
        }

        let candidates: Vec<usize> = match (params.features_per_node, rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < d => {
                let mut f = sample(rng, d, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };

        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &candidates {
            let seg = &order[f * m + start..f * m + end];
            let mut left = C::Acc::default();
            for p in 0..seg.len() - 1 {
                let r = seg[p] as usize;
                criterion.add(&mut left, r, multiplicity[r]);
                let a = x.get(r, f);
                let b = x.get(seg[p + 1] as usize, f);
                if !(a < b) {
                    continue;
                }
                if !criterion.admissible(&left) {
                    continue;
                }
                let right = criterion.minus(&total, &left);
                if !criterion.admissible(&right) {
                    // the right child only shrinks from here on
                    break;
                }
                let s = criterion.score(&total, &left, &right);
                if s > 0.0 && best.is_none_or(|(bs, _, _)| s > bs) {
                    let mut thr = 0.5 * (a + b);
                    if !(thr < b) {
                        thr = a;
                    }
                    best = Some((s, f, thr));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            continue;
        };

        let f_seg = &order[feature * m + start..feature * m + end];
        let mut n_left = 0;
        for &r in f_seg {
            let l = x.get(r as usize, feature) <= threshold;
            goes_left[r as usize] = l;
            n_left += l as usize;
        }
        for g in 0..d {
            let seg = &mut order[g * m + start..g * m + end];
            let (mut li, mut ri) = (0, n_left);
            for &r in seg.iter() {
                if goes_left[r as usize] {
                    scratch[li] = r;
                    li += 1;
                } else {
                    scratch[ri] = r;
                    ri += 1;
                }
            }
            seg.copy_from_slice(&scratch[..end - start]);
        }

        let left_id = nodes.len();
        let right_id = left_id + 1;
        for _ in 0..2 {
            nodes.push(Node {
                feature: LEAF,
                threshold: 0.0,
                left: LEAF,
                right: LEAF,
                value: 0.0,
            });
        }
        let n = &mut nodes[node_id];
        n.feature = feature as u32;
        n.threshold = threshold;
        n.left = left_id as u32;
        n.right = right_id as u32;
        // right first so the left subtree is expanded first
        stack.push((right_id, start + n_left, end, depth + 1));
        stack.push((left_id, start, start + n_left, depth + 1));
    }

    Tree {
        nodes,
        n_features: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(x: &Matrix, y: &[f64], max_depth: usize, min_leaf: f64) -> Tree {
        let w = vec![1.0; y.len()];
        let m = vec![1.0; y.len()];
        let crit = VarianceReduction { y, w: &w, min_leaf };
        grow(
            x,
            &m,
            &crit,
            GrowParams {
                max_depth,
                features_per_node: None,
            },
            None,
            None,
        )
    }

    #[test]
    fn depth_zero_is_global_mean() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let y = [1.0, 2.0, 3.0, 10.0];
        let t = fit(&x, &y, 0, 1.0);
        assert_eq!(t.n_leaves(), 1);
        assert!(t.predict(&x).unwrap().iter().all(|&p| p == 4.0));
    }

    #[test]
    fn single_split_at_midpoint() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0]]).unwrap();
        let y = [0.0, 0.0, 5.0, 5.0];
        let t = fit(&x, &y, 3, 1.0);
        assert_eq!(t.nodes[0].threshold, 2.5);
        assert_eq!(t.predict(&x).unwrap(), vec![0.0, 0.0, 5.0, 5.0]);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both columns separate y identically
        let x = Matrix::from_rows(&[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let t = fit(&x, &y, 1, 1.0);
        assert_eq!(t.nodes[0].feature, 0);
    }

    #[test]
    fn min_leaf_respected() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0], [4.0], [5.0]]).unwrap();
        let y = [100.0, 0.0, 0.0, 0.0, 0.0];
        let t = fit(&x, &y, 5, 2.0);
        // the outlier cannot be isolated
        let p = t.predict(&x).unwrap();
        assert!(p[0] < 100.0);
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn dimension_checked() {
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let t = fit(&x, &[1.0, 2.0], 2, 1.0);
        let bad = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(t.predict(&bad), Err(Error::Dimension { .. })));
    }
}
