//! Treatment-effect tree: splits maximise the weighted squared difference of
//! the children's treated-minus-control mean outcomes,
//! `n_l n_r / (n_l + n_r) * (delta_l - delta_r)^2`, and every child keeps at
//! least `min_leaf` rows of each arm.

use crate::learners::tree::{grow, GrowParams, SplitCriterion};
use crate::learners::Tree;
use crate::matrix::Matrix;

pub(crate) struct EffectSplit<'a> {
    pub y: &'a [f64],
    pub treated: &'a [bool],
    pub min_leaf: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct ArmSums {
    n1: f64,
    s1: f64,
    n0: f64,
    s0: f64,
}

impl ArmSums {
    fn delta(&self) -> f64 {
        let m1 = if self.n1 > 0.0 { self.s1 / self.n1 } else { 0.0 };
        let m0 = if self.n0 > 0.0 { self.s0 / self.n0 } else { 0.0 };
        m1 - m0
    }
}

impl SplitCriterion for EffectSplit<'_> {
    type Acc = ArmSums;

    #[inline]
    fn add(&self, acc: &mut ArmSums, row: usize, m: f64) {
        if self.treated[row] {
            acc.n1 += m;
            acc.s1 += m * self.y[row];
        } else {
            acc.n0 += m;
            acc.s0 += m * self.y[row];
        }
    }

    #[inline]
    fn minus(&self, t: &ArmSums, p: &ArmSums) -> ArmSums {
        ArmSums {
            n1: t.n1 - p.n1,
            s1: t.s1 - p.s1,
            n0: t.n0 - p.n0,
            s0: t.s0 - p.s0,
        }
    }

    #[inline]
    fn admissible(&self, a: &ArmSums) -> bool {
        a.n1 >= self.min_leaf && a.n0 >= self.min_leaf
    }

    #[inline]
    fn score(&self, _parent: &ArmSums, l: &ArmSums, r: &ArmSums) -> f64 {
        let nl = l.n1 + l.n0;
        let nr = r.n1 + r.n0;
        let d = l.delta() - r.delta();
        nl * nr / (nl + nr) * d * d
    }

    #[inline]
    fn leaf_value(&self, a: &ArmSums) -> f64 {
        a.delta()
    }
}

pub(crate) fn fit(x: &Matrix, y: &[f64], treated: &[bool], max_depth: usize, min_leaf: usize) -> Tree {
    let crit = EffectSplit {
        y,
        treated,
        min_leaf: min_leaf as f64,
    };
    let mult = vec![1.0; y.len()];
    grow(
        x,
        &mult,
        &crit,
        GrowParams {
            max_depth,
            features_per_node: None,
        },
        None,
        None,
    )
}
