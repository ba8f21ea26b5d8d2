//! Dosage discretisation, per-level propensity models and overlap trimming.

use serde::{Deserialize, Serialize};

use crate::datagen::CustomerRecord;
use crate::error::{Error, Result};
use crate::learners::{fit_classifier, FittedClassifier, LearnerSpec};
use crate::matrix::Matrix;

pub const DEFAULT_TRIM_EPS: f64 = 0.05;

/// Bins `(-inf, c1], (c1, c2], ..., (c_{k-1}, inf)` over the positive
/// dosages, each represented by the mean dosage of its members. An empty bin
/// keeps its index with `levels[j] == None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosagePartition {
    pub cut_points: Vec<f64>,
    pub levels: Vec<Option<f64>>,
    pub counts: Vec<usize>,
}

fn check_cuts(cut_points: &[f64]) -> Result<()> {
    if cut_points.iter().any(|c| !c.is_finite()) || cut_points.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config("cut_points must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// Bin index (0-based) of a positive dosage.
fn bin_of(cut_points: &[f64], dosage: f64) -> usize {
    cut_points.partition_point(|&c| c < dosage)
}

pub fn discretize(dosages: &[f64], cut_points: &[f64]) -> Result<DosagePartition> {
    check_cuts(cut_points)?;
    if let Some(d) = dosages.iter().find(|d| !(**d >= 0.0)) {
        return Err(Error::Domain(format!("invalid dosage {d}")));
    }
    let k = cut_points.len() + 1;
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for &d in dosages.iter().filter(|&&d| d > 0.0) {
        let b = bin_of(cut_points, d);
        sums[b] += d;
        counts[b] += 1;
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Data("no positive dosage to discretize".into()));
    }
    let levels = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    Ok(DosagePartition {
        cut_points: cut_points.to_vec(),
        levels,
        counts,
    })
}

impl DosagePartition {
    pub fn k(&self) -> usize {
        self.levels.len()
    }

    /// 0 for control, otherwise the 1-based level whose bin holds `dosage`.
    pub fn assign_level(&self, dosage: f64) -> Result<usize> {
        if !(dosage >= 0.0) {
            return Err(Error::Domain(format!("dosage {dosage} is negative or NaN")));
        }
        if dosage == 0.0 {
            return Ok(0);
        }
        Ok(bin_of(&self.cut_points, dosage) + 1)
    }

    /// Representative dosage of `level`; 0 for control.
    pub fn dosage(&self, level: usize) -> Option<f64> {
        if level == 0 {
            Some(0.0)
        } else {
            self.levels.get(level - 1).copied().flatten()
        }
    }

    pub fn is_defined(&self, level: usize) -> bool {
        self.dosage(level).is_some()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        check_cuts(&p.cut_points)?;
        if p.levels.len() != p.cut_points.len() + 1 || p.counts.len() != p.levels.len() {
            return Err(Error::Data("partition levels/counts do not match its cut points".into()));
        }
        Ok(p)
    }
}

/// Rows whose level is control or one chosen level.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastDataset {
    pub level: usize,
    pub ids: Vec<u64>,
    pub features: Matrix,
    pub treated: Vec<bool>,
    pub outcomes: Vec<f64>,
}

impl ContrastDataset {
    pub fn from_records(records: &[CustomerRecord], partition: &DosagePartition, level: usize) -> Result<Self> {
        if level == 0 || level > partition.k() {
            return Err(Error::Domain(format!("level {level} outside 1..={}", partition.k())));
        }
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut treated = Vec::new();
        let mut outcomes = Vec::new();
        for r in records {
            let l = partition.assign_level(r.observed_dosage)?;
            if l == 0 || l == level {
                ids.push(r.id);
                rows.push(r.features());
                treated.push(l == level);
                outcomes.push(r.ep_m6);
            }
        }
        let features = if rows.is_empty() {
            Matrix::zeros(0, crate::datagen::FEATURE_NAMES.len())
        } else {
            Matrix::from_rows(&rows)?
        };
        Ok(Self {
            level,
            ids,
            features,
            treated,
            outcomes,
        })
    }

    pub fn len(&self) -> usize {
        self.treated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treated.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.treated.iter().filter(|&&t| t).count()
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            level: self.level,
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
            features: self.features.select_rows(idx),
            treated: idx.iter().map(|&i| self.treated[i]).collect(),
            outcomes: idx.iter().map(|&i| self.outcomes[i]).collect(),
        }
    }
}

/// `P(level | x)` within a contrast, plus the trimming threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub level: usize,
    pub classifier: FittedClassifier,
    pub trim_eps: f64,
}

impl PropensityModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.classifier.predict_row(row)
    }

    pub fn n_features(&self) -> usize {
        self.classifier.n_features()
    }

    /// `eps <= g <= 1 - eps`; with `eps == 0` the strict `0 < g < 1`.
    pub fn accepts(&self, g: f64) -> bool {
        if self.trim_eps > 0.0 {
            g >= self.trim_eps && g <= 1.0 - self.trim_eps
        } else {
            g > 0.0 && g < 1.0
        }
    }
}

pub fn fit_propensity(data: &ContrastDataset, learner: &LearnerSpec, trim_eps: f64) -> Result<PropensityModel> {
    if !(0.0..0.5).contains(&trim_eps) {
        return Err(Error::Config(format!("trim_eps = {trim_eps} must lie in [0, 0.5)")));
    }
    if data.n_treated() == 0 || data.n_control() == 0 {
        return Err(Error::Degenerate(format!(
            "level {} contrast has {} treated and {} control rows",
            data.level,
            data.n_treated(),
            data.n_control()
        )));
    }
    let classifier = fit_classifier(learner, &data.features, &data.treated)?;
    Ok(PropensityModel {
        level: data.level,
        classifier,
        trim_eps,
    })
}

/// A contrast restricted to its region of common support.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapDataset {
    pub data: ContrastDataset,
    /// Fitted propensity of every retained row.
    pub propensity: Vec<f64>,
    pub gate: PropensityModel,
}

impl OverlapDataset {
    pub fn level(&self) -> usize {
        self.data.level
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.data.features
    }

    pub fn treated(&self) -> &[bool] {
        &self.data.treated
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.data.outcomes
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            data: self.data.subset(idx),
            propensity: idx.iter().map(|&i| self.propensity[i]).collect(),
            gate: self.gate.clone(),
        }
    }
}

pub fn overlap_subset(data: &ContrastDataset, model: &PropensityModel) -> Result<OverlapDataset> {
    if model.level != data.level {
        return Err(Error::Domain(format!(
            "propensity model for level {} applied to level {} contrast",
            model.level, data.level
        )));
    }
    let g = model.classifier.predict(&data.features)?;
    let keep: Vec<usize> = (0..data.len()).filter(|&i| model.accepts(g[i])).collect();
    Ok(OverlapDataset {
        data: data.subset(&keep),
        propensity: keep.iter().map(|&i| g[i]).collect(),
        gate: model.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerKind;
    use proptest::prelude::*;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    #[test]
    fn bin_means() {
        let p = discretize(&[1.1, 1.2, 1.3, 2.0, 2.4], &[1.5]).unwrap();
        // oracle: mean of each bin by hand
        let b1 = (1.1 + 1.2 + 1.3) / 3.0;
        let b2 = (2.0 + 2.4) / 2.0;
        assert_eq!(p.levels, vec![Some(b1), Some(b2)]);
        assert!((b1 - 1.2).abs() < 1e-12 && (b2 - 2.2).abs() < 1e-12);
        assert_eq!(p.counts, vec![3, 2]);
    }

    #[test]
    fn no_cuts_is_global_mean_and_zeros_ignored() {
        let p = discretize(&[0.0, 1.0, 2.0, 3.0], &[]).unwrap();
        assert_eq!(p.levels, vec![Some(2.0)]);
        assert_eq!(p.counts, vec![3]);
    }

    #[test]
    fn all_zero_dosages_rejected() {
        assert!(discretize(&[0.0, 0.0], &[1.5]).is_err());
        assert!(discretize(&[1.0, -1.0], &[1.5]).is_err());
        assert!(discretize(&[1.0], &[2.0, 1.5]).is_err());
    }

    #[test]
    fn six_bins_up_to_two_and_a_half() {
        let cuts = [1.25, 1.5, 1.75, 2.0, 2.25];
        let dosages: Vec<f64> = (1..=150).map(|i| 1.0 + i as f64 * 0.01).collect();
        let p = discretize(&dosages, &cuts).unwrap();
        assert_eq!(p.k(), 6);
        assert_eq!(p.counts, vec![25; 6]);
        assert!((p.levels[0].unwrap() - 1.13).abs() < 1e-12);
        assert!((p.levels[5].unwrap() - 2.38).abs() < 1e-12);
    }

    #[test]
    fn empty_bin_keeps_index() {
        let p = discretize(&[1.1, 2.4], &[1.5, 2.0]).unwrap();
        assert_eq!(p.levels[1], None);
        assert!(!p.is_defined(2));
        assert_eq!(p.assign_level(2.4).unwrap(), 3);
        let back = DosagePartition::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        let json: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert!(json["levels"][1].is_null());
        assert_eq!(json["counts"][0], 1);
    }

    #[test]
    fn assign_level_boundaries() {
        let p = discretize(&[1.1, 1.6, 2.2], &[1.5, 2.0]).unwrap();
        assert_eq!(p.assign_level(0.0).unwrap(), 0);
        assert_eq!(p.assign_level(1.5).unwrap(), 1);
        assert_eq!(p.assign_level(1.5000001).unwrap(), 2);
        assert_eq!(p.assign_level(2.0).unwrap(), 2);
        assert_eq!(p.assign_level(9.0).unwrap(), 3);
        assert_eq!(p.assign_level(0.01).unwrap(), 1);
        assert!(p.assign_level(-0.5).is_err());
    }

    fn synthetic(n: usize, seed: u64, separable: bool) -> ContrastDataset {
        let mut r = crate::rng::stream(seed, 0);
        let mut rows = Vec::new();
        let mut treated = Vec::new();
        for _ in 0..n {
            let a: f64 = r.sample(StandardNormal);
            let b: f64 = r.sample(StandardNormal);
            rows.push(vec![a, b]);
            treated.push(if separable { a > 0.0 } else { r.random::<bool>() });
        }
        ContrastDataset {
            level: 1,
            ids: (0..n as u64).collect(),
            features: Matrix::from_rows(&rows).unwrap(),
            treated,
            outcomes: vec![0.0; n],
        }
    }

    #[test]
    fn independent_labels_give_half() {
        let train = synthetic(5000, 1, false);
        let test = synthetic(500, 2, false);
        let m = fit_propensity(&train, &LearnerSpec::logistic(1.0), 0.05).unwrap();
        for row in test.features.rows() {
            let g = m.predict_row(row);
            assert!((g - 0.5).abs() <= 0.05, "g = {g}");
        }
        let ov = overlap_subset(&test, &m).unwrap();
        assert_eq!(ov.len(), test.len());
    }

    #[test]
    fn separable_labels_empty_the_overlap_set() {
        let train = synthetic(2000, 3, true);
        let test = synthetic(300, 4, true);
        let m = fit_propensity(&train, &LearnerSpec::logistic(1e-3), 0.05).unwrap();
        let ov = overlap_subset(&test, &m).unwrap();
        // only a thin band around the separating hyperplane can survive
        assert!(ov.len() <= test.len() / 30, "{} rows survived", ov.len());
        let far: Vec<usize> = (0..test.len()).filter(|&i| test.features.get(i, 0).abs() > 0.2).collect();
        let ov_far = overlap_subset(&test.subset(&far), &m).unwrap();
        assert!(ov_far.is_empty());
    }

    #[test]
    fn single_class_propensity_rejected() {
        let mut d = synthetic(100, 5, false);
        d.treated.iter_mut().for_each(|t| *t = false);
        assert!(matches!(
            fit_propensity(&d, &LearnerSpec::logistic(1.0), 0.05),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn eps_zero_is_strict_inequality() {
        let d = synthetic(50, 6, false);
        let m = PropensityModel {
            level: 1,
            classifier: fit_classifier(&LearnerSpec::tree(0, 1), &d.features, &d.treated).unwrap(),
            trim_eps: 0.0,
        };
        assert!(m.accepts(1e-300) && m.accepts(1.0 - 1e-16));
        assert!(!m.accepts(0.0) && !m.accepts(1.0));
        let ov = overlap_subset(&d, &m).unwrap();
        assert_eq!(ov.len(), d.len());
    }

    #[test]
    fn level_mismatch_rejected() {
        let d = synthetic(100, 7, false);
        let mut m = fit_propensity(&d, &LearnerSpec::logistic(1.0), 0.05).unwrap();
        m.level = 2;
        assert!(overlap_subset(&d, &m).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn partition_is_exhaustive_and_ordered(
            dosages in prop::collection::vec(0.0f64..3.0, 1..200),
            mut cuts in prop::collection::vec(0.1f64..2.9, 0..6),
        ) {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            prop_assume!(dosages.iter().any(|&d| d > 0.0));
            let p = discretize(&dosages, &cuts).unwrap();
            let treated = dosages.iter().filter(|&&d| d > 0.0).count();
            prop_assert_eq!(p.counts.iter().sum::<usize>(), treated);
            let defined: Vec<f64> = p.levels.iter().flatten().copied().collect();
            prop_assert!(defined.windows(2).all(|w| w[0] < w[1]));
            for &d in dosages.iter().filter(|&&d| d > 0.0) {
                let l = p.assign_level(d).unwrap();
                prop_assert!(l >= 1 && l <= p.k());
                prop_assert!(p.counts[l - 1] > 0);
            }
        }

        #[test]
        fn overlap_subset_is_idempotent(seed in 0u64..500, eps in 0.0f64..0.45) {
            let d = synthetic(300, seed, false);
            let spec = LearnerSpec::new(LearnerKind::Tree { max_depth: 3, min_leaf: 5 }, 0);
            let m = fit_propensity(&d, &spec, eps).unwrap();
            let once = overlap_subset(&d, &m).unwrap();
            let twice = overlap_subset(&once.data, &m).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once.propensity.iter().all(|&g| m.accepts(g)));
            prop_assert!(once.data.ids.iter().all(|id| d.ids.contains(id)));
        }
    }
}
