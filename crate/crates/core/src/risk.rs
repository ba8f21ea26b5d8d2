//! Bootstrap distributions of effect predictions and their empirical
//! VaR/CVaR.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metalearners::{fit_cate, CateModel, CateMethodSpec};
use crate::rng::{stream, sub_seed};
use crate::treatments::OverlapDataset;

pub const DEFAULT_REPLICATES: usize = 200;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;
/// Extra attempts per replicate when a resample cannot be fitted.
pub const MAX_RETRIES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub values: Vec<f64>,
    pub seed: u64,
}

impl BootstrapDistribution {
    pub fn new(values: Vec<f64>, seed: u64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("empty bootstrap distribution".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite bootstrap value {v}")));
        }
        Ok(Self { values, seed })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        crate::matrix::mean(&self.values)
    }

    pub fn summary(&self, p: f64) -> Result<RiskSummary> {
        Ok(RiskSummary {
            p,
            var_p: var(&self.values, p)?,
            cvar_p: cvar(&self.values, p)?,
            mean: self.mean(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub p: f64,
    pub var_p: f64,
    pub cvar_p: f64,
    pub mean: f64,
}

fn check(values: &[f64], p: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Domain("VaR/CVaR of an empty distribution".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("confidence level p = {p} must lie in (0, 1)")));
    }
    Ok(())
}

/// 1-based rank `ceil((1 - p) B)` of the ascending order statistic, at least 1.
fn var_rank(b: usize, p: f64) -> usize {
    // the product is rounded first so that e.g. (1 - 0.95) * 100 gives 5
    let r = ((1.0 - p) * b as f64 * 1e9).round() / 1e9;
    (r.ceil() as usize).clamp(1, b)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Empirical `VaR_p`: the `ceil((1 - p) B)`-th smallest value.
pub fn var(values: &[f64], p: f64) -> Result<f64> {
    check(values, p)?;
    Ok(sorted(values)[var_rank(values.len(), p) - 1])
}

/// Empirical `CVaR_p`: mean of all values at or below `VaR_p`.
pub fn cvar(values: &[f64], p: f64) -> Result<f64> {
    check(values, p)?;
    let v = sorted(values);
    let threshold = v[var_rank(v.len(), p) - 1];
    let tail: Vec<f64> = v.iter().copied().take_while(|&x| x <= threshold).collect();
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// `B` refits of one method on resamples of a level's overlap set.
#[derive(Debug, Clone)]
pub struct BootstrapEnsemble {
    pub level: usize,
    pub seed: u64,
    models: Vec<CateModel>,
}

impl BootstrapEnsemble {
    pub fn fit(spec: &CateMethodSpec, data: &OverlapDataset, b: usize, seed: u64) -> Result<Self> {
        if b == 0 {
            return Err(Error::Config("bootstrap replicates must be >= 1".into()));
        }
        let n = data.len();
        let mut models = Vec::with_capacity(b);
        for r in 0..b {
            let mut last = None;
            for attempt in 0..=MAX_RETRIES {
                let rep_seed = sub_seed(seed, r as u64);
                let mut rng = stream(rep_seed, attempt as u64);
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let sample = data.subset(&idx);
                match fit_cate(&spec.clone().with_seed(sub_seed(rep_seed, attempt as u64)), &sample) {
                    Ok(m) => {
                        last = Some(Ok(m));
                        break;
                    }
                    Err(Error::Degenerate(msg)) => last = Some(Err(msg)),
                    Err(e) => return Err(e),
                }
            }
            match last {
                Some(Ok(m)) => models.push(m),
                Some(Err(msg)) => {
                    return Err(Error::Degenerate(format!(
                        "bootstrap replicate {r} failed after {MAX_RETRIES} retries: {msg}"
                    )))
                }
                None => unreachable!("at least one attempt"),
            }
        }
        Ok(Self {
            level: data.level(),
            seed,
            models,
        })
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    /// Overlap gate of the level the ensemble was fitted on.
    pub fn gate(&self) -> &crate::treatments::PropensityModel {
        self.models[0].gate()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn distribution(&self, x: &[f64]) -> Result<BootstrapDistribution> {
        let mut values = Vec::with_capacity(self.models.len());
        for m in &self.models {
            if x.len() != m.n_features() {
                return Err(Error::Dimension {
                    expected: m.n_features(),
                    got: x.len(),
                });
            }
            values.push(m.effect_row(x));
        }
        BootstrapDistribution::new(values, self.seed)
    }

    /// Distributions at every row of `x`.
    pub fn distributions(&self, x: &Matrix) -> Result<Vec<BootstrapDistribution>> {
        x.rows().map(|r| self.distribution(r)).collect()
    }
}

/// Bootstrap distribution of the effect estimate at one point inside the
/// level's overlap gate.
pub fn bootstrap_ite(
    spec: &CateMethodSpec,
    data: &OverlapDataset,
    x: &[f64],
    b: usize,
    seed: u64,
) -> Result<BootstrapDistribution> {
    let gate = &data.gate;
    if x.len() != gate.n_features() {
        return Err(Error::Dimension {
            expected: gate.n_features(),
            got: x.len(),
        });
    }
    if !gate.accepts(gate.predict_row(x)) {
        return Err(Error::Domain(format!("point outside the level {} overlap region", data.level())));
    }
    BootstrapEnsemble::fit(spec, data, b, seed)?.distribution(x)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::learners::LearnerSpec;
    use crate::metalearners::CateMethod;
    use crate::testutil::{synthetic, synthetic_with_truth};

    fn brute_var(v: &[f64], p: f64) -> f64 {
        let s = sorted(v);
        // smallest k with k >= (1 - p) B, found by enumeration
        let b = s.len() as f64;
        let k = (1..=s.len()).find(|&k| k as f64 + 1e-9 >= (1.0 - p) * b).unwrap();
        s[k - 1]
    }

    #[test]
    fn hundred_values() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(var(&v, 0.95).unwrap(), 5.0);
        assert_eq!(cvar(&v, 0.95).unwrap(), 3.0);
    }

    #[test]
    fn small_sets() {
        assert_eq!(var(&[-10.0, -5.0, 0.0, 5.0, 10.0], 0.8).unwrap(), -10.0);
        assert_eq!(cvar(&[10.0, -10.0], 0.5).unwrap(), -10.0);
        assert_eq!(var(&[4.0; 7], 0.9).unwrap(), 4.0);
        assert_eq!(cvar(&[4.0; 7], 0.9).unwrap(), 4.0);
        assert_eq!(var(&[2.5], 0.99).unwrap(), 2.5);
        assert_eq!(cvar(&[2.5], 0.01).unwrap(), 2.5);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(var(&[], 0.9), Err(Error::Domain(_))));
        assert!(matches!(cvar(&[1.0], 1.0), Err(Error::Domain(_))));
        assert!(matches!(cvar(&[1.0], 0.0), Err(Error::Domain(_))));
        assert!(BootstrapDistribution::new(vec![f64::NAN], 0).is_err());
    }

    #[test]
    fn one_replicate() {
        let data = synthetic(400, 1, |_| 1.0);
        let spec = CateMethodSpec::new("d", CateMethod::Direct, LearnerSpec::linear());
        let d = bootstrap_ite(&spec, &data, &[0.0, 0.0, 0.0], 1, 5).unwrap();
        assert_eq!(d.len(), 1);
        for p in [0.1, 0.5, 0.95] {
            let s = d.summary(p).unwrap();
            assert_eq!(s.var_p, d.values[0]);
            assert_eq!(s.cvar_p, d.values[0]);
        }
    }

    #[test]
    fn replicates_are_deterministic_and_seed_dependent() {
        let data = synthetic(400, 2, |x| x[1]);
        let spec = CateMethodSpec::new("t", CateMethod::TwoModel, LearnerSpec::tree(3, 10));
        let x = [0.1, 0.2, -0.3];
        let a = bootstrap_ite(&spec, &data, &x, 20, 5).unwrap();
        let b = bootstrap_ite(&spec, &data, &x, 20, 5).unwrap();
        let c = bootstrap_ite(&spec, &data, &x, 20, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn noiseless_constant_effect_has_no_spread() {
        let (data, _) = synthetic_with_truth(400, 3, 0.0, |_| 1.5);
        let spec = CateMethodSpec::new("d", CateMethod::Direct, LearnerSpec::linear());
        let d = bootstrap_ite(&spec, &data, &[0.3, -0.2, 1.0], 30, 1).unwrap();
        for v in d.values {
            assert!((v - 1.5).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn point_outside_gate_rejected() {
        let data = synthetic(400, 4, |_| 1.0);
        let spec = CateMethodSpec::new("d", CateMethod::Direct, LearnerSpec::linear());
        assert!(matches!(
            bootstrap_ite(&spec, &data, &[50.0, 0.0, 0.0], 5, 1),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            bootstrap_ite(&spec, &data, &[0.0], 5, 1),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn ensemble_matches_single_point_path() {
        let data = synthetic(400, 5, |x| x[0]);
        let spec = CateMethodSpec::new("t", CateMethod::TwoModel, LearnerSpec::linear());
        let ens = BootstrapEnsemble::fit(&spec, &data, 10, 3).unwrap();
        let rows = data.features().select_rows(&[0, 1, 2]);
        for (r, d) in rows.rows().zip(ens.distributions(&rows).unwrap()) {
            assert_eq!(d, bootstrap_ite(&spec, &data, r, 10, 3).unwrap());
        }
    }

    fn dist() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 1..300)
    }

    proptest! {
        #[test]
        fn matches_enumeration(v in dist(), p in 0.01f64..0.99) {
            prop_assert_eq!(var(&v, p).unwrap(), brute_var(&v, p));
            let t = brute_var(&v, p);
            let tail: Vec<f64> = v.iter().copied().filter(|&x| x <= t).collect();
            let want = tail.iter().sum::<f64>() / tail.len() as f64;
            prop_assert!((cvar(&v, p).unwrap() - want).abs() <= 1e-9 * want.abs().max(1.0));
        }

        #[test]
        fn cvar_bounds_and_monotone(v in dist(), p in 0.01f64..0.98, dp in 0.0f64..0.5) {
            let q = (p + dp).min(0.99);
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let c = cvar(&v, p).unwrap();
            prop_assert!(c <= var(&v, p).unwrap());
            prop_assert!(c <= mean + 1e-9 * mean.abs().max(1.0));
            prop_assert!(cvar(&v, q).unwrap() <= c + 1e-9 * c.abs().max(1.0));
        }

        #[test]
        fn equivariance(v in dist(), p in 0.01f64..0.99, c in -100.0f64..100.0, a in 0.01f64..100.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let scaled: Vec<f64> = v.iter().map(|x| a * x).collect();
            let tol = |x: f64| 1e-9 * x.abs().max(1.0) * a.max(1.0) + 1e-9 * c.abs();
            let (vr, cv) = (var(&v, p).unwrap(), cvar(&v, p).unwrap());
            prop_assert!((var(&shifted, p).unwrap() - (vr + c)).abs() <= tol(vr));
            prop_assert!((cvar(&shifted, p).unwrap() - (cv + c)).abs() <= tol(cv));
            prop_assert!((var(&scaled, p).unwrap() - a * vr).abs() <= tol(vr));
            prop_assert!((cvar(&scaled, p).unwrap() - a * cv).abs() <= tol(cv));
        }
    }
}
