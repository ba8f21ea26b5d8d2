//! Synthetic credit portfolios with known potential outcomes, and the CSV
//! layer for real-schema portfolios.
//!
//! Money fields are log-normal, the bureau score is a truncated normal and
//! count fields are Poisson. The post-decision expected profit is
//! `baseline(x) + cate(x, level) + noise`, where the noise draw is shared by
//! every potential outcome of a customer, so individual effects are exact.

mod io;
mod record;

use std::collections::HashMap;

use rand::Rng as _;
use rand_distr::{Distribution, LogNormal, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

pub use io::{load_portfolio, load_truth, truth_path, write_portfolio, write_truth};
pub use record::{CustomerRecord, COLUMNS, FEATURE_NAMES};

use crate::error::{Error, Result};
use crate::finance::{expected_profit, exposure_at_default, ProfitParams};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectShape {
    Zero,
    Constant { delta: f64 },
    /// `scale * (beta - 1) * (1 + 0.8 z_score - 0.5 z_rate)`; linear in the
    /// raw score and interest-rate columns.
    Linear { scale: f64 },
    /// Concave in the dosage with a customer-specific optimum:
    /// `scale * ((beta - 1)(1 + tanh z_score) - (beta - 1)^2 (0.3 + 3 pd))`.
    Nonlinear { scale: f64 },
}

impl EffectShape {
    /// True effect of moving `rec` from control to a level whose
    /// representative dosage is `dosage`.
    pub fn cate(&self, rec: &CustomerRecord, dosage: f64) -> f64 {
        let step = dosage - 1.0;
        match *self {
            EffectShape::Zero => 0.0,
            EffectShape::Constant { delta } => delta,
            EffectShape::Linear { scale } => {
                scale * step * (1.0 + 0.8 * z_score(rec) - 0.5 * z_rate(rec))
            }
            EffectShape::Nonlinear { scale } => {
                scale * (step * (1.0 + z_score(rec).tanh()) - step * step * (0.3 + 3.0 * rec.pd_m3))
            }
        }
    }
}

fn z_score(rec: &CustomerRecord) -> f64 {
    (rec.bureau_score - 650.0) / 80.0
}

fn z_rate(rec: &CustomerRecord) -> f64 {
    (rec.interest_rate - 0.045) / 0.012
}

fn z_balance(rec: &CustomerRecord) -> f64 {
    ((rec.balance_m3 + 1.0).ln() - 800f64.ln()) / 0.8
}

/// Untreated month-6 expected profit before noise; `persistence` is the
/// weight carried over from the month-3 profit.
pub fn baseline_outcome(rec: &CustomerRecord, persistence: f64) -> f64 {
    persistence * rec.ep_m3 + 2.0 * z_score(rec) - z_rate(rec) + 1.5 * z_balance(rec).tanh()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_customers: usize,
    pub k_levels: usize,
    /// Inner cut points of the dosage range; `k_levels - 1` of them.
    pub cut_points: Vec<f64>,
    /// Treated dosages are drawn from `(dosage_min, dosage_max]`.
    pub dosage_min: f64,
    pub dosage_max: f64,
    /// Unnormalised assignment weights, control first. Empty means
    /// half control and the rest split evenly.
    pub level_weights: Vec<f64>,
    pub effect_shape: EffectShape,
    pub confounding_strength: f64,
    /// Top fraction of bureau scores that is always kept at control.
    pub overlap_violation_fraction: f64,
    pub noise_sd: f64,
    /// Weight of the month-3 profit in the untreated month-6 profit.
    pub persistence: f64,
    pub profit: ProfitParams,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_customers: 20_000,
            k_levels: 6,
            cut_points: vec![1.25, 1.5, 1.75, 2.0, 2.25],
            dosage_min: 1.0,
            dosage_max: 2.5,
            level_weights: Vec::new(),
            effect_shape: EffectShape::Nonlinear { scale: 6.0 },
            confounding_strength: 1.0,
            overlap_violation_fraction: 0.05,
            noise_sd: 2.0,
            persistence: 0.8,
            profit: ProfitParams::default(),
            seed: 7,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_customers == 0 {
            return bad("n_customers must be positive".into());
        }
        if self.k_levels == 0 {
            return bad("k_levels must be positive".into());
        }
        if self.cut_points.len() + 1 != self.k_levels {
            return bad(format!(
                "k_levels = {} needs {} cut_points, got {}",
                self.k_levels,
                self.k_levels - 1,
                self.cut_points.len()
            ));
        }
        if !(self.dosage_min >= 0.0 && self.dosage_max > self.dosage_min) {
            return bad("dosage range must satisfy 0 <= dosage_min < dosage_max".into());
        }
        let mut prev = self.dosage_min;
        for &c in &self.cut_points {
            if !(c > prev) {
                return bad("cut_points must be strictly ascending inside the dosage range".into());
            }
            prev = c;
        }
        if !(self.dosage_max > prev) {
            return bad("cut_points must lie below dosage_max".into());
        }
        if !self.level_weights.is_empty()
            && (self.level_weights.len() != self.k_levels + 1
                || self.level_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)))
        {
            return bad(format!(
                "level_weights needs {} positive entries (control first)",
                self.k_levels + 1
            ));
        }
        if !(self.confounding_strength >= 0.0 && self.confounding_strength.is_finite()) {
            return bad("confounding_strength must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.overlap_violation_fraction) {
            return bad("overlap_violation_fraction must lie in [0, 1]".into());
        }
        if !self.persistence.is_finite() {
            return bad("persistence must be finite".into());
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and >= 0".into());
        }
        self.profit.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Midpoint of each dosage bin, i.e. the mean of the uniform draw.
    pub fn level_dosages(&self) -> Vec<f64> {
        let edges = self.bin_edges();
        edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn bin_edges(&self) -> Vec<f64> {
        let mut e = vec![self.dosage_min];
        e.extend_from_slice(&self.cut_points);
        e.push(self.dosage_max);
        e
    }

    /// Assignment marginals when confounding is switched off.
    pub fn marginals(&self) -> Vec<f64> {
        let w = if self.level_weights.is_empty() {
            let mut w = vec![0.5 / self.k_levels as f64; self.k_levels + 1];
            w[0] = 0.5;
            w
        } else {
            self.level_weights.clone()
        };
        let s: f64 = w.iter().sum();
        w.iter().map(|x| x / s).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub id: u64,
    pub assigned_level: usize,
    pub y_control: f64,
    /// Potential outcome per treated level, level 1 first.
    pub y_level: Vec<f64>,
    pub cate: Vec<f64>,
    /// Assignment probability per level, control first.
    pub propensity: Vec<f64>,
}

impl TruthRow {
    /// Potential outcome at `level` (0 = control).
    pub fn outcome(&self, level: usize) -> f64 {
        if level == 0 {
            self.y_control
        } else {
            self.y_level[level - 1]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    rows: Vec<TruthRow>,
    index: HashMap<u64, usize>,
}

impl GroundTruth {
    pub fn new(rows: Vec<TruthRow>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        let k = rows.first().map_or(0, |r| r.cate.len());
        for (i, r) in rows.iter().enumerate() {
            if r.cate.len() != k || r.y_level.len() != k || r.propensity.len() != k + 1 {
                return Err(Error::Data(format!("truth row for id {} has ragged level columns", r.id)));
            }
            if index.insert(r.id, i).is_some() {
                return Err(Error::Data(format!("duplicate id {} in ground truth", r.id)));
            }
        }
        Ok(Self { rows, index })
    }

    pub fn rows(&self) -> &[TruthRow] {
        &self.rows
    }

    pub fn get(&self, id: u64) -> Option<&TruthRow> {
        self.index.get(&id).map(|&i| &self.rows[i])
    }

    pub fn k_levels(&self) -> usize {
        self.rows.first().map_or(0, |r| r.cate.len())
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn poisson(rng: &mut rng::Rng, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng)
}

fn lognormal(rng: &mut rng::Rng, mu: f64, sigma: f64) -> f64 {
    LogNormal::new(mu, sigma).expect("valid lognormal").sample(rng)
}

/// Draws everything observed before the decision.
fn draw_pretreatment(id: u64, rng: &mut rng::Rng, profit: &ProfitParams) -> CustomerRecord {
    let score_dist = Normal::new(650.0, 80.0).expect("valid normal");
    let score = loop {
        let s: f64 = score_dist.sample(rng);
        if (300.0..=850.0).contains(&s) {
            break s;
        }
    };
    let zs = (score - 650.0) / 80.0;
    let income = lognormal(rng, 2500f64.ln(), 0.5);
    let noise: f64 = rng.sample(StandardNormal);
    let rate = (0.045 - 0.006 * zs + 0.008 * noise).clamp(0.005, 0.12);
    let months = 6.0 + poisson(rng, 18.0);
    let limit_m3 = (1.2 * income * (0.24 * zs).exp() * lognormal(rng, 0.0, 0.25) / 10.0)
        .round()
        .max(20.0)
        * 10.0;
    let util_noise: f64 = rng.sample(StandardNormal);
    let util = logistic(-0.3 - 0.5 * zs + 0.9 * util_noise);
    let balance_m3 = limit_m3 * util;
    let balance_m2 = (balance_m3 * lognormal(rng, 0.0, 0.15)).min(limit_m3);
    let balance_m1 = (balance_m2 * lognormal(rng, 0.0, 0.15)).min(limit_m3);
    let avg_balance =
        ((balance_m1 + balance_m2 + balance_m3) / 3.0 * lognormal(rng, 0.0, 0.1)).min(limit_m3);
    let mut cons_in = [0.0; 3];
    let mut cons_out = [0.0; 3];
    for m in 0..3 {
        cons_in[m] = lognormal(rng, (0.15 * limit_m3).ln(), 0.6);
        cons_out[m] = lognormal(rng, (0.10 * limit_m3).ln(), 0.7);
    }
    let avg_consumption =
        (cons_in.iter().sum::<f64>() + cons_out.iter().sum::<f64>()) / 3.0 * lognormal(rng, 0.0, 0.1);
    let mut fees_avg = [0.0; 3];
    let mut fees_max = [0.0; 3];
    let mut fees_min = [0.0; 3];
    let mut txn = [0.0; 3];
    for m in 0..3 {
        fees_avg[m] = poisson(rng, 1.5);
        fees_max[m] = fees_avg[m] + poisson(rng, 1.0);
        fees_min[m] = fees_avg[m] - poisson(rng, 0.7).min(fees_avg[m]);
        txn[m] = poisson(rng, 5.0 + 10.0 * util);
    }
    let risk = (-zs).max(0.0);
    let unpaid = poisson(rng, 0.2 + 0.8 * risk).min(3.0);
    let max_unpaid = unpaid.max(poisson(rng, 0.3 + 1.2 * risk));
    let pd_m3 = logistic(-3.6 - 0.9 * zs + 0.45 * unpaid + 0.8 * (util - 0.5));
    let ead = exposure_at_default(balance_m3, limit_m3, profit.ccf).expect("balance within limit");
    let ep_m3 = expected_profit(rate, balance_m3, pd_m3, profit.lgd, ead).expect("valid inputs");

    CustomerRecord {
        id,
        bureau_score: score,
        est_income: income,
        interest_rate: rate,
        months_on_book: months,
        limit_m3,
        limit_m6: limit_m3,
        avg_balance,
        avg_consumption,
        balance_m1,
        balance_m2,
        balance_m3,
        cons_in_m1: cons_in[0],
        cons_in_m2: cons_in[1],
        cons_in_m3: cons_in[2],
        cons_out_m1: cons_out[0],
        cons_out_m2: cons_out[1],
        cons_out_m3: cons_out[2],
        fees_avg_m1: fees_avg[0],
        fees_avg_m2: fees_avg[1],
        fees_avg_m3: fees_avg[2],
        fees_max_m1: fees_max[0],
        fees_max_m2: fees_max[1],
        fees_max_m3: fees_max[2],
        fees_min_m1: fees_min[0],
        fees_min_m2: fees_min[1],
        fees_min_m3: fees_min[2],
        txn_m1: txn[0],
        txn_m2: txn[1],
        txn_m3: txn[2],
        max_unpaid_life: max_unpaid,
        unpaid_m1_m3: unpaid,
        pd_m3,
        pd_m6: pd_m3,
        observed_dosage: 0.0,
        ep_m3,
        ep_m6: 0.0,
    }
}

/// Assignment probabilities, control first: a multinomial logit whose
/// feature-dependent part is scaled by the confounding strength.
fn assignment_probs(rec: &CustomerRecord, config: &GenConfig, in_violation_region: bool) -> Vec<f64> {
    let k = config.k_levels;
    if in_violation_region {
        let mut p = vec![0.0; k + 1];
        p[0] = 1.0;
        return p;
    }
    let zs = z_score(rec);
    let zb = z_balance(rec);
    let zm = (rec.months_on_book - 24.0) / 4.0;
    let s = config.confounding_strength;
    let utilities: Vec<f64> = config
        .marginals()
        .iter()
        .enumerate()
        .map(|(j, w)| {
            if j == 0 {
                w.ln()
            } else {
                let frac = j as f64 / k as f64;
                w.ln() + s * ((0.4 + 0.8 * frac) * zs + 0.5 * zb - 0.3 * frac * zm)
            }
        })
        .collect();
    let top = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = utilities.iter().map(|u| (u - top).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

/// Generates a portfolio and its potential outcomes. Deterministic in
/// `config.seed`.
pub fn generate_portfolio(config: &GenConfig) -> Result<(Vec<CustomerRecord>, GroundTruth)> {
    config.validate()?;
    let n = config.n_customers;
    let k = config.k_levels;
    let level_dosages = config.level_dosages();
    let edges = config.bin_edges();

    let mut records: Vec<CustomerRecord> = (0..n)
        .map(|i| draw_pretreatment(i as u64 + 1, &mut rng::stream(config.seed, 2 * i as u64), &config.profit))
        .collect();

    let threshold = if config.overlap_violation_fraction > 0.0 {
        let mut scores: Vec<f64> = records.iter().map(|r| r.bureau_score).collect();
        scores.sort_by(f64::total_cmp);
        let keep = ((1.0 - config.overlap_violation_fraction) * n as f64).floor() as usize;
        scores.get(keep).copied().unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };

    let mut rows = Vec::with_capacity(n);
    for (i, rec) in records.iter_mut().enumerate() {
        let mut rng = rng::stream(config.seed, 2 * i as u64 + 1);
        let probs = assignment_probs(rec, config, rec.bureau_score >= threshold);
        let u: f64 = rng.random();
        let mut level = k;
        let mut acc = 0.0;
        for (j, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                level = j;
                break;
            }
        }
        let eps: f64 = rng.sample(StandardNormal);
        let pd_noise: f64 = rng.sample(StandardNormal);
        let base = baseline_outcome(rec, config.persistence) + config.noise_sd * eps;
        let cate: Vec<f64> = level_dosages.iter().map(|&b| config.effect_shape.cate(rec, b)).collect();
        let y_level: Vec<f64> = cate.iter().map(|t| base + t).collect();

        if level > 0 {
            let (lo, hi) = (edges[level - 1], edges[level]);
            // (lo, hi]
            let dosage = hi - (hi - lo) * rng.random::<f64>();
            rec.observed_dosage = dosage;
            rec.limit_m6 = rec.limit_m3 * dosage;
            rec.ep_m6 = y_level[level - 1];
        } else {
            rec.ep_m6 = base;
        }
        let pd_shift = if level > 0 { 0.15 * (rec.observed_dosage - 1.0) } else { 0.0 };
        let p = rec.pd_m3.clamp(1e-12, 1.0 - 1e-12);
        rec.pd_m6 = logistic((p / (1.0 - p)).ln() + pd_shift + 0.2 * pd_noise);

        rows.push(TruthRow {
            id: rec.id,
            assigned_level: level,
            y_control: base,
            y_level,
            cate,
            propensity: probs,
        });
    }
    Ok((records, GroundTruth::new(rows)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(shape: EffectShape, seed: u64) -> GenConfig {
        GenConfig {
            n_customers: 400,
            effect_shape: shape,
            seed,
            ..GenConfig::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = small(EffectShape::Nonlinear { scale: 6.0 }, 11);
        let (a, ta) = generate_portfolio(&cfg).unwrap();
        let (b, tb) = generate_portfolio(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        write_portfolio(&a, &pa).unwrap();
        write_portfolio(&b, &pb).unwrap();
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
        let (c, _) = generate_portfolio(&small(EffectShape::Nonlinear { scale: 6.0 }, 12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_effect_means_zero_cate() {
        let (_, truth) = generate_portfolio(&small(EffectShape::Zero, 3)).unwrap();
        assert!(truth.rows().iter().all(|r| r.cate.iter().all(|&t| t == 0.0)));
    }

    #[test]
    fn constant_effect_matches_outcome_difference() {
        let (_, truth) = generate_portfolio(&small(EffectShape::Constant { delta: 5.0 }, 3)).unwrap();
        for r in truth.rows() {
            for j in 1..=6 {
                let diff = r.outcome(j) - r.y_control;
                assert!((diff - 5.0).abs() < 1e-9, "difference {diff}");
                assert_eq!(r.cate[j - 1], 5.0);
            }
        }
    }

    #[test]
    fn observed_outcome_is_assigned_potential_outcome() {
        let (recs, truth) = generate_portfolio(&small(EffectShape::Linear { scale: 4.0 }, 5)).unwrap();
        for rec in &recs {
            let t = truth.get(rec.id).unwrap();
            assert_eq!(rec.ep_m6.to_bits(), t.outcome(t.assigned_level).to_bits());
            assert_eq!(rec.observed_dosage == 0.0, t.assigned_level == 0);
            assert!(rec.validate().is_ok());
            let s: f64 = t.propensity.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn violation_region_always_control() {
        let cfg = GenConfig {
            n_customers: 2000,
            overlap_violation_fraction: 0.1,
            ..GenConfig::default()
        };
        let (recs, truth) = generate_portfolio(&cfg).unwrap();
        let mut scores: Vec<f64> = recs.iter().map(|r| r.bureau_score).collect();
        scores.sort_by(f64::total_cmp);
        let threshold = scores[1800];
        let forced: Vec<_> = recs.iter().filter(|r| r.bureau_score >= threshold).collect();
        assert_eq!(forced.len(), 200);
        for r in forced {
            assert_eq!(r.observed_dosage, 0.0);
            assert_eq!(truth.get(r.id).unwrap().propensity[0], 1.0);
        }
    }

    #[test]
    fn dosages_fall_in_their_bins() {
        let cfg = small(EffectShape::Zero, 9);
        let (recs, truth) = generate_portfolio(&cfg).unwrap();
        let edges = cfg.bin_edges();
        for r in &recs {
            let lvl = truth.get(r.id).unwrap().assigned_level;
            if lvl > 0 {
                assert!(r.observed_dosage > edges[lvl - 1] && r.observed_dosage <= edges[lvl]);
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = GenConfig::default();
        c.cut_points = vec![1.5, 1.25, 1.75, 2.0, 2.25];
        assert!(matches!(generate_portfolio(&c), Err(Error::Config(_))));
        let mut c = GenConfig::default();
        c.overlap_violation_fraction = 1.5;
        assert!(generate_portfolio(&c).is_err());
        let mut c = GenConfig::default();
        c.k_levels = 3;
        assert!(generate_portfolio(&c).is_err());
        let mut c = GenConfig::default();
        c.level_weights = vec![1.0; 3];
        assert!(generate_portfolio(&c).is_err());
    }

    #[test]
    fn csv_round_trip_and_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let (recs, truth) = generate_portfolio(&small(EffectShape::Zero, 1)).unwrap();
        let p = dir.path().join("book.csv");
        write_portfolio(&recs, &p).unwrap();
        assert_eq!(load_portfolio(&p).unwrap(), recs);
        let tp = truth_path(&p);
        assert_eq!(tp.file_name().unwrap(), "book.truth.csv");
        write_truth(&truth, &tp).unwrap();
        assert_eq!(load_truth(&tp).unwrap(), truth);

        write_portfolio(&recs[..1], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), COLUMNS.join(","));
    }

    #[test]
    fn empty_data_section_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.csv");
        std::fs::write(&p, format!("{}\n", COLUMNS.join(","))).unwrap();
        assert!(load_portfolio(&p).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_probability_names_cell() {
        let dir = tempfile::tempdir().unwrap();
        let (mut recs, _) = generate_portfolio(&small(EffectShape::Zero, 1)).unwrap();
        recs.truncate(3);
        recs[1].pd_m3 = 1.3;
        let p = dir.path().join("bad.csv");
        write_portfolio(&recs, &p).unwrap();
        match load_portfolio(&p) {
            Err(Error::Cell { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "pd_m3");
            }
            other => panic!("expected cell error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_number_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        let header: Vec<&str> = COLUMNS.iter().copied().filter(|c| *c != "txn_m2").collect();
        std::fs::write(&p, format!("{}\n", header.join(","))).unwrap();
        match load_portfolio(&p) {
            Err(Error::Cell { column, .. }) => assert_eq!(column, "txn_m2"),
            other => panic!("{other:?}"),
        }
        let (recs, _) = generate_portfolio(&small(EffectShape::Zero, 1)).unwrap();
        write_portfolio(&recs[..2], &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
        cells[5] = "abc".into();
        lines[1] = cells.join(",");
        std::fs::write(&p, lines.join("\n")).unwrap();
        match load_portfolio(&p) {
            Err(Error::Cell { row, column, .. }) => {
                assert_eq!(row, 1);
                assert_eq!(column, COLUMNS[5]);
            }
            other => panic!("{other:?}"),
        }
    }
}
