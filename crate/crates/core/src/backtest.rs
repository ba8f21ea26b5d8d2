//! Retrospective evaluation against the historical (factual) decisions.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::datagen::{CustomerRecord, GroundTruth};
use crate::error::{Error, Result};
use crate::policy::{Criterion, PolicyDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// Both increase, by the same level.
    I,
    /// Both increase, by different levels.
    II,
    /// The policy increases, history kept the line.
    III,
    /// The policy keeps the line, history increased it.
    IV,
    /// Both keep.
    V,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Scenario::I, Scenario::II, Scenario::III, Scenario::IV, Scenario::V];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn classify_scenario(gs_level: usize, cpp_level: usize, k: usize) -> Result<Scenario> {
    if gs_level > k || cpp_level > k {
        return Err(Error::Domain(format!(
            "levels ({gs_level}, {cpp_level}) outside 0..={k}"
        )));
    }
    Ok(match (gs_level, cpp_level) {
        (0, 0) => Scenario::V,
        (0, _) => Scenario::IV,
        (_, 0) => Scenario::III,
        (g, c) if g == c => Scenario::I,
        _ => Scenario::II,
    })
}

/// Averages over one group of customers. Ratios are per-customer
/// percentages of the pretreatment limit, averaged over customers with a
/// positive limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub label: String,
    pub size: usize,
    pub avg_ep_p: Option<f64>,
    pub avg_ep_p_ratio: Option<f64>,
    pub avg_ep_r: Option<f64>,
    pub avg_ep_r_ratio: Option<f64>,
}

#[derive(Default)]
struct Acc {
    n: usize,
    ep_p: f64,
    ep_r: f64,
    n_ratio: usize,
    ep_p_ratio: f64,
    ep_r_ratio: f64,
}

impl Acc {
    fn add(&mut self, r: &CustomerRecord) {
        self.n += 1;
        self.ep_p += r.ep_m6;
        self.ep_r += r.ep_m3;
        if r.limit_m3 > 0.0 {
            self.n_ratio += 1;
            self.ep_p_ratio += 100.0 * r.ep_m6 / r.limit_m3;
            self.ep_r_ratio += 100.0 * r.ep_m3 / r.limit_m3;
        }
    }

    fn row(&self, label: String) -> ScenarioRow {
        let avg = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
        ScenarioRow {
            label,
            size: self.n,
            avg_ep_p: avg(self.ep_p, self.n),
            avg_ep_p_ratio: avg(self.ep_p_ratio, self.n_ratio),
            avg_ep_r: avg(self.ep_r, self.n),
            avg_ep_r_ratio: avg(self.ep_r_ratio, self.n_ratio),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMetrics {
    pub criterion: Option<Criterion>,
    /// Scenarios I to V in order.
    pub scenarios: Vec<ScenarioRow>,
    pub all: ScenarioRow,
}

impl ScenarioMetrics {
    pub fn row(&self, s: Scenario) -> &ScenarioRow {
        &self.scenarios[s as usize]
    }

    pub fn population(&self) -> usize {
        self.scenarios.iter().map(|r| r.size).sum()
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        if let Some(c) = self.criterion {
            let _ = writeln!(out, "Criterion: {c}\n");
        }
        out.push_str("| Scenario | Size | Avg EP_P per cust. | Avg EP_P/L_R per cust. (%) | Avg EP_R per cust. | Avg EP_R/L_R per cust. (%) |\n");
        out.push_str("|---|---|---|---|---|---|\n");
        for r in self.scenarios.iter().chain(std::iter::once(&self.all)) {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                r.label,
                r.size,
                cell(r.avg_ep_p),
                cell(r.avg_ep_p_ratio),
                cell(r.avg_ep_r),
                cell(r.avg_ep_r_ratio)
            );
        }
        out
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Groups decisions by scenario against the historical level of each
/// customer. `cpp_levels[i]` belongs to `records[i]`.
pub fn evaluate(
    decisions: &[PolicyDecision],
    cpp_levels: &[usize],
    records: &[CustomerRecord],
    k: usize,
) -> Result<ScenarioMetrics> {
    if cpp_levels.len() != records.len() {
        return Err(Error::Dimension {
            expected: records.len(),
            got: cpp_levels.len(),
        });
    }
    let index: HashMap<u64, usize> = records.iter().enumerate().map(|(i, r)| (r.id, i)).collect();
    let criterion = decisions.first().map(|d| d.criterion);
    let mut accs: Vec<Acc> = Scenario::ALL.iter().map(|_| Acc::default()).collect();
    let mut all = Acc::default();
    for d in decisions {
        let &i = index
            .get(&d.id)
            .ok_or_else(|| Error::Data(format!("decision for id {} has no matching record", d.id)))?;
        if Some(d.criterion) != criterion {
            return Err(Error::Data(format!(
                "mixed criteria {} and {} in one evaluation",
                criterion.map_or("-", |c| c.code()),
                d.criterion
            )));
        }
        let s = classify_scenario(d.chosen_level, cpp_levels[i], k)?;
        accs[s as usize].add(&records[i]);
        all.add(&records[i]);
    }
    Ok(ScenarioMetrics {
        criterion,
        scenarios: Scenario::ALL.iter().zip(&accs).map(|(s, a)| a.row(s.to_string())).collect(),
        all: all.row("All decisions".into()),
    })
}

/// Sum of the true potential outcomes at the chosen levels.
pub fn oracle_policy_value(truth: &GroundTruth, decisions: &[PolicyDecision]) -> Result<f64> {
    let k = truth.k_levels();
    let mut total = 0.0;
    for d in decisions {
        let row = truth
            .get(d.id)
            .ok_or_else(|| Error::Data(format!("id {} missing from ground truth", d.id)))?;
        if d.chosen_level > k {
            return Err(Error::Domain(format!("level {} outside 0..={k}", d.chosen_level)));
        }
        total += row.outcome(d.chosen_level);
    }
    Ok(total)
}

/// Count of customers per level `0..=k`.
pub fn level_counts(levels: impl IntoIterator<Item = usize>, k: usize) -> Vec<usize> {
    let mut c = vec![0; k + 1];
    for l in levels {
        if l <= k {
            c[l] += 1;
        }
    }
    c
}

/// Decisions per level for several policies side by side, with shares.
pub fn distribution_markdown(columns: &[(String, Vec<usize>)], dosages: &[Option<f64>]) -> String {
    let mut out = String::from("| Level | Dosage |");
    for (name, _) in columns {
        let _ = write!(out, " {name} |");
    }
    out.push_str("\n|---|---|");
    out.push_str(&"---|".repeat(columns.len()));
    out.push('\n');
    let k = dosages.len();
    for level in 0..=k {
        let dosage = if level == 0 {
            "keep".to_string()
        } else {
            dosages[level - 1].map_or_else(|| "-".to_string(), |d| format!("{d:.3}"))
        };
        let _ = write!(out, "| {level} | {dosage} |");
        for (_, counts) in columns {
            let total: usize = counts.iter().sum();
            let c = counts.get(level).copied().unwrap_or(0);
            let pct = if total > 0 { 100.0 * c as f64 / total as f64 } else { 0.0 };
            let _ = write!(out, " {c} ({pct:.1}%) |");
        }
        out.push('\n');
    }
    out
}

/// Share of customers given any increase.
pub fn treated_fraction(decisions: &[PolicyDecision]) -> f64 {
    if decisions.is_empty() {
        return 0.0;
    }
    decisions.iter().filter(|d| d.chosen_level > 0).count() as f64 / decisions.len() as f64
}
