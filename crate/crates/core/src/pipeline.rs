//! End-to-end orchestration: simulate, discretize, select, recommend,
//! evaluate and report. Every stage reads and writes files in the output
//! directory and recomputes any missing upstream artifact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::backtest::{
    distribution_markdown, evaluate, level_counts, oracle_policy_value, treated_fraction, ScenarioMetrics,
};
use crate::datagen::{
    generate_portfolio, load_portfolio, load_truth, truth_path, write_portfolio, write_truth, CustomerRecord,
    GenConfig, GroundTruth,
};
use crate::error::{Error, Result};
use crate::finance::{estimate_ccf, DefaultObservation, ProfitParams, DEFAULT_LGD};
use crate::learners::LearnerSpec;
use crate::metalearners::{default_candidates, fit_cate, CateMethodSpec, CateModel};
use crate::policy::{
    cate_values, cvar_values, default_forward_learner, fit_forward_model, read_decisions, recommend_cl,
    recommend_cl_cvar, recommend_cl_cvar_fl, recommend_prediction_only, write_decisions, Criterion, ForwardModel,
    PolicyDecision,
};
use crate::risk::{BootstrapEnsemble, DEFAULT_CONFIDENCE};
use crate::rng::{stream, sub_seed};
use crate::selection::{select_model, CorrectionOrder, SelectionReport, DEFAULT_FOLDS};
use crate::treatments::{
    discretize, fit_propensity, overlap_subset, ContrastDataset, DosagePartition, OverlapDataset, DEFAULT_TRIM_EPS,
};

pub const DEFAULT_DOSAGE_CAP: f64 = 2.5;
pub const DEFAULT_BOOTSTRAP: usize = 200;

/// Credit conversion factor used when simulating: a fixed value, or the
/// median drawdown estimated from a CSV of defaulted accounts with columns
/// `balance_ref,limit_ref,balance_at_default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CcfSetting {
    Fixed(f64),
    Estimate { estimate_from: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Portfolio CSV; defaults to `portfolio.csv` in the output directory.
    pub portfolio: Option<PathBuf>,
    /// Ground-truth CSV; defaults to the portfolio path with `.truth.csv`.
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Used by `simulate`. Its `seed` and `profit` are replaced by the
    /// top-level `seed`, `lgd` and `ccf`.
    pub generator: GenConfig,
    pub cut_points: Vec<f64>,
    /// Largest admissible observed dosage.
    pub dosage_cap: f64,
    /// Restricts recommendations to these levels; empty means all.
    pub levels: Vec<usize>,
    pub trim_eps: f64,
    pub propensity: LearnerSpec,
    pub candidates: Vec<CateMethodSpec>,
    pub folds: usize,
    pub correction: CorrectionOrder,
    pub bootstrap: usize,
    pub cvar_p: f64,
    pub lgd: f64,
    pub ccf: CcfSetting,
    pub forward: LearnerSpec,
    /// Share of customers held out for recommendation and evaluation.
    pub test_share: f64,
    pub policies: Vec<Criterion>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let generator = GenConfig::default();
        let seed = generator.seed;
        Self {
            portfolio: None,
            truth: None,
            out_dir: PathBuf::from("out"),
            cut_points: generator.cut_points.clone(),
            generator,
            dosage_cap: DEFAULT_DOSAGE_CAP,
            levels: Vec::new(),
            trim_eps: DEFAULT_TRIM_EPS,
            propensity: LearnerSpec::logistic(1.0),
            candidates: default_candidates(seed),
            folds: DEFAULT_FOLDS,
            correction: CorrectionOrder::FirstOrder,
            bootstrap: DEFAULT_BOOTSTRAP,
            cvar_p: DEFAULT_CONFIDENCE,
            lgd: DEFAULT_LGD,
            ccf: CcfSetting::Fixed(ProfitParams::default().ccf),
            forward: default_forward_learner(seed),
            test_share: 0.5,
            policies: Criterion::ALL.to_vec(),
            seed,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn portfolio_path(&self) -> PathBuf {
        self.portfolio.clone().unwrap_or_else(|| self.out_dir.join("portfolio.csv"))
    }

    pub fn truth_file(&self) -> PathBuf {
        self.truth.clone().unwrap_or_else(|| truth_path(&self.portfolio_path()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..0.5).contains(&self.trim_eps) {
            return bad(format!("trim_eps = {} must lie in [0, 0.5)", self.trim_eps));
        }
        if !(self.cvar_p > 0.0 && self.cvar_p < 1.0) {
            return bad(format!("cvar_p = {} must lie in (0, 1)", self.cvar_p));
        }
        if self.bootstrap == 0 {
            return bad("bootstrap must be >= 1".into());
        }
        if self.folds < 2 {
            return bad(format!("folds = {} must be >= 2", self.folds));
        }
        if self.candidates.len() < 2 {
            return bad("candidates: need at least 2 methods".into());
        }
        if !(self.test_share > 0.0 && self.test_share < 1.0) {
            return bad(format!("test_share = {} must lie in (0, 1)", self.test_share));
        }
        if !(0.0..=1.0).contains(&self.lgd) {
            return bad(format!("lgd = {} outside [0, 1]", self.lgd));
        }
        if let CcfSetting::Fixed(c) = self.ccf {
            if !(0.0..=1.0).contains(&c) {
                return bad(format!("ccf = {c} outside [0, 1]"));
            }
        }
        if !(self.dosage_cap > 0.0) {
            return bad(format!("dosage_cap = {} must be positive", self.dosage_cap));
        }
        if self.cut_points.windows(2).any(|w| w[0] >= w[1]) {
            return bad("cut_points must be strictly increasing".into());
        }
        if self.levels.contains(&0) {
            return bad("levels: 0 is the control and cannot be requested".into());
        }
        if self.policies.is_empty() {
            return bad("policies: empty".into());
        }
        for c in &self.candidates {
            c.validate()?;
        }
        self.propensity.validate()?;
        self.forward.validate()
    }

    fn profit(&self) -> Result<ProfitParams> {
        let ccf = match &self.ccf {
            CcfSetting::Fixed(c) => *c,
            CcfSetting::Estimate { estimate_from } => {
                if !estimate_from.exists() {
                    return Err(Error::Config(format!(
                        "ccf.estimate_from: {} does not exist",
                        estimate_from.display()
                    )));
                }
                let mut r = csv::Reader::from_path(estimate_from)?;
                let obs: Vec<DefaultObservation> = r.deserialize().collect::<std::result::Result<_, _>>()?;
                estimate_ccf(&obs)?
            }
        };
        let p = ProfitParams { lgd: self.lgd, ccf };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Discretize,
    Select,
    Recommend,
    Evaluate,
    Report,
    /// Every stage in order, simulating only when no portfolio exists.
    All,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "simulate" => Stage::Simulate,
            "discretize" => Stage::Discretize,
            "select" => Stage::Select,
            "recommend" => Stage::Recommend,
            "evaluate" => Stage::Evaluate,
            "report" => Stage::Report,
            "all" => Stage::All,
            _ => return Err(Error::Config(format!("unknown stage {s:?}"))),
        })
    }
}

pub const PARTITION_FILE: &str = "partition.json";
pub const SELECTION_JSON: &str = "selection.json";
pub const SELECTION_MD: &str = "selection.md";
pub const FORWARD_FILE: &str = "forward_model.json";
pub const SCENARIOS_JSON: &str = "scenarios.json";
pub const SCENARIOS_MD: &str = "scenarios.md";
pub const POLICY_VALUES_FILE: &str = "policy_values.json";
pub const REPORT_FILE: &str = "report.md";

pub fn decisions_file(c: Criterion) -> String {
    format!("decisions_{}.csv", c.flag())
}

/// Level left out of selection, and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedLevel {
    pub level: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub report: SelectionReport,
    pub skipped: Vec<SkippedLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub rmse: f64,
    pub target_sd: f64,
    pub relative_rmse: f64,
    pub n_train: usize,
    pub n_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyValue {
    pub policy: String,
    pub treated_fraction: f64,
    pub oracle_value: Option<f64>,
    pub oracle_value_per_customer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub n_customers: usize,
    pub scenarios: Vec<ScenarioMetrics>,
    pub policy_values: Vec<PolicyValue>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Fitted per-level models on the training customers.
pub struct LevelModels {
    /// `cate[j - 1]` belongs to level `j`.
    pub cate: Vec<Option<CateModel>>,
    pub data: Vec<Option<OverlapDataset>>,
}

pub struct Pipeline {
    pub config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn ensure_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.config.out_dir).map_err(|e| Error::io(&self.config.out_dir, e))
    }

    pub fn run(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        self.ensure_out_dir()?;
        match stage {
            Stage::Simulate => self.simulate(),
            Stage::Discretize => self.discretize_stage(),
            Stage::Select => self.select_stage(),
            Stage::Recommend => self.recommend_stage(),
            Stage::Evaluate => self.evaluate_stage(),
            Stage::Report => self.report_stage(),
            Stage::All => {
                let mut out = Vec::new();
                if !self.config.portfolio_path().exists() {
                    out.extend(self.simulate()?);
                }
                out.extend(self.discretize_stage()?);
                out.extend(self.select_stage()?);
                out.extend(self.recommend_stage()?);
                out.extend(self.evaluate_stage()?);
                out.extend(self.report_stage()?);
                Ok(out)
            }
        }
    }

    pub fn simulate(&self) -> Result<Vec<PathBuf>> {
        self.ensure_out_dir()?;
        let mut gen = self.config.generator.clone();
        gen.seed = self.config.seed;
        gen.profit = self.config.profit()?;
        let (records, truth) = generate_portfolio(&gen)?;
        let p = self.config.portfolio_path();
        let t = self.config.truth_file();
        write_portfolio(&records, &p)?;
        write_truth(&truth, &t)?;
        Ok(vec![p, t])
    }

    pub fn records(&self) -> Result<Vec<CustomerRecord>> {
        let p = self.config.portfolio_path();
        if !p.exists() {
            return Err(Error::Config(format!("portfolio: {} does not exist", p.display())));
        }
        let records = load_portfolio(&p)?;
        if records.is_empty() {
            return Err(Error::Data(format!("{}: no customers", p.display())));
        }
        for (i, r) in records.iter().enumerate() {
            if r.observed_dosage > self.config.dosage_cap {
                return Err(Error::Cell {
                    row: i + 1,
                    column: "observed_dosage".into(),
                    message: format!("{} exceeds the dosage cap {}", r.observed_dosage, self.config.dosage_cap),
                });
            }
        }
        Ok(records)
    }

    pub fn truth(&self) -> Result<Option<GroundTruth>> {
        let t = self.config.truth_file();
        if t.exists() {
            load_truth(&t).map(Some)
        } else {
            Ok(None)
        }
    }

    /// Seeded split into training and held-out customers, each in file order.
    pub fn split(&self, records: &[CustomerRecord]) -> (Vec<CustomerRecord>, Vec<CustomerRecord>) {
        let n = records.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut stream(sub_seed(self.config.seed, 1), 0));
        let n_test = ((n as f64 * self.config.test_share).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1));
        let mut test_mask = vec![false; n];
        for &i in &idx[..n_test.min(n)] {
            test_mask[i] = true;
        }
        let (mut train, mut test) = (Vec::new(), Vec::new());
        for (r, t) in records.iter().zip(test_mask) {
            if t {
                test.push(r.clone());
            } else {
                train.push(r.clone());
            }
        }
        (train, test)
    }

    pub fn partition(&self) -> Result<DosagePartition> {
        let path = self.out(PARTITION_FILE);
        if path.exists() {
            let p = DosagePartition::from_json(&read(&path)?)?;
            if p.cut_points == self.config.cut_points {
                return Ok(p);
            }
        }
        self.discretize_stage()?;
        DosagePartition::from_json(&read(&path)?)
    }

    fn discretize_stage(&self) -> Result<Vec<PathBuf>> {
        let records = self.records()?;
        let dosages: Vec<f64> = records.iter().map(|r| r.observed_dosage).collect();
        let p = discretize(&dosages, &self.config.cut_points)?;
        let path = self.out(PARTITION_FILE);
        write(&path, &p.to_json()?)?;
        Ok(vec![path])
    }

    fn active_levels(&self, partition: &DosagePartition) -> Vec<usize> {
        (1..=partition.k())
            .filter(|&l| partition.is_defined(l))
            .filter(|l| self.config.levels.is_empty() || self.config.levels.contains(l))
            .collect()
    }

    fn level_seed(&self, tag: u64, level: usize) -> u64 {
        sub_seed(self.config.seed, tag * 1000 + level as u64)
    }

    /// Contrast of one level on the training customers, trimmed to overlap.
    pub fn overlap_data(
        &self,
        train: &[CustomerRecord],
        partition: &DosagePartition,
        level: usize,
    ) -> Result<OverlapDataset> {
        let contrast = ContrastDataset::from_records(train, partition, level)?;
        let gate = fit_propensity(&contrast, &self.config.propensity, self.config.trim_eps)?;
        overlap_subset(&contrast, &gate)
    }

    fn run_selection(&self) -> Result<SelectionArtifact> {
        let records = self.records()?;
        let partition = self.partition()?;
        let (train, _) = self.split(&records);
        let mut report = SelectionReport::default();
        let mut skipped = Vec::new();
        for level in self.active_levels(&partition) {
            let result = self.overlap_data(&train, &partition, level).and_then(|data| {
                select_model(
                    &self.config.candidates,
                    &data,
                    self.config.folds,
                    self.config.correction,
                    self.level_seed(2, level),
                )
            });
            match result {
                Ok(sel) => report.levels.push(sel),
                Err(Error::Data(reason)) | Err(Error::Degenerate(reason)) => skipped.push(SkippedLevel { level, reason }),
                Err(e) => return Err(e),
            }
        }
        Ok(SelectionArtifact { report, skipped })
    }

    fn select_stage(&self) -> Result<Vec<PathBuf>> {
        let art = self.run_selection()?;
        let json = self.out(SELECTION_JSON);
        let md = self.out(SELECTION_MD);
        write(&json, &serde_json::to_string_pretty(&art)?)?;
        let mut text = art.report.to_markdown();
        for s in &art.skipped {
            let _ = writeln!(text, "\nLevel {} skipped: {}", s.level, s.reason);
        }
        write(&md, &text)?;
        Ok(vec![json, md])
    }

    pub fn selection(&self) -> Result<SelectionArtifact> {
        let path = self.out(SELECTION_JSON);
        if !path.exists() {
            self.select_stage()?;
        }
        serde_json::from_str(&read(&path)?).map_err(Error::from)
    }

    /// Refits each level's chosen method on its full overlap set.
    pub fn level_models(
        &self,
        train: &[CustomerRecord],
        partition: &DosagePartition,
        selection: &SelectionReport,
    ) -> Result<LevelModels> {
        let k = partition.k();
        let mut cate: Vec<Option<CateModel>> = vec![None; k];
        let mut data: Vec<Option<OverlapDataset>> = vec![None; k];
        for level in self.active_levels(partition) {
            let Some(sel) = selection.level(level) else { continue };
            let d = self.overlap_data(train, partition, level)?;
            cate[level - 1] = Some(fit_cate(&sel.chosen_spec, &d)?);
            data[level - 1] = Some(d);
        }
        Ok(LevelModels { cate, data })
    }

    fn recommend_stage(&self) -> Result<Vec<PathBuf>> {
        let records = self.records()?;
        let partition = self.partition()?;
        let selection = self.selection()?;
        let (train, test) = self.split(&records);
        let models = self.level_models(&train, &partition, &selection.report)?;
        let k = partition.k();
        let dosages: Vec<f64> = (1..=k).map(|l| partition.dosage(l).unwrap_or(f64::NAN)).collect();
        let policies = &self.config.policies;
        let wants = |c: Criterion| policies.contains(&c);
        let need_cvar = wants(Criterion::ClCvar) || wants(Criterion::ClCvarFl);
        let need_fm = wants(Criterion::ClCvarFl) || wants(Criterion::PredictOnly);

        let mut artifacts = Vec::new();
        let mut ensembles: Vec<Option<BootstrapEnsemble>> = vec![None; k];
        if need_cvar {
            for (j, d) in models.data.iter().enumerate() {
                let (Some(d), Some(m)) = (d, &models.cate[j]) else { continue };
                ensembles[j] = Some(BootstrapEnsemble::fit(
                    &m.spec,
                    d,
                    self.config.bootstrap,
                    self.level_seed(3, j + 1),
                )?);
            }
        }
        let fm: Option<ForwardModel> = if need_fm {
            let fm = fit_forward_model(&train, &partition, &self.config.forward, sub_seed(self.config.seed, 4))?;
            let summary = ForwardSummary {
                rmse: fm.rmse,
                target_sd: fm.target_sd,
                relative_rmse: fm.relative_rmse(),
                n_train: fm.n_train,
                n_valid: fm.n_valid,
            };
            let path = self.out(FORWARD_FILE);
            write(&path, &serde_json::to_string_pretty(&summary)?)?;
            artifacts.push(path);
            Some(fm)
        } else {
            None
        };
        let po_dosages: Vec<Option<f64>> = (1..=k)
            .map(|l| {
                let allowed = self.config.levels.is_empty() || self.config.levels.contains(&l);
                partition.dosage(l).filter(|_| allowed)
            })
            .collect();

        let mut out: Vec<(Criterion, Vec<PolicyDecision>)> =
            Criterion::ALL.iter().filter(|c| wants(**c)).map(|&c| (c, Vec::with_capacity(test.len()))).collect();
        for r in &test {
            let x = r.features();
            let mut cvar_decision = None;
            for (c, list) in out.iter_mut() {
                let d = match c {
                    Criterion::Cl => recommend_cl(r.id, cate_values(&models.cate, &x)?, &dosages),
                    Criterion::ClCvar | Criterion::ClCvarFl => {
                        if cvar_decision.is_none() {
                            let v = cvar_values(&ensembles, &x, self.config.cvar_p)?;
                            cvar_decision = Some(recommend_cl_cvar(r.id, v, &dosages));
                        }
                        let up = cvar_decision.as_ref().expect("computed above");
                        if *c == Criterion::ClCvar {
                            up.clone()
                        } else {
                            recommend_cl_cvar_fl(up, r.ep_m3, fm.as_ref().expect("forward model"), &x)?
                        }
                    }
                    Criterion::PredictOnly => {
                        recommend_prediction_only(r.id, fm.as_ref().expect("forward model"), &x, &po_dosages, r.ep_m3)?
                    }
                };
                list.push(d);
            }
        }
        for (c, list) in &out {
            let path = self.out(&decisions_file(*c));
            write_decisions(list, &path)?;
            artifacts.push(path);
        }
        Ok(artifacts)
    }

    fn existing_decisions(&self) -> Result<Vec<(Criterion, Vec<PolicyDecision>)>> {
        let mut out = Vec::new();
        for c in Criterion::ALL {
            let path = self.out(&decisions_file(c));
            if path.exists() {
                out.push((c, read_decisions(&path)?));
            }
        }
        Ok(out)
    }

    pub fn evaluation(&self) -> Result<EvaluationArtifact> {
        let records = self.records()?;
        let partition = self.partition()?;
        let all = self.existing_decisions()?;
        if all.is_empty() {
            return Err(Error::Data(format!(
                "no decision files in {}; run recommend first",
                self.config.out_dir.display()
            )));
        }
        let (_, test) = self.split(&records);
        let cpp: Vec<usize> = test
            .iter()
            .map(|r| partition.assign_level(r.observed_dosage))
            .collect::<Result<_>>()?;
        let k = partition.k();
        let truth = self.truth()?;
        let n = test.len();
        let mut scenarios = Vec::new();
        let mut values = Vec::new();
        let oracle = |ds: &[PolicyDecision]| -> Result<Option<f64>> {
            truth.as_ref().map(|t| oracle_policy_value(t, ds)).transpose()
        };
        let per = |v: Option<f64>| v.map(|v| v / n.max(1) as f64);
        for (c, ds) in &all {
            scenarios.push(evaluate(ds, &cpp, &test, k)?);
            let v = oracle(ds)?;
            values.push(PolicyValue {
                policy: c.code().to_string(),
                treated_fraction: treated_fraction(ds),
                oracle_value: v,
                oracle_value_per_customer: per(v),
            });
        }
        // reference policies on the same customers
        let as_decisions = |levels: &[usize]| -> Vec<PolicyDecision> {
            test.iter()
                .zip(levels)
                .map(|(r, &l)| PolicyDecision {
                    id: r.id,
                    criterion: Criterion::Cl,
                    chosen_level: l,
                    chosen_dosage: partition.dosage(l).unwrap_or(f64::NAN),
                    values: Vec::new(),
                    y_r: None,
                    y_p_hat: None,
                })
                .collect()
        };
        let defined: Vec<usize> = (0..=k).filter(|&l| partition.is_defined(l)).collect();
        let mut rng = stream(sub_seed(self.config.seed, 5), 0);
        let random: Vec<usize> = test.iter().map(|_| defined[rng.random_range(0..defined.len())]).collect();
        for (name, levels) in [
            ("CPP", cpp.clone()),
            ("ALWAYS_CONTROL", vec![0; n]),
            ("UNIFORM_RANDOM", random),
        ] {
            let ds = as_decisions(&levels);
            let v = oracle(&ds)?;
            values.push(PolicyValue {
                policy: name.to_string(),
                treated_fraction: treated_fraction(&ds),
                oracle_value: v,
                oracle_value_per_customer: per(v),
            });
        }
        Ok(EvaluationArtifact {
            n_customers: n,
            scenarios,
            policy_values: values,
        })
    }

    fn evaluate_stage(&self) -> Result<Vec<PathBuf>> {
        let ev = self.evaluation()?;
        let json = self.out(SCENARIOS_JSON);
        let md = self.out(SCENARIOS_MD);
        let values = self.out(POLICY_VALUES_FILE);
        write(&json, &serde_json::to_string_pretty(&ev.scenarios)?)?;
        let text: Vec<String> = ev.scenarios.iter().map(|s| s.to_markdown()).collect();
        write(&md, &text.join("\n"))?;
        write(&values, &serde_json::to_string_pretty(&ev.policy_values)?)?;
        Ok(vec![json, md, values])
    }

    /// Markdown summary of whatever artifacts exist; missing ones are listed.
    pub fn report_markdown(&self) -> Result<String> {
        let mut out = String::from("# Recommendation report\n\n");
        let mut missing = Vec::new();
        let partition_path = self.out(PARTITION_FILE);
        let partition = if partition_path.exists() {
            Some(DosagePartition::from_json(&read(&partition_path)?)?)
        } else {
            missing.push(PARTITION_FILE.to_string());
            None
        };

        let decisions = self.existing_decisions()?;
        if let Some(p) = &partition {
            if !decisions.is_empty() && self.config.portfolio_path().exists() {
                let records = self.records()?;
                let (_, test) = self.split(&records);
                let cpp = test
                    .iter()
                    .map(|r| p.assign_level(r.observed_dosage))
                    .collect::<Result<Vec<_>>>()?;
                let mut cols = vec![("CPP".to_string(), level_counts(cpp, p.k()))];
                for (c, ds) in &decisions {
                    cols.push((c.code().to_string(), level_counts(ds.iter().map(|d| d.chosen_level), p.k())));
                }
                out.push_str("## Decisions per level\n\n");
                out.push_str(&distribution_markdown(&cols, &p.levels));
                out.push('\n');
            }
        }
        if decisions.is_empty() {
            missing.push("decisions_*.csv".to_string());
        }

        let sel_path = self.out(SELECTION_JSON);
        if sel_path.exists() {
            let art: SelectionArtifact = serde_json::from_str(&read(&sel_path)?)?;
            let _ = writeln!(
                out,
                "## Model selection (estimated root PEHE, {})\n",
                art.report.levels.first().map_or("-", |l| l.order.label())
            );
            out.push_str(&art.report.to_markdown());
            for s in &art.skipped {
                let _ = writeln!(out, "\nLevel {} skipped: {}", s.level, s.reason);
            }
            out.push('\n');
        } else {
            missing.push(SELECTION_JSON.to_string());
        }

        let fm_path = self.out(FORWARD_FILE);
        if fm_path.exists() {
            let fm: ForwardSummary = serde_json::from_str(&read(&fm_path)?)?;
            let _ = writeln!(
                out,
                "## Forward model\n\nHeld-out RMSE {:.4}, target SD {:.4}, ratio {:.3} ({} train, {} validation rows).\n",
                fm.rmse, fm.target_sd, fm.relative_rmse, fm.n_train, fm.n_valid
            );
        }

        let sc_path = self.out(SCENARIOS_JSON);
        if sc_path.exists() {
            let sc: Vec<ScenarioMetrics> = serde_json::from_str(&read(&sc_path)?)?;
            out.push_str("## Scenario evaluation\n\n");
            for s in &sc {
                out.push_str(&s.to_markdown());
                out.push('\n');
            }
        } else {
            missing.push(SCENARIOS_JSON.to_string());
        }

        let pv_path = self.out(POLICY_VALUES_FILE);
        if pv_path.exists() {
            let pv: Vec<PolicyValue> = serde_json::from_str(&read(&pv_path)?)?;
            out.push_str("## Policy values\n\n| Policy | Treated | Oracle value per customer |\n|---|---|---|\n");
            for v in &pv {
                let val = v.oracle_value_per_customer.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
                let _ = writeln!(out, "| {} | {:.1}% | {} |", v.policy, 100.0 * v.treated_fraction, val);
            }
            out.push('\n');
        }

        if !missing.is_empty() {
            let _ = writeln!(out, "Missing artifacts: {}", missing.join(", "));
        }
        Ok(out)
    }

    fn report_stage(&self) -> Result<Vec<PathBuf>> {
        let path = self.out(REPORT_FILE);
        write(&path, &self.report_markdown()?)?;
        Ok(vec![path])
    }
}

#[cfg(test)]
mod tests;
