//! Seeded experiment runner: configuration, parallel runs, aggregation and
//! CSV output.
//!
//! Run `k` of an experiment with master seed `m` draws everything from
//! [`runs::run_seed`]`(m, k)`, and every algorithm in a sweep reuses the
//! same per-run seeds, so curves are paired across algorithms and rates.

pub mod runs;
pub mod verify;

use std::fmt::{self, Write as _};
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::actor_critic::ActorKind;
use crate::environments::{
    baird_softmax, baird_target, build_baird, state_action_features, FeatureVariant, DEFAULT_GAMMA,
};
use crate::error::{Error, Result};
use crate::learners::StepSchedule;
use crate::oracle::Oracle;
use runs::{ControlRun, ControlSettings, EmphasisTask, EvaluationTask, Tracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Emphasis,
    PolicyEval,
    Control,
    OracleVerify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Emphasis => "emphasis",
            Experiment::PolicyEval => "policy-eval",
            Experiment::Control => "control",
            Experiment::OracleVerify => "oracle-verify",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "emphasis" => Ok(Experiment::Emphasis),
            "policy-eval" => Ok(Experiment::PolicyEval),
            "control" => Ok(Experiment::Control),
            "oracle-verify" => Ok(Experiment::OracleVerify),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Geometric sweep `hi, hi/factor, hi/factor², …` down to `lo`, written
/// `lo:hi:factor`.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("sweep '{spec}' must look like lo:hi:factor"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let nums: Vec<f64> =
        parts.iter().map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let (lo, hi, factor) = (nums[0], nums[1], nums[2]);
    if !(lo > 0.0 && hi >= lo && factor > 1.0) || !hi.is_finite() {
        return Err(Error::Config(format!("sweep needs 0 < lo <= hi and factor > 1, got '{spec}'")));
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let v = hi / factor.powi(k);
        if v < lo * (1.0 - 1e-9) {
            break;
        }
        out.push(v);
        k += 1;
    }
    Ok(out)
}

/// `base · 2^k` for `k` from `hi` down to `lo`.
pub fn powers_of_two(base: f64, hi: i32, lo: i32) -> Vec<f64> {
    (lo..=hi).rev().map(|k| base * 2f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub gamma: f64,
    pub features: Vec<FeatureVariant>,
    /// Target `π(solid|·)`; each value is a separate setting.
    pub pi_solid: Vec<f64>,
    pub eta: f64,
    /// GEM rate (emphasis), GEM's `α₁` (policy-eval) or the critic `α₀`
    /// (control).
    pub alpha: f64,
    /// ETD(0) and GEM-ETD(0)'s `ν` rate (policy-eval).
    pub alpha2: Option<f64>,
    /// Actor `β₀` (control).
    pub beta: Option<f64>,
    pub c0: f64,
    pub steps: u64,
    pub runs: usize,
    pub master_seed: u64,
    /// Replaces `alpha` (emphasis) or `alpha2` (policy-eval) with a list.
    pub sweep: Option<Vec<f64>>,
    /// Oracle evaluations of the control experiment happen this often.
    pub eval_every: u64,
    /// Keep per-step curves (needed for CSV output).
    pub keep_curves: bool,
}

/// `t₀` of the control experiment's polynomial schedules.
pub const CONTROL_T0: f64 = 1e3;
pub const CRITIC_POWER: f64 = 0.6;
pub const ACTOR_POWER: f64 = 0.9;

impl ExperimentConfig {
    /// Defaults for each experiment. Emphasis estimation at `γ = 0.99` needs
    /// a much smaller ridge than the control default, because `A⊤C⁻¹A` has
    /// eigenvalues near `1e-5` on Baird and any larger `η` shrinks `w*(η)`
    /// toward zero.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            gamma: DEFAULT_GAMMA,
            features: FeatureVariant::ALL.to_vec(),
            pi_solid: vec![0.1],
            eta: 1e-2,
            alpha: 0.1,
            alpha2: None,
            beta: None,
            c0: 10.0,
            steps: 100_000,
            runs: 30,
            master_seed: 2024,
            sweep: None,
            eval_every: 100,
            keep_curves: true,
        };
        match experiment {
            Experiment::Emphasis => Self {
                pi_solid: vec![0.1, 0.3],
                eta: 1e-6,
                steps: 1_000_000,
                sweep: Some(powers_of_two(0.1, 1, -6)),
                ..base
            },
            Experiment::PolicyEval => {
                Self { pi_solid: vec![0.05], eta: 1e-6, alpha: 0.025, sweep: Some(powers_of_two(0.1, 0, -19)), ..base }
            }
            Experiment::Control => Self {
                features: vec![FeatureVariant::OneHot],
                pi_solid: vec![],
                eta: 1e-3,
                alpha: 0.05,
                beta: Some(1.0),
                ..base
            },
            Experiment::OracleVerify => Self { runs: 1, steps: 1, ..base },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.runs < 1 {
            return fail("runs must be at least 1".into());
        }
        if self.steps < 1 {
            return fail("steps must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma {} must lie in [0, 1)", self.gamma));
        }
        if self.features.is_empty() {
            return fail("at least one feature set is required".into());
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return fail(format!("eta must be finite and >= 0, got {}", self.eta));
        }
        if self.experiment != Experiment::OracleVerify && self.experiment != Experiment::Control && self.eta <= 0.0 {
            return fail("GEM needs eta > 0".into());
        }
        if self.experiment == Experiment::Control && self.eta <= 0.0 {
            return fail("COF-PAC needs eta > 0".into());
        }
        for &p in &self.pi_solid {
            if !(p > 0.0 && p <= 1.0) {
                return fail(format!("pi-solid {p} must lie in (0, 1]"));
            }
        }
        if self.experiment != Experiment::Control && self.pi_solid.is_empty() {
            return fail("at least one pi-solid value is required".into());
        }
        let rates = [Some(self.alpha), self.alpha2, self.beta];
        if rates.iter().flatten().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return fail("learning rates must be positive".into());
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() || sweep.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
                return fail("sweep values must be positive".into());
            }
        }
        if !(self.c0 > 0.0) {
            return fail("C0 must be positive".into());
        }
        if self.eval_every < 1 {
            return fail("eval-every must be at least 1".into());
        }
        Ok(())
    }

    fn rates(&self, single: Option<f64>) -> Vec<f64> {
        match (&self.sweep, single) {
            (Some(s), _) => s.clone(),
            (None, Some(r)) => vec![r],
            (None, None) => vec![self.alpha],
        }
    }

    fn setting_label(&self, pi_solid: f64) -> String {
        format!("{}/pi_solid={}", self.experiment.name(), fmt_float(pi_solid))
    }
}

/// Run column of a CSV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunLabel {
    Index(usize),
    Mean,
    Std,
    /// Summary rows that describe a whole set of runs.
    All,
}

impl fmt::Display for RunLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunLabel::Index(k) => write!(f, "{k}"),
            RunLabel::Mean => f.write_str("mean"),
            RunLabel::Std => f.write_str("std"),
            RunLabel::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub experiment: String,
    pub algorithm: String,
    pub features: String,
    pub lr1: Option<f64>,
    pub lr2: Option<f64>,
    pub run: RunLabel,
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

pub const CSV_HEADER: &str = "experiment,algorithm,features,lr1,lr2,run,step,metric,value";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x != 0.0 && (x.abs() >= 1e16 || x.abs() < 1e-5) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub fn write_csv<W: Write>(records: &[CurveRecord], mut out: W) -> std::io::Result<()> {
    let mut line = String::with_capacity(128);
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        line.clear();
        let lr = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.algorithm,
            r.features,
            lr(r.lr1),
            lr(r.lr2),
            r.run,
            r.step,
            r.metric,
            fmt_float(r.value)
        );
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Every run of one (setting, algorithm, features, rates) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    pub setting: String,
    pub pi_solid: f64,
    pub algorithm: String,
    pub features: FeatureVariant,
    pub lr1: Option<f64>,
    pub lr2: Option<f64>,
    pub metric: &'static str,
    pub runs: Vec<Tracker>,
}

impl CurveSet {
    pub fn completed(&self) -> impl Iterator<Item = &Tracker> {
        self.runs.iter().filter(|r| !r.diverged())
    }

    pub fn diverged(&self) -> usize {
        self.runs.iter().filter(|r| r.diverged()).count()
    }

    /// AUC of the mean trailing curve over non-diverged runs.
    pub fn auc(&self) -> f64 {
        mean_std(&self.completed().map(|r| r.auc).collect::<Vec<_>>()).0
    }

    /// Across-run mean and std of the final trailing-window average.
    pub fn final_trailing(&self) -> (f64, f64) {
        mean_std(&self.completed().map(|r| r.last_trailing).collect::<Vec<_>>())
    }

    fn record(&self, run: RunLabel, step: u64, metric: String, value: f64) -> CurveRecord {
        CurveRecord {
            experiment: self.setting.clone(),
            algorithm: self.algorithm.clone(),
            features: self.features.name().to_string(),
            lr1: self.lr1,
            lr2: self.lr2,
            run,
            step,
            metric,
            value,
        }
    }

    /// Per-run rows, then mean/std rows over non-diverged runs, then
    /// summary rows.
    pub fn records(&self) -> Vec<CurveRecord> {
        let trailing_name = format!("{}_trailing1000", self.metric);
        let mut out = Vec::new();
        for (k, run) in self.runs.iter().enumerate() {
            for (i, &step) in run.steps.iter().enumerate() {
                out.push(self.record(RunLabel::Index(k), step, self.metric.into(), run.raw[i]));
                out.push(self.record(RunLabel::Index(k), step, trailing_name.clone(), run.trailing[i]));
            }
        }
        let done: Vec<&Tracker> = self.completed().collect();
        if let Some(first) = done.first() {
            for (i, &step) in first.steps.iter().enumerate() {
                for (name, pick) in [(self.metric.to_string(), 0), (trailing_name.clone(), 1)] {
                    let vals: Vec<f64> =
                        done.iter().map(|r| if pick == 0 { r.raw[i] } else { r.trailing[i] }).collect();
                    let (m, s) = mean_std(&vals);
                    out.push(self.record(RunLabel::Mean, step, name.clone(), m));
                    out.push(self.record(RunLabel::Std, step, name, s));
                }
            }
        }
        let last = self.runs.iter().map(|r| r.len).max().unwrap_or(0);
        out.push(self.record(RunLabel::All, last, "diverged_runs".into(), self.diverged() as f64));
        out.push(self.record(RunLabel::All, last, "auc".into(), self.auc()));
        out
    }
}

/// Sweep winner: fewest diverged runs first, then lowest AUC of the mean
/// trailing curve over the surviving runs. Cells where every run diverged
/// are never chosen.
pub fn best_by_auc<'a>(sets: impl IntoIterator<Item = &'a CurveSet>) -> Option<&'a CurveSet> {
    sets.into_iter()
        .filter(|s| s.completed().next().is_some())
        .min_by(|a, b| a.diverged().cmp(&b.diverged()).then(a.auc().total_cmp(&b.auc())))
}

/// One control-experiment cell: an actor on one feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    pub algorithm: ActorKind,
    pub features: FeatureVariant,
    pub critic_rate: f64,
    pub actor_rate: f64,
    pub runs: Vec<ControlRun>,
}

impl ControlSet {
    pub fn completed(&self) -> impl Iterator<Item = &ControlRun> {
        self.runs.iter().filter(|r| r.diverged_at.is_none())
    }

    pub fn diverged(&self) -> usize {
        self.runs.iter().filter(|r| r.diverged_at.is_some()).count()
    }

    fn records(&self, setting: &str) -> Vec<CurveRecord> {
        let rec = |run, step, metric: String, value| CurveRecord {
            experiment: setting.to_string(),
            algorithm: self.algorithm.name().to_string(),
            features: self.features.name().to_string(),
            lr1: Some(self.critic_rate),
            lr2: Some(self.actor_rate),
            run,
            step,
            metric,
            value,
        };
        let series = |r: &ControlRun| -> Vec<(&'static str, Vec<f64>)> {
            let mut s = vec![("objective", r.objective.clone()), ("grad_norm", r.grad_norm.clone())];
            if !r.gap.is_empty() {
                s.push(("stationarity_gap", r.gap.clone()));
                s.push(("stationarity_gap_min", r.gap_running_min.clone()));
            }
            s
        };
        let mut out = Vec::new();
        for (k, run) in self.runs.iter().enumerate() {
            for (name, values) in series(run) {
                for (i, &step) in run.steps.iter().enumerate() {
                    out.push(rec(RunLabel::Index(k), step, name.into(), values[i]));
                }
            }
            let last = *run.steps.last().unwrap_or(&0);
            for (s, p) in run.final_pi_dashed.iter().enumerate() {
                out.push(rec(RunLabel::Index(k), last, format!("pi_dashed_s{}", s + 1), *p));
            }
            out.push(rec(RunLabel::Index(k), last, "max_displacement_over_beta".into(), run.max_scaled_displacement));
        }
        let done: Vec<&ControlRun> = self.completed().collect();
        if let Some(first) = done.first() {
            let per_run: Vec<Vec<(&'static str, Vec<f64>)>> = done.iter().map(|r| series(r)).collect();
            for (j, (name, _)) in per_run[0].iter().enumerate() {
                for (i, &step) in first.steps.iter().enumerate() {
                    let vals: Vec<f64> = per_run.iter().map(|s| s[j].1[i]).collect();
                    let (m, sd) = mean_std(&vals);
                    out.push(rec(RunLabel::Mean, step, (*name).into(), m));
                    out.push(rec(RunLabel::Std, step, (*name).into(), sd));
                }
            }
        }
        let last = self.runs.iter().filter_map(|r| r.steps.last().copied()).max().unwrap_or(0);
        out.push(rec(RunLabel::All, last, "diverged_runs".into(), self.diverged() as f64));
        out
    }
}

/// Results of one experiment invocation.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub curves: Vec<CurveSet>,
    pub control: Vec<ControlSet>,
    pub verification: Vec<(String, verify::VerifyReport)>,
    /// Oracle key/value dump (oracle-verify only).
    pub json_lines: String,
    /// Human-readable summary, one line per item.
    pub summary: Vec<String>,
    records: Vec<CurveRecord>,
}

impl ExperimentOutput {
    pub fn records(&self) -> &[CurveRecord] {
        &self.records
    }

    pub fn verification_passed(&self) -> bool {
        self.verification.iter().all(|(_, r)| r.passed())
    }

    /// True when the experiment ran learners and every single run diverged.
    pub fn all_runs_diverged(&self) -> bool {
        let total = self.curves.iter().map(|c| c.runs.len()).sum::<usize>()
            + self.control.iter().map(|c| c.runs.len()).sum::<usize>();
        let diverged = self.curves.iter().map(|c| c.diverged()).sum::<usize>()
            + self.control.iter().map(|c| c.diverged()).sum::<usize>();
        total > 0 && diverged == total
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        write_csv(&self.records, out)
    }
}

/// Runs `f(seed_k)` for `k = 0..runs` in parallel and returns the results in
/// run order.
fn par_runs<T: Send>(config: &ExperimentConfig, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    (0..config.runs as u64).into_par_iter().map(|k| f(runs::run_seed(config.master_seed, k))).collect()
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.experiment {
        Experiment::Emphasis => run_emphasis_experiment(config),
        Experiment::PolicyEval => run_policy_eval_experiment(config),
        Experiment::Control => run_control_experiment(config),
        Experiment::OracleVerify => run_oracle_verify(config),
    }
}

fn finish(
    curves: Vec<CurveSet>,
    control: Vec<ControlSet>,
    summary: Vec<String>,
    control_setting: &str,
) -> ExperimentOutput {
    let mut records: Vec<CurveRecord> = curves.iter().flat_map(|c| c.records()).collect();
    records.extend(control.iter().flat_map(|c| c.records(control_setting)));
    ExperimentOutput { curves, control, verification: vec![], json_lines: String::new(), summary, records }
}

fn curve_summary(set: &CurveSet, tag: &str) -> String {
    let (m, s) = set.final_trailing();
    format!(
        "{}{} {} {} lr1={} lr2={}: final trailing {} = {m:.4} ± {s:.4}, auc = {:.6e}, diverged {}/{}",
        set.setting,
        tag,
        set.algorithm,
        set.features,
        set.lr1.map(fmt_float).unwrap_or_else(|| "-".into()),
        set.lr2.map(fmt_float).unwrap_or_else(|| "-".into()),
        set.metric,
        set.auc(),
        set.diverged(),
        set.runs.len()
    )
}

/// Followon trace versus GEM at every swept rate, for each target and
/// feature set. The error at step `t` is `|M_t − m_π(S_t)|` or
/// `|w_t⊤x(S_t) − m_π(S_t)|`.
pub fn run_emphasis_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let env = build_baird(config.gamma)?;
    let oracle = Oracle::new(&env.mdp, &env.behavior)?;
    let rates = config.rates(None);
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for &p in &config.pi_solid {
        let target = baird_target(p)?;
        let m = oracle.emphasis(&target)?;
        for &variant in &config.features {
            let features = state_action_features(variant);
            let task =
                EmphasisTask { env: &env, features: &features, target: &target, emphasis: &m, steps: config.steps };
            let cell = |algorithm: &str, lr1: Option<f64>, runs: Vec<Tracker>| CurveSet {
                setting: config.setting_label(p),
                pi_solid: p,
                algorithm: algorithm.into(),
                features: variant,
                lr1,
                lr2: None,
                metric: "emphasis_error",
                runs,
            };
            let followon = cell(
                "followon",
                None,
                par_runs(config, |seed| runs::followon_emphasis_run(&task, seed, config.keep_curves)),
            );
            let mut gem_sets = Vec::new();
            for &alpha in &rates {
                let schedule = StepSchedule::constant(alpha)?;
                let trackers = par_runs(config, |seed| {
                    runs::gem_emphasis_run(&task, config.eta, schedule, seed, config.keep_curves)
                });
                gem_sets.push(cell("gem", Some(alpha), trackers.into_iter().collect::<Result<Vec<_>>>()?));
            }
            summary.push(curve_summary(&followon, ""));
            for set in &gem_sets {
                summary.push(curve_summary(set, ""));
            }
            if let Some(best) = best_by_auc(&gem_sets) {
                summary.push(curve_summary(best, " [best gem]"));
            }
            curves.push(followon);
            curves.extend(gem_sets);
        }
    }
    Ok(finish(curves, vec![], summary, ""))
}

/// ETD(0) over the swept rate versus GEM-ETD(0) with GEM at `alpha` and
/// `ν` over the swept rate; RMSVE against the oracle `v_π`.
pub fn run_policy_eval_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let env = build_baird(config.gamma)?;
    let oracle = Oracle::new(&env.mdp, &env.behavior)?;
    let rates = config.rates(config.alpha2);
    let gem_schedule = StepSchedule::constant(config.alpha)?;
    let mut curves = Vec::new();
    let mut summary = Vec::new();
    for &p in &config.pi_solid {
        let target = baird_target(p)?;
        let v_pi = oracle.value_function(&target)?;
        for &variant in &config.features {
            let features = state_action_features(variant);
            let task = EvaluationTask {
                env: &env,
                features: &features,
                target: &target,
                v_pi: &v_pi,
                d_mu: oracle.d_mu(),
                steps: config.steps,
            };
            let cell = |algorithm: &str, lr1: f64, lr2: Option<f64>, runs: Vec<Tracker>| CurveSet {
                setting: config.setting_label(p),
                pi_solid: p,
                algorithm: algorithm.into(),
                features: variant,
                lr1: Some(lr1),
                lr2,
                metric: "rmsve",
                runs,
            };
            let mut etd_sets = Vec::new();
            let mut gem_sets = Vec::new();
            for &alpha in &rates {
                let schedule = StepSchedule::constant(alpha)?;
                let etd = par_runs(config, |seed| runs::etd_run(&task, schedule, seed, config.keep_curves));
                etd_sets.push(cell("etd", alpha, None, etd.into_iter().collect::<Result<Vec<_>>>()?));
                let gem = par_runs(config, |seed| {
                    runs::gem_etd_run(&task, config.eta, gem_schedule, schedule, seed, config.keep_curves)
                });
                gem_sets.push(cell("gem-etd", config.alpha, Some(alpha), gem.into_iter().collect::<Result<Vec<_>>>()?));
            }
            for set in etd_sets.iter().chain(&gem_sets) {
                summary.push(curve_summary(set, ""));
            }
            if let Some(best) = best_by_auc(&etd_sets) {
                summary.push(curve_summary(best, " [best etd]"));
            }
            if let Some(best) = best_by_auc(&gem_sets) {
                summary.push(curve_summary(best, " [best gem-etd]"));
            }
            curves.extend(etd_sets);
            curves.extend(gem_sets);
        }
    }
    Ok(finish(curves, vec![], summary, ""))
}

/// Polynomial critic and actor schedules of the control experiment.
pub fn control_schedules(alpha: f64, beta: f64) -> Result<(StepSchedule, StepSchedule)> {
    Ok((
        StepSchedule::polynomial(alpha, CONTROL_T0, CRITIC_POWER)?,
        StepSchedule::polynomial(beta, CONTROL_T0, ACTOR_POWER)?,
    ))
}

/// COF-PAC, ACE and Off-PAC from the uniform policy, with `J(θ_t)` and the
/// stationarity gap `‖∇J‖ − ‖b‖` evaluated by the oracle.
pub fn run_control_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let env = build_baird(config.gamma)?;
    let oracle = Oracle::new(&env.mdp, &env.behavior)?;
    let beta = config.beta.unwrap_or(1.0);
    let (critic, actor) = control_schedules(config.alpha, beta)?;
    let mut control = Vec::new();
    let mut summary = Vec::new();
    for &variant in &config.features {
        let features = state_action_features(variant);
        for kind in [ActorKind::CofPac, ActorKind::Ace, ActorKind::OffPac] {
            let settings = ControlSettings {
                kind,
                critic,
                actor,
                eta: config.eta,
                c0: config.c0,
                steps: config.steps,
                eval_every: config.eval_every,
                monitor: kind == ActorKind::CofPac,
            };
            let runs = par_runs(config, |seed| runs::control_run(&env, &features, &oracle, &settings, seed));
            let set = ControlSet {
                algorithm: kind,
                features: variant,
                critic_rate: config.alpha,
                actor_rate: beta,
                runs: runs.into_iter().collect::<Result<Vec<_>>>()?,
            };
            let finals: Vec<f64> = set.completed().map(|r| r.final_objective()).collect();
            let (m, s) = mean_std(&finals);
            let j0 = set.runs.first().map(|r| r.initial_objective()).unwrap_or(f64::NAN);
            summary.push(format!(
                "control {} {}: J(θ₀) = {j0:.4}, final J = {m:.4} ± {s:.4}, diverged {}/{}",
                kind.name(),
                variant,
                set.diverged(),
                set.runs.len()
            ));
            control.push(set);
        }
    }
    Ok(finish(vec![], control, summary, "control"))
}

/// Every closed-form identity for each (target, features) pair.
pub fn run_oracle_verify(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let env = build_baird(config.gamma)?;
    let oracle = Oracle::new(&env.mdp, &env.behavior)?;
    let mut verification = Vec::new();
    let mut summary = Vec::new();
    let mut records = Vec::new();
    let mut json = String::new();
    for &p in &config.pi_solid {
        if p >= 1.0 {
            return Err(Error::Config("oracle-verify needs a softmax target with pi-solid < 1".into()));
        }
        let pi = baird_softmax(p)?;
        for &variant in &config.features {
            let features = state_action_features(variant);
            let label = format!("pi_solid={} features={}", fmt_float(p), variant);
            let report = verify::verify(&oracle, &features, &pi, config.eta, config.master_seed)?;
            summary.push(format!("# {label}"));
            for check in &report.checks {
                summary.push(check.line());
                records.push(CurveRecord {
                    experiment: config.setting_label(p),
                    algorithm: "oracle".into(),
                    features: variant.name().into(),
                    lr1: None,
                    lr2: None,
                    run: RunLabel::All,
                    step: 0,
                    metric: check.name.into(),
                    value: check.value,
                });
            }
            if config.eta > 0.0 {
                for line in verify::json_lines(&oracle, &features, &pi, config.eta)?.lines() {
                    let mut obj: serde_json::Value =
                        serde_json::from_str(line).map_err(|e| Error::Config(e.to_string()))?;
                    obj["pi_solid"] = serde_json::json!(p);
                    obj["features"] = serde_json::json!(variant.name());
                    json.push_str(&obj.to_string());
                    json.push('\n');
                }
            }
            verification.push((label, report));
        }
    }
    Ok(ExperimentOutput { curves: vec![], control: vec![], verification, json_lines: json, summary, records })
}
