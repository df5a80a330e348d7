//! Cross-validation harness, Brier summaries, reliability tables with
//! bootstrap consistency bands, bias-ordering readouts and per-question
//! difficulty records.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{baseline_path, fit_baseline, BaselineFamily};
use crate::calibrate::{
    bsac_sample, calibrate_chain, sac_out_of_sample, BsacConfig, CalibrationResult, ScoringRule,
    TrainedDraw,
};
use crate::domain::{Dataset, QuestionPanel};
use crate::error::{Error, Result};
use crate::gibbs::{sample_posterior, GibbsConfig};
use crate::io::fmt_f64;
use crate::partition::greedy_partition_ordered;
use crate::rng;

/// Question index sets of a k-fold split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn day_totals(&self, horizons: &[usize]) -> Vec<usize> {
        self.folds
            .iter()
            .map(|f| f.iter().map(|&k| horizons[k]).sum())
            .collect()
    }
}

/// Greedy day-balanced folds with at most ceil(K/n) questions each. The
/// seed shuffles the order among questions of equal length.
pub fn make_folds(horizons: &[usize], n: usize, seed: u64) -> Result<FoldPlan> {
    let k = horizons.len();
    if n == 0 || k < n {
        return Err(Error::InvalidInput(format!(
            "cannot split {k} questions into {n} folds"
        )));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng::stream(seed, 0));
    let assignment = greedy_partition_ordered(horizons, &order, n, Some(k.div_ceil(n)));
    let mut folds = vec![Vec::new(); n];
    for (q, &f) in assignment.iter().enumerate() {
        folds[f].push(q);
    }
    Ok(FoldPlan { n_folds: n, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CvMethod {
    /// Always 0.5.
    Constant,
    /// Dynamic linear model with every bias and the scale fixed at 1.
    Sdlm,
    SacBrier,
    SacLog,
    BsacLog,
    Ewma,
    Ewmla,
    Ewmba,
}

impl CvMethod {
    pub const ALL: [CvMethod; 8] = [
        CvMethod::Constant,
        CvMethod::Sdlm,
        CvMethod::SacBrier,
        CvMethod::SacLog,
        CvMethod::BsacLog,
        CvMethod::Ewma,
        CvMethod::Ewmla,
        CvMethod::Ewmba,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CvMethod::Constant => "CONSTANT",
            CvMethod::Sdlm => "SDLM",
            CvMethod::SacBrier => "SAC-BRI",
            CvMethod::SacLog => "SAC-LOG",
            CvMethod::BsacLog => "BSAC-LOG",
            CvMethod::Ewma => "EWMA",
            CvMethod::Ewmla => "EWMLA",
            CvMethod::Ewmba => "EWMBA",
        }
    }
}

impl std::str::FromStr for CvMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CvMethod::ALL
            .into_iter()
            .find(|m| {
                m.name().eq_ignore_ascii_case(s)
                    || m.name().replace('-', "").eq_ignore_ascii_case(s)
            })
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s}")))
    }
}

/// Run lengths and seed of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub training: GibbsConfig,
    pub aggregation: GibbsConfig,
    /// First day that is scored (1-based).
    pub first_day: usize,
    pub seed: u64,
}

impl CvConfig {
    /// Default run lengths with `1/s2` variance priors, which stay proper on
    /// the two-day prefixes the protocol starts from.
    pub fn new(seed: u64, n_groups: usize) -> Self {
        CvConfig {
            training: GibbsConfig::training(seed, n_groups).with_jeffreys_priors(),
            aggregation: GibbsConfig::aggregation(seed, n_groups).with_jeffreys_priors(),
            first_day: 2,
            seed,
        }
    }
}

/// One scored (question, day) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub method: CvMethod,
    pub question_id: String,
    pub horizon: usize,
    pub day: usize,
    pub prob: f64,
    pub brier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub fold: usize,
    pub method: CvMethod,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub scores: Vec<ScoreRow>,
    pub failures: Vec<FoldFailure>,
}

/// A method trained on the training folds, ready to aggregate new panels.
enum Trained {
    Constant,
    Chain(Vec<TrainedDraw>),
    Baseline(crate::baselines::BaselineParams),
}

fn train(method: CvMethod, train: &Dataset, config: &CvConfig, seed: u64) -> Result<Trained> {
    let j = train.n_groups();
    let gibbs = GibbsConfig {
        seed,
        ..config.training.clone()
    };
    let sac = |rule| -> Result<Trained> {
        let chain = sample_posterior(train, &gibbs)?;
        Ok(Trained::Chain(calibrate_chain(
            &chain,
            &train.outcomes()?,
            rule,
        )?))
    };
    let baseline = |family| -> Result<Trained> {
        Ok(Trained::Baseline(
            fit_baseline(train.panels(), j, family, seed)?.params,
        ))
    };
    match method {
        CvMethod::Constant => Ok(Trained::Constant),
        CvMethod::Sdlm => Ok(Trained::Chain(vec![TrainedDraw {
            bias: vec![1.0; j],
            beta: 1.0,
        }])),
        CvMethod::SacBrier => sac(ScoringRule::Brier),
        CvMethod::SacLog => sac(ScoringRule::Logarithmic),
        CvMethod::BsacLog => Ok(Trained::Chain(
            bsac_sample(train, &BsacConfig::new(gibbs))?.trained(),
        )),
        CvMethod::Ewma => baseline(BaselineFamily::Ewma),
        CvMethod::Ewmla => baseline(BaselineFamily::Ewmla),
        CvMethod::Ewmba => baseline(BaselineFamily::Ewmba),
    }
}

/// Aggregates for days `first_day..=T`, each using only days up to itself.
/// `panel` must not carry an outcome.
fn aggregate(
    trained: &Trained,
    panel: &QuestionPanel,
    config: &CvConfig,
    seed: u64,
    pin_all: bool,
) -> Result<Vec<f64>> {
    debug_assert!(panel.outcome().is_none());
    let days = config.first_day..=panel.horizon();
    match trained {
        Trained::Constant => Ok(days.map(|_| 0.5).collect()),
        Trained::Baseline(params) => {
            // Smoothing only looks backwards, so one pass equals per-prefix runs.
            let path = baseline_path(panel, params)?;
            Ok(days.map(|t| path[t - 1]).collect())
        }
        Trained::Chain(draws) => days
            .map(|t| {
                let prefix = panel.truncated(t)?;
                if prefix.is_empty() {
                    return Ok(0.5);
                }
                let cfg = GibbsConfig {
                    seed: rng::derive_seed(seed, &[t as u64]),
                    pin_all_bias: pin_all,
                    ..config.aggregation.clone()
                };
                Ok(sac_out_of_sample(&prefix, draws, &cfg)?.mean_prob[t - 1])
            })
            .collect(),
    }
}

/// Out-of-sample evaluation: each fold is aggregated by methods trained on
/// the other folds and scored with the Brier score on days `first_day..=T`.
/// Test outcomes are removed before aggregation and only used for scoring.
pub fn run_cv(
    dataset: &Dataset,
    methods: &[CvMethod],
    plan: &FoldPlan,
    config: &CvConfig,
) -> Result<EvaluationReport> {
    let outcomes = dataset.outcomes()?;
    let mut seen = vec![false; dataset.len()];
    for &k in plan.folds.iter().flatten() {
        if k >= dataset.len() || std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidInput(
                "fold plan does not partition the questions".into(),
            ));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidInput(
            "fold plan does not cover every question".into(),
        ));
    }
    if config.first_day < 1 {
        return Err(Error::Parameter(
            "first scored day must be at least 1".into(),
        ));
    }

    let jobs: Vec<(usize, usize)> = (0..plan.folds.len())
        .flat_map(|f| (0..methods.len()).map(move |m| (f, m)))
        .collect();
    let results: Vec<std::result::Result<Vec<ScoreRow>, FoldFailure>> = jobs
        .par_iter()
        .map(|&(f, m)| {
            let method = methods[m];
            let test = &plan.folds[f];
            let train_idx: Vec<usize> = (0..dataset.len()).filter(|k| !test.contains(k)).collect();
            let seed = rng::derive_seed(config.seed, &[f as u64, method as u64]);
            let fail = |e: Error| FoldFailure {
                fold: f,
                method,
                message: e.to_string(),
            };
            let trained = train(method, &dataset.subset(&train_idx), config, seed).map_err(fail)?;
            let mut rows = Vec::new();
            for &k in test {
                let panel = dataset.panel(k).without_outcome();
                let qseed = rng::derive_seed(seed, &[k as u64]);
                let probs = aggregate(&trained, &panel, config, qseed, method == CvMethod::Sdlm)
                    .map_err(fail)?;
                let z = if outcomes[k] { 1.0 } else { 0.0 };
                for (i, p) in probs.into_iter().enumerate() {
                    rows.push(ScoreRow {
                        method,
                        question_id: panel.question_id().to_string(),
                        horizon: panel.horizon(),
                        day: config.first_day + i,
                        prob: p,
                        brier: (p - z) * (p - z),
                    });
                }
            }
            Ok(rows)
        })
        .collect();

    let mut report = EvaluationReport {
        scores: Vec::new(),
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok(rows) => report.scores.extend(rows),
            Err(f) => report.failures.push(f),
        }
    }
    let position: BTreeMap<&str, usize> = dataset
        .panels()
        .iter()
        .enumerate()
        .map(|(k, p)| (p.question_id(), k))
        .collect();
    report.scores.sort_by_key(|r| {
        (
            methods.iter().position(|&m| m == r.method),
            position[r.question_id.as_str()],
            r.day,
        )
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SummaryMode {
    ByDay,
    ByProblem,
}

impl SummaryMode {
    pub fn name(self) -> &'static str {
        match self {
            SummaryMode::ByDay => "by_day",
            SummaryMode::ByProblem => "by_problem",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LengthClass {
    All,
    /// At most 30 days.
    Short,
    /// 31 to 59 days.
    Medium,
    /// 60 days or more.
    Long,
}

impl LengthClass {
    pub const ALL: [LengthClass; 4] = [
        LengthClass::All,
        LengthClass::Short,
        LengthClass::Medium,
        LengthClass::Long,
    ];

    pub fn of(horizon: usize) -> LengthClass {
        match horizon {
            0..=30 => LengthClass::Short,
            31..=59 => LengthClass::Medium,
            _ => LengthClass::Long,
        }
    }

    pub fn contains(self, horizon: usize) -> bool {
        self == LengthClass::All || self == LengthClass::of(horizon)
    }

    pub fn name(self) -> &'static str {
        match self {
            LengthClass::All => "all",
            LengthClass::Short => "short",
            LengthClass::Medium => "medium",
            LengthClass::Long => "long",
        }
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean Brier score and its spread for one method. `ByDay` averages all
/// scored days; `ByProblem` averages per-question means. The spread is the
/// sample standard deviation of the averaged values.
pub fn summarize(
    report: &EvaluationReport,
    method: CvMethod,
    mode: SummaryMode,
    class: LengthClass,
) -> Result<(f64, f64)> {
    let rows: Vec<&ScoreRow> = report
        .scores
        .iter()
        .filter(|r| r.method == method && class.contains(r.horizon))
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no scores for {} in class {}",
            method.name(),
            class.name()
        )));
    }
    let values: Vec<f64> = match mode {
        SummaryMode::ByDay => rows.iter().map(|r| r.brier).collect(),
        SummaryMode::ByProblem => {
            let mut per_q: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
            for r in rows {
                let e = per_q.entry(&r.question_id).or_default();
                e.0 += r.brier;
                e.1 += 1;
            }
            per_q.values().map(|(s, n)| s / *n as f64).collect()
        }
    };
    Ok(mean_sd(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: CvMethod,
    pub mode: SummaryMode,
    pub class: LengthClass,
    pub mean: f64,
    pub se: f64,
}

/// Every (method, mode, class) combination that has scores.
pub fn summary_table(report: &EvaluationReport, methods: &[CvMethod]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &method in methods {
        for mode in [SummaryMode::ByDay, SummaryMode::ByProblem] {
            for class in LengthClass::ALL {
                if let Ok((mean, se)) = summarize(report, method, mode, class) {
                    out.push(SummaryRow {
                        method,
                        mode,
                        class,
                        mean,
                        se,
                    });
                }
            }
        }
    }
    out
}

/// One reliability-diagram bin with its consistency band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub bin: usize,
    /// Mean forecast in the bin.
    pub center: f64,
    pub freq: f64,
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ReliabilityBin {
    pub fn inside(&self) -> bool {
        self.lo <= self.freq && self.freq <= self.hi
    }
}

/// Equal-count bins over sorted forecasts. Runs of identical forecasts are
/// never split, so heavily tied inputs can yield fewer bins.
fn equal_count_bins(sorted: &[(f64, bool)], bins: usize) -> Vec<std::ops::Range<usize>> {
    let n = sorted.len();
    let mut out = Vec::new();
    let mut start = 0;
    for b in 1..=bins {
        if start >= n {
            break;
        }
        let mut end = (b * n / bins).max(start + 1);
        if b == bins {
            end = n;
        }
        while end < n && sorted[end].0 == sorted[end - 1].0 {
            end += 1;
        }
        if end > start {
            out.push(start..end);
            start = end;
        }
    }
    out
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Reliability table with bootstrap bands under the calibration null. Each
/// replicate redraws every outcome as Bernoulli(forecast); the band of each
/// bin is the pair of Bonferroni-adjusted quantiles of the replicate
/// frequencies at level `level` across the bins.
pub fn reliability(
    forecasts: &[f64],
    outcomes: &[bool],
    bins: usize,
    n_boot: usize,
    level: f64,
    seed: u64,
) -> Result<Vec<ReliabilityBin>> {
    if forecasts.is_empty() {
        return Err(Error::InvalidInput("no forecasts to bin".into()));
    }
    if forecasts.len() != outcomes.len() {
        return Err(Error::InvalidInput(
            "forecast and outcome counts differ".into(),
        ));
    }
    if bins == 0 || n_boot == 0 || !(level > 0.0 && level < 1.0) {
        return Err(Error::Parameter(
            "bins and bootstrap size must be positive and level in (0, 1)".into(),
        ));
    }
    if forecasts.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("forecasts must lie in [0, 1]".into()));
    }
    let mut pairs: Vec<(f64, bool)> = forecasts
        .iter()
        .copied()
        .zip(outcomes.iter().copied())
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let ranges = equal_count_bins(&pairs, bins);
    let tail = (1.0 - level) / (2.0 * ranges.len() as f64);

    Ok(ranges
        .par_iter()
        .enumerate()
        .map(|(b, range)| {
            let items = &pairs[range.clone()];
            let n = items.len() as f64;
            let center = items.iter().map(|x| x.0).sum::<f64>() / n;
            let freq = items.iter().filter(|x| x.1).count() as f64 / n;
            let mut r = rng::stream(seed, b as u64);
            let mut sims: Vec<f64> = (0..n_boot)
                .map(|_| items.iter().filter(|x| r.random::<f64>() < x.0).count() as f64 / n)
                .collect();
            sims.sort_by(f64::total_cmp);
            ReliabilityBin {
                bin: b + 1,
                center,
                freq,
                count: items.len(),
                lo: quantile(&sims, tail),
                hi: quantile(&sims, 1.0 - tail),
            }
        })
        .collect())
}

/// A statement about the ordering of group biases (0-based groups).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OrderingEvent {
    Largest(usize),
    Smallest(usize),
    StrictlyIncreasing,
    StrictlyDecreasing,
    AllBelow(f64),
    /// `b[g0] < b[g1] < ...` for the listed groups.
    Chain(Vec<usize>),
}

impl OrderingEvent {
    pub fn label(&self) -> String {
        match self {
            OrderingEvent::Largest(j) => format!("b{} largest", j + 1),
            OrderingEvent::Smallest(j) => format!("b{} smallest", j + 1),
            OrderingEvent::StrictlyIncreasing => "strictly increasing".into(),
            OrderingEvent::StrictlyDecreasing => "strictly decreasing".into(),
            OrderingEvent::AllBelow(c) => format!("all below {c}"),
            OrderingEvent::Chain(g) => g
                .iter()
                .map(|j| format!("b{}", j + 1))
                .collect::<Vec<_>>()
                .join(" < "),
        }
    }

    pub fn holds(&self, b: &[f64]) -> bool {
        let argmax = || (0..b.len()).max_by(|&x, &y| b[x].total_cmp(&b[y]));
        let argmin = || (0..b.len()).min_by(|&x, &y| b[x].total_cmp(&b[y]));
        match self {
            OrderingEvent::Largest(j) => {
                argmax() == Some(*j) && b.iter().enumerate().all(|(i, v)| i == *j || v < &b[*j])
            }
            OrderingEvent::Smallest(j) => {
                argmin() == Some(*j) && b.iter().enumerate().all(|(i, v)| i == *j || v > &b[*j])
            }
            OrderingEvent::StrictlyIncreasing => b.windows(2).all(|w| w[0] < w[1]),
            OrderingEvent::StrictlyDecreasing => b.windows(2).all(|w| w[0] > w[1]),
            OrderingEvent::AllBelow(c) => b.iter().all(|v| v < c),
            OrderingEvent::Chain(g) => g.windows(2).all(|w| b[w[0]] < b[w[1]]),
        }
    }

    /// "group j largest" for every group plus both strict orderings.
    pub fn standard(n_groups: usize) -> Vec<OrderingEvent> {
        let mut out: Vec<OrderingEvent> = (0..n_groups).map(OrderingEvent::Largest).collect();
        out.push(OrderingEvent::StrictlyIncreasing);
        out.push(OrderingEvent::StrictlyDecreasing);
        out.push(OrderingEvent::AllBelow(1.0));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventProbability {
    pub event: String,
    pub probability: f64,
}

/// Posterior quantiles of one group's bias for a box-plot table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupQuantiles {
    pub group: usize,
    pub q025: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q975: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasOrderingReport {
    pub events: Vec<EventProbability>,
    pub quantiles: Vec<GroupQuantiles>,
}

/// Fraction of draws satisfying each event, plus per-group quantiles.
pub fn bias_ordering(draws: &[Vec<f64>], events: &[OrderingEvent]) -> Result<BiasOrderingReport> {
    let first = draws
        .first()
        .ok_or_else(|| Error::InvalidInput("bias chain is empty".into()))?;
    let j = first.len();
    if draws.iter().any(|d| d.len() != j) {
        return Err(Error::InvalidInput(
            "bias draws have different lengths".into(),
        ));
    }
    for e in events {
        let bad = match e {
            OrderingEvent::Largest(g) | OrderingEvent::Smallest(g) => *g >= j,
            OrderingEvent::Chain(g) => g.iter().any(|&x| x >= j),
            _ => false,
        };
        if bad {
            return Err(Error::InvalidInput(format!(
                "event {} refers to a missing group",
                e.label()
            )));
        }
    }
    let n = draws.len() as f64;
    let events = events
        .iter()
        .map(|e| EventProbability {
            event: e.label(),
            probability: draws.iter().filter(|d| e.holds(d)).count() as f64 / n,
        })
        .collect();
    let quantiles = (0..j)
        .map(|g| {
            let mut v: Vec<f64> = draws.iter().map(|d| d[g]).collect();
            v.sort_by(f64::total_cmp);
            GroupQuantiles {
                group: g + 1,
                q025: quantile(&v, 0.025),
                q25: quantile(&v, 0.25),
                q50: quantile(&v, 0.5),
                q75: quantile(&v, 0.75),
                q975: quantile(&v, 0.975),
            }
        })
        .collect();
    Ok(BiasOrderingReport { events, quantiles })
}

/// Fitted per-question parameters: noise variance reads as expert
/// disagreement, state variance as volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRecord {
    pub question_id: String,
    pub disagreement: f64,
    pub volatility: f64,
    pub drift: f64,
}

pub fn question_difficulty(
    fit: &CalibrationResult,
    dataset: &Dataset,
) -> Result<Vec<DifficultyRecord>> {
    if fit.obs_var.len() != dataset.len() {
        return Err(Error::InvalidInput(
            "fit and dataset have different question counts".into(),
        ));
    }
    Ok(dataset
        .panels()
        .iter()
        .enumerate()
        .map(|(k, p)| DifficultyRecord {
            question_id: p.question_id().to_string(),
            disagreement: fit.obs_var[k],
            volatility: fit.state_var[k],
            drift: fit.drift[k],
        })
        .collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn write_scores_to<W: Write>(writer: W, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "question_id", "day", "brier"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.method.name(),
            &r.question_id,
            &r.day.to_string(),
            &fmt_f64(r.brier),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_summary_to<W: Write>(writer: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "mode", "class", "mean", "se"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.method.name(),
            r.mode.name(),
            r.class.name(),
            &fmt_f64(r.mean),
            &fmt_f64(r.se),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_reliability_to<W: Write>(writer: W, rows: &[ReliabilityBin]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin", "center", "freq", "count", "lo", "hi"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.bin.to_string(),
            fmt_f64(r.center),
            fmt_f64(r.freq),
            r.count.to_string(),
            fmt_f64(r.lo),
            fmt_f64(r.hi),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Reads reliability rows written by [`write_reliability_to`].
pub fn read_reliability_from<R: std::io::Read>(reader: R) -> Result<Vec<ReliabilityBin>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().collect::<Vec<_>>() != ["bin", "center", "freq", "count", "lo", "hi"] {
        return Err(Error::Parse(format!(
            "unexpected reliability header {header:?}"
        )));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let f = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|e| Error::Parse(format!("{}: {e}", &rec[i])))
            };
            let u = |i: usize| -> Result<usize> {
                rec[i]
                    .parse()
                    .map_err(|e| Error::Parse(format!("{}: {e}", &rec[i])))
            };
            Ok(ReliabilityBin {
                bin: u(0)?,
                center: f(1)?,
                freq: f(2)?,
                count: u(3)?,
                lo: f(4)?,
                hi: f(5)?,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

pub fn write_scores(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    write_scores_to(create(path)?, rows)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_summary_to(create(path)?, rows)
}

pub fn write_reliability(path: &Path, rows: &[ReliabilityBin]) -> Result<()> {
    write_reliability_to(create(path)?, rows)
}
