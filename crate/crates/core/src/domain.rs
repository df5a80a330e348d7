//! Core data model: probabilities and their logit transform, per-question
//! forecast panels, datasets, censoring and outcome balancing.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{OutcomeRecord, RawForecast};
use crate::partition::greedy_partition;

/// A probability strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Probability(value))
        } else {
            Err(Error::Domain(format!(
                "probability {value} is not inside (0, 1); censor it first"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Censoring interval applied to raw reports before the logit transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CensorBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for CensorBounds {
    fn default() -> Self {
        CensorBounds { lo: 0.01, hi: 0.99 }
    }
}

impl CensorBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(Error::InvalidInput(format!(
                "censor bounds must satisfy 0 < lo < hi < 1, got lo={lo}, hi={hi}"
            )));
        }
        Ok(CensorBounds { lo, hi })
    }
}

/// Moves a raw report in [0, 1] into `[lo, hi]`.
pub fn censor(p: f64, bounds: CensorBounds) -> Result<Probability> {
    let CensorBounds { lo, hi } = CensorBounds::new(bounds.lo, bounds.hi)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidInput(format!(
            "raw probability {p} is outside [0, 1]"
        )));
    }
    Probability::new(p.clamp(lo, hi))
}

#[inline]
pub fn logit(p: Probability) -> f64 {
    (p.0 / (1.0 - p.0)).ln()
}

/// Logit of a raw value; fails at or outside the boundary.
pub fn logit_checked(p: f64) -> Result<f64> {
    Probability::new(p).map(logit)
}

/// Numerically stable logistic function. The result is clamped to the
/// representable open interval, so it never returns exactly 0 or 1.
#[inline]
pub fn inverse_logit(x: f64) -> Probability {
    let v = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    Probability(v.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0))
}

/// One expert's report for one question on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub expert_id: String,
    pub day: usize,
    pub question_id: String,
    pub prob: Probability,
    /// Self-reported expertise group, 1-based.
    pub group: usize,
}

/// A single forecast as stored inside a panel slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub logit: f64,
    pub prob: f64,
    /// 0-based group index.
    pub group: usize,
    /// Index into the panel's expert list.
    pub expert: usize,
}

/// All forecasts for one question, indexed by day.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionPanel {
    question_id: String,
    horizon: usize,
    outcome: Option<bool>,
    slices: Vec<Vec<Observation>>,
    experts: Vec<String>,
}

impl QuestionPanel {
    pub fn new(
        question_id: impl Into<String>,
        horizon: usize,
        outcome: Option<bool>,
    ) -> Result<Self> {
        let question_id = question_id.into();
        if horizon < 2 {
            return Err(Error::InvalidInput(format!(
                "question {question_id}: horizon must be at least 2 days, got {horizon}"
            )));
        }
        Ok(QuestionPanel {
            question_id,
            horizon,
            outcome,
            slices: vec![Vec::new(); horizon],
            experts: Vec::new(),
        })
    }

    fn expert_index(&mut self, expert_id: &str) -> usize {
        match self.experts.iter().position(|e| e == expert_id) {
            Some(i) => i,
            None => {
                self.experts.push(expert_id.to_string());
                self.experts.len() - 1
            }
        }
    }

    fn check_day(&self, day: usize) -> Result<()> {
        if day == 0 || day > self.horizon {
            return Err(Error::InvalidInput(format!(
                "question {}: day {day} outside 1..={}",
                self.question_id, self.horizon
            )));
        }
        Ok(())
    }

    /// Adds a forecast on a 1-based day with a 0-based group index.
    pub fn push(
        &mut self,
        day: usize,
        expert_id: &str,
        prob: Probability,
        group: usize,
    ) -> Result<()> {
        self.check_day(day)?;
        let expert = self.expert_index(expert_id);
        self.slices[day - 1].push(Observation {
            logit: logit(prob),
            prob: prob.value(),
            group,
            expert,
        });
        Ok(())
    }

    /// Adds a forecast given directly on the logit scale.
    pub fn push_logit(&mut self, day: usize, expert_id: &str, y: f64, group: usize) -> Result<()> {
        self.check_day(day)?;
        if !y.is_finite() {
            return Err(Error::Domain(format!(
                "question {}: non-finite logit forecast on day {day}",
                self.question_id
            )));
        }
        let expert = self.expert_index(expert_id);
        self.slices[day - 1].push(Observation {
            logit: y,
            prob: inverse_logit(y).value(),
            group,
            expert,
        });
        Ok(())
    }

    pub fn question_id(&self) -> &str {
        &self.question_id
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn outcome(&self) -> Option<bool> {
        self.outcome
    }

    pub fn set_outcome(&mut self, outcome: Option<bool>) {
        self.outcome = outcome;
    }

    /// Slices for days 1..=T, stored 0-based.
    pub fn slices(&self) -> &[Vec<Observation>] {
        &self.slices
    }

    /// Forecasts on a 1-based day.
    pub fn slice(&self, day: usize) -> &[Observation] {
        &self.slices[day - 1]
    }

    /// N_{t,k} for a 1-based day.
    pub fn day_count(&self, day: usize) -> usize {
        self.slices[day - 1].len()
    }

    pub fn n_forecasts(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn experts(&self) -> &[String] {
        &self.experts
    }

    pub fn is_empty(&self) -> bool {
        self.slices.iter().all(Vec::is_empty)
    }

    /// Replaces every report p by 1 - p and flips the outcome.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for obs in out.slices.iter_mut().flatten() {
            obs.logit = -obs.logit;
            obs.prob = 1.0 - obs.prob;
        }
        out.outcome = self.outcome.map(|z| !z);
        out
    }

    /// The panel restricted to its first `days` days.
    pub fn truncated(&self, days: usize) -> Result<Self> {
        if days < 1 || days > self.horizon {
            return Err(Error::InvalidInput(format!(
                "question {}: cannot truncate horizon {} to {days} days",
                self.question_id, self.horizon
            )));
        }
        let mut out = self.clone();
        out.slices.truncate(days);
        out.horizon = days;
        Ok(out)
    }

    pub fn without_outcome(&self) -> Self {
        let mut out = self.clone();
        out.outcome = None;
        out
    }

    /// Per-day, per-group sufficient statistics.
    pub fn stats(&self, n_groups: usize) -> PanelStats {
        PanelStats::new(self, n_groups)
    }
}

/// Counts and sums of the forecasts in each (day, group) cell.
///
/// The sampler and the baselines only ever touch forecasts through these
/// sums, which keeps their cost independent of the number of experts.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelStats {
    n_groups: usize,
    days: usize,
    count: Vec<f64>,
    sum_y: Vec<f64>,
    sum_y2: Vec<f64>,
    sum_p: Vec<f64>,
    day_count: Vec<f64>,
}

impl PanelStats {
    fn new(panel: &QuestionPanel, n_groups: usize) -> Self {
        let days = panel.horizon;
        let len = days * n_groups;
        let mut s = PanelStats {
            n_groups,
            days,
            count: vec![0.0; len],
            sum_y: vec![0.0; len],
            sum_y2: vec![0.0; len],
            sum_p: vec![0.0; len],
            day_count: vec![0.0; days],
        };
        for (t, slice) in panel.slices.iter().enumerate() {
            for obs in slice {
                let i = t * n_groups + obs.group;
                s.count[i] += 1.0;
                s.sum_y[i] += obs.logit;
                s.sum_y2[i] += obs.logit * obs.logit;
                s.sum_p[i] += obs.prob;
            }
            s.day_count[t] = slice.len() as f64;
        }
        s
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn days(&self) -> usize {
        self.days
    }

    /// 0-based day, 0-based group.
    #[inline]
    pub fn count(&self, t: usize, j: usize) -> f64 {
        self.count[t * self.n_groups + j]
    }

    #[inline]
    pub fn sum_logit(&self, t: usize, j: usize) -> f64 {
        self.sum_y[t * self.n_groups + j]
    }

    #[inline]
    pub fn sum_logit_sq(&self, t: usize, j: usize) -> f64 {
        self.sum_y2[t * self.n_groups + j]
    }

    #[inline]
    pub fn sum_prob(&self, t: usize, j: usize) -> f64 {
        self.sum_p[t * self.n_groups + j]
    }

    #[inline]
    pub fn day_count(&self, t: usize) -> f64 {
        self.day_count[t]
    }

    pub fn total_count(&self) -> f64 {
        self.day_count.iter().sum()
    }

    pub fn group_count(&self, j: usize) -> f64 {
        (0..self.days).map(|t| self.count(t, j)).sum()
    }
}

/// A collection of question panels sharing one set of expertise groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    panels: Vec<QuestionPanel>,
    n_groups: usize,
}

impl Dataset {
    pub fn new(panels: Vec<QuestionPanel>, n_groups: usize) -> Result<Self> {
        if n_groups == 0 {
            return Err(Error::InvalidInput(
                "at least one expertise group is required".into(),
            ));
        }
        let mut seen = HashSet::new();
        for p in &panels {
            if !seen.insert(p.question_id.as_str()) {
                return Err(Error::InvalidInput(format!(
                    "duplicate question id {}",
                    p.question_id
                )));
            }
            if let Some(obs) = p.slices.iter().flatten().find(|o| o.group >= n_groups) {
                return Err(Error::InvalidInput(format!(
                    "question {}: group {} exceeds the configured {n_groups} groups",
                    p.question_id,
                    obs.group + 1
                )));
            }
        }
        Ok(Dataset { panels, n_groups })
    }

    /// Builds panels from ingested CSV records, censoring every report.
    /// Questions appear in outcome-file order.
    pub fn assemble(
        forecasts: &[RawForecast],
        outcomes: &[OutcomeRecord],
        n_groups: usize,
        bounds: CensorBounds,
    ) -> Result<Self> {
        let mut panels = Vec::with_capacity(outcomes.len());
        let mut index = std::collections::HashMap::new();
        for rec in outcomes {
            if index
                .insert(rec.question_id.clone(), panels.len())
                .is_some()
            {
                return Err(Error::InvalidInput(format!(
                    "duplicate question id {} in outcomes",
                    rec.question_id
                )));
            }
            panels.push(QuestionPanel::new(
                rec.question_id.clone(),
                rec.horizon,
                rec.outcome,
            )?);
        }
        for f in forecasts {
            let k = *index.get(&f.question_id).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "forecast references unknown question {}",
                    f.question_id
                ))
            })?;
            if f.expertise == 0 || f.expertise > n_groups {
                return Err(Error::InvalidInput(format!(
                    "question {}: expertise {} outside 1..={n_groups}",
                    f.question_id, f.expertise
                )));
            }
            let p = censor(f.prob, bounds)?;
            panels[k].push(f.day, &f.expert_id, p, f.expertise - 1)?;
        }
        Dataset::new(panels, n_groups)
    }

    pub fn panels(&self) -> &[QuestionPanel] {
        &self.panels
    }

    pub fn panel(&self, k: usize) -> &QuestionPanel {
        &self.panels[k]
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    pub fn horizons(&self) -> Vec<usize> {
        self.panels.iter().map(|p| p.horizon).collect()
    }

    pub fn outcomes(&self) -> Result<Vec<bool>> {
        self.panels
            .iter()
            .map(|p| {
                p.outcome.ok_or_else(|| {
                    Error::InvalidInput(format!("question {} has no known outcome", p.question_id))
                })
            })
            .collect()
    }

    /// A new dataset holding the panels at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            panels: indices.iter().map(|&i| self.panels[i].clone()).collect(),
            n_groups: self.n_groups,
        }
    }

    pub fn mirrored(&self) -> Dataset {
        Dataset {
            panels: self.panels.iter().map(QuestionPanel::mirrored).collect(),
            n_groups: self.n_groups,
        }
    }

    pub fn into_panels(self) -> Vec<QuestionPanel> {
        self.panels
    }
}

/// Two-way split of the questions produced by [`balance`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalancePartition {
    pub s0: Vec<usize>,
    pub s1: Vec<usize>,
    /// Whether each question's reports were mirrored.
    pub flipped: Vec<bool>,
}

impl BalancePartition {
    pub fn day_totals(&self, horizons: &[usize]) -> (usize, usize) {
        let sum = |s: &[usize]| s.iter().map(|&k| horizons[k]).sum();
        (sum(&self.s0), sum(&self.s1))
    }
}

/// Splits questions into two halves of near-equal day totals and relabels
/// each half to a single outcome class, mirroring reports where needed.
///
/// Assignment is greedy over horizons in descending order (ties keep
/// ingestion order, equal running sums go to `S0`), with each side capped
/// at ceil(K/2) questions.
pub fn balance(dataset: &Dataset) -> Result<(Dataset, BalancePartition)> {
    let outcomes = dataset
        .outcomes()
        .map_err(|e| Error::InvalidInput(format!("balancing requires every outcome: {e}")))?;
    let k = dataset.len();
    let horizons = dataset.horizons();
    let assignment = greedy_partition(&horizons, 2, Some(k.div_ceil(2)));

    let mut s0 = Vec::new();
    let mut s1 = Vec::new();
    let mut flipped = vec![false; k];
    let mut panels = Vec::with_capacity(k);
    for (i, panel) in dataset.panels.iter().enumerate() {
        let side = assignment[i];
        let target = side == 1;
        if side == 0 {
            s0.push(i)
        } else {
            s1.push(i)
        }
        if outcomes[i] != target {
            flipped[i] = true;
            panels.push(panel.mirrored());
        } else {
            panels.push(panel.clone());
        }
    }
    Ok((
        Dataset {
            panels,
            n_groups: dataset.n_groups,
        },
        BalancePartition { s0, s1, flipped },
    ))
}
