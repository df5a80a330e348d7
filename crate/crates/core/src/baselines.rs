//! Exponentially weighted baseline aggregators and their fitting.
//!
//! All three families produce a daily aggregate from the day's forecasts
//! and smooth it with `p_t = alpha * g_t + (1 - alpha) * p_{t-1}`, starting
//! from the first day that has forecasts. Days without forecasts carry the
//! previous value forward; days before the first forecast report 0.5.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{inverse_logit, Observation, PanelStats, Probability, QuestionPanel};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rng;
use crate::special::regularized_incomplete_beta;

/// Value reported before a question has received any forecast.
pub const NO_INFORMATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwmaParams {
    pub alpha: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwmlaParams {
    pub alpha: f64,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EwmbaParams {
    pub alpha: f64,
    /// First Beta shape.
    pub nu: f64,
    /// Second Beta shape.
    pub shape2: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineFamily {
    Ewma,
    Ewmla,
    Ewmba,
}

impl std::str::FromStr for BaselineFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ewma" => Ok(BaselineFamily::Ewma),
            "ewmla" => Ok(BaselineFamily::Ewmla),
            "ewmba" => Ok(BaselineFamily::Ewmba),
            other => Err(Error::InvalidInput(format!(
                "unknown baseline family {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum BaselineParams {
    Ewma(EwmaParams),
    Ewmla(EwmlaParams),
    Ewmba(EwmbaParams),
}

impl BaselineParams {
    /// alpha = 1, uniform weights, unit biases and shapes.
    pub fn default_for(family: BaselineFamily, n_groups: usize) -> Self {
        let uniform = vec![1.0 / n_groups as f64; n_groups];
        match family {
            BaselineFamily::Ewma => BaselineParams::Ewma(EwmaParams {
                alpha: 1.0,
                weights: uniform,
            }),
            BaselineFamily::Ewmla => BaselineParams::Ewmla(EwmlaParams {
                alpha: 1.0,
                bias: vec![1.0; n_groups],
            }),
            BaselineFamily::Ewmba => BaselineParams::Ewmba(EwmbaParams {
                alpha: 1.0,
                nu: 1.0,
                shape2: 1.0,
                weights: uniform,
            }),
        }
    }

    pub fn family(&self) -> BaselineFamily {
        match self {
            BaselineParams::Ewma(_) => BaselineFamily::Ewma,
            BaselineParams::Ewmla(_) => BaselineFamily::Ewmla,
            BaselineParams::Ewmba(_) => BaselineFamily::Ewmba,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            BaselineParams::Ewma(p) => p.alpha,
            BaselineParams::Ewmla(p) => p.alpha,
            BaselineParams::Ewmba(p) => p.alpha,
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!(
            "weights must be non-negative and sum to 1, got {weights:?}"
        )));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Expertise-weighted mean of group mean probabilities, renormalizing the
/// weights over the groups present. `None` for an empty day.
pub fn group_weighted_mean(slice: &[Observation], weights: &[f64]) -> Option<Probability> {
    let mut sums = vec![(0.0, 0usize); weights.len()];
    for obs in slice {
        let s = &mut sums[obs.group];
        s.0 += obs.prob;
        s.1 += 1;
    }
    weighted_group_mean(sums.iter().map(|&(s, n)| (s, n as f64)), weights)
        .and_then(|p| Probability::new(p).ok())
}

fn weighted_group_mean(sums: impl Iterator<Item = (f64, f64)>, weights: &[f64]) -> Option<f64> {
    let (mut num, mut den, mut any) = (0.0, 0.0, false);
    for ((sum, n), &w) in sums.zip(weights) {
        if n > 0.0 {
            any = true;
            num += w * sum / n;
            den += w;
        }
    }
    if !any {
        return None;
    }
    if den > 0.0 {
        Some(num / den)
    } else {
        // Every present group has zero weight: fall back to equal weights.
        None
    }
}

/// Logit-pooling aggregate: sigmoid of the bias-weighted mean logit.
pub fn ewmla_aggregate(slice: &[Observation], bias: &[f64]) -> Option<Probability> {
    if slice.is_empty() {
        return None;
    }
    let n = slice.len() as f64;
    let s: f64 = slice.iter().map(|o| bias[o.group] * o.logit).sum();
    Some(inverse_logit(s / n))
}

/// Beta-CDF transform of the weighted mean probability.
pub fn ewmba_aggregate(slice: &[Observation], params: &EwmbaParams) -> Result<Option<Probability>> {
    match group_weighted_mean(slice, &params.weights) {
        None => Ok(None),
        Some(p) => {
            let h = regularized_incomplete_beta(p.value(), params.nu, params.shape2)?;
            Ok(Some(Probability::new(
                h.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
            )?))
        }
    }
}

/// Exponential smoothing with carry-forward over empty days.
pub fn smooth(daily: &[Option<f64>], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(daily.len());
    let mut cur: Option<f64> = None;
    for d in daily {
        cur = match (cur, d) {
            (None, Some(g)) => Some(*g),
            (Some(prev), Some(g)) => Some(alpha * g + (1.0 - alpha) * prev),
            (c, None) => c,
        };
        out.push(cur.unwrap_or(NO_INFORMATION));
    }
    out
}

pub fn ewma_path(panel: &QuestionPanel, params: &EwmaParams) -> Vec<f64> {
    let daily: Vec<Option<f64>> = panel
        .slices()
        .iter()
        .map(|s| group_weighted_mean(s, &params.weights).map(Probability::value))
        .collect();
    smooth(&daily, params.alpha)
}

pub fn ewmla_path(panel: &QuestionPanel, params: &EwmlaParams) -> Vec<f64> {
    let daily: Vec<Option<f64>> = panel
        .slices()
        .iter()
        .map(|s| ewmla_aggregate(s, &params.bias).map(Probability::value))
        .collect();
    smooth(&daily, params.alpha)
}

pub fn ewmba_path(panel: &QuestionPanel, params: &EwmbaParams) -> Result<Vec<f64>> {
    let daily = panel
        .slices()
        .iter()
        .map(|s| ewmba_aggregate(s, params).map(|p| p.map(Probability::value)))
        .collect::<Result<Vec<_>>>()?;
    Ok(smooth(&daily, params.alpha))
}

/// Daily smoothed aggregate for any family, after validating parameters.
pub fn baseline_path(panel: &QuestionPanel, params: &BaselineParams) -> Result<Vec<f64>> {
    check_alpha(params.alpha())?;
    match params {
        BaselineParams::Ewma(p) => {
            check_weights(&p.weights)?;
            Ok(ewma_path(panel, p))
        }
        BaselineParams::Ewmla(p) => Ok(ewmla_path(panel, p)),
        BaselineParams::Ewmba(p) => {
            check_weights(&p.weights)?;
            ewmba_path(panel, p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBaseline {
    pub params: BaselineParams,
    /// Sum of squared errors against the outcomes over all training days.
    pub objective: f64,
}

/// Training data reduced to per-day group sums.
struct TrainingSet {
    panels: Vec<(PanelStats, f64)>,
    n_groups: usize,
}

impl TrainingSet {
    fn daily(&self, stats: &PanelStats, t: usize, params: &BaselineParams) -> Option<f64> {
        let n = stats.day_count(t);
        if n == 0.0 {
            return None;
        }
        let j = self.n_groups;
        let mean = |w: &[f64]| {
            weighted_group_mean((0..j).map(|g| (stats.sum_prob(t, g), stats.count(t, g))), w)
        };
        match params {
            BaselineParams::Ewma(p) => mean(&p.weights),
            BaselineParams::Ewmla(p) => {
                let s: f64 = (0..j).map(|g| p.bias[g] * stats.sum_logit(t, g)).sum();
                Some(inverse_logit(s / n).value())
            }
            BaselineParams::Ewmba(p) => {
                mean(&p.weights).and_then(|m| regularized_incomplete_beta(m, p.nu, p.shape2).ok())
            }
        }
    }

    fn objective(&self, params: &BaselineParams) -> f64 {
        let alpha = params.alpha();
        let mut total = 0.0;
        for (stats, z) in &self.panels {
            let mut cur: Option<f64> = None;
            for t in 0..stats.days() {
                if let Some(g) = self.daily(stats, t, params) {
                    cur = Some(match cur {
                        None => g,
                        Some(prev) => alpha * g + (1.0 - alpha) * prev,
                    });
                }
                let p = cur.unwrap_or(NO_INFORMATION);
                total += (z - p) * (z - p);
            }
        }
        total
    }
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Maps an unconstrained vector to family parameters: alpha is clamped to
/// [0, 1], weights go through a softmax, Beta shapes through exp.
fn decode(family: BaselineFamily, theta: &[f64], j: usize) -> BaselineParams {
    let alpha = theta[0].clamp(0.0, 1.0);
    match family {
        BaselineFamily::Ewma => BaselineParams::Ewma(EwmaParams {
            alpha,
            weights: softmax(&theta[1..1 + j]),
        }),
        BaselineFamily::Ewmla => BaselineParams::Ewmla(EwmlaParams {
            alpha,
            bias: theta[1..1 + j].to_vec(),
        }),
        BaselineFamily::Ewmba => BaselineParams::Ewmba(EwmbaParams {
            alpha,
            nu: theta[1].clamp(-20.0, 20.0).exp(),
            shape2: theta[2].clamp(-20.0, 20.0).exp(),
            weights: softmax(&theta[3..3 + j]),
        }),
    }
}

fn default_theta(family: BaselineFamily, j: usize) -> Vec<f64> {
    match family {
        BaselineFamily::Ewma => std::iter::once(1.0)
            .chain(std::iter::repeat_n(0.0, j))
            .collect(),
        BaselineFamily::Ewmla => std::iter::once(1.0)
            .chain(std::iter::repeat_n(1.0, j))
            .collect(),
        BaselineFamily::Ewmba => [1.0, 0.0, 0.0]
            .into_iter()
            .chain(std::iter::repeat_n(0.0, j))
            .collect(),
    }
}

fn random_theta<R: Rng>(family: BaselineFamily, j: usize, rng: &mut R) -> Vec<f64> {
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let alpha = 0.05 + 0.9 * (0.5 + 0.25 * normal()).clamp(0.0, 1.0);
    let mut theta = vec![alpha];
    match family {
        BaselineFamily::Ewma => theta.extend((0..j).map(|_| normal())),
        BaselineFamily::Ewmla => theta.extend((0..j).map(|_| 1.0 + 0.5 * normal())),
        BaselineFamily::Ewmba => {
            theta.push(0.5 * normal());
            theta.push(0.5 * normal());
            theta.extend((0..j).map(|_| normal()));
        }
    }
    theta
}

/// Number of optimizer starts, the first at the default parameters.
pub const FIT_RESTARTS: usize = 10;

/// Least-squares fit of a baseline family against training outcomes.
pub fn fit_baseline(
    panels: &[QuestionPanel],
    n_groups: usize,
    family: BaselineFamily,
    seed: u64,
) -> Result<FittedBaseline> {
    let mut data = Vec::with_capacity(panels.len());
    for p in panels {
        let z = p.outcome().ok_or_else(|| {
            Error::InvalidInput(format!(
                "training question {} has no outcome",
                p.question_id()
            ))
        })?;
        data.push((p.stats(n_groups), if z { 1.0 } else { 0.0 }));
    }
    let ones = data.iter().filter(|(_, z)| *z == 1.0).count();
    if ones == 0 || ones == data.len() {
        return Err(Error::Separation(
            "baseline training needs both outcome classes".into(),
        ));
    }
    let set = TrainingSet {
        panels: data,
        n_groups,
    };
    let f = |theta: &[f64]| set.objective(&decode(family, theta, n_groups));

    let mut rng = rng::stream(seed, 0);
    let opts = NelderMeadOptions {
        max_evals: 1500,
        f_tol: 1e-12,
        initial_step: 0.5,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in 0..FIT_RESTARTS {
        let start = if r == 0 {
            default_theta(family, n_groups)
        } else {
            random_theta(family, n_groups, &mut rng)
        };
        let m = nelder_mead(f, &start, opts);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    let (theta, objective) = best.expect("at least one restart");
    if !objective.is_finite() {
        return Err(Error::Optimization(
            "baseline objective is not finite".into(),
        ));
    }
    Ok(FittedBaseline {
        params: decode(family, &theta, n_groups),
        objective,
    })
}

/// Sum of squared errors of fixed parameters on labelled panels.
pub fn baseline_objective(
    panels: &[QuestionPanel],
    n_groups: usize,
    params: &BaselineParams,
) -> Result<f64> {
    let len = match params {
        BaselineParams::Ewma(p) => p.weights.len(),
        BaselineParams::Ewmla(p) => p.bias.len(),
        BaselineParams::Ewmba(p) => p.weights.len(),
    };
    if len != n_groups {
        return Err(Error::Parameter(format!(
            "expected {n_groups} group parameters, got {len}"
        )));
    }
    let mut total = 0.0;
    for p in panels {
        let z = if p
            .outcome()
            .ok_or_else(|| Error::InvalidInput("missing outcome".into()))?
        {
            1.0
        } else {
            0.0
        };
        total += baseline_path(p, params)?
            .iter()
            .map(|q| (z - q) * (z - q))
            .sum::<f64>();
    }
    Ok(total)
}
