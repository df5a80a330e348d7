//! Calibration step: recover the overall scale of the constrained fit by
//! maximizing a proper scoring rule against resolved outcomes, then map the
//! constrained estimates back to the unconstrained model.
//!
//! Also hosts out-of-sample aggregation with a trained chain and the fully
//! Bayesian variant that samples the scale jointly with the hidden states.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{inverse_logit, Dataset, QuestionPanel};
use crate::error::{Error, Result};
use crate::gibbs::{
    check_groups, draw_bias, initial_states, posterior_mean, sample_posterior, snapshot,
    ConstrainedDraw, GibbsConfig, QuestionState,
};
use crate::optim::golden_section_max;
use crate::rng;

/// Probability clamp used by the logarithmic score.
pub const LOG_SCORE_CLAMP: f64 = 1e-12;

/// Lower and upper end of the scale search.
pub const BETA_RANGE: (f64, f64) = (0.05, 20.0);

const BETA_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringRule {
    Brier,
    #[serde(alias = "log")]
    Logarithmic,
}

impl ScoringRule {
    pub fn name(self) -> &'static str {
        match self {
            ScoringRule::Brier => "brier",
            ScoringRule::Logarithmic => "log",
        }
    }
}

impl std::str::FromStr for ScoringRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "brier" | "bri" => Ok(ScoringRule::Brier),
            "log" | "logarithmic" => Ok(ScoringRule::Logarithmic),
            other => Err(Error::InvalidInput(format!("unknown scoring rule {other}"))),
        }
    }
}

/// Positively oriented score of a logit forecast `x` for outcome `z`.
#[inline]
pub fn score(rule: ScoringRule, z: bool, x: f64) -> f64 {
    // Depends on (z, x) only through the margin, so (!z, -x) scores identically.
    let margin = if z { x } else { -x };
    match rule {
        ScoringRule::Brier => {
            let d = inverse_logit(-margin).value();
            -d * d
        }
        ScoringRule::Logarithmic => inverse_logit(margin)
            .value()
            .clamp(LOG_SCORE_CLAMP, 1.0 - LOG_SCORE_CLAMP)
            .ln(),
    }
}

/// Total score of the paths scaled by `1/beta`.
pub fn beta_objective(paths: &[Vec<f64>], outcomes: &[bool], rule: ScoringRule, beta: f64) -> f64 {
    let inv = 1.0 / beta;
    paths
        .iter()
        .zip(outcomes)
        .map(|(path, &z)| path.iter().map(|&x| score(rule, z, x * inv)).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaEstimate {
    pub beta: f64,
    pub objective: f64,
    /// Objective at `-beta`, reported as a sign diagnostic.
    pub objective_negative: f64,
}

/// Fails unless both outcomes occur among at least two questions.
pub fn check_separation(outcomes: &[bool]) -> Result<()> {
    let ones = outcomes.iter().filter(|&&z| z).count();
    if outcomes.len() < 2 || ones == 0 || ones == outcomes.len() {
        return Err(Error::Separation(format!(
            "scale estimation needs at least two questions with both outcomes present \
             ({} questions, {ones} occurred); add questions of the missing class or balance the data",
            outcomes.len()
        )));
    }
    Ok(())
}

/// Scale maximizing the summed score, searched over `beta > 0`: a dense
/// logarithmic grid over [0.05, 20] followed by golden-section refinement
/// around the best grid point.
pub fn estimate_beta(
    paths: &[Vec<f64>],
    outcomes: &[bool],
    rule: ScoringRule,
) -> Result<BetaEstimate> {
    if paths.len() != outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "{} paths but {} outcomes",
            paths.len(),
            outcomes.len()
        )));
    }
    check_separation(outcomes)?;

    let (lo, hi) = (BETA_RANGE.0.ln(), BETA_RANGE.1.ln());
    let step = (hi - lo) / (BETA_GRID_POINTS - 1) as f64;
    let f = |u: f64| beta_objective(paths, outcomes, rule, u.exp());
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..BETA_GRID_POINTS {
        let v = f(lo + i as f64 * step);
        if v > best.1 {
            best = (i, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Optimization(
            "scoring objective is not finite anywhere on the scale grid".into(),
        ));
    }
    let a = lo + best.0.saturating_sub(1) as f64 * step;
    let b = lo + (best.0 + 1).min(BETA_GRID_POINTS - 1) as f64 * step;
    let (u, v) = golden_section_max(f, a, b, 1e-10);
    let (u, v) = if v >= best.1 {
        (u, v)
    } else {
        (lo + best.0 as f64 * step, best.1)
    };
    let beta = u.exp();
    Ok(BetaEstimate {
        beta,
        objective: v,
        objective_negative: beta_objective(paths, outcomes, rule, -beta),
    })
}

/// Unconstrained estimates obtained from a constrained fit and a scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub beta: f64,
    pub bias: Vec<f64>,
    pub obs_var: Vec<f64>,
    pub drift: Vec<f64>,
    pub state_var: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

impl CalibrationResult {
    /// Calibrated probability path of question `k`.
    pub fn probabilities(&self, k: usize) -> Vec<f64> {
        self.paths[k]
            .iter()
            .map(|&x| inverse_logit(x).value())
            .collect()
    }
}

/// Applies `X/beta`, `b*beta`, `tau2/beta^2`; leaves `sigma2` and `gamma`.
pub fn apply_beta(constrained: &ConstrainedDraw, beta: f64) -> Result<CalibrationResult> {
    if beta == 0.0 || !beta.is_finite() {
        return Err(Error::Parameter(format!(
            "scale must be finite and non-zero, got {beta}"
        )));
    }
    Ok(CalibrationResult {
        beta,
        bias: constrained.bias.iter().map(|b| b * beta).collect(),
        obs_var: constrained.obs_var.clone(),
        drift: constrained.drift.clone(),
        state_var: constrained
            .state_var
            .iter()
            .map(|t| t / (beta * beta))
            .collect(),
        paths: constrained
            .paths
            .iter()
            .map(|p| p.iter().map(|x| x / beta).collect())
            .collect(),
    })
}

/// Summary written next to a calibrated fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub beta: f64,
    pub objective: f64,
    pub objective_negative: f64,
    pub rule: ScoringRule,
    pub n_questions: usize,
    pub n_days: usize,
}

/// In-sample fit: sampling step, posterior mean, calibration step.
#[derive(Debug, Clone)]
pub struct SacFit {
    pub chain: Vec<ConstrainedDraw>,
    pub mean: ConstrainedDraw,
    pub estimate: BetaEstimate,
    pub result: CalibrationResult,
    pub report: CalibrationReport,
}

pub fn calibrate_draw(
    constrained: &ConstrainedDraw,
    outcomes: &[bool],
    rule: ScoringRule,
) -> Result<(BetaEstimate, CalibrationResult, CalibrationReport)> {
    let estimate = estimate_beta(&constrained.paths, outcomes, rule)?;
    let result = apply_beta(constrained, estimate.beta)?;
    let report = CalibrationReport {
        beta: estimate.beta,
        objective: estimate.objective,
        objective_negative: estimate.objective_negative,
        rule,
        n_questions: outcomes.len(),
        n_days: constrained.paths.iter().map(Vec::len).sum(),
    };
    Ok((estimate, result, report))
}

pub fn fit_sac(dataset: &Dataset, config: &GibbsConfig, rule: ScoringRule) -> Result<SacFit> {
    let outcomes = dataset.outcomes()?;
    check_separation(&outcomes)?;
    let chain = sample_posterior(dataset, config)?;
    let mean = posterior_mean(&chain)?;
    let (estimate, result, report) = calibrate_draw(&mean, &outcomes, rule)?;
    Ok(SacFit {
        chain,
        mean,
        estimate,
        result,
        report,
    })
}

/// A bias vector and scale read in together during out-of-sample runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedDraw {
    pub bias: Vec<f64>,
    pub beta: f64,
}

/// Calibrates every retained draw of a training chain separately.
pub fn calibrate_chain(
    chain: &[ConstrainedDraw],
    outcomes: &[bool],
    rule: ScoringRule,
) -> Result<Vec<TrainedDraw>> {
    chain
        .par_iter()
        .map(|d| {
            let e = estimate_beta(&d.paths, outcomes, rule)?;
            Ok(TrainedDraw {
                bias: d.bias.clone(),
                beta: e.beta,
            })
        })
        .collect()
}

/// Posterior summary of one question's calibrated path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePath {
    pub mean_logit: Vec<f64>,
    pub mean_prob: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

pub(crate) fn summarize_samples(samples: &[Vec<f64>]) -> AggregatePath {
    let days = samples.first().map_or(0, Vec::len);
    let n = samples.len() as f64;
    let mut out = AggregatePath {
        mean_logit: Vec::with_capacity(days),
        mean_prob: Vec::with_capacity(days),
        lo95: Vec::with_capacity(days),
        hi95: Vec::with_capacity(days),
    };
    let mut col = Vec::with_capacity(samples.len());
    for t in 0..days {
        col.clear();
        col.extend(samples.iter().map(|s| s[t]));
        let mean = col.iter().sum::<f64>() / n;
        col.sort_by(f64::total_cmp);
        out.mean_logit.push(mean);
        out.mean_prob.push(inverse_logit(mean).value());
        out.lo95
            .push(inverse_logit(quantile_sorted(&col, 0.025)).value());
        out.hi95
            .push(inverse_logit(quantile_sorted(&col, 0.975)).value());
    }
    out
}

/// Aggregates a question that took no part in training. Each iteration
/// conditions on the next (bias, scale) pair of the trained chain, cycling
/// when the run is longer than the chain. The outcome is never read.
pub fn sac_out_of_sample(
    panel: &QuestionPanel,
    trained: &[TrainedDraw],
    config: &GibbsConfig,
) -> Result<AggregatePath> {
    let first = trained
        .first()
        .ok_or_else(|| Error::InvalidInput("trained chain is empty".into()))?;
    let n_groups = first.bias.len();
    config.validate(n_groups)?;
    if panel.is_empty() {
        return Err(Error::InvalidInput(format!(
            "question {} has no forecasts to aggregate",
            panel.question_id()
        )));
    }
    let panel = panel.without_outcome();
    let mut state = QuestionState::new(&panel, n_groups, rng::stream(config.seed, 0));
    state.draw_path(&first.bias)?;
    let mut samples = Vec::with_capacity(config.retained());
    for it in 1..=config.iterations {
        let pair = &trained[(it - 1) % trained.len()];
        state.draw_path(&pair.bias)?;
        state.draw_parameters(&pair.bias, config)?;
        if config.retains(it) {
            samples.push(state.path.x.iter().map(|x| x / pair.beta).collect());
        }
    }
    Ok(summarize_samples(&samples))
}

/// Sequential out-of-sample estimates: the value for day `t` uses only
/// days `1..=t` and its own derived seed, so rerunning on a prefix gives
/// the same number. Returns one entry per day starting at `first_day`.
pub fn sac_sequential(
    panel: &QuestionPanel,
    trained: &[TrainedDraw],
    config: &GibbsConfig,
    first_day: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    (first_day..=panel.horizon())
        .map(|t| {
            let prefix = panel.truncated(t)?;
            let cfg = GibbsConfig {
                seed: rng::derive_seed(config.seed, &[t as u64]),
                ..config.clone()
            };
            let agg = sac_out_of_sample(&prefix, trained, &cfg)?;
            let last = t - 1;
            Ok((agg.mean_prob[last], agg.lo95[last], agg.hi95[last]))
        })
        .collect()
}

/// Settings for the fully Bayesian variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsacConfig {
    pub gibbs: GibbsConfig,
    /// Multiplier on the outcome log-likelihood; 0 removes the outcome terms.
    pub outcome_weight: f64,
    /// Acceptance rate the burn-in tuning aims for.
    pub target_acceptance: f64,
    pub initial_beta: f64,
}

impl BsacConfig {
    pub fn new(gibbs: GibbsConfig) -> Self {
        BsacConfig {
            gibbs,
            outcome_weight: 1.0,
            target_acceptance: 0.35,
            initial_beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsacChain {
    pub draws: Vec<ConstrainedDraw>,
    pub betas: Vec<f64>,
    /// Post-burn-in acceptance rate of the single-site state moves.
    pub state_acceptance: f64,
    /// Post-burn-in acceptance rate of the scale moves.
    pub beta_acceptance: f64,
}

impl BsacChain {
    pub fn trained(&self) -> Vec<TrainedDraw> {
        self.draws
            .iter()
            .zip(&self.betas)
            .map(|(d, &beta)| TrainedDraw {
                bias: d.bias.clone(),
                beta,
            })
            .collect()
    }
}

#[inline]
fn outcome_loglik(z: bool, x: f64) -> f64 {
    score(ScoringRule::Logarithmic, z, x)
}

/// Per-question random-walk Metropolis sweep over the hidden states.
struct StateSweeper {
    log_step: f64,
    accepted: usize,
    proposed: usize,
}

impl StateSweeper {
    /// One sweep over days 1..=T followed by an exact draw of x_0.
    fn sweep(&mut self, s: &mut QuestionState, bias: &[f64], z: bool, beta: f64, weight: f64) {
        let t_len = s.path.x.len();
        let (g, tau2, s2) = (s.drift, s.state_var.max(1e-12), s.obs_var);
        let step = self.log_step.exp();
        for t in 0..t_len {
            let prev = if t == 0 { s.path.x0 } else { s.path.x[t - 1] };
            // Gaussian full conditional from the neighbours and the day's forecasts.
            let mut prec = 1.0 / tau2;
            let mut lin = g * prev / tau2;
            if t + 1 < t_len {
                prec += g * g / tau2;
                lin += g * s.path.x[t + 1] / tau2;
            }
            for (j, &b) in bias.iter().enumerate() {
                let n = s.stats.count(t, j);
                if n > 0.0 {
                    prec += n * b * b / s2;
                    lin += b * s.stats.sum_logit(t, j) / s2;
                }
            }
            let mean = lin / prec;
            let cur = s.path.x[t];
            let z0: f64 = s.rng.sample(StandardNormal);
            let prop = cur + step * (s.sign * z0) / prec.sqrt();
            let log_target = |x: f64| {
                -0.5 * prec * (x - mean) * (x - mean) + weight * outcome_loglik(z, x / beta)
            };
            let log_ratio = log_target(prop) - log_target(cur);
            self.proposed += 1;
            let u: f64 = s.rng.random();
            if u.ln() < log_ratio {
                s.path.x[t] = prop;
                self.accepted += 1;
            }
        }
        // x_0 | x_1 is Gaussian and free of the outcome term.
        let prec0 = 1.0 + g * g / tau2;
        let mean0 = (g * s.path.x[0] / tau2) / prec0;
        let z0: f64 = s.rng.sample(StandardNormal);
        s.path.x0 = mean0 + (s.sign * z0) / prec0.sqrt();
    }
}

fn beta_log_target(states: &[QuestionState], outcomes: &[bool], weight: f64, beta: f64) -> f64 {
    // p(1/beta) ∝ 1 gives p(beta) ∝ beta^-2, i.e. p(log beta) ∝ 1/beta.
    let ll: f64 = states
        .iter()
        .zip(outcomes)
        .map(|(s, &z)| {
            s.path
                .x
                .iter()
                .map(|&x| outcome_loglik(z, x / beta))
                .sum::<f64>()
        })
        .sum();
    weight * ll - beta.ln()
}

/// Fully Bayesian sampler: Metropolis moves on the hidden states under the
/// outcome likelihood, conjugate draws for the other parameters, and a
/// random walk on `log beta`. Step sizes adapt during burn-in only.
pub fn bsac_sample(dataset: &Dataset, config: &BsacConfig) -> Result<BsacChain> {
    let g = &config.gibbs;
    let j = dataset.n_groups();
    g.validate(j)?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("dataset has no questions".into()));
    }
    let outcomes = dataset.outcomes()?;
    let ref_idx = g.ref_group - 1;
    if !g.pin_all_bias {
        check_groups(dataset, ref_idx)?;
    }
    if !(config.initial_beta > 0.0) {
        return Err(Error::Parameter("initial scale must be positive".into()));
    }

    let mut bias = vec![1.0; j];
    let mut shared = rng::stream(g.seed, rng::SHARED_STREAM);
    let mut states = initial_states(dataset, &bias, g.seed)?;
    let mut sweepers: Vec<StateSweeper> = states
        .iter()
        .map(|_| StateSweeper {
            log_step: 2.4f64.ln(),
            accepted: 0,
            proposed: 0,
        })
        .collect();
    let mut beta = config.initial_beta;
    let mut beta_log_step = 0.1f64.ln();
    let (mut beta_acc, mut beta_prop) = (0usize, 0usize);
    let (mut window_beta_acc, mut window_beta) = (0usize, 0usize);
    let adapt_every = 25;
    let target = config.target_acceptance;
    let w = config.outcome_weight;

    let mut draws = Vec::with_capacity(g.retained());
    let mut betas = Vec::with_capacity(g.retained());
    let mut post_state = (0usize, 0usize);
    for it in 1..=g.iterations {
        let burning = it <= g.burn_in;
        states
            .par_iter_mut()
            .zip(sweepers.par_iter_mut())
            .zip(outcomes.par_iter())
            .for_each(|((s, sw), &z)| sw.sweep(s, &bias, z, beta, w));
        if !g.pin_all_bias {
            draw_bias(&states, &mut bias, ref_idx, &mut shared);
        }
        states
            .par_iter_mut()
            .try_for_each(|s| s.draw_parameters(&bias, g))?;

        if w != 0.0 {
            let cur = beta_log_target(&states, &outcomes, w, beta);
            let z0: f64 = shared.sample(StandardNormal);
            let prop = beta * (beta_log_step.exp() * z0).exp();
            let next = beta_log_target(&states, &outcomes, w, prop);
            let u: f64 = shared.random();
            let accepted = u.ln() < next - cur;
            if accepted {
                beta = prop;
            }
            if burning {
                window_beta += 1;
                window_beta_acc += accepted as usize;
            } else {
                beta_prop += 1;
                beta_acc += accepted as usize;
            }
        }

        if burning && it % adapt_every == 0 {
            for sw in &mut sweepers {
                if sw.proposed > 0 {
                    let rate = sw.accepted as f64 / sw.proposed as f64;
                    sw.log_step += 2.0 * (rate - target);
                }
                sw.accepted = 0;
                sw.proposed = 0;
            }
            if window_beta > 0 {
                let rate = window_beta_acc as f64 / window_beta as f64;
                beta_log_step += 2.0 * (rate - target);
                window_beta = 0;
                window_beta_acc = 0;
            }
        }
        if it == g.burn_in {
            for sw in &mut sweepers {
                sw.accepted = 0;
                sw.proposed = 0;
            }
        }
        if !burning && it == g.iterations {
            post_state = sweepers
                .iter()
                .fold((0, 0), |(a, p), sw| (a + sw.accepted, p + sw.proposed));
        }
        if g.retains(it) {
            draws.push(snapshot(&states, &bias));
            betas.push(beta);
        }
    }
    let rate = |a: usize, p: usize| {
        if p == 0 {
            f64::NAN
        } else {
            a as f64 / p as f64
        }
    };
    Ok(BsacChain {
        draws,
        betas,
        state_acceptance: rate(post_state.0, post_state.1),
        beta_acceptance: rate(beta_acc, beta_prop),
    })
}
