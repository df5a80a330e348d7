//! Gibbs sampler for the constrained model, where the bias of one reference
//! group is pinned to 1.
//!
//! Each iteration draws every question's hidden path by forward filtering
//! and backward sampling, then the free biases, then the per-question
//! observation variance, drift and state variance from their full
//! conditionals. The variance priors are `p(s2) ∝ s2^e` with a configurable
//! exponent `e`; the resulting inverse-gamma conditional has shape
//! `n/2 - e - 1`, so it is proper only when the question carries more than
//! `2(e + 1)` observations (or transitions, for the state variance).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dlm::{
    backward_sample_signed, day_observations_into, filter_days, DayObservation, DlmParams,
    StatePath,
};
use crate::domain::{Dataset, PanelStats, QuestionPanel};
use crate::error::{Error, Result};
use crate::rng;

/// Run-length and prior settings for the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// 1-based group whose bias is pinned to 1.
    pub ref_group: usize,
    pub prior_exponent_obs: f64,
    pub prior_exponent_state: f64,
    /// Pin every bias to 1 (the simple dynamic linear model).
    #[serde(default)]
    pub pin_all_bias: bool,
}

impl GibbsConfig {
    /// Training-run defaults: 3000 iterations, 500 burn-in, keep every 5th.
    pub fn training(seed: u64, n_groups: usize) -> Self {
        GibbsConfig {
            iterations: 3000,
            burn_in: 500,
            thin: 5,
            seed,
            ref_group: n_groups,
            prior_exponent_obs: 1.0,
            prior_exponent_state: 1.0,
            pin_all_bias: false,
        }
    }

    /// Aggregation-run defaults: 500 iterations, 200 burn-in, keep every 2nd.
    pub fn aggregation(seed: u64, n_groups: usize) -> Self {
        GibbsConfig {
            iterations: 500,
            burn_in: 200,
            thin: 2,
            ..GibbsConfig::training(seed, n_groups)
        }
    }

    pub fn with_run(mut self, iterations: usize, burn_in: usize, thin: usize) -> Self {
        self.iterations = iterations;
        self.burn_in = burn_in;
        self.thin = thin;
        self
    }

    /// Jeffreys-style `1/s2` priors on both variances.
    pub fn with_jeffreys_priors(mut self) -> Self {
        self.prior_exponent_obs = -1.0;
        self.prior_exponent_state = -1.0;
        self
    }

    pub fn validate(&self, n_groups: usize) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Parameter(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Parameter("thin must be at least 1".into()));
        }
        if self.ref_group == 0 || self.ref_group > n_groups {
            return Err(Error::Parameter(format!(
                "reference group {} outside 1..={n_groups}",
                self.ref_group
            )));
        }
        if !self.prior_exponent_obs.is_finite() || !self.prior_exponent_state.is_finite() {
            return Err(Error::Parameter("prior exponents must be finite".into()));
        }
        Ok(())
    }

    /// Whether 1-based iteration `i` is kept.
    pub fn retains(&self, i: usize) -> bool {
        i > self.burn_in && (i - self.burn_in).is_multiple_of(self.thin)
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// One retained Gibbs iteration under the pinned-reference constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedDraw {
    pub bias: Vec<f64>,
    pub obs_var: Vec<f64>,
    pub drift: Vec<f64>,
    pub state_var: Vec<f64>,
    /// Hidden logit path of every question, days 1..=T.
    pub paths: Vec<Vec<f64>>,
}

/// Per-question sampler state with its own random stream.
#[derive(Debug, Clone)]
pub(crate) struct QuestionState {
    pub label: String,
    pub stats: PanelStats,
    pub path: StatePath,
    pub obs_var: f64,
    pub drift: f64,
    pub state_var: f64,
    pub rng: ChaCha8Rng,
    /// Sign applied to state innovations so that mirroring the reports
    /// negates every drawn path exactly.
    pub sign: f64,
    days: Vec<DayObservation>,
}

/// Sign of the first nonzero forecast logit, or 1 if there is none.
fn orientation(panel: &QuestionPanel) -> f64 {
    panel
        .slices()
        .iter()
        .flatten()
        .map(|o| o.logit)
        .find(|&y| y != 0.0)
        .map_or(1.0, |y| if y < 0.0 { -1.0 } else { 1.0 })
}

impl QuestionState {
    pub fn new(panel: &QuestionPanel, n_groups: usize, rng: ChaCha8Rng) -> Self {
        QuestionState {
            label: panel.question_id().to_string(),
            stats: panel.stats(n_groups),
            path: StatePath {
                x: vec![0.0; panel.horizon()],
                x0: 0.0,
            },
            obs_var: 1.0,
            drift: 1.0,
            state_var: 1.0,
            rng,
            sign: orientation(panel),
            days: Vec::with_capacity(panel.horizon()),
        }
    }

    pub fn params(&self, bias: &[f64]) -> DlmParams {
        DlmParams::new(bias.to_vec(), self.obs_var, self.drift, self.state_var)
    }

    fn improper(&self, detail: String) -> Error {
        Error::ImproperConditional {
            question: self.label.clone(),
            detail,
        }
    }

    /// Forward filter, backward sample.
    pub fn draw_path(&mut self, bias: &[f64]) -> Result<()> {
        day_observations_into(&self.stats, bias, &mut self.days);
        let params = self.params(bias);
        let filter = filter_days(&self.days, &params)?;
        self.path = backward_sample_signed(&filter, &params, &mut self.rng, self.sign)?;
        Ok(())
    }

    /// Sum of squared residuals `y - b_g x` over all forecasts.
    pub fn residual_ss(&self, bias: &[f64]) -> f64 {
        let mut ss = 0.0;
        for (t, &x) in self.path.x.iter().enumerate() {
            for (j, &b) in bias.iter().enumerate() {
                let n = self.stats.count(t, j);
                if n > 0.0 {
                    let bx = b * x;
                    ss += self.stats.sum_logit_sq(t, j) - 2.0 * bx * self.stats.sum_logit(t, j)
                        + n * bx * bx;
                }
            }
        }
        ss
    }

    pub fn draw_obs_var(&mut self, bias: &[f64], exponent: f64) -> Result<()> {
        let n = self.stats.total_count();
        let ss = self.residual_ss(bias);
        self.obs_var = draw_variance(&mut self.rng, n, ss, exponent)
            .map_err(|d| self.improper(format!("observation variance: {d}")))?;
        Ok(())
    }

    pub fn draw_drift(&mut self) -> Result<()> {
        let (sxx, sxy) = lag_moments(&self.path);
        if !(sxx > 0.0) {
            return Err(self.improper("drift: lagged states are all zero".into()));
        }
        let z: f64 = self.rng.sample(StandardNormal);
        self.drift = sxy / sxx + (self.state_var / sxx).sqrt() * z;
        Ok(())
    }

    pub fn draw_state_var(&mut self, exponent: f64) -> Result<()> {
        let n = self.path.x.len() as f64;
        let ss = transition_ss(&self.path, self.drift);
        self.state_var = draw_variance(&mut self.rng, n, ss, exponent)
            .map_err(|d| self.improper(format!("state variance: {d}")))?;
        Ok(())
    }

    pub fn draw_parameters(&mut self, bias: &[f64], config: &GibbsConfig) -> Result<()> {
        self.draw_obs_var(bias, config.prior_exponent_obs)?;
        self.draw_drift()?;
        self.draw_state_var(config.prior_exponent_state)
    }
}

/// `(sum x_{t-1}^2, sum x_t x_{t-1})` over t = 1..=T, with x_0 included.
pub(crate) fn lag_moments(path: &StatePath) -> (f64, f64) {
    let mut prev = path.x0;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &x in &path.x {
        sxx += prev * prev;
        sxy += x * prev;
        prev = x;
    }
    (sxx, sxy)
}

pub(crate) fn transition_ss(path: &StatePath, drift: f64) -> f64 {
    let mut prev = path.x0;
    let mut ss = 0.0;
    for &x in &path.x {
        let e = x - drift * prev;
        ss += e * e;
        prev = x;
    }
    ss
}

/// Shape and scale of the inverse-gamma conditional for a variance with
/// `n` Gaussian terms summing to `ss` and prior exponent `exponent`.
pub fn variance_conditional(
    n: f64,
    ss: f64,
    exponent: f64,
) -> std::result::Result<(f64, f64), String> {
    let shape = n / 2.0 - exponent - 1.0;
    if !(shape > 0.0) {
        return Err(format!(
            "{n} terms are too few for prior exponent {exponent} (shape {shape})"
        ));
    }
    if !(ss > 0.0 && ss.is_finite()) {
        return Err(format!("degenerate sum of squares {ss}"));
    }
    Ok((shape, ss / 2.0))
}

fn draw_variance<R: Rng + ?Sized>(
    rng: &mut R,
    n: f64,
    ss: f64,
    exponent: f64,
) -> std::result::Result<f64, String> {
    let (shape, scale) = variance_conditional(n, ss, exponent)?;
    let g = Gamma::new(shape, 1.0).map_err(|e| e.to_string())?;
    let v = scale / g.sample(rng);
    Ok(v.max(crate::dlm::VARIANCE_FLOOR))
}

/// Precision and precision-weighted mean for each group's bias given all
/// paths and observation variances.
pub(crate) fn bias_conditionals(states: &[QuestionState], n_groups: usize) -> Vec<(f64, f64)> {
    let mut acc = vec![(0.0, 0.0); n_groups];
    for s in states {
        let w = 1.0 / s.obs_var;
        for (t, &x) in s.path.x.iter().enumerate() {
            for (j, a) in acc.iter_mut().enumerate() {
                let n = s.stats.count(t, j);
                if n > 0.0 {
                    a.0 += n * x * x * w;
                    a.1 += x * s.stats.sum_logit(t, j) * w;
                }
            }
        }
    }
    acc
}

pub(crate) fn draw_bias<R: Rng + ?Sized>(
    states: &[QuestionState],
    bias: &mut [f64],
    ref_idx: usize,
    rng: &mut R,
) {
    let cond = bias_conditionals(states, bias.len());
    for (j, (prec, wsum)) in cond.into_iter().enumerate() {
        if j == ref_idx || prec <= 0.0 {
            continue;
        }
        let z: f64 = rng.sample(StandardNormal);
        bias[j] = wsum / prec + z / prec.sqrt();
    }
}

pub(crate) fn check_groups(dataset: &Dataset, ref_idx: usize) -> Result<()> {
    let mut counts = vec![0usize; dataset.n_groups()];
    for p in dataset.panels() {
        for obs in p.slices().iter().flatten() {
            counts[obs.group] += 1;
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        if c == 0 && j != ref_idx {
            return Err(Error::EmptyGroup { group: j + 1 });
        }
    }
    Ok(())
}

pub(crate) fn snapshot(states: &[QuestionState], bias: &[f64]) -> ConstrainedDraw {
    ConstrainedDraw {
        bias: bias.to_vec(),
        obs_var: states.iter().map(|s| s.obs_var).collect(),
        drift: states.iter().map(|s| s.drift).collect(),
        state_var: states.iter().map(|s| s.state_var).collect(),
        paths: states.iter().map(|s| s.path.x.clone()).collect(),
    }
}

/// Sets up per-question states and draws the initial paths.
pub(crate) fn initial_states(
    dataset: &Dataset,
    bias: &[f64],
    seed: u64,
) -> Result<Vec<QuestionState>> {
    let mut states: Vec<QuestionState> = dataset
        .panels()
        .iter()
        .enumerate()
        .map(|(k, p)| QuestionState::new(p, dataset.n_groups(), rng::stream(seed, k as u64)))
        .collect();
    states.par_iter_mut().try_for_each(|s| s.draw_path(bias))?;
    Ok(states)
}

/// Runs the constrained sampler and returns the retained draws.
pub fn sample_posterior(dataset: &Dataset, config: &GibbsConfig) -> Result<Vec<ConstrainedDraw>> {
    let j = dataset.n_groups();
    config.validate(j)?;
    if dataset.is_empty() {
        return Err(Error::InvalidInput("dataset has no questions".into()));
    }
    let ref_idx = config.ref_group - 1;
    if !config.pin_all_bias {
        check_groups(dataset, ref_idx)?;
    }

    let mut bias = vec![1.0; j];
    let mut shared = rng::stream(config.seed, rng::SHARED_STREAM);
    let mut states = initial_states(dataset, &bias, config.seed)?;
    let mut chain = Vec::with_capacity(config.retained());
    for it in 1..=config.iterations {
        states.par_iter_mut().try_for_each(|s| s.draw_path(&bias))?;
        if !config.pin_all_bias {
            draw_bias(&states, &mut bias, ref_idx, &mut shared);
        }
        states
            .par_iter_mut()
            .try_for_each(|s| s.draw_parameters(&bias, config))?;
        if config.retains(it) {
            chain.push(snapshot(&states, &bias));
        }
    }
    Ok(chain)
}

/// Element-wise average of a chain.
pub fn posterior_mean(chain: &[ConstrainedDraw]) -> Result<ConstrainedDraw> {
    let first = chain
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot average an empty chain".into()))?;
    let n = chain.len() as f64;
    let avg = |get: &dyn Fn(&ConstrainedDraw) -> &Vec<f64>| -> Vec<f64> {
        let mut out = vec![0.0; get(first).len()];
        for d in chain {
            for (o, v) in out.iter_mut().zip(get(d)) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= n);
        out
    };
    let paths = (0..first.paths.len())
        .map(|k| {
            let mut out = vec![0.0; first.paths[k].len()];
            for d in chain {
                for (o, v) in out.iter_mut().zip(&d.paths[k]) {
                    *o += v;
                }
            }
            out.iter_mut().for_each(|o| *o /= n);
            out
        })
        .collect();
    Ok(ConstrainedDraw {
        bias: avg(&|d| &d.bias),
        obs_var: avg(&|d| &d.obs_var),
        drift: avg(&|d| &d.drift),
        state_var: avg(&|d| &d.state_var),
        paths,
    })
}

/// Writes a chain as JSON lines, one draw per line.
pub fn write_chain(path: &Path, chain: &[ConstrainedDraw]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in chain {
        serde_json::to_writer(&mut w, d).map_err(|e| Error::Parse(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_chain(path: &Path) -> Result<Vec<ConstrainedDraw>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}
