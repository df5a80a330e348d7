//! Scalar-state dynamic linear model with a vector of observations per day.
//!
//! Day t carries the forecasts `y_i = b_{g(i)} x_t + v_i`, `v_i ~ N(0, s2)`,
//! and the state evolves as `x_t = gamma x_{t-1} + w_t`, `w_t ~ N(0, tau2)`,
//! starting from `x_0 ~ N(mu0, s0^2)`. Days without forecasts are plain
//! propagation steps.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{PanelStats, QuestionPanel};
use crate::error::{Error, Result};

/// Variance floor guarding against sign flips from rounding.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DlmParams {
    /// Multiplicative bias per expertise group.
    pub bias: Vec<f64>,
    pub obs_var: f64,
    pub drift: f64,
    pub state_var: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

impl DlmParams {
    /// Parameters with the default initial state prior N(0, 1).
    pub fn new(bias: Vec<f64>, obs_var: f64, drift: f64, state_var: f64) -> Self {
        DlmParams {
            bias,
            obs_var,
            drift,
            state_var,
            init_mean: 0.0,
            init_var: 1.0,
        }
    }

    /// `obs_var` and `init_var` must be positive; `state_var` may be zero,
    /// which gives a deterministic state evolution.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.obs_var) {
            return Err(Error::Parameter(format!(
                "observation variance must be > 0, got {}",
                self.obs_var
            )));
        }
        if !ok(self.init_var) {
            return Err(Error::Parameter(format!(
                "initial variance must be > 0, got {}",
                self.init_var
            )));
        }
        if !(self.state_var.is_finite() && self.state_var >= 0.0) {
            return Err(Error::Parameter(format!(
                "state variance must be >= 0, got {}",
                self.state_var
            )));
        }
        if !self.drift.is_finite()
            || !self.init_mean.is_finite()
            || self.bias.iter().any(|b| !b.is_finite())
        {
            return Err(Error::Parameter(
                "non-finite drift, bias or initial mean".into(),
            ));
        }
        Ok(())
    }
}

/// A day's forecasts reduced to the quantities the filter needs:
/// `n`, `lambda'lambda`, `lambda'y` and `y'y`, where `lambda` holds the
/// bias of each forecaster present.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DayObservation {
    pub n: f64,
    pub load_sq: f64,
    pub load_y: f64,
    pub y_sq: f64,
}

/// Reduces per-group sums to per-day filter inputs for a bias vector.
pub fn day_observations(stats: &PanelStats, bias: &[f64]) -> Vec<DayObservation> {
    let mut out = Vec::with_capacity(stats.days());
    day_observations_into(stats, bias, &mut out);
    out
}

pub(crate) fn day_observations_into(
    stats: &PanelStats,
    bias: &[f64],
    out: &mut Vec<DayObservation>,
) {
    out.clear();
    for t in 0..stats.days() {
        let mut d = DayObservation::default();
        for (j, &b) in bias.iter().enumerate().take(stats.n_groups()) {
            let n = stats.count(t, j);
            if n > 0.0 {
                d.n += n;
                d.load_sq += n * b * b;
                d.load_y += b * stats.sum_logit(t, j);
                d.y_sq += stats.sum_logit_sq(t, j);
            }
        }
        out.push(d);
    }
}

/// Kalman recursion state for every day.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// a_t
    pub pred_mean: Vec<f64>,
    /// R_t
    pub pred_var: Vec<f64>,
    /// m_t
    pub filt_mean: Vec<f64>,
    /// C_t
    pub filt_var: Vec<f64>,
    /// Marginal log-likelihood of all observations.
    pub log_likelihood: f64,
    pub init_mean: f64,
    pub init_var: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.filt_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filt_mean.is_empty()
    }
}

pub fn forward_filter(panel: &QuestionPanel, params: &DlmParams) -> Result<FilterOutput> {
    let stats = panel.stats(params.bias.len());
    filter_days(&day_observations(&stats, &params.bias), params)
}

/// Information-form scalar Kalman filter over pre-reduced days.
pub fn filter_days(days: &[DayObservation], params: &DlmParams) -> Result<FilterOutput> {
    params.validate()?;
    let n = days.len();
    let mut out = FilterOutput {
        pred_mean: Vec::with_capacity(n),
        pred_var: Vec::with_capacity(n),
        filt_mean: Vec::with_capacity(n),
        filt_var: Vec::with_capacity(n),
        log_likelihood: 0.0,
        init_mean: params.init_mean,
        init_var: params.init_var,
    };
    let g = params.drift;
    let s2 = params.obs_var;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let (mut m, mut c) = (params.init_mean, params.init_var);
    for d in days {
        let a = g * m;
        let r = (g * g * c + params.state_var).max(VARIANCE_FLOOR);
        if d.n > 0.0 {
            let prec = 1.0 / r + d.load_sq / s2;
            c = (1.0 / prec).max(VARIANCE_FLOOR);
            m = c * (a / r + d.load_y / s2);

            // y ~ N(lambda a, s2 I + r lambda lambda')
            let ee = d.y_sq - 2.0 * a * d.load_y + a * a * d.load_sq;
            let le = d.load_y - a * d.load_sq;
            let quad = (ee - r * le * le / (s2 + r * d.load_sq)) / s2;
            let logdet = d.n * s2.ln() + (1.0 + r * d.load_sq / s2).ln();
            out.log_likelihood += -0.5 * (d.n * ln_2pi + logdet + quad);
        } else {
            m = a;
            c = r;
        }
        out.pred_mean.push(a);
        out.pred_var.push(r);
        out.filt_mean.push(m);
        out.filt_var.push(c);
    }
    Ok(out)
}

/// A hidden path on the logit scale for days 1..=T, plus the draw of the
/// day-0 state that the drift and state-variance updates condition on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePath {
    pub x: Vec<f64>,
    #[serde(default)]
    pub x0: f64,
}

impl StatePath {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[inline]
fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64, sign: f64) -> f64 {
    if var <= VARIANCE_FLOOR {
        mean
    } else {
        let z: f64 = rng.sample(StandardNormal);
        mean + var.sqrt() * (sign * z)
    }
}

/// Draws one path from the joint smoothing distribution given a filter pass.
pub fn backward_sample<R: Rng + ?Sized>(
    filter: &FilterOutput,
    params: &DlmParams,
    rng: &mut R,
) -> Result<StatePath> {
    backward_sample_signed(filter, params, rng, 1.0)
}

/// [`backward_sample`] with every standard normal innovation multiplied by
/// `sign` (±1). The draw has the same distribution for either sign.
pub(crate) fn backward_sample_signed<R: Rng + ?Sized>(
    filter: &FilterOutput,
    params: &DlmParams,
    rng: &mut R,
    sign: f64,
) -> Result<StatePath> {
    let n = filter.filt_mean.len();
    if n == 0
        || filter.filt_var.len() != n
        || filter.pred_mean.len() != n
        || filter.pred_var.len() != n
    {
        return Err(Error::InvalidInput(
            "filter output is empty or has mismatched lengths".into(),
        ));
    }
    let g = params.drift;
    let mut x = vec![0.0; n];
    x[n - 1] = normal(rng, filter.filt_mean[n - 1], filter.filt_var[n - 1], sign);
    let smooth = |m: f64, c: f64, a_next: f64, r_next: f64, x_next: f64| {
        let gain = g * c / r_next;
        let h = m + gain * (x_next - a_next);
        let hv = c - g * c * gain;
        (h, hv)
    };
    for t in (0..n - 1).rev() {
        let (h, hv) = smooth(
            filter.filt_mean[t],
            filter.filt_var[t],
            filter.pred_mean[t + 1],
            filter.pred_var[t + 1],
            x[t + 1],
        );
        x[t] = normal(rng, h, hv, sign);
    }
    let (h0, hv0) = smooth(
        filter.init_mean,
        filter.init_var,
        filter.pred_mean[0],
        filter.pred_var[0],
        x[0],
    );
    let x0 = normal(rng, h0, hv0, sign);
    Ok(StatePath { x, x0 })
}

/// Distribution of the state `steps` days ahead of a known value.
pub fn predict_forward(x: f64, params: &DlmParams, steps: usize) -> (f64, f64) {
    assert!(steps >= 1, "steps must be at least 1");
    let g = params.drift;
    let mean = g.powi(steps as i32) * x;
    let g2 = g * g;
    let mut var = 0.0;
    let mut pow = 1.0;
    for _ in 0..steps {
        var += pow;
        pow *= g2;
    }
    (mean, params.state_var * var)
}
