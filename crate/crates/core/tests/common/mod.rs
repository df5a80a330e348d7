#![allow(dead_code)]

use crowdbelief::calibrate::{beta_objective, ScoringRule, BETA_RANGE};
use crowdbelief::dlm::DlmParams;
use crowdbelief::domain::{Dataset, QuestionPanel};
use crowdbelief::rng;
use crowdbelief::synth::{generate_question, SynthConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Exact moments from conditioning the joint Gaussian of states and
/// observations, built densely.
pub struct DenseOracle {
    /// E[X_t | Y_1..t] and Var[X_t | Y_1..t] for t = 1..T.
    pub filt_mean: Vec<f64>,
    pub filt_var: Vec<f64>,
    /// E[X_1..T | all Y] and its covariance.
    pub smooth_mean: DVector<f64>,
    pub smooth_cov: DMatrix<f64>,
    pub log_likelihood: f64,
}

#[derive(Clone, Copy)]
struct Obs {
    day: usize,
    load: f64,
    y: f64,
}

fn observations(panel: &QuestionPanel, params: &DlmParams) -> Vec<Obs> {
    let mut out = Vec::new();
    for (t, slice) in panel.slices().iter().enumerate() {
        for o in slice {
            out.push(Obs {
                day: t + 1,
                load: params.bias[o.group],
                y: o.logit,
            });
        }
    }
    out
}

/// Prior mean and covariance of X_1..X_T.
fn state_prior(t_len: usize, p: &DlmParams) -> (DVector<f64>, DMatrix<f64>) {
    let g = p.drift;
    let mean = DVector::from_fn(t_len, |i, _| g.powi(i as i32 + 1) * p.init_mean);
    let cov = DMatrix::from_fn(t_len, t_len, |i, j| {
        let (s, t) = (i + 1, j + 1);
        let mut v = g.powi((s + t) as i32) * p.init_var;
        for u in 1..=s.min(t) {
            v += p.state_var * g.powi((s + t - 2 * u) as i32);
        }
        v
    });
    (mean, cov)
}

fn condition(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    obs: &[Obs],
    obs_var: f64,
) -> (DVector<f64>, DMatrix<f64>, f64) {
    if obs.is_empty() {
        return (mean.clone(), cov.clone(), 0.0);
    }
    let n = obs.len();
    let t_len = mean.len();
    let lam = DMatrix::from_fn(n, t_len, |r, c| {
        if obs[r].day == c + 1 {
            obs[r].load
        } else {
            0.0
        }
    });
    let y = DVector::from_fn(n, |r, _| obs[r].y);
    let s_yy = &lam * cov * lam.transpose() + DMatrix::identity(n, n) * obs_var;
    let s_xy = cov * lam.transpose();
    let resid = &y - &lam * mean;
    let chol = s_yy
        .clone()
        .cholesky()
        .expect("observation covariance is positive definite");
    let solved = chol.solve(&resid);
    let post_mean = mean + &s_xy * &solved;
    let post_cov = cov - &s_xy * chol.solve(&s_xy.transpose());
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let quad = resid.dot(&solved);
    let ll = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
    (post_mean, post_cov, ll)
}

pub fn dense_oracle(panel: &QuestionPanel, params: &DlmParams) -> DenseOracle {
    let t_len = panel.horizon();
    let (mean, cov) = state_prior(t_len, params);
    let obs = observations(panel, params);
    let mut filt_mean = Vec::with_capacity(t_len);
    let mut filt_var = Vec::with_capacity(t_len);
    for t in 1..=t_len {
        let upto: Vec<Obs> = obs.iter().filter(|o| o.day <= t).copied().collect();
        let (m, c, _) = condition(&mean, &cov, &upto, params.obs_var);
        filt_mean.push(m[t - 1]);
        filt_var.push(c[(t - 1, t - 1)]);
    }
    let (smooth_mean, smooth_cov, log_likelihood) = condition(&mean, &cov, &obs, params.obs_var);
    DenseOracle {
        filt_mean,
        filt_var,
        smooth_mean,
        smooth_cov,
        log_likelihood,
    }
}

/// Random panel with `2..=5` days, up to 3 forecasts a day over `j` groups,
/// and random model parameters.
pub fn random_case<R: Rng>(rng: &mut R, j: usize, label: &str) -> (QuestionPanel, DlmParams) {
    let t_len = rng.random_range(2..=5);
    let mut panel = QuestionPanel::new(label, t_len, None).unwrap();
    for t in 1..=t_len {
        for e in 0..rng.random_range(0..=3) {
            let y: f64 = 2.0 * rng.sample::<f64, _>(StandardNormal);
            panel
                .push_logit(t, &format!("e{e}"), y, rng.random_range(0..j))
                .unwrap();
        }
    }
    let params = DlmParams {
        bias: (0..j).map(|_| rng.random_range(0.3..2.0)).collect(),
        obs_var: rng.random_range(0.2..2.0),
        drift: rng.random_range(0.5..1.5),
        state_var: rng.random_range(0.05..1.0),
        init_mean: rng.random_range(-1.0..1.0),
        init_var: rng.random_range(0.5..2.0),
    };
    (panel, params)
}

/// Fixed horizons spanning the short, medium and long classes.
pub const CV_HORIZONS: [usize; 20] = [
    12, 18, 25, 30, 22, 35, 40, 45, 50, 55, 33, 38, 62, 70, 80, 65, 75, 28, 15, 58,
];

/// Synthetic dataset with one question per horizon, generated with the
/// Brownian construction.
pub fn mixed_horizon_dataset(
    seed: u64,
    horizons: &[usize],
    experts_per_group: usize,
    obs_var: f64,
    beta: f64,
) -> Dataset {
    let panels = horizons
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let cfg = SynthConfig {
                horizon: h,
                experts_per_group,
                ..SynthConfig::new(obs_var, beta, 1, seed)
            };
            generate_question(
                &cfg,
                &format!("q{:02}", k + 1),
                &mut rng::stream(seed, k as u64),
            )
            .unwrap()
            .0
        })
        .collect();
    Dataset::new(panels, 5).unwrap()
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (
        m,
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0),
    )
}

/// Standard error of a chain mean from non-overlapping batch means.
pub fn batch_se(v: &[f64], batches: usize) -> f64 {
    let size = v.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| v[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    (mean_var(&means).1 / batches as f64).sqrt()
}

/// 166 horizons between 10 and 200 days totalling 17,475 days.
pub fn paper_shape_horizons() -> Vec<usize> {
    let mut r = rng::stream(166, 0);
    let mut h: Vec<usize> = (0..166).map(|_| r.random_range(10..=200)).collect();
    let target = 17_475usize;
    let mut i = 0;
    while h.iter().sum::<usize>() != target {
        let total: usize = h.iter().sum();
        if total < target && h[i] < 200 {
            h[i] += 1;
        } else if total > target && h[i] > 10 {
            h[i] -= 1;
        }
        i = (i + 1) % h.len();
    }
    h
}

/// Dense log-grid search refined by bisection on the sign of a central
/// difference.
pub fn grid_oracle(paths: &[Vec<f64>], z: &[bool], rule: ScoringRule) -> f64 {
    let (lo, hi) = (BETA_RANGE.0.ln(), BETA_RANGE.1.ln());
    let n = 4_000;
    let f = |u: f64| beta_objective(paths, z, rule, u.exp());
    let step = (hi - lo) / n as f64;
    let best = (0..=n)
        .map(|i| lo + i as f64 * step)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        let h = 1e-9;
        if f(m + h) > f(m - h) {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).exp()
}
