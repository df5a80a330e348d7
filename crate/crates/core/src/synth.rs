//! Synthetic questions driven by Brownian motion with known ground truth,
//! and the loss study comparing SAC against EWMA on them.
//!
//! The hidden walk `Z_t` has unit-variance daily increments starting at 0.
//! Day `t < T` carries the calibrated logit `X_t = logit Phi(Z_t / sqrt(T - t))`
//! and the event is `Z_T > 0`. Every expert reports `b_j X_t + noise` on each
//! day before `T`; day `T` carries the outcome only.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{ewma_path, fit_baseline, BaselineFamily, BaselineParams};
use crate::calibrate::{fit_sac, ScoringRule};
use crate::domain::{inverse_logit, Dataset, QuestionPanel};
use crate::error::{Error, Result};
use crate::gibbs::GibbsConfig;
use crate::io::fmt_f64;
use crate::rng;
use crate::special::logit_std_normal_cdf;

/// Group biases before scaling by `beta`.
pub const BASE_BIAS: [f64; 5] = [0.5, 0.75, 1.0, 4.0 / 3.0, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub horizon: usize,
    pub experts_per_group: usize,
    /// Unscaled group biases; the group count is its length.
    pub base_bias: Vec<f64>,
    pub obs_var: f64,
    pub beta: f64,
    pub questions: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn new(obs_var: f64, beta: f64, questions: usize, seed: u64) -> Self {
        SynthConfig {
            horizon: 101,
            experts_per_group: 10,
            base_bias: BASE_BIAS.to_vec(),
            obs_var,
            beta,
            questions,
            replicates: 1,
            seed,
        }
    }

    pub fn n_groups(&self) -> usize {
        self.base_bias.len()
    }

    pub fn true_bias(&self) -> Vec<f64> {
        self.base_bias.iter().map(|b| b * self.beta).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon < 2 {
            return Err(Error::Parameter(format!(
                "horizon must be at least 2, got {}",
                self.horizon
            )));
        }
        if self.experts_per_group == 0
            || self.base_bias.is_empty()
            || self.questions == 0
            || self.replicates == 0
        {
            return Err(Error::Parameter(
                "expert, group, question and replicate counts must be positive".into(),
            ));
        }
        if !(self.obs_var >= 0.0 && self.obs_var.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise variance must be non-negative, got {}",
                self.obs_var
            )));
        }
        if !(self.beta.is_finite() && self.base_bias.iter().all(|b| b.is_finite())) {
            return Err(Error::Parameter("biases must be finite".into()));
        }
        Ok(())
    }
}

/// Ground truth behind one generated question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Walk values Z_1..=Z_T.
    pub brownian: Vec<f64>,
    /// Calibrated logits X_1..=X_{T-1}.
    pub hidden: Vec<f64>,
    pub outcome: bool,
    pub bias: Vec<f64>,
}

impl SynthTruth {
    /// Calibrated probabilities for days 1..T-1.
    pub fn probabilities(&self) -> Vec<f64> {
        self.hidden
            .iter()
            .map(|&x| inverse_logit(x).value())
            .collect()
    }
}

/// Simulates one question. Forecast logits are stored without censoring.
pub fn generate_question<R: Rng + ?Sized>(
    config: &SynthConfig,
    question_id: &str,
    rng: &mut R,
) -> Result<(QuestionPanel, SynthTruth)> {
    config.validate()?;
    let t_len = config.horizon;
    let mut brownian = Vec::with_capacity(t_len);
    let mut z = 0.0;
    for _ in 0..t_len {
        let step: f64 = rng.sample(StandardNormal);
        z += step;
        brownian.push(z);
    }
    let hidden: Vec<f64> = (1..t_len)
        .map(|t| logit_std_normal_cdf(brownian[t - 1] / ((t_len - t) as f64).sqrt()))
        .collect();
    let outcome = brownian[t_len - 1] > 0.0;
    let bias = config.true_bias();
    let sd = config.obs_var.sqrt();

    let mut panel = QuestionPanel::new(question_id, t_len, Some(outcome))?;
    let names: Vec<Vec<String>> = (0..bias.len())
        .map(|j| {
            (0..config.experts_per_group)
                .map(|i| format!("g{}e{}", j + 1, i + 1))
                .collect()
        })
        .collect();
    for (t, &x) in hidden.iter().enumerate() {
        for (j, &b) in bias.iter().enumerate() {
            for name in &names[j] {
                let e: f64 = rng.sample(StandardNormal);
                panel.push_logit(t + 1, name, b * x + sd * e, j)?;
            }
        }
    }
    Ok((
        panel,
        SynthTruth {
            brownian,
            hidden,
            outcome,
            bias,
        },
    ))
}

/// Generates `config.questions` questions; question `k` draws from stream `k`
/// of `seed`.
pub fn generate_dataset(config: &SynthConfig, seed: u64) -> Result<(Dataset, Vec<SynthTruth>)> {
    config.validate()?;
    let pairs = (0..config.questions)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            generate_question(config, &format!("q{:04}", k + 1), &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    let (panels, truths): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((Dataset::new(panels, config.n_groups())?, truths))
}

/// Writes `question_id,day,brownian,hidden` rows; `hidden` is empty on day T.
pub fn write_truth_to<W: Write>(writer: W, ids: &[&str], truths: &[SynthTruth]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["question_id", "day", "brownian", "hidden"])
        .map_err(err)?;
    for (id, truth) in ids.iter().zip(truths) {
        for (t, z) in truth.brownian.iter().enumerate() {
            let hidden = truth.hidden.get(t).map(|&x| fmt_f64(x)).unwrap_or_default();
            w.write_record([id.to_string(), (t + 1).to_string(), fmt_f64(*z), hidden])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_truth(path: &Path, ids: &[&str], truths: &[SynthTruth]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_truth_to(file, ids, truths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StudyMethod {
    SacBrier,
    SacLog,
    Ewma,
    /// Reports the ground truth; a sanity check for the loss plumbing.
    Oracle,
}

impl StudyMethod {
    pub fn name(self) -> &'static str {
        match self {
            StudyMethod::SacBrier => "SAC-BRI",
            StudyMethod::SacLog => "SAC-LOG",
            StudyMethod::Ewma => "EWMA",
            StudyMethod::Oracle => "ORACLE",
        }
    }

    fn estimates_bias(self) -> bool {
        !matches!(self, StudyMethod::Ewma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quantity {
    Hidden,
    Bias,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Hidden => "hidden",
            Quantity::Bias => "bias",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossType {
    Quadratic,
    Absolute,
}

impl LossType {
    pub fn name(self) -> &'static str {
        match self {
            LossType::Quadratic => "quadratic",
            LossType::Absolute => "absolute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub method: StudyMethod,
    pub sigma2: f64,
    pub beta: f64,
    pub questions: usize,
    pub replicate: usize,
    pub quantity: Quantity,
    pub loss_type: LossType,
    pub value: f64,
}

/// Parameter grid and run settings of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyGrid {
    pub obs_vars: Vec<f64>,
    pub betas: Vec<f64>,
    pub question_counts: Vec<usize>,
    pub replicates: usize,
    pub horizon: usize,
    pub experts_per_group: usize,
    pub methods: Vec<StudyMethod>,
    pub iterations: usize,
    pub burn_in: usize,
    /// 1-based group pinned during sampling.
    pub ref_group: usize,
}

impl StudyGrid {
    /// The full 5 x 5 x 5 grid with 40 data sets per cell.
    pub fn paper() -> Self {
        StudyGrid {
            obs_vars: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            betas: BASE_BIAS.to_vec(),
            question_counts: vec![20, 40, 60, 80, 100],
            replicates: 40,
            horizon: 101,
            experts_per_group: 10,
            methods: vec![
                StudyMethod::SacBrier,
                StudyMethod::SacLog,
                StudyMethod::Ewma,
            ],
            iterations: 200,
            burn_in: 100,
            ref_group: 3,
        }
    }

    pub fn cells(&self) -> Vec<StudyCell> {
        let mut out = Vec::new();
        for (a, &sigma2) in self.obs_vars.iter().enumerate() {
            for (b, &beta) in self.betas.iter().enumerate() {
                for (c, &questions) in self.question_counts.iter().enumerate() {
                    for replicate in 0..self.replicates {
                        out.push(StudyCell {
                            sigma2,
                            beta,
                            questions,
                            replicate,
                            index: [a, b, c, replicate],
                        });
                    }
                }
            }
        }
        out
    }
}

/// One data set of the study grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyCell {
    pub sigma2: f64,
    pub beta: f64,
    pub questions: usize,
    pub replicate: usize,
    /// Grid coordinates, used to derive the cell seed.
    pub index: [usize; 4],
}

impl StudyCell {
    pub fn seed(&self, master: u64) -> u64 {
        rng::derive_seed(master, &self.index.map(|i| i as u64))
    }
}

/// Estimates produced by one method on one data set.
struct Estimate {
    probs: Vec<Vec<f64>>,
    bias: Option<Vec<f64>>,
}

fn estimate(
    method: StudyMethod,
    dataset: &Dataset,
    truths: &[SynthTruth],
    grid: &StudyGrid,
    seed: u64,
) -> Result<Estimate> {
    let j = dataset.n_groups();
    let sac = |rule| -> Result<Estimate> {
        let config = GibbsConfig {
            ref_group: grid.ref_group,
            ..GibbsConfig::training(seed, j).with_run(grid.iterations, grid.burn_in, 1)
        };
        let fit = fit_sac(dataset, &config, rule)?;
        let probs = (0..dataset.len())
            .map(|k| fit.result.probabilities(k))
            .collect();
        Ok(Estimate {
            probs,
            bias: Some(fit.result.bias),
        })
    };
    match method {
        StudyMethod::SacBrier => sac(ScoringRule::Brier),
        StudyMethod::SacLog => sac(ScoringRule::Logarithmic),
        StudyMethod::Ewma => {
            let fitted = fit_baseline(dataset.panels(), j, BaselineFamily::Ewma, seed)?;
            let BaselineParams::Ewma(params) = fitted.params else {
                unreachable!("EWMA fit returns EWMA parameters")
            };
            let probs = dataset
                .panels()
                .iter()
                .map(|p| ewma_path(p, &params))
                .collect();
            Ok(Estimate { probs, bias: None })
        }
        StudyMethod::Oracle => Ok(Estimate {
            probs: truths.iter().map(SynthTruth::probabilities).collect(),
            bias: truths.first().map(|t| t.bias.clone()),
        }),
    }
}

fn mean_losses(pairs: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    let (mut sq, mut abs, mut n) = (0.0, 0.0, 0usize);
    for (a, b) in pairs {
        sq += (a - b) * (a - b);
        abs += (a - b).abs();
        n += 1;
    }
    (sq / n as f64, abs / n as f64)
}

/// Generates one data set and scores every method on it.
pub fn run_cell(grid: &StudyGrid, cell: &StudyCell, master_seed: u64) -> Result<Vec<LossRecord>> {
    let seed = cell.seed(master_seed);
    let config = SynthConfig {
        horizon: grid.horizon,
        experts_per_group: grid.experts_per_group,
        base_bias: BASE_BIAS.to_vec(),
        obs_var: cell.sigma2,
        beta: cell.beta,
        questions: cell.questions,
        replicates: 1,
        seed,
    };
    let (dataset, truths) = generate_dataset(&config, seed)?;
    let mut out = Vec::new();
    for (m, &method) in grid.methods.iter().enumerate() {
        let est = estimate(
            method,
            &dataset,
            &truths,
            grid,
            rng::derive_seed(seed, &[m as u64]),
        )?;
        let hidden = mean_losses(
            truths
                .iter()
                .zip(&est.probs)
                .flat_map(|(truth, p)| truth.probabilities().into_iter().zip(p.iter().copied())),
        );
        let record = |quantity, loss_type, value| LossRecord {
            method,
            sigma2: cell.sigma2,
            beta: cell.beta,
            questions: cell.questions,
            replicate: cell.replicate,
            quantity,
            loss_type,
            value,
        };
        out.push(record(Quantity::Hidden, LossType::Quadratic, hidden.0));
        out.push(record(Quantity::Hidden, LossType::Absolute, hidden.1));
        if method.estimates_bias() {
            if let Some(b) = &est.bias {
                let losses = mean_losses(config.true_bias().into_iter().zip(b.iter().copied()));
                out.push(record(Quantity::Bias, LossType::Quadratic, losses.0));
                out.push(record(Quantity::Bias, LossType::Absolute, losses.1));
            }
        }
    }
    Ok(out)
}

/// Runs every cell of the grid; cells run in parallel with seeds derived
/// from `master_seed` and their grid coordinates.
pub fn run_study(grid: &StudyGrid, master_seed: u64) -> Result<Vec<LossRecord>> {
    let cells = grid.cells();
    let per_cell = cells
        .par_iter()
        .map(|c| run_cell(grid, c, master_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Average loss per method, quantity and loss type over all records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub method: StudyMethod,
    pub quantity: Quantity,
    pub loss_type: LossType,
    pub mean: f64,
    pub count: usize,
}

pub fn summarize_losses(records: &[LossRecord]) -> Vec<LossSummary> {
    let mut acc: std::collections::BTreeMap<(StudyMethod, Quantity, LossType), (f64, usize)> =
        Default::default();
    for r in records {
        let e = acc.entry((r.method, r.quantity, r.loss_type)).or_default();
        e.0 += r.value;
        e.1 += 1;
    }
    acc.into_iter()
        .map(
            |((method, quantity, loss_type), (sum, count))| LossSummary {
                method,
                quantity,
                loss_type,
                mean: sum / count as f64,
                count,
            },
        )
        .collect()
}

/// Mean loss of one method at each beta value, in ascending beta order.
pub fn marginal_by_beta(
    records: &[LossRecord],
    method: StudyMethod,
    quantity: Quantity,
    loss_type: LossType,
) -> Vec<(f64, f64)> {
    let mut acc: Vec<(f64, f64, usize)> = Vec::new();
    for r in records
        .iter()
        .filter(|r| r.method == method && r.quantity == quantity && r.loss_type == loss_type)
    {
        match acc.iter_mut().find(|(b, _, _)| *b == r.beta) {
            Some(e) => {
                e.1 += r.value;
                e.2 += 1;
            }
            None => acc.push((r.beta, r.value, 1)),
        }
    }
    acc.sort_by(|a, b| a.0.total_cmp(&b.0));
    acc.into_iter().map(|(b, s, n)| (b, s / n as f64)).collect()
}

pub fn write_study_to<W: Write>(writer: W, records: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record([
        "method",
        "sigma2",
        "beta",
        "K",
        "replicate",
        "quantity",
        "loss_type",
        "value",
    ])
    .map_err(err)?;
    for r in records {
        w.write_record([
            r.method.name().to_string(),
            fmt_f64(r.sigma2),
            fmt_f64(r.beta),
            r.questions.to_string(),
            (r.replicate + 1).to_string(),
            r.quantity.name().to_string(),
            r.loss_type.name().to_string(),
            fmt_f64(r.value),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_study(path: &Path, records: &[LossRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_study_to(file, records)
}
