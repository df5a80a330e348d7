//! Subcommand bodies. Each returns a library error; `main` maps it to an exit code.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crowdbelief::baselines::{
    baseline_path, fit_baseline, BaselineFamily, BaselineParams, FittedBaseline, NO_INFORMATION,
};
use crowdbelief::calibrate::{
    apply_beta, bsac_sample, calibrate_chain, calibrate_draw, check_separation, sac_out_of_sample,
    sac_sequential, BsacConfig, CalibrationReport, CalibrationResult, ScoringRule, TrainedDraw,
};
use crowdbelief::domain::{
    balance as balance_dataset, inverse_logit, CensorBounds, Dataset, QuestionPanel,
};
use crowdbelief::eval::{
    bias_ordering, make_folds, question_difficulty, reliability, run_cv, summary_table,
    write_reliability, write_scores, write_summary, CvConfig, CvMethod, LengthClass, OrderingEvent,
    SummaryMode, SummaryRow,
};
use crowdbelief::gibbs::{
    posterior_mean, sample_posterior, write_chain, ConstrainedDraw, GibbsConfig,
};
use crowdbelief::io::{
    fmt_f64, read_forecasts, read_json, read_outcomes, write_aggregates, write_forecasts,
    write_json, write_outcomes, AggregateRow,
};
use crowdbelief::synth::{
    generate_dataset, run_study, summarize_losses, write_study, write_truth, StudyGrid,
    StudyMethod, SynthConfig, BASE_BIAS,
};
use crowdbelief::{rng, Error, Result};

use crate::{
    AggregateArgs, BalanceArgs, DataArgs, EvaluateArgs, FitArgs, Model, ReportArgs, Rule,
    SamplerArgs, SynthArgs,
};

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let fail = |e: csv::Error| Error::Parse(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a file a previous `fit` should have written; a missing file is a data error, not I/O.
fn read_fit_file<T: serde::de::DeserializeOwned>(
    dir: &Path,
    name: &str,
    model: Model,
) -> Result<T> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::InvalidInput(format!(
            "{} not found; run `fit --model {}` with --out {}",
            path.display(),
            model_name(model),
            dir.display()
        )));
    }
    read_json(&path)
}

fn load(data: &DataArgs) -> Result<Dataset> {
    let forecasts = read_forecasts(&data.forecasts)?;
    let outcomes = read_outcomes(&data.outcomes)?;
    let groups = match data.groups {
        Some(j) => j,
        None => forecasts.iter().map(|f| f.expertise).max().unwrap_or(1),
    };
    Dataset::assemble(
        &forecasts,
        &outcomes,
        groups,
        CensorBounds::new(data.censor_lo, data.censor_hi)?,
    )
}

fn sampler(mut base: GibbsConfig, s: &SamplerArgs) -> GibbsConfig {
    if let Some(n) = s.iterations {
        base.iterations = n;
    }
    if let Some(n) = s.burn_in {
        base.burn_in = n;
    }
    if let Some(n) = s.thin {
        base.thin = n;
    }
    if let Some(r) = s.ref_group {
        base.ref_group = r;
    }
    if s.jeffreys {
        base = base.with_jeffreys_priors();
    }
    base
}

fn scoring_rule(r: Rule) -> ScoringRule {
    match r {
        Rule::Log => ScoringRule::Logarithmic,
        Rule::Brier => ScoringRule::Brier,
    }
}

fn family(m: Model) -> Option<BaselineFamily> {
    match m {
        Model::Ewma => Some(BaselineFamily::Ewma),
        Model::Ewmla => Some(BaselineFamily::Ewmla),
        Model::Ewmba => Some(BaselineFamily::Ewmba),
        Model::Sac | Model::Sdlm | Model::Bsac => None,
    }
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Sac => "sac",
        Model::Sdlm => "sdlm",
        Model::Bsac => "bsac",
        Model::Ewma => "ewma",
        Model::Ewmla => "ewmla",
        Model::Ewmba => "ewmba",
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + (pos - i as f64) * (next - sorted[i]),
        None => sorted[i],
    }
}

fn row(
    panel: &QuestionPanel,
    day: usize,
    p: f64,
    lo: Option<f64>,
    hi: Option<f64>,
) -> AggregateRow {
    AggregateRow {
        question_id: panel.question_id().to_string(),
        day,
        mean_prob: p,
        lo95: lo,
        hi95: hi,
    }
}

/// In-sample probabilities with 95% bands from the per-draw calibrated paths.
fn chain_rows(ds: &Dataset, draws: &[ConstrainedDraw], betas: &[f64]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for (k, panel) in ds.panels().iter().enumerate() {
        for t in 0..panel.horizon() {
            let mut xs: Vec<f64> = draws
                .iter()
                .zip(betas)
                .map(|(d, b)| d.paths[k][t] / b)
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.sort_by(f64::total_cmp);
            let band = |q| inverse_logit(quantile(&xs, q)).value();
            rows.push(row(
                panel,
                t + 1,
                inverse_logit(mean).value(),
                Some(band(0.025)),
                Some(band(0.975)),
            ));
        }
    }
    rows
}

/// Posterior mean of the calibrated quantities when every draw has its own scale.
fn calibrated_mean(draws: &[ConstrainedDraw], betas: &[f64]) -> Result<CalibrationResult> {
    let scaled = draws
        .iter()
        .zip(betas)
        .map(|(d, &b)| {
            let c = apply_beta(d, b)?;
            Ok(ConstrainedDraw {
                bias: c.bias,
                obs_var: c.obs_var,
                drift: c.drift,
                state_var: c.state_var,
                paths: c.paths,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = posterior_mean(&scaled)?;
    let beta = betas.iter().sum::<f64>() / betas.len() as f64;
    Ok(CalibrationResult {
        beta,
        bias: m.bias,
        obs_var: m.obs_var,
        drift: m.drift,
        state_var: m.state_var,
        paths: m.paths,
    })
}

fn write_fit_record(
    dir: &Path,
    model: Model,
    report: Option<&CalibrationReport>,
    result: &CalibrationResult,
) -> Result<()> {
    let record = serde_json::json!({
        "model": model_name(model),
        "report": report,
        "result": result,
    });
    write_json(&dir.join("calibration.json"), &record)
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let mut grid = StudyGrid {
        obs_vars: a.sigma2.clone(),
        betas: a.beta.clone(),
        question_counts: a.questions.clone(),
        replicates: a.replicates,
        horizon: a.horizon,
        experts_per_group: a.experts,
        methods: vec![
            StudyMethod::SacBrier,
            StudyMethod::SacLog,
            StudyMethod::Ewma,
        ],
        iterations: a.iterations,
        burn_in: a.burn_in,
        ref_group: a.ref_group,
    };
    if a.paper_grid {
        let p = StudyGrid::paper();
        grid.obs_vars = p.obs_vars;
        grid.betas = p.betas;
        grid.question_counts = p.question_counts;
        grid.replicates = p.replicates;
    }
    mkdir(&a.out)?;
    if a.study {
        let records = run_study(&grid, a.seed)?;
        write_study(&a.out.join("study.csv"), &records)?;
        let mut text = format!(
            "{:<9}{:<11}{:<8}{:>22}{:>8}\n",
            "method", "quantity", "loss", "mean", "n"
        );
        for s in summarize_losses(&records) {
            let _ = writeln!(
                text,
                "{:<9}{:<11}{:<8}{:>22}{:>8}",
                s.method.name(),
                s.quantity.name(),
                s.loss_type.name(),
                fmt_f64(s.mean),
                s.count
            );
        }
        write_text(&a.out.join("study_summary.txt"), &text)?;
        print!("{text}");
        return Ok(());
    }
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::Parameter(
            "the grid has no cells; check --K, --sigma2, --beta and --replicates".into(),
        ));
    }
    let single = cells.len() == 1;
    let mut manifest = Vec::new();
    for cell in &cells {
        let seed = cell.seed(a.seed);
        let cfg = SynthConfig {
            horizon: grid.horizon,
            experts_per_group: grid.experts_per_group,
            base_bias: BASE_BIAS.to_vec(),
            ..SynthConfig::new(cell.sigma2, cell.beta, cell.questions, seed)
        };
        let (ds, truths) = generate_dataset(&cfg, seed)?;
        let name = format!(
            "s{}_b{}_k{}_r{:03}",
            cell.index[0] + 1,
            cell.index[1] + 1,
            cell.index[2] + 1,
            cell.replicate + 1
        );
        let dir = if single {
            a.out.clone()
        } else {
            a.out.join(&name)
        };
        mkdir(&dir)?;
        write_forecasts(&dir.join("forecasts.csv"), &ds)?;
        write_outcomes(&dir.join("outcomes.csv"), ds.panels())?;
        let ids: Vec<&str> = ds.panels().iter().map(QuestionPanel::question_id).collect();
        write_truth(&dir.join("truth.csv"), &ids, &truths)?;
        manifest.push(vec![
            name,
            fmt_f64(cell.sigma2),
            fmt_f64(cell.beta),
            cell.questions.to_string(),
            (cell.replicate + 1).to_string(),
            seed.to_string(),
        ]);
    }
    if !single {
        write_csv(
            &a.out.join("cells.csv"),
            &["dir", "sigma2", "beta", "K", "replicate", "seed"],
            &manifest,
        )?;
    }
    println!("wrote {} data set(s) to {}", cells.len(), a.out.display());
    Ok(())
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut ds = load(&a.data)?;
    mkdir(&a.out)?;
    if a.balance {
        let (balanced, part) = balance_dataset(&ds)?;
        write_json(&a.out.join("partition.json"), &part)?;
        ds = balanced;
    }
    let j = ds.n_groups();
    let gibbs = sampler(GibbsConfig::training(a.seed, j), &a.sampler);
    if matches!(a.model, Model::Sac | Model::Bsac) {
        check_separation(&ds.outcomes()?)?;
    }
    if let Some(fam) = family(a.model) {
        let fitted = fit_baseline(ds.panels(), j, fam, a.seed)?;
        write_json(&a.out.join("baseline.json"), &fitted)?;
        let mut rows = Vec::new();
        for panel in ds.panels() {
            let path = baseline_path(panel, &fitted.params)?;
            rows.extend(
                path.iter()
                    .enumerate()
                    .map(|(t, &p)| row(panel, t + 1, p, None, None)),
            );
        }
        write_aggregates(&a.out.join("aggregates.csv"), &rows)?;
        println!(
            "{}: alpha {} objective {} on {} questions",
            model_name(a.model),
            fmt_f64(fitted.params.alpha()),
            fmt_f64(fitted.objective),
            ds.len()
        );
        return Ok(());
    }
    let (chain, betas, trained, result, report) = match a.model {
        Model::Sac => {
            let rule = scoring_rule(a.rule);
            let outcomes = ds.outcomes()?;
            let chain = sample_posterior(&ds, &gibbs)?;
            let mean = posterior_mean(&chain)?;
            let (est, result, report) = calibrate_draw(&mean, &outcomes, rule)?;
            let trained = calibrate_chain(&chain, &outcomes, rule)?;
            let betas = vec![est.beta; chain.len()];
            (chain, betas, trained, result, Some(report))
        }
        Model::Sdlm => {
            let chain = sample_posterior(
                &ds,
                &GibbsConfig {
                    pin_all_bias: true,
                    ..gibbs
                },
            )?;
            let result = apply_beta(&posterior_mean(&chain)?, 1.0)?;
            let betas = vec![1.0; chain.len()];
            (
                chain,
                betas,
                vec![TrainedDraw {
                    bias: vec![1.0; j],
                    beta: 1.0,
                }],
                result,
                None,
            )
        }
        Model::Bsac => {
            let bsac = bsac_sample(&ds, &BsacConfig::new(gibbs))?;
            println!(
                "acceptance: states {} scale {}",
                fmt_f64(bsac.state_acceptance),
                fmt_f64(bsac.beta_acceptance)
            );
            let trained = bsac.trained();
            let result = calibrated_mean(&bsac.draws, &bsac.betas)?;
            (bsac.draws, bsac.betas, trained, result, None)
        }
        Model::Ewma | Model::Ewmla | Model::Ewmba => unreachable!("baselines return above"),
    };
    write_chain(&a.out.join("chain.jsonl"), &chain)?;
    write_json(&a.out.join("trained.json"), &trained)?;
    write_aggregates(
        &a.out.join("aggregates.csv"),
        &chain_rows(&ds, &chain, &betas),
    )?;
    write_fit_record(&a.out, a.model, report.as_ref(), &result)?;
    let bias: Vec<String> = result.bias.iter().map(|b| format!("{b:.4}")).collect();
    println!(
        "{}: {} draws, beta {:.4}, bias [{}]",
        model_name(a.model),
        chain.len(),
        result.beta,
        bias.join(", ")
    );
    Ok(())
}

pub fn aggregate(a: &AggregateArgs) -> Result<()> {
    if a.first_day == 0 {
        return Err(Error::Parameter("--first-day is 1-based".into()));
    }
    let ds = load(&a.data)?;
    let j = ds.n_groups();
    let mut rows = Vec::new();
    if let Some(fam) = family(a.method) {
        let params = match &a.fit {
            Some(dir) => {
                let fitted: FittedBaseline = read_fit_file(dir, "baseline.json", a.method)?;
                if fitted.params.family() != fam {
                    return Err(Error::InvalidInput(format!(
                        "{} holds a {:?} fit, not {}",
                        dir.display(),
                        fitted.params.family(),
                        model_name(a.method)
                    )));
                }
                fitted.params
            }
            None => {
                let mut p = BaselineParams::default_for(fam, j);
                if let Some(alpha) = a.alpha {
                    match &mut p {
                        BaselineParams::Ewma(q) => q.alpha = alpha,
                        BaselineParams::Ewmla(q) => q.alpha = alpha,
                        BaselineParams::Ewmba(q) => q.alpha = alpha,
                    }
                }
                p
            }
        };
        for panel in ds.panels() {
            let path = baseline_path(panel, &params)?;
            rows.extend(
                (a.first_day..=panel.horizon()).map(|t| row(panel, t, path[t - 1], None, None)),
            );
        }
    } else {
        let seed = a
            .seed
            .ok_or_else(|| Error::InvalidInput("--seed is required for model methods".into()))?;
        let trained: Vec<TrainedDraw> = match &a.fit {
            Some(dir) => read_fit_file(dir, "trained.json", a.method)?,
            None if a.method == Model::Sdlm => vec![TrainedDraw { bias: vec![1.0; j], beta: 1.0 }],
            None => {
                return Err(Error::InvalidInput(format!(
                    "{0} needs a trained chain; run `fit --model {0}` and pass its directory with --fit",
                    model_name(a.method)
                )))
            }
        };
        if let Some(d) = trained.iter().find(|d| d.bias.len() != j) {
            return Err(Error::InvalidInput(format!(
                "trained chain has {} groups but the data has {j}",
                d.bias.len()
            )));
        }
        let base = GibbsConfig {
            pin_all_bias: a.method == Model::Sdlm,
            ..sampler(GibbsConfig::aggregation(seed, j), &a.sampler)
        };
        for (k, panel) in ds.panels().iter().enumerate() {
            let cfg = GibbsConfig {
                seed: rng::derive_seed(seed, &[k as u64]),
                ..base.clone()
            };
            let days = a.first_day..=panel.horizon();
            if a.sequential {
                let vals = sac_sequential(panel, &trained, &cfg, a.first_day)?;
                rows.extend(
                    days.zip(vals)
                        .map(|(t, (p, lo, hi))| row(panel, t, p, Some(lo), Some(hi))),
                );
            } else if panel.is_empty() {
                rows.extend(days.map(|t| row(panel, t, NO_INFORMATION, None, None)));
            } else {
                let agg = sac_out_of_sample(panel, &trained, &cfg)?;
                rows.extend(days.map(|t| {
                    row(
                        panel,
                        t,
                        agg.mean_prob[t - 1],
                        Some(agg.lo95[t - 1]),
                        Some(agg.hi95[t - 1]),
                    )
                }));
            }
        }
    }
    write_aggregates(&a.out, &rows)?;
    println!("wrote {} rows to {}", rows.len(), a.out.display());
    Ok(())
}

/// Two blocks (by day, by problem) of `mean (sd)` per length class.
fn summary_text(table: &[SummaryRow], methods: &[CvMethod]) -> String {
    let mut text = String::new();
    for mode in [SummaryMode::ByDay, SummaryMode::ByProblem] {
        let _ = write!(text, "{:<10}", mode.name());
        for class in LengthClass::ALL {
            let _ = write!(text, "{:>20}", class.name());
        }
        text.push('\n');
        for &m in methods {
            let _ = write!(text, "{:<10}", m.name());
            for class in LengthClass::ALL {
                let cell = table
                    .iter()
                    .find(|r| r.method == m && r.mode == mode && r.class == class)
                    .map(|r| format!("{:.4} ({:.4})", r.mean, r.se))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(text, "{cell:>20}");
            }
            text.push('\n');
        }
        text.push('\n');
    }
    text
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut ds = load(&a.data)?;
    if a.balance {
        ds = balance_dataset(&ds)?.0;
    }
    let methods: Vec<CvMethod> = if a.methods.is_empty() {
        CvMethod::ALL.to_vec()
    } else {
        a.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?
    };
    let j = ds.n_groups();
    let base = CvConfig::new(a.seed, j);
    let mut aggregation = sampler(base.aggregation, &a.sampler);
    aggregation.iterations = a.agg_iterations.unwrap_or(aggregation.iterations);
    aggregation.burn_in = a.agg_burn_in.unwrap_or(aggregation.burn_in);
    aggregation.thin = a.agg_thin.unwrap_or(aggregation.thin);
    let config = CvConfig {
        training: sampler(base.training, &a.sampler),
        aggregation,
        first_day: a.first_day,
        seed: a.seed,
    };
    let plan = make_folds(&ds.horizons(), a.folds, a.seed)?;
    let report = run_cv(&ds, &methods, &plan, &config)?;
    for f in &report.failures {
        eprintln!(
            "warning: fold {} {}: {}",
            f.fold + 1,
            f.method.name(),
            f.message
        );
    }
    mkdir(&a.out)?;
    write_scores(&a.out.join("scores.csv"), &report.scores)?;
    let table = summary_table(&report, &methods);
    write_summary(&a.out.join("summary.csv"), &table)?;

    let shown = match &a.reliability_method {
        Some(m) => m.parse()?,
        None if methods.contains(&CvMethod::SacLog) => CvMethod::SacLog,
        None => methods[0],
    };
    let outcome: std::collections::HashMap<&str, bool> = ds
        .panels()
        .iter()
        .filter_map(|p| p.outcome().map(|z| (p.question_id(), z)))
        .collect();
    let (probs, zs): (Vec<f64>, Vec<bool>) = report
        .scores
        .iter()
        .filter(|r| r.method == shown)
        .filter_map(|r| outcome.get(r.question_id.as_str()).map(|&z| (r.prob, z)))
        .unzip();
    if probs.is_empty() {
        eprintln!(
            "warning: no scores for {}; reliability.csv not written",
            shown.name()
        );
    } else {
        let bins = reliability(&probs, &zs, a.bins, a.boot, a.level, a.seed)?;
        write_reliability(&a.out.join("reliability.csv"), &bins)?;
    }

    let text = summary_text(&table, &methods);
    write_text(&a.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn balance(a: &BalanceArgs) -> Result<()> {
    let ds = load(&a.data)?;
    let (balanced, part) = balance_dataset(&ds)?;
    mkdir(&a.out)?;
    write_forecasts(&a.out.join("forecasts.csv"), &balanced)?;
    write_outcomes(&a.out.join("outcomes.csv"), balanced.panels())?;
    write_json(&a.out.join("partition.json"), &part)?;
    let (d0, d1) = part.day_totals(&ds.horizons());
    let flipped = part.flipped.iter().filter(|f| **f).count();
    println!(
        "{} questions: {} with outcome 0 ({d0} days), {} with outcome 1 ({d1} days), {flipped} mirrored",
        ds.len(),
        part.s0.len(),
        part.s1.len()
    );
    Ok(())
}

pub fn report_calibration(a: &ReportArgs) -> Result<()> {
    let record: serde_json::Value = read_fit_file(&a.fit, "calibration.json", Model::Sac)?;
    let field = |name: &str| record.get(name).cloned().unwrap_or(serde_json::Value::Null);
    let bad = |e: serde_json::Error| {
        Error::Parse(format!("{}: {e}", a.fit.join("calibration.json").display()))
    };
    let result: CalibrationResult = serde_json::from_value(field("result")).map_err(bad)?;
    let report: Option<CalibrationReport> = serde_json::from_value(field("report")).map_err(bad)?;
    let out = a.out.clone().unwrap_or_else(|| a.fit.clone());
    mkdir(&out)?;

    let model = field("model");
    println!("model: {}", model.as_str().unwrap_or("unknown"));
    println!("beta: {}", fmt_f64(result.beta));
    if let Some(r) = &report {
        println!(
            "rule: {}  objective: {}  negated-scale objective: {}",
            r.rule.name(),
            fmt_f64(r.objective),
            fmt_f64(r.objective_negative)
        );
    }

    let trained: Vec<TrainedDraw> = read_fit_file(&a.fit, "trained.json", Model::Sac)?;
    let draws: Vec<Vec<f64>> = trained
        .iter()
        .map(|d| d.bias.iter().map(|b| b * d.beta).collect())
        .collect();
    let j = result.bias.len();
    let ordering = bias_ordering(&draws, &OrderingEvent::standard(j))?;
    let events: Vec<Vec<String>> = ordering
        .events
        .iter()
        .map(|e| vec![e.event.clone(), fmt_f64(e.probability)])
        .collect();
    write_csv(
        &out.join("bias_ordering.csv"),
        &["event", "probability"],
        &events,
    )?;
    let quantiles: Vec<Vec<String>> = ordering
        .quantiles
        .iter()
        .map(|q| {
            vec![
                q.group.to_string(),
                fmt_f64(q.q025),
                fmt_f64(q.q25),
                fmt_f64(q.q50),
                fmt_f64(q.q75),
                fmt_f64(q.q975),
            ]
        })
        .collect();
    write_csv(
        &out.join("bias_quantiles.csv"),
        &["group", "q025", "q25", "q50", "q75", "q975"],
        &quantiles,
    )?;
    for e in &ordering.events {
        println!("P({}) = {:.3}", e.event, e.probability);
    }

    if let (Some(forecasts), Some(outcomes)) = (&a.forecasts, &a.outcomes) {
        let data = DataArgs {
            forecasts: forecasts.clone(),
            outcomes: outcomes.clone(),
            groups: Some(a.groups.unwrap_or(j)),
            censor_lo: 0.01,
            censor_hi: 0.99,
        };
        let ds = load(&data)?;
        let rows: Vec<Vec<String>> = question_difficulty(&result, &ds)?
            .into_iter()
            .map(|d| {
                vec![
                    d.question_id,
                    fmt_f64(d.disagreement),
                    fmt_f64(d.volatility),
                    fmt_f64(d.drift),
                ]
            })
            .collect();
        write_csv(
            &out.join("difficulty.csv"),
            &["question_id", "disagreement", "volatility", "drift"],
            &rows,
        )?;
        println!("difficulty for {} questions written", rows.len());
    }
    Ok(())
}
