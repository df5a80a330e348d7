mod common;

use common::{mixed_horizon_dataset, paper_shape_horizons};
use crowdbelief::baselines::{baseline_path, BaselineParams, EwmaParams, EwmbaParams, EwmlaParams};
use crowdbelief::calibrate::{fit_sac, ScoringRule};
use crowdbelief::domain::{Dataset, QuestionPanel};
use crowdbelief::eval::{
    make_folds, question_difficulty, run_cv, CvConfig, CvMethod, EvaluationReport, FoldPlan,
};
use crowdbelief::gibbs::GibbsConfig;
use crowdbelief::rng;
use crowdbelief::synth::{generate_question, SynthConfig};

fn light_config(seed: u64) -> CvConfig {
    let base = CvConfig::new(seed, 5);
    CvConfig {
        training: base.training.with_run(150, 50, 2),
        aggregation: base.aggregation.with_run(40, 20, 1),
        ..base
    }
}

const SHORT: [usize; 8] = [6, 9, 7, 12, 8, 10, 11, 5];

fn small_dataset(seed: u64) -> Dataset {
    mixed_horizon_dataset(seed, &SHORT, 1, 1.0, 1.0)
}

fn probs_for(report: &EvaluationReport, method: CvMethod, id: &str) -> Vec<(usize, f64)> {
    report
        .scores
        .iter()
        .filter(|r| r.method == method && r.question_id == id)
        .map(|r| (r.day, r.prob))
        .collect()
}

#[test]
fn paper_shape_folds_respect_greedy_bound() {
    let h = paper_shape_horizons();
    assert_eq!(h.iter().sum::<usize>(), 17_475);
    let max = *h.iter().max().unwrap();
    for seed in 0..5 {
        let plan = make_folds(&h, 10, seed).unwrap();
        let counts: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        assert!(
            counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1,
            "{counts:?}"
        );
        let totals = plan.day_totals(&h);
        let spread = totals.iter().max().unwrap() - totals.iter().min().unwrap();
        assert!(spread <= max, "{totals:?}");
        let mut all: Vec<usize> = plan.folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..166).collect::<Vec<_>>());
    }
}

#[test]
fn equal_lengths_give_one_question_per_fold() {
    let plan = make_folds(&[30; 10], 10, 3).unwrap();
    assert!(plan.folds.iter().all(|f| f.len() == 1));
}

#[test]
fn test_outcomes_do_not_reach_aggregates() {
    let ds = small_dataset(5);
    let plan = make_folds(&ds.horizons(), 4, 1).unwrap();
    let methods = [
        CvMethod::Sdlm,
        CvMethod::SacLog,
        CvMethod::BsacLog,
        CvMethod::Ewma,
    ];
    let cfg = light_config(9);
    let base = run_cv(&ds, &methods, &plan, &cfg).unwrap();
    assert!(base.failures.is_empty(), "{:?}", base.failures);

    let fold = &plan.folds[0];
    let poisoned: Vec<QuestionPanel> = ds
        .panels()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut p = p.clone();
            if fold.contains(&k) {
                p.set_outcome(p.outcome().map(|z| !z));
            }
            p
        })
        .collect();
    let poisoned = Dataset::new(poisoned, 5).unwrap();
    let other = run_cv(
        &poisoned,
        &methods,
        &FoldPlan {
            n_folds: 1,
            folds: vec![(0..ds.len()).collect()],
        },
        &cfg,
    );
    // A single fold has no training data; the error must surface per fold.
    assert!(other.unwrap().failures.len() >= 3);

    let flipped = run_cv(&poisoned, &methods, &plan, &cfg).unwrap();
    for &k in fold {
        let id = ds.panel(k).question_id();
        for m in methods {
            assert_eq!(
                probs_for(&base, m, id),
                probs_for(&flipped, m, id),
                "{} {id}",
                m.name()
            );
        }
    }
}

#[test]
fn aggregates_depend_only_on_past_days() {
    let ds = small_dataset(6);
    let plan = make_folds(&ds.horizons(), 4, 2).unwrap();
    let methods = [
        CvMethod::Sdlm,
        CvMethod::SacBrier,
        CvMethod::Ewmla,
        CvMethod::Ewmba,
    ];
    let cfg = light_config(4);
    let full = run_cv(&ds, &methods, &plan, &cfg).unwrap();
    let cut = 4;
    let fold = &plan.folds[1];
    let truncated: Vec<QuestionPanel> = ds
        .panels()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if fold.contains(&k) {
                p.truncated(cut).unwrap()
            } else {
                p.clone()
            }
        })
        .collect();
    let short = run_cv(&Dataset::new(truncated, 5).unwrap(), &methods, &plan, &cfg).unwrap();
    for &k in fold {
        let id = ds.panel(k).question_id();
        for m in methods {
            let a = probs_for(&full, m, id);
            let b = probs_for(&short, m, id);
            assert_eq!(b.len(), cut - 1);
            assert_eq!(&a[..cut - 1], &b[..], "{} {id}", m.name());
        }
    }
}

const MODEL_METHODS: [CvMethod; 5] = [
    CvMethod::Constant,
    CvMethod::Sdlm,
    CvMethod::SacBrier,
    CvMethod::SacLog,
    CvMethod::BsacLog,
];

#[test]
fn model_aggregators_are_mirror_invariant_end_to_end() {
    let ds = small_dataset(7);
    let plan = make_folds(&ds.horizons(), 4, 3).unwrap();
    let cfg = light_config(12);
    let a = run_cv(&ds, &MODEL_METHODS, &plan, &cfg).unwrap();
    let b = run_cv(&ds.mirrored(), &MODEL_METHODS, &plan, &cfg).unwrap();
    assert!(a.failures.is_empty() && b.failures.is_empty());
    assert_eq!(a.scores.len(), b.scores.len());
    for (x, y) in a.scores.iter().zip(&b.scores) {
        assert_eq!(
            (x.method, &x.question_id, x.day),
            (y.method, &y.question_id, y.day)
        );
        assert!(
            (x.brier - y.brier).abs() < 1e-12,
            "{} {} day {}: {} vs {}",
            x.method.name(),
            x.question_id,
            x.day,
            x.brier,
            y.brier
        );
    }
}

#[test]
fn noisier_questions_read_as_more_disagreement() {
    let reps = 20;
    let mut larger = 0;
    let mut pairs = 0;
    for rep in 0..reps {
        let mut panels = Vec::new();
        for k in 0..3u64 {
            for (tag, s2) in [("a", 1.0), ("b", 2.0)] {
                let cfg = SynthConfig {
                    horizon: 30,
                    experts_per_group: 2,
                    ..SynthConfig::new(s2, 1.0, 1, 0)
                };
                // Same stream: identical walk and innovations, noise scaled by sqrt(2).
                let (p, _) =
                    generate_question(&cfg, &format!("q{k}{tag}"), &mut rng::stream(700 + rep, k))
                        .unwrap();
                panels.push(p);
            }
        }
        let ds = Dataset::new(panels, 5).unwrap();
        if ds
            .outcomes()
            .unwrap()
            .iter()
            .all(|&z| z == ds.outcomes().unwrap()[0])
        {
            continue;
        }
        let fit = fit_sac(
            &ds,
            &GibbsConfig::training(rep, 5).with_run(300, 100, 2),
            ScoringRule::Logarithmic,
        )
        .unwrap();
        let d = question_difficulty(&fit.result, &ds).unwrap();
        for k in 0..3 {
            pairs += 1;
            if d[2 * k + 1].disagreement > d[2 * k].disagreement {
                larger += 1;
            }
        }
    }
    assert!(pairs >= 30);
    assert!(larger as f64 >= 0.9 * pairs as f64, "{larger} of {pairs}");
}

#[test]
fn baseline_aggregators_are_mirror_invariant() {
    let ds = small_dataset(8);
    let w = vec![0.1, 0.3, 0.2, 0.25, 0.15];
    let pairs = [
        (
            BaselineParams::Ewma(EwmaParams {
                alpha: 0.35,
                weights: w.clone(),
            }),
            BaselineParams::Ewma(EwmaParams {
                alpha: 0.35,
                weights: w.clone(),
            }),
        ),
        (
            BaselineParams::Ewmla(EwmlaParams {
                alpha: 0.8,
                bias: vec![0.4, 1.7, 0.9, 1.2, 0.6],
            }),
            BaselineParams::Ewmla(EwmlaParams {
                alpha: 0.8,
                bias: vec![0.4, 1.7, 0.9, 1.2, 0.6],
            }),
        ),
        (
            BaselineParams::Ewmba(EwmbaParams {
                alpha: 0.5,
                nu: 3.0,
                shape2: 1.5,
                weights: w.clone(),
            }),
            BaselineParams::Ewmba(EwmbaParams {
                alpha: 0.5,
                nu: 1.5,
                shape2: 3.0,
                weights: w,
            }),
        ),
    ];
    for panel in ds.panels() {
        let z = if panel.outcome().unwrap() { 1.0 } else { 0.0 };
        let m = panel.mirrored();
        for (p, q) in &pairs {
            let a = baseline_path(panel, p).unwrap();
            let b = baseline_path(&m, q).unwrap();
            for (x, y) in a.iter().zip(&b) {
                let (bx, by) = ((x - z) * (x - z), (y - (1.0 - z)) * (y - (1.0 - z)));
                assert!((bx - by).abs() < 1e-12, "{:?}: {bx} vs {by}", p.family());
            }
        }
    }
}
