use crowdbelief::baselines::{
    baseline_objective, baseline_path, fit_baseline, BaselineFamily, BaselineParams, EwmbaParams,
};
use crowdbelief::domain::{Probability, QuestionPanel};
use crowdbelief::rng;
use crowdbelief::synth::{generate_question, SynthConfig};
use rand::Rng;

/// Group 0 reports innovations that an alpha = 0.7 smoother turns back into
/// a calibrated martingale; the other groups report noise.
fn smoothed_martingale_panels(seed: u64, k: usize, horizon: usize) -> Vec<QuestionPanel> {
    let cfg = SynthConfig {
        horizon,
        experts_per_group: 1,
        ..SynthConfig::new(0.0, 1.0, 1, seed)
    };
    (0..k)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let (_, truth) = generate_question(&cfg, &format!("q{i}"), &mut r).unwrap();
            let q = truth.probabilities();
            let mut p = QuestionPanel::new(format!("q{i}"), q.len(), Some(truth.outcome)).unwrap();
            for t in 0..q.len() {
                let innov = if t == 0 {
                    q[0]
                } else {
                    (q[t] - 0.3 * q[t - 1]) / 0.7
                };
                p.push(
                    t + 1,
                    "lead",
                    Probability::new(innov.clamp(0.001, 0.999)).unwrap(),
                    0,
                )
                .unwrap();
                for g in 1..5 {
                    let noise = Probability::new(r.random_range(0.05..0.95)).unwrap();
                    p.push(t + 1, &format!("n{g}"), noise, g).unwrap();
                }
            }
            p
        })
        .collect()
}

#[test]
fn smoothing_rate_is_recovered() {
    let mut alphas = Vec::new();
    let mut lead = Vec::new();
    for rep in 0..20 {
        let panels = smoothed_martingale_panels(900 + rep, 60, 30);
        let fit = fit_baseline(&panels, 5, BaselineFamily::Ewma, rep).unwrap();
        let BaselineParams::Ewma(p) = &fit.params else {
            panic!("wrong family")
        };
        alphas.push(p.alpha);
        lead.push(p.weights[0]);
    }
    alphas.sort_by(f64::total_cmp);
    lead.sort_by(f64::total_cmp);
    let med = 0.5 * (alphas[9] + alphas[10]);
    assert!(
        (med - 0.7).abs() < 0.1,
        "median alpha {med}, all {alphas:?}"
    );
    assert!(lead[10] > 0.8, "median lead weight {}", lead[10]);
}

#[test]
fn fit_never_worse_than_defaults() {
    let panels = smoothed_martingale_panels(7, 30, 20);
    for family in [
        BaselineFamily::Ewma,
        BaselineFamily::Ewmla,
        BaselineFamily::Ewmba,
    ] {
        let fit = fit_baseline(&panels, 5, family, 11).unwrap();
        let default =
            baseline_objective(&panels, 5, &BaselineParams::default_for(family, 5)).unwrap();
        assert!(
            fit.objective <= default + 1e-9,
            "{family:?}: {} > {default}",
            fit.objective
        );
        let again = baseline_objective(&panels, 5, &fit.params).unwrap();
        assert!((again - fit.objective).abs() < 1e-8 * (1.0 + again));
    }
}

#[test]
fn beta_transform_mirrors_with_swapped_shapes() {
    let panels = smoothed_martingale_panels(3, 12, 15);
    let params = EwmbaParams {
        alpha: 0.6,
        nu: 2.5,
        shape2: 0.7,
        weights: vec![0.4, 0.1, 0.2, 0.2, 0.1],
    };
    let swapped = EwmbaParams {
        nu: params.shape2,
        shape2: params.nu,
        ..params.clone()
    };
    for p in &panels {
        let a = baseline_path(p, &BaselineParams::Ewmba(params.clone())).unwrap();
        let b = baseline_path(&p.mirrored(), &BaselineParams::Ewmba(swapped.clone())).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x + y - 1.0).abs() < 1e-12, "{x} + {y}");
        }
    }
    let mirrored: Vec<QuestionPanel> = panels.iter().map(QuestionPanel::mirrored).collect();
    let o1 = baseline_objective(&panels, 5, &BaselineParams::Ewmba(params)).unwrap();
    let o2 = baseline_objective(&mirrored, 5, &BaselineParams::Ewmba(swapped)).unwrap();
    assert!((o1 - o2).abs() < 1e-9);

    let f1 = fit_baseline(&panels, 5, BaselineFamily::Ewmba, 1).unwrap();
    let f2 = fit_baseline(&mirrored, 5, BaselineFamily::Ewmba, 1).unwrap();
    let rel = (f1.objective - f2.objective).abs() / f1.objective;
    assert!(rel < 1e-3, "{} vs {}", f1.objective, f2.objective);
}

#[test]
fn mismatched_parameter_length_is_rejected() {
    let panels = smoothed_martingale_panels(1, 2, 5);
    assert!(baseline_objective(
        &panels,
        4,
        &BaselineParams::default_for(BaselineFamily::Ewma, 5)
    )
    .is_err());
}
