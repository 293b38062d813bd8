use lowshot::dataset::{generate_synthetic, SyntheticSpec};
use lowshot::eval::evaluate;
use lowshot::experiment::ExperimentConfig;
use lowshot::trainer::{init_phase1, run_comparison_suite, train, Method, TrainConfig};

#[test]
fn default_spec_suite() {
    let spec = SyntheticSpec::default();
    let (train_set, test) = generate_synthetic(&spec).unwrap();
    let config = ExperimentConfig::default().suite_config(spec.d);
    let results = run_comparison_suite(&train_set, &config).unwrap();

    let methods: Vec<Method> = results.iter().map(|r| r.method).collect();
    assert_eq!(methods, Method::ALL);

    for r in &results {
        assert_eq!(r.trace.epochs.len(), config.phase2.epochs);
        assert!(
            r.trace.epochs.iter().all(|e| e.loss.is_finite()),
            "{} diverged",
            r.method
        );
    }

    // Fixed-feature variants keep the plain phase-1 extractor bit for bit.
    let p1 = TrainConfig {
        loss: lowshot::losses::LossConfig::default(),
        ..config.phase1.clone()
    };
    let init = init_phase1(&train_set, &config.extractor_dims, config.init_seed).unwrap();
    let (plain, _) = train(init, &train_set, &p1).unwrap();
    let by = |m: Method| results.iter().find(|r| r.method == m).unwrap();
    assert_eq!(by(Method::FixedFeature).params.extractor, plain.extractor);
    assert_eq!(by(Method::UpOnly).params.extractor, plain.extractor);
    assert_ne!(by(Method::UpdateFeature).params.extractor, plain.extractor);
    assert_ne!(by(Method::CcsOnly).params.extractor, plain.extractor);

    let cov: Vec<f64> = results
        .iter()
        .map(|r| evaluate(&r.params, &test, &[0.95], None).unwrap().scores.coverage_at["0.95"])
        .collect();
    let of = |m: Method| cov[Method::ALL.iter().position(|&x| x == m).unwrap()];
    assert!(of(Method::UpOnly) > of(Method::FixedFeature), "{cov:?}");
    let best = cov.iter().copied().fold(f64::MIN, f64::max);
    assert_eq!(of(Method::CcsPlusUp), best, "{cov:?}");
}

#[test]
fn suite_needs_both_splits() {
    let spec = SyntheticSpec {
        d: 3,
        k_base: 3,
        k_lowshot: 0,
        train_per_base: 4,
        test_per_class: 1,
        ..SyntheticSpec::default()
    };
    let (train_set, _) = generate_synthetic(&spec).unwrap();
    let config = ExperimentConfig::default().suite_config(3);
    assert!(run_comparison_suite(&train_set, &config).is_err());
}
