use tagwatch::dataset::{
    apply_scaler, fit_scaler, synth_generate_split, SynthConfig, WindowDataset, WindowSpec,
};
use tagwatch::detector::ErrorConfig;
use tagwatch::ga::{evolve, ArchTemplate, EvolutionConfig};
use tagwatch::metrics::{score, DetectionSet, GroundTruth, NabProfile};
use tagwatch::nn::{
    read_model, write_model, Activation, LayerConfig, OptimizerConfig, TrainConfig,
};
use tagwatch::pipeline::{attack_table, fit_detector, DetectorBundle};

fn small() -> SynthConfig {
    let mut s = SynthConfig::demo();
    s.length = 2000;
    s.train_length = 6000;
    s.injections.retain(|inj| inj.end <= 2000);
    s
}

fn train_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 32,
        seed: 3,
        optimizer: OptimizerConfig::adam(1e-3),
    }
}

#[test]
fn detector_finds_injected_attacks() {
    let (train_f, test_f) = synth_generate_split(&small(), 11).unwrap();
    let spec = WindowSpec::new(50, 10, 4).unwrap();
    let layers = [LayerConfig::dense(32, Activation::Relu)];
    let (bundle, losses) = fit_detector(
        &train_f,
        spec,
        &layers,
        &train_cfg(5),
        ErrorConfig::recommended(4),
    )
    .unwrap();
    assert!(losses.last() < losses.first());

    let analysis = bundle.analyze(&test_f, 3).unwrap();
    assert_eq!(analysis.scored, spec.scored_range(test_f.len()));
    let rows = attack_table(&test_f, &analysis);
    assert_eq!(rows.len(), test_f.attack_intervals().len());
    let detected = rows.iter().filter(|r| r.delay_seconds.is_some()).count();
    assert!(detected * 2 >= rows.len(), "{rows:?}");

    let truth = GroundTruth::from_frame(&test_f).unwrap();
    let report = score(
        &truth,
        &analysis.detections(&truth).unwrap(),
        &analysis.flags,
        &NabProfile::default(),
    )
    .unwrap();
    assert!(report.nab > 0.0, "{}", report.to_text());
}

#[test]
fn bundle_survives_disk() {
    let (train_f, test_f) = synth_generate_split(&small(), 5).unwrap();
    let spec = WindowSpec::new(20, 5, 2).unwrap();
    let layers = [LayerConfig::dense(8, Activation::Tanh)];
    let (bundle, _) =
        fit_detector(&train_f, spec, &layers, &train_cfg(1), ErrorConfig::plain()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bundle.save(dir.path()).unwrap();
    let back = DetectorBundle::load(dir.path()).unwrap();
    assert_eq!(back.calibration, bundle.calibration);
    let (a, b) = (
        bundle.analyze(&test_f, 2).unwrap(),
        back.analyze(&test_f, 2).unwrap(),
    );
    assert_eq!(a.series, b.series);
    assert_eq!(a.events, b.events);

    let mut bytes = Vec::new();
    write_model(&bundle.network, &mut bytes).unwrap();
    let net = read_model(&mut bytes.as_slice()).unwrap();
    assert_eq!(net.parameters(), bundle.network.parameters());
}

#[test]
fn perfect_onsets_score_hundred() {
    let (_, test_f) = synth_generate_split(&small(), 1).unwrap();
    let truth = GroundTruth::from_frame(&test_f).unwrap();
    let onsets = truth.windows().iter().map(|w| w.0).collect();
    let det = DetectionSet::new(onsets, truth.len()).unwrap();
    let report = score(&truth, &det, &truth.flags(), &NabProfile::default()).unwrap();
    assert_eq!(report.nab, 100.0);
    assert_eq!(report.f1, 1.0);
    let empty = score(
        &truth,
        &DetectionSet::empty(),
        &vec![false; truth.len()],
        &NabProfile::default(),
    )
    .unwrap();
    assert_eq!((empty.nab, empty.f1), (0.0, 0.0));
}

#[test]
fn search_is_seed_deterministic() {
    let template: ArchTemplate = toml::from_str(
        r#"
        max_layers = 2
        [[layers]]
        kinds = ["dense"]
        activations = ["relu", "tanh"]
        units = { min = 2, max = 12 }
        "#,
    )
    .unwrap();
    let (train_f, _) = synth_generate_split(&small(), 2).unwrap();
    let spec = WindowSpec::new(10, 0, 2).unwrap();
    let scaled = apply_scaler(&train_f, &fit_scaler(&train_f).unwrap()).unwrap();
    let data = WindowDataset::from_frame(&scaled, &spec)
        .unwrap()
        .subset(0, 400);
    let mut cfg = EvolutionConfig::new(4, 9);
    cfg.population = 4;
    cfg.death_age = 1;
    cfg.epochs = 1;
    let a = evolve(&template, &data, &cfg).unwrap();
    let b = evolve(&template, &data, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.best, b.best);
    assert!(a.evaluated.len() > 4);
    assert!(a.evaluated.iter().all(|i| i.genome.satisfies(&template)));
    assert!(a
        .history
        .windows(2)
        .all(|w| w[1].best_fitness <= w[0].best_fitness));
}
