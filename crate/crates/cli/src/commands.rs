use std::fs;
use std::path::{Path, PathBuf};

use tagwatch::dataset::{apply_scaler, fit_scaler, synth_generate_split, write_csv, WindowDataset};
use tagwatch::ga::{evolve_with, SearchState};
use tagwatch::metrics::{score, DetectionSet, GroundTruth, ScoreReport};
use tagwatch::nn::{load_model, train, TrainConfig};
use tagwatch::pipeline::{attack_rows, fit_detector, DetectorBundle, CALIBRATION_FILE, MODEL_FILE};
use tagwatch::{derive_seed, Error};

use crate::config::{require_file, RunConfig};
use crate::data::{check_test, check_train, load_test, load_train, read_attacks, write_attacks};
use crate::manifest::ManifestBuilder;
use crate::report::{
    read_events, read_flags, render_svg, write_attack_table, write_events, write_history,
    write_losses, write_series, EVENTS_FILE, SERIES_FILE, SVG_FILE,
};
use crate::CliError;

fn mkdir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

pub fn generate(cfg: &RunConfig, quiet: bool) -> Result<PathBuf, CliError> {
    let synth = cfg.synth_config();
    synth
        .validate()
        .map_err(|e| CliError::Config(format!("dataset.synthetic: {e}")))?;
    let (train_f, test_f) = synth_generate_split(&synth, cfg.seed)
        .map_err(|e| CliError::Config(format!("dataset.synthetic: {e}")))?;
    let dir = cfg.data_dir();
    mkdir(&dir)?;
    let mut m = ManifestBuilder::new("generate");
    let (tr, te, at) = (
        dir.join("train.csv"),
        dir.join("test.csv"),
        dir.join("attacks.csv"),
    );
    write_csv(&train_f, &tr)?;
    write_csv(&test_f, &te)?;
    write_attacks(&test_f, &at)?;
    for p in [&tr, &te, &at] {
        m.output(p);
    }
    m.finish(cfg, &dir)?;
    say(
        quiet,
        format!(
            "wrote {} ({} rows) and {} ({} rows, {} attacks)",
            tr.display(),
            train_f.len(),
            te.display(),
            test_f.len(),
            test_f.attack_intervals().len()
        ),
    );
    Ok(dir)
}

pub fn train_cmd(cfg: &RunConfig, quiet: bool) -> Result<PathBuf, CliError> {
    check_train(cfg)?;
    let layers = cfg.hidden_layers();
    if let Some(l) = layers.iter().find(|l| !l.kind.is_implemented()) {
        return Err(CliError::Config(format!(
            "model.layers: {:?} layers are not implemented",
            l.kind
        )));
    }
    let spec = cfg.window_spec()?;
    let train_f = load_train(cfg)?;
    let (bundle, losses) = fit_detector(
        &train_f,
        spec,
        &layers,
        &cfg.train_config(),
        cfg.error_config(),
    )?;
    let dir = cfg.bundle_dir();
    bundle.save(&dir)?;
    let loss_path = dir.join("loss.csv");
    write_losses(&loss_path, &losses)?;
    let mut m = ManifestBuilder::new("train");
    m.input(cfg.train_path());
    for f in [MODEL_FILE, CALIBRATION_FILE] {
        m.output(dir.join(f));
    }
    m.output(&loss_path);
    m.finish(cfg, &dir)?;
    say(
        quiet,
        format!(
            "trained {} parameters, final loss {:.6}, threshold {:.6e}; bundle in {}",
            bundle.network.parameter_count(),
            losses.last().copied().unwrap_or(f64::NAN),
            bundle.calibration.threshold,
            dir.display()
        ),
    );
    Ok(dir)
}

pub fn search_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("search")
}

pub fn search_cmd(cfg: &RunConfig, resume: bool, quiet: bool) -> Result<PathBuf, CliError> {
    let template = cfg.template()?;
    check_train(cfg)?;
    let dir = search_dir(cfg);
    let state_path = dir.join("state.json");
    let resume_state = if resume {
        require_file("search state", &state_path)?;
        let text = fs::read_to_string(&state_path).map_err(|e| CliError::io(&state_path, e))?;
        Some(
            serde_json::from_str::<SearchState>(&text)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", state_path.display())))?,
        )
    } else {
        None
    };
    let spec = cfg.window_spec()?;
    let evo = cfg.evolution_config();
    let train_f = load_train(cfg)?;
    let scaler = fit_scaler(&train_f)?;
    let scaled = apply_scaler(&train_f, &scaler)?;
    let data = WindowDataset::from_frame(&scaled, &spec)?;
    mkdir(&dir)?;
    let history_path = dir.join("history.csv");
    let outcome = evolve_with(&template, &data, &evo, resume_state, |state, _| {
        let tmp = dir.join("state.json.tmp");
        let json = serde_json::to_string(state).map_err(|e| Error::Data(e.to_string()))?;
        fs::write(&tmp, json).map_err(|e| Error::Data(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, &state_path)
            .map_err(|e| Error::Data(format!("{}: {e}", state_path.display())))?;
        write_history(&history_path, &state.history).map_err(|e| Error::Data(e.to_string()))?;
        if !quiet {
            if let Some(h) = state.history.last() {
                println!(
                    "generation {}: best {:.6} mean {:.6}",
                    h.generation, h.best_fitness, h.mean_fitness
                );
            }
        }
        Ok(())
    })?;
    let best = &outcome.best;
    let genome_path = dir.join("best_genome.json");
    let genome_json = serde_json::json!({
        "id": best.id,
        "fitness": best.fitness,
        "description": best.genome.describe(&template),
        "genome": best.genome,
    });
    fs::write(
        &genome_path,
        serde_json::to_string_pretty(&genome_json).expect("genome serializes"),
    )
    .map_err(|e| CliError::io(&genome_path, e))?;

    let m_tags = train_f.n_tags();
    let mut net = best.genome.build_network(
        &template,
        (spec.input_len, m_tags),
        (spec.forecast_len, m_tags),
        derive_seed(cfg.seed, &[7]),
    )?;
    let tc = TrainConfig {
        optimizer: best.genome.optimizer_config(&template),
        ..cfg.train_config()
    };
    let losses = train(&mut net, &data, &tc)?;
    let bundle = DetectorBundle::calibrate(net, &train_f, spec, scaler, cfg.error_config())?;
    let bundle_dir = dir.join("bundle");
    bundle.save(&bundle_dir)?;
    write_losses(&bundle_dir.join("loss.csv"), &losses)?;

    let mut m = ManifestBuilder::new("search");
    m.input(cfg.train_path());
    if let Some(t) = &cfg.model.template {
        m.input(t);
    }
    for p in [
        history_path.clone(),
        genome_path.clone(),
        state_path.clone(),
        bundle_dir.join(MODEL_FILE),
        bundle_dir.join(CALIBRATION_FILE),
    ] {
        m.output(p);
    }
    m.finish(cfg, &dir)?;
    say(
        quiet,
        format!(
            "best {} fitness {:.6}: {} ({} genomes evaluated)",
            best.id,
            best.fitness.unwrap_or(f64::NAN),
            best.genome.describe(&template),
            outcome.evaluated.len()
        ),
    );
    Ok(dir)
}

pub fn detect_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("detect")
}

pub fn detect_cmd(
    cfg: &RunConfig,
    bundle_dir: Option<&Path>,
    svg: bool,
    quiet: bool,
) -> Result<PathBuf, CliError> {
    let bundle_dir = bundle_dir.map_or_else(|| cfg.bundle_dir(), Path::to_path_buf);
    check_test(cfg)?;
    require_file("bundle", &bundle_dir.join(MODEL_FILE))?;
    let has_calibration = bundle_dir.join(CALIBRATION_FILE).is_file();
    if !has_calibration {
        check_train(cfg)?;
    }
    let mut m = ManifestBuilder::new("detect");
    let bundle = if has_calibration {
        DetectorBundle::load(&bundle_dir)?
    } else {
        let train_f = load_train(cfg)?;
        m.input(cfg.train_path());
        let scaler = fit_scaler(&train_f)?;
        let net = load_model(bundle_dir.join(MODEL_FILE))?;
        let spec = cfg.window_spec()?;
        let b = DetectorBundle::calibrate(net, &train_f, spec, scaler, cfg.error_config())?;
        b.save(&bundle_dir)?;
        say(
            quiet,
            format!(
                "fitted calibration and stored it in {}",
                bundle_dir.display()
            ),
        );
        b
    };
    let test_f = load_test(cfg)?;
    let top_k = cfg.detector.top_k;
    let analysis = bundle.analyze(&test_f, top_k)?;
    let dir = detect_dir(cfg);
    mkdir(&dir)?;
    let (ev, se) = (dir.join(EVENTS_FILE), dir.join(SERIES_FILE));
    write_events(&ev, &test_f, &analysis, &bundle.calibration, top_k)?;
    write_series(&se, &test_f, &analysis)?;
    m.input(cfg.test_path());
    m.input(bundle_dir.join(MODEL_FILE));
    m.input(bundle_dir.join(CALIBRATION_FILE));
    m.output(&ev);
    m.output(&se);
    if svg || cfg.detector.svg {
        let p = dir.join(SVG_FILE);
        fs::write(
            &p,
            render_svg(&analysis.series.values, analysis.threshold, &analysis.flags),
        )
        .map_err(|e| CliError::io(&p, e))?;
        m.output(p);
    }
    m.finish(cfg, &dir)?;
    say(
        quiet,
        format!(
            "{} events above threshold {:.6e}; reports in {}",
            analysis.events.len(),
            analysis.threshold,
            dir.display()
        ),
    );
    Ok(dir)
}

pub fn score_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("score")
}

pub fn score_cmd(
    cfg: &RunConfig,
    truth: Option<&Path>,
    detections: Option<&Path>,
    attacks: Option<&Path>,
    quiet: bool,
) -> Result<(PathBuf, ScoreReport), CliError> {
    let truth_path = truth.map_or_else(|| cfg.test_path(), Path::to_path_buf);
    let det_dir = detections.map_or_else(|| detect_dir(cfg), Path::to_path_buf);
    require_file("truth", &truth_path)?;
    require_file("detections", &det_dir.join(EVENTS_FILE))?;
    require_file("detections", &det_dir.join(SERIES_FILE))?;
    let attacks_path = attacks.map_or_else(|| cfg.attacks_path(), Path::to_path_buf);
    if attacks.is_some() {
        require_file("attacks", &attacks_path)?;
    }

    let truth_f = tagwatch::dataset::load_csv(&truth_path, &cfg.dataset.schema)?;
    if truth_f.labels().is_none() {
        return Err(CliError::Config(format!(
            "truth: {} has no label column",
            truth_path.display()
        )));
    }
    let truth = GroundTruth::from_frame(&truth_f)?;
    let events = read_events(&det_dir.join(EVENTS_FILE))?;
    let flags = read_flags(&det_dir.join(SERIES_FILE))?;
    if flags.len() != truth.len() {
        return Err(CliError::Runtime(format!(
            "detections cover {} rows but the truth file has {}",
            flags.len(),
            truth.len()
        )));
    }
    let mut onsets: Vec<usize> = events.iter().map(|e| e.start).collect();
    onsets.sort_unstable();
    onsets.dedup();
    let detections = DetectionSet::new(onsets, truth.len())?;
    let report = score(&truth, &detections, &flags, &cfg.metrics)?;

    let dir = score_dir(cfg);
    mkdir(&dir)?;
    let mut m = ManifestBuilder::new("score");
    m.input(&truth_path);
    m.input(det_dir.join(EVENTS_FILE));
    m.input(det_dir.join(SERIES_FILE));
    let mut text = report.to_text();
    if attacks_path.is_file() {
        let spans = read_attacks(&attacks_path)?;
        let spans_ev: Vec<(usize, usize)> = events.iter().map(|e| (e.start, e.end)).collect();
        let suspects: Vec<Vec<String>> = events.iter().map(|e| e.tags.clone()).collect();
        let rows = attack_rows(&spans, &spans_ev, &suspects, &flags, truth.step_seconds());
        let p = dir.join("attacks.csv");
        write_attack_table(&p, &rows)?;
        m.input(&attacks_path);
        m.output(p);
        text.push_str("  attacks\n");
        for r in &rows {
            text.push_str(&format!(
                "    {}: targets {} detected [{}] delay {} recall {:.3}\n",
                r.attack,
                r.targets.join(";"),
                r.detected_tags.join(", "),
                r.delay_seconds
                    .map_or("missed".to_string(), |d| format!("{d} s")),
                r.pointwise_recall
            ));
        }
    }
    let (csv_path, txt_path) = (dir.join("score.csv"), dir.join("score.txt"));
    fs::write(&csv_path, report.to_csv()).map_err(|e| CliError::io(&csv_path, e))?;
    fs::write(&txt_path, &text).map_err(|e| CliError::io(&txt_path, e))?;
    m.output(&csv_path);
    m.output(&txt_path);
    m.finish(cfg, &dir)?;
    say(quiet, text.trim_end());
    Ok((dir, report))
}
