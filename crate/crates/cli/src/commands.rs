//! One function per subcommand. Each reads its inputs, runs a pipeline
//! stage and writes artifacts; the returned string goes to stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use kcrf::corpus::{parse_corpus, write_corpus, write_predictions, Sentence};
use kcrf::crf::{Model, TrainConfig};
use kcrf::eval::experiment::{
    predicted_spans, run_experiment, score_both, ExperimentInputs, ExperimentSettings, ProductSplit,
};
use kcrf::eval::synth::{generate_synthetic, SynthConfig};
use kcrf::expansion::{expand, ExpansionConfig};
use kcrf::features::{FeatureConfig, Preset};
use kcrf::knowledge::KnowledgeBase;
use kcrf::pipeline::{predict, select_initial_kb, train_model};
use kcrf::TagSet;
use log::info;

use crate::config::{check_inputs, PipelineConfig};
use crate::error::{in_file, CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn load_corpus(path: &Path, tagset: &TagSet, labels: bool) -> CliResult<Vec<Sentence>> {
    parse_corpus(&read_text(path)?, tagset, labels).map_err(in_file(path))
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    Model::from_json(&read_text(path)?).map_err(in_file(path))
}

pub fn load_kb(path: &Path) -> CliResult<KnowledgeBase> {
    KnowledgeBase::from_json(&read_text(path)?).map_err(in_file(path))
}

fn train_config(cfg: &PipelineConfig) -> TrainConfig {
    TrainConfig {
        sigma2: cfg.sigma2,
        ..TrainConfig::default()
    }
}

fn feature_config(cfg: &PipelineConfig, preset: Preset) -> FeatureConfig {
    FeatureConfig {
        preset,
        kb_membership: cfg.kb_membership,
    }
}

/// Where a command writes its main artifact: `--output`, else `fallback`.
fn destination<'a>(cfg: &'a PipelineConfig, fallback: &'a Option<std::path::PathBuf>, name: &str) -> CliResult<&'a Path> {
    cfg.output
        .as_deref()
        .or(fallback.as_deref())
        .ok_or_else(|| CliError::validation(format!("--output or --{name} is required")))
}

fn labeled_training(cfg: &PipelineConfig, path: &Path) -> CliResult<Vec<Sentence>> {
    let corpus = load_corpus(path, &cfg.tagset, true)?;
    if let Some(i) = corpus.iter().position(|s| s.labels.is_none()) {
        return Err(CliError::validation(format!("{}: sentence {i} is unlabeled", path.display())));
    }
    Ok(corpus)
}

pub fn pretrain(cfg: &PipelineConfig) -> CliResult<String> {
    let train = cfg.need(&cfg.train, "train")?;
    let out = destination(cfg, &cfg.model, "model")?;
    check_inputs(&[train])?;
    let preset = cfg.preset.unwrap_or(Preset::Primitive);
    if preset == Preset::Knowledge {
        return Err(CliError::validation("pretrain takes the basic or primitive preset; use train for knowledge"));
    }
    let corpus = labeled_training(cfg, train)?;
    info!("training {preset} model on {} sentences", corpus.len());
    let model = train_model(&cfg.tagset, &corpus, feature_config(cfg, preset), None, &train_config(cfg))?;
    write_text(out, &model.to_json())?;
    Ok(format!(
        "{} model: {} features, {} iterations, converged {}\n",
        preset,
        model.num_features(),
        model.metadata.iterations,
        model.metadata.converged
    ))
}

pub fn select(cfg: &PipelineConfig) -> CliResult<String> {
    let model_path = cfg.need(&cfg.model, "model")?;
    let out = destination(cfg, &cfg.kb, "kb")?;
    check_inputs(&[model_path])?;
    let model = load_model(model_path)?;
    let (selection, kb) = select_initial_kb(&model, cfg.delta)?;
    write_text(out, &kb.to_json())?;
    let report = selection.report.to_string();
    match &cfg.report {
        Some(p) => write_text(p, &report)?,
        None => return Ok(report),
    }
    Ok(format!("selected {} knowledge entries\n", kb.len()))
}

pub fn train(cfg: &PipelineConfig) -> CliResult<String> {
    let train = cfg.need(&cfg.train, "train")?;
    let kb_path = cfg.need(&cfg.kb, "kb")?;
    let out = destination(cfg, &cfg.model, "model")?;
    check_inputs(&[train, kb_path])?;
    let kb = load_kb(kb_path)?;
    let corpus = labeled_training(cfg, train)?;
    info!("training knowledge model with {} knowledge entries", kb.len());
    let model = train_model(
        &cfg.tagset,
        &corpus,
        feature_config(cfg, Preset::Knowledge),
        Some(&kb),
        &train_config(cfg),
    )?;
    write_text(out, &model.to_json())?;
    Ok(format!(
        "knowledge model: {} features, {} iterations, converged {}\n",
        model.num_features(),
        model.metadata.iterations,
        model.metadata.converged
    ))
}

pub fn expand_cmd(cfg: &PipelineConfig) -> CliResult<String> {
    let model_path = cfg.need(&cfg.model, "model")?;
    let kb_path = cfg.need(&cfg.kb, "kb")?;
    let unlabeled = cfg.need(&cfg.unlabeled, "unlabeled")?;
    let out = cfg.need(&cfg.output, "output")?;
    check_inputs(&[model_path, kb_path, unlabeled])?;
    let model = load_model(model_path)?;
    let kb0 = load_kb(kb_path)?;
    let sentences = load_corpus(unlabeled, &model.tagset, false)?;
    let config = ExpansionConfig {
        delta_prime: cfg.delta_prime,
        max_iters: cfg.max_iters,
        strict_prune: cfg.strict_prune,
    };
    let (kb, trace) = expand(&model, &kb0, &sentences, &config)?;
    write_text(out, &kb.to_json())?;
    if let Some(p) = &cfg.trace {
        write_text(p, &trace.to_jsonl())?;
    }
    Ok(format!(
        "knowledge base {} -> {} entries after {} iterations{}\n",
        kb0.len(),
        kb.len(),
        trace.iterations,
        if trace.max_iters_reached { " (iteration limit)" } else { "" }
    ))
}

pub fn predict_cmd(cfg: &PipelineConfig) -> CliResult<String> {
    let model_path = cfg.need(&cfg.model, "model")?;
    let input = cfg.need(&cfg.test, "test")?;
    let out = destination(cfg, &cfg.predictions, "predictions")?;
    let mut inputs = vec![model_path, input];
    let kb_path = cfg.kb.as_deref();
    inputs.extend(kb_path);
    check_inputs(&inputs)?;
    let model = load_model(model_path)?;
    let kb = match (model.features.preset, kb_path) {
        (Preset::Knowledge, Some(p)) => Some(load_kb(p)?),
        (Preset::Knowledge, None) => return Err(CliError::validation("a knowledge model needs --kb")),
        _ => None,
    };
    let sentences = load_corpus(input, &model.tagset, false)?;
    let pred = predict(&model, kb.as_ref(), &sentences)?;
    write_text(out, &write_predictions(&sentences, &pred, &model.tagset)?)?;
    Ok(format!("tagged {} sentences\n", sentences.len()))
}

pub fn eval(cfg: &PipelineConfig) -> CliResult<String> {
    let gold_path = cfg.need(&cfg.test, "test")?;
    let pred_path = cfg.need(&cfg.predictions, "predictions")?;
    check_inputs(&[gold_path, pred_path])?;
    let gold = load_corpus(gold_path, &cfg.tagset, true)?;
    let pred = load_corpus(pred_path, &cfg.tagset, true)?;
    if gold.len() != pred.len() {
        return Err(CliError::validation(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut gold_tags = Vec::new();
    let mut pred_tags = Vec::new();
    for (i, (g, p)) in gold.iter().zip(&pred).enumerate() {
        if g.tokens.iter().map(|t| &t.form).ne(p.tokens.iter().map(|t| &t.form)) {
            return Err(CliError::validation(format!("sentence {i}: tokens differ between gold and predictions")));
        }
        let need = |s: &Sentence, what: &str| {
            s.labels
                .clone()
                .ok_or_else(|| CliError::validation(format!("{what} sentence {i} is unlabeled")))
        };
        gold_tags.push(need(g, "gold")?);
        pred_tags.push(need(p, "predicted")?);
    }
    let scores = score_both(
        &predicted_spans(&gold_tags, &cfg.tagset)?,
        &predicted_spans(&pred_tags, &cfg.tagset)?,
    )?;
    let r = scores.get(cfg.mode);
    let text = format!(
        "{} match: tp {} fp {} fn {}  P {:.4} R {:.4} F1 {:.4}\n",
        cfg.mode, r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
    );
    if let Some(p) = &cfg.output {
        write_text(p, &(serde_json::to_string_pretty(&scores).expect("scores serialize") + "\n"))?;
    }
    if let Some(p) = &cfg.report {
        write_text(p, &text)?;
    }
    Ok(text)
}

fn experiment_inputs(cfg: &PipelineConfig) -> CliResult<ExperimentInputs> {
    let Some(train_path) = cfg.train.as_deref() else {
        info!("no training corpus given; using the synthetic corpus for seed {}", cfg.seed);
        let c = generate_synthetic(cfg.seed, &SynthConfig::default())?;
        return Ok(ExperimentInputs {
            tagset: c.tagset,
            train: c.train,
            products: vec![ProductSplit {
                name: "synthetic".into(),
                in_domain: true,
                test: c.test,
                unlabeled: c.unlabeled,
            }],
        });
    };
    let mut products = cfg.products.clone();
    if products.is_empty() {
        let test = cfg.need(&cfg.test, "test")?;
        products.push(crate::config::ProductConfig {
            name: test.file_stem().map_or("test".into(), |s| s.to_string_lossy().into_owned()),
            test: test.to_path_buf(),
            unlabeled: cfg.unlabeled.clone(),
            in_domain: true,
        });
    }
    let mut paths = vec![train_path];
    for p in &products {
        paths.push(&p.test);
        paths.extend(p.unlabeled.as_deref());
    }
    check_inputs(&paths)?;
    let train = labeled_training(cfg, train_path)?;
    let mut splits = Vec::new();
    for p in &products {
        let test = load_corpus(&p.test, &cfg.tagset, true)?;
        if let Some(i) = test.iter().position(|s| s.labels.is_none()) {
            return Err(CliError::validation(format!("{}: sentence {i} is unlabeled", p.test.display())));
        }
        let unlabeled = match &p.unlabeled {
            Some(u) => load_corpus(u, &cfg.tagset, false)?,
            None => Vec::new(),
        };
        splits.push(ProductSplit {
            name: p.name.clone(),
            in_domain: p.in_domain,
            test,
            unlabeled,
        });
    }
    Ok(ExperimentInputs {
        tagset: cfg.tagset.clone(),
        train,
        products: splits,
    })
}

pub fn experiment(cfg: &PipelineConfig) -> CliResult<String> {
    let inputs = experiment_inputs(cfg)?;
    let settings = ExperimentSettings {
        delta: cfg.delta,
        expansion: ExpansionConfig {
            delta_prime: cfg.delta_prime,
            max_iters: cfg.max_iters,
            strict_prune: cfg.strict_prune,
        },
        train: train_config(cfg),
        kb_membership: cfg.kb_membership,
    };
    let report = run_experiment(&inputs, &settings)?;
    let mut text = report.render_table(cfg.mode);
    let checks = report.directional_checks(cfg.mode);
    let held = checks.iter().filter(|c| c.holds()).count();
    writeln!(text, "directional checks hold on {held} of {} products", checks.len()).unwrap();
    if let Some(p) = &cfg.output {
        write_text(p, &report.to_json())?;
    }
    if let Some(p) = &cfg.report {
        write_text(p, &text)?;
    }
    Ok(text)
}

pub fn synth(cfg: &PipelineConfig) -> CliResult<String> {
    let dir = cfg.need(&cfg.output, "output")?;
    let c = generate_synthetic(cfg.seed, &SynthConfig::default())?;
    write_text(&dir.join("train.tsv"), &write_corpus(&c.train, &c.tagset)?)?;
    write_text(&dir.join("unlabeled.tsv"), &write_corpus(&c.unlabeled, &c.tagset)?)?;
    write_text(&dir.join("test.tsv"), &write_corpus(&c.test, &c.tagset)?)?;
    let idx: String = c.test_expansion.iter().map(|i| format!("{i}\n")).collect();
    write_text(&dir.join("test_expansion.txt"), &idx)?;
    Ok(format!(
        "wrote {} train, {} unlabeled and {} test sentences to {}\n",
        c.train.len(),
        c.unlabeled.len(),
        c.test.len(),
        dir.display()
    ))
}
