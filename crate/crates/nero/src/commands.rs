//! The pipeline steps behind each CLI verb. Every command is deterministic
//! given its configuration; outputs never depend on the thread count.

use std::collections::BTreeMap;
use std::path::Path;

use nero_core::analysis::{channel_profile, default_k_grid, k_sweep, ChannelProfileRow, SweepRow};
use nero_core::baselines::{self, fit_mahalanobis, react_clip, react_energy, Ridge};
use nero_core::bundle::{validate_consistency, DEFAULT_CONSISTENCY_TOL};
use nero_core::metrics::{evaluate, sort_by_auroc, EvalReport};
use nero_core::synth::{self, Dataset, ScenarioSpec, TrainConfig};
use nero_core::{detector, ArtifactBundle, NeroModel};
use serde::{Deserialize, Serialize};

use crate::bundle_io::{create_dir, load_bundle, write_bundle, write_json};
use crate::config::{ensure_exist, require, RunConfig};
use crate::csv_io::{column_text, write_text};
use crate::dataset_io::{read_dataset, write_dataset, write_toy_model};
use crate::error::{Error, Result};
use crate::model_file::{load_model, params_hash, save_model};
use crate::parallel::{map_samples, relevance_bundle, score_bundle};
use crate::report::{breakdown_csv, profile_csv, relevance_csv, scores_csv, sweep_csv, write_reports};

pub const CONFIG_FILE: &str = "config.json";
pub const MODEL_FILE: &str = "model.json";

fn write_config(out: &Path, cfg: &RunConfig) -> Result<()> {
    create_dir(out)?;
    write_json(&out.join(CONFIG_FILE), cfg)
}

/// Loads a bundle, naming the setting it came from when absent.
fn bundle_from(field: &Option<std::path::PathBuf>, flag: &str) -> Result<ArtifactBundle> {
    let path = require(field, flag)?;
    ensure_exist(&[path])?;
    load_bundle(path)
}

/// Test bundles must come from the same final layer as the training split.
fn check_same_layer(reference: &ArtifactBundle, other: &ArtifactBundle) -> Result<()> {
    let (expected, found) = (
        params_hash(&reference.weights, &reference.bias),
        params_hash(&other.weights, &other.bias),
    );
    if expected != found {
        return Err(Error::ModelMismatch { expected, found });
    }
    Ok(())
}

fn warn_if_inconsistent(b: &ArtifactBundle, name: &str) {
    let report = validate_consistency(b, DEFAULT_CONSISTENCY_TOL);
    if !report.consistent {
        eprintln!(
            "warning: {name} logits differ from features*W+b by up to {:e}",
            report.max_residual()
        );
    }
}

/// Fitted model from `cfg.model` when given, otherwise fit on `train`.
fn obtain_model(cfg: &RunConfig, train: &ArtifactBundle) -> Result<NeroModel> {
    match &cfg.model {
        Some(path) => {
            ensure_exist(&[path])?;
            load_model(path, &train.weights, &train.bias)
        }
        None => {
            warn_if_inconsistent(train, "train");
            Ok(detector::fit(train, &cfg.nero_config())?)
        }
    }
}

/// `nero gen`: sample a synthetic dataset.
pub fn cmd_gen(spec: &ScenarioSpec, out: &Path) -> Result<Dataset> {
    let ds = synth::generate(spec)?;
    write_dataset(&ds, out)?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub max_consistency_residual: f64,
}

/// `nero train-toy`: train the toy network and export the three bundles.
pub fn cmd_train_toy(data: &Path, config: &TrainConfig, out: &Path) -> Result<TrainSummary> {
    ensure_exist(&[data])?;
    let ds = read_dataset(data)?;
    let outcome = synth::train_toy(&ds, config)?;
    let bundles = synth::export_bundles(&outcome.model, &ds)?;
    create_dir(out)?;
    write_json(&out.join("train_config.json"), config)?;
    write_toy_model(&outcome.model, &out.join("toy_model.json"))?;
    write_text(&out.join("loss_trace.csv"), &column_text(&outcome.loss_trace))?;
    let mut max_residual = 0.0f64;
    for (name, b) in [
        ("train", &bundles.train),
        ("test_id", &bundles.test_id),
        ("test_ood", &bundles.test_ood),
    ] {
        max_residual = max_residual.max(validate_consistency(b, DEFAULT_CONSISTENCY_TOL).max_residual());
        write_bundle(b, &out.join(name))?;
    }
    let summary = TrainSummary {
        epochs: config.epochs,
        initial_loss: outcome.loss_trace[0],
        final_loss: *outcome.loss_trace.last().expect("trace has epochs + 1 entries"),
        train_accuracy: outcome.model.accuracy(&ds.train_inputs, &ds.train_labels),
        test_accuracy: outcome.model.accuracy(&ds.test_inputs, &ds.test_labels),
        max_consistency_residual: max_residual,
    };
    write_json(&out.join("train_log.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitLog {
    pub n_train: usize,
    pub d: usize,
    pub classes: usize,
    pub z: usize,
    pub k: usize,
    pub lambda: f64,
    pub skipped_pairs: usize,
    pub mean_distance: f64,
    pub mean_abs_bias_relevance: f64,
}

impl FitLog {
    pub fn of(m: &NeroModel) -> Self {
        FitLog {
            n_train: m.stats.n_train,
            d: m.d(),
            classes: m.classes(),
            z: m.z(),
            k: m.k,
            lambda: m.lambda,
            skipped_pairs: m.stats.skipped_pairs,
            mean_distance: m.stats.mean_distance,
            mean_abs_bias_relevance: m.stats.mean_abs_bias_relevance,
        }
    }
}

/// `nero fit`: writes `model.json`, `fit_log.json` and the resolved config.
pub fn cmd_fit(cfg: &RunConfig) -> Result<NeroModel> {
    let out = cfg.out_dir()?;
    let train = bundle_from(&cfg.train, "train")?;
    warn_if_inconsistent(&train, "train");
    let model = detector::fit(&train, &cfg.nero_config())?;
    write_config(out, cfg)?;
    save_model(&model, &out.join(MODEL_FILE))?;
    write_json(&out.join("fit_log.json"), &FitLog::of(&model))?;
    Ok(model)
}

/// `nero score`: per-sample score breakdown of one bundle.
pub fn cmd_score(cfg: &RunConfig) -> Result<Vec<nero_core::ScoreBreakdown>> {
    let out = cfg.out_dir()?;
    let model_path = require(&cfg.model, "model")?;
    let bundle_path = require(&cfg.bundle, "bundle")?;
    ensure_exist(&[model_path, bundle_path])?;
    let bundle = load_bundle(bundle_path)?;
    let model = load_model(model_path, &bundle.weights, &bundle.bias)?;
    let rows = score_bundle(&model, &bundle)?;
    write_config(out, cfg)?;
    write_text(&out.join("scores.csv"), &breakdown_csv(&bundle.labels, &rows))?;
    Ok(rows)
}

fn settings<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn nero_settings(m: &NeroModel) -> BTreeMap<String, String> {
    settings([
        ("z", m.z().to_string()),
        ("k", m.k.to_string()),
        ("lambda", format!("{:?}", m.lambda)),
        ("eps", format!("{:?}", m.eps)),
        ("y_mode", m.y_mode.to_string()),
        ("lambda_mode", m.lambda_mode.to_string()),
        ("norm", m.norm.to_string()),
    ])
}

/// Score of one sample from its `(features, logits)`.
type SampleScore<'a> = dyn Fn(&[f64], &[f64]) -> nero_core::Result<f64> + Sync + Send + 'a;

struct MethodScores {
    name: &'static str,
    id: Vec<f64>,
    ood: Vec<f64>,
    settings: BTreeMap<String, String>,
}

fn baseline_scores(
    name: &'static str,
    cfg: &RunConfig,
    train: &ArtifactBundle,
    id: &ArtifactBundle,
    ood: &ArtifactBundle,
) -> Result<MethodScores> {
    let t = cfg.temperature;
    let both =
        |f: &SampleScore<'_>| -> Result<(Vec<f64>, Vec<f64>)> { Ok((map_samples(id, f)?, map_samples(ood, f)?)) };
    let (scores, settings) = match name {
        "msp" => (both(&|_, l| Ok(baselines::msp(l)))?, BTreeMap::new()),
        "max_logit" => (both(&|_, l| Ok(baselines::max_logit(l)))?, BTreeMap::new()),
        "energy" => (
            both(&|_, l| Ok(baselines::energy(l, t)))?,
            settings([("temperature", format!("{t:?}"))]),
        ),
        "entropy" => (both(&|_, l| Ok(baselines::entropy(l)))?, BTreeMap::new()),
        "mahalanobis" => {
            let m = fit_mahalanobis(train, Ridge::TraceScaled(cfg.ridge_scale))?;
            (
                both(&|a, _| m.score(a))?,
                settings([
                    ("ridge_scale", format!("{:?}", cfg.ridge_scale)),
                    ("ridge", format!("{:?}", m.ridge)),
                ]),
            )
        }
        "react_energy" => {
            let clip = react_clip(train, cfg.react_percentile)?;
            let (w, b) = (&train.weights, &train.bias);
            (
                both(&|a, _| react_energy(a, w, b, clip, t))?,
                settings([
                    ("percentile", format!("{:?}", cfg.react_percentile)),
                    ("clip", format!("{clip:?}")),
                    ("temperature", format!("{t:?}")),
                ]),
            )
        }
        other => unreachable!("unknown baseline {other}"),
    };
    Ok(MethodScores {
        name,
        id: scores.0,
        ood: scores.1,
        settings,
    })
}

/// `nero eval`: the detector plus every enabled baseline on one ID/OOD pair.
///
/// Writes `config.json`, `model.json` (when fitted here), `results.csv`
/// sorted by AUROC, `reports/<method>.json` and `scores/<method>.csv`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Vec<EvalReport>> {
    let out = cfg.out_dir()?;
    let train = bundle_from(&cfg.train, "train")?;
    let id = bundle_from(&cfg.test_id, "test-id")?;
    let ood = bundle_from(&cfg.test_ood, "test-ood")?;
    check_same_layer(&train, &id)?;
    check_same_layer(&train, &ood)?;
    let model = obtain_model(cfg, &train)?;

    let nero_id: Vec<f64> = score_bundle(&model, &id)?.iter().map(|s| s.score).collect();
    let nero_ood: Vec<f64> = score_bundle(&model, &ood)?.iter().map(|s| s.score).collect();
    let mut methods = vec![MethodScores {
        name: "nero",
        id: nero_id,
        ood: nero_ood,
        settings: nero_settings(&model),
    }];
    for name in cfg.baselines.enabled() {
        methods.push(baseline_scores(name, cfg, &train, &id, &ood)?);
    }

    write_config(out, cfg)?;
    if cfg.model.is_none() {
        save_model(&model, &out.join(MODEL_FILE))?;
    }
    let score_dir = out.join("scores");
    create_dir(&score_dir)?;
    let mut reports = Vec::with_capacity(methods.len());
    for m in methods {
        write_text(&score_dir.join(format!("{}.csv", m.name)), &scores_csv(&m.id, &m.ood))?;
        reports.push(evaluate(m.name, &m.id, &m.ood, m.settings)?);
    }
    sort_by_auroc(&mut reports);
    write_reports(out, &reports)?;
    Ok(reports)
}

/// `nero sweep-k`: detector AUROC/FPR95 over a list of bottom-channel counts.
pub fn cmd_sweep_k(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let out = cfg.out_dir()?;
    let train = bundle_from(&cfg.train, "train")?;
    let id = bundle_from(&cfg.test_id, "test-id")?;
    let ood = bundle_from(&cfg.test_ood, "test-ood")?;
    check_same_layer(&train, &id)?;
    check_same_layer(&train, &ood)?;
    let ks = cfg.ks.clone().unwrap_or_else(|| default_k_grid(train.d()));
    if ks.is_empty() {
        return Err(Error::config("the k list is empty"));
    }
    let model = obtain_model(cfg, &train)?;
    let rows = k_sweep(&model, &id, &ood, &ks)?;
    write_config(out, cfg)?;
    write_text(&out.join("sweep_k.csv"), &sweep_csv(&rows))?;
    Ok(rows)
}

/// `nero relevance-dump`: the `n x (d + 1)` relevance matrix of one bundle.
pub fn cmd_relevance_dump(cfg: &RunConfig) -> Result<nero_core::RelevanceBatch> {
    let out = cfg.out_dir()?;
    let bundle = bundle_from(&cfg.bundle, "bundle")?;
    let batch = relevance_bundle(&bundle, cfg.eps, cfg.y_mode)?;
    write_config(out, cfg)?;
    write_text(&out.join("relevance.csv"), &relevance_csv(&batch))?;
    Ok(batch)
}

/// `nero plot-data`: channel-wise mean |relevance| of ID vs OOD samples.
pub fn cmd_plot_data(cfg: &RunConfig) -> Result<Vec<ChannelProfileRow>> {
    let out = cfg.out_dir()?;
    let id = bundle_from(&cfg.test_id, "test-id")?;
    let ood = bundle_from(&cfg.test_ood, "test-ood")?;
    check_same_layer(&id, &ood)?;
    let id_rel = relevance_bundle(&id, cfg.eps, cfg.y_mode)?;
    let ood_rel = relevance_bundle(&ood, cfg.eps, cfg.y_mode)?;
    let rows = channel_profile(&id_rel.neuron, &ood_rel.neuron, cfg.window)?;
    write_config(out, cfg)?;
    write_text(&out.join("plot_data.csv"), &profile_csv(&rows))?;
    Ok(rows)
}
