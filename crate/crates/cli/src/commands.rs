//! The CLI verbs as library functions. Each writes its artifacts plus the
//! resolved configuration into the configured output directory.

use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use conet_core::data::{
    align_domains, generate_synthetic, load_interactions, loo_split, write_cross_domain, CrossDomainDataset,
    LooSplit, SplitManifest,
};
use conet_core::evaluation::{evaluate_with, paired_t_test, MetricsReport, ModelScorer, Partition};
use conet_core::models::{load_checkpoint, save_checkpoint, Architecture, Model};
use conet_core::numerics::Rng;
use conet_core::study::{
    compare_results, lambda_sweep, reduce_study, run_arms, shape_of, sparsity_report, Arm, ArmResult,
    SparsityReport, StudyReport,
};
use conet_core::training::{fit, read_history, write_history, EpochStats};
use conet_core::{Error, Result};

use crate::config::{RunConfig, RESOLVED_CONFIG};

pub const TARGET_FILE: &str = "target.tsv";
pub const SOURCE_FILE: &str = "source.tsv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const REPORT_FILE: &str = "report.json";
pub const TABLE_FILE: &str = "report.txt";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Creates the output directory and records the resolved configuration.
fn prepare_output(config: &RunConfig) -> Result<PathBuf> {
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(RESOLVED_CONFIG), config.to_text())?;
    Ok(dir)
}

/// Dataset plus the frozen split every model of a run is scored on.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: CrossDomainDataset,
    pub split: LooSplit,
    pub description: String,
}

/// Loads the TSV pair when configured, otherwise generates synthetic data.
pub fn load_dataset(config: &RunConfig) -> Result<(CrossDomainDataset, String)> {
    match (&config.target_path, &config.source_path) {
        (Some(t), Some(s)) => {
            let target = load_interactions(t, config.min_user_interactions)?;
            let source = load_interactions(s, 1)?;
            let data = align_domains(&target, &source)?;
            info!(
                "loaded {} shared users, {} target and {} source items",
                data.num_users(),
                data.target.num_items(),
                data.source.num_items()
            );
            Ok((data, format!("{}+{}", t.display(), s.display())))
        }
        (None, None) => {
            let syn = config.synthetic_config();
            let data = generate_synthetic(&syn)?;
            Ok((data, format!("synthetic(rho={},seed={})", syn.relatedness, syn.seed)))
        }
        _ => Err(Error::config("target_path and source_path must be given together")),
    }
}

/// Dataset and split: the manifest at `split_path` when set, otherwise a
/// fresh split drawn from `data_seed`.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let (data, description) = load_dataset(config)?;
    let split = match &config.split_path {
        Some(path) => {
            let manifest: SplitManifest = read_json(path)?;
            LooSplit::from_manifest(&data, &manifest)?
        }
        None => loo_split(&data, &mut Rng::derived(config.data_seed, "split"))?,
    };
    info!("{} of {} users evaluated", split.num_evaluated(), split.num_users());
    Ok(Prepared {
        data,
        split,
        description,
    })
}

/// Recorded alongside generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateManifest {
    pub seed: u64,
    pub relatedness: f64,
    pub latent_dim: usize,
    pub num_users: usize,
    pub num_target_items: usize,
    pub num_source_items: usize,
    pub requested_target_density: f64,
    pub requested_source_density: f64,
    pub target_density: f64,
    pub source_density: f64,
    pub target_interactions: usize,
    pub source_interactions: usize,
    pub fingerprint: String,
}

/// Writes `target.tsv`, `source.tsv` and `manifest.json`.
pub fn cmd_generate(config: &RunConfig) -> Result<GenerateManifest> {
    let syn = config.synthetic_config();
    syn.validate()?;
    let dir = prepare_output(config)?;
    let data = generate_synthetic(&syn)?;
    write_cross_domain(&data, &dir.join(TARGET_FILE), &dir.join(SOURCE_FILE))?;
    let manifest = GenerateManifest {
        seed: syn.seed,
        relatedness: syn.relatedness,
        latent_dim: syn.latent_dim,
        num_users: data.num_users(),
        num_target_items: data.target.num_items(),
        num_source_items: data.source.num_items(),
        requested_target_density: syn.target_density,
        requested_source_density: syn.source_density,
        target_density: data.target.density(),
        source_density: data.source.density(),
        target_interactions: data.target.len(),
        source_interactions: data.source.len(),
        fingerprint: data.fingerprint(),
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochStats>,
    pub validation: MetricsReport,
    pub test: MetricsReport,
    pub split_fingerprint: String,
}

/// Trains one model and writes the best checkpoint, the epoch history, the
/// split manifest and validation/test reports.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if config.model.architecture == Architecture::Mlp {
        if let Some(s) = &config.source_path {
            warn!(
                "architecture mlp does not train on the source domain; {} only restricts the user set",
                s.display()
            );
        }
    }
    let prepared = prepare(config)?;
    let dir = prepare_output(config)?;
    let split = &prepared.split;
    let train = config.train_config();
    let model = Model::new(config.model.clone(), shape_of(split), config.seed)?;
    info!(
        "training {} ({} parameters) for up to {} epochs",
        config.model.display_name(),
        model.num_parameters(),
        train.epochs
    );
    let (model, history) = fit(model, split, &train)?;
    let fingerprint = split.fingerprint();
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &model, &fingerprint)?;
    write_history(&dir.join(HISTORY_FILE), &history)?;
    write_json(&dir.join(SPLIT_FILE), &split.to_manifest(Some(config.data_seed)))?;

    let name = config.model.display_name();
    let scorer = ModelScorer::new(&model, split);
    let validation = evaluate_with(&scorer, split, Partition::Validation, train.eval)?
        .labeled(name, prepared.description.clone());
    let test = evaluate_with(&scorer, split, Partition::Test, train.eval)?.labeled(name, prepared.description);
    write_json(&dir.join("metrics-validation.json"), &validation.summary())?;
    write_json(&dir.join("metrics-test.json"), &test.summary())?;
    Ok(TrainOutcome {
        model,
        history,
        validation,
        test,
        split_fingerprint: fingerprint,
    })
}

/// Scores a checkpoint on the configured split after checking that the
/// checkpoint was trained on that very split.
pub fn cmd_evaluate(config: &RunConfig, checkpoint: &Path, partition: Partition) -> Result<MetricsReport> {
    let ckpt = load_checkpoint(checkpoint)?;
    let prepared = prepare(config)?;
    let split = &prepared.split;
    let fingerprint = split.fingerprint();
    if ckpt.split_fingerprint != fingerprint {
        return Err(Error::config(format!(
            "checkpoint {} was trained on split {}, but the configured split is {}",
            checkpoint.display(),
            ckpt.split_fingerprint,
            fingerprint
        )));
    }
    if ckpt.model.shape() != shape_of(split) {
        return Err(Error::config("checkpoint shape does not match the dataset"));
    }
    let dir = prepare_output(config)?;
    let name = ckpt.model.config().display_name();
    let report = evaluate_with(&ModelScorer::new(&ckpt.model, split), split, partition, config.eval_options())?
        .labeled(name, prepared.description);
    let file = match partition {
        Partition::Validation => "metrics-validation.json",
        Partition::Test => "metrics-test.json",
    };
    write_json(&dir.join(file), &report.summary())?;
    Ok(report)
}

/// Across-seed aggregate of one model in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub seeds: Vec<u64>,
    pub mean_hr: f64,
    pub mean_ndcg: f64,
    pub mean_mrr: f64,
    /// NDCG change relative to the baseline, in percent.
    pub improvement: f64,
    /// Paired t-test over seeds on NDCG against the baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: StudyReport,
    pub summary: Vec<ModelSummary>,
    pub results: Vec<ArmResult>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn summarize(results: &[ArmResult], architectures: &[Architecture], base: usize) -> Result<Vec<ModelSummary>> {
    let k = architectures.len();
    let column = |a: usize| -> Vec<&ArmResult> { results.iter().skip(a).step_by(k).collect() };
    let base_ndcg: Vec<f64> = column(base).iter().map(|r| r.test.ndcg).collect();
    (0..k)
        .map(|a| {
            let runs = column(a);
            let ndcg: Vec<f64> = runs.iter().map(|r| r.test.ndcg).collect();
            let p_value = if a != base && ndcg.len() >= 2 {
                Some(paired_t_test(&ndcg, &base_ndcg)?)
            } else {
                None
            };
            Ok(ModelSummary {
                model: runs[0].arm.label.clone(),
                seeds: runs.iter().map(|r| r.arm.seed).collect(),
                mean_hr: mean(&runs.iter().map(|r| r.test.hr).collect::<Vec<_>>()),
                mean_ndcg: mean(&ndcg),
                mean_mrr: mean(&runs.iter().map(|r| r.test.mrr).collect::<Vec<_>>()),
                improvement: 100.0 * (mean(&ndcg) / mean(&base_ndcg) - 1.0),
                p_value,
            })
        })
        .collect()
}

fn summary_table(summary: &[ModelSummary]) -> String {
    let mut out = format!(
        "{:<16} {:>5} {:>7} {:>7} {:>7} {:>8} {:>9}\n",
        "model", "seeds", "HR", "NDCG", "MRR", "improve", "p-value"
    );
    for s in summary {
        let p = s.p_value.map_or("-".to_string(), |p| format!("{p:.2e}"));
        out.push_str(&format!(
            "{:<16} {:>5} {:>7.4} {:>7.4} {:>7.4} {:>7.2}% {:>9}\n",
            s.model,
            s.seeds.len(),
            s.mean_hr,
            s.mean_ndcg,
            s.mean_mrr,
            s.improvement,
            p
        ));
    }
    out
}

fn write_study(dir: &Path, report: &StudyReport) -> Result<()> {
    write_json(&dir.join(REPORT_FILE), report)?;
    fs::write(dir.join(TABLE_FILE), report.to_table())?;
    Ok(())
}

fn write_arm(dir: &Path, result: &ArmResult, fingerprint: &str) -> Result<()> {
    let arm_dir = dir
        .join("arms")
        .join(format!("{}-seed{}", result.arm.label.replace(['+', ' ', '='], "_"), result.arm.seed));
    fs::create_dir_all(&arm_dir)?;
    save_checkpoint(&arm_dir.join(CHECKPOINT_FILE), &result.model, fingerprint)?;
    write_history(&arm_dir.join(HISTORY_FILE), &result.history)
}

/// Trains every configured architecture for every study seed on one shared
/// split. P-values are per-user paired tests against the baseline trained
/// with the same seed; the summary pairs seeds.
pub fn cmd_compare(config: &RunConfig) -> Result<CompareOutcome> {
    config.train_config().validate()?;
    let archs = &config.architectures;
    if archs.len() < 2 {
        return Err(Error::config("compare needs at least two architectures"));
    }
    let base = archs
        .iter()
        .position(|&a| a == config.baseline)
        .ok_or_else(|| Error::config(format!("baseline {} is not among the architectures", config.baseline)))?;
    let seeds = config.study_seeds();
    let mut arms = Vec::new();
    for &seed in &seeds {
        for &arch in archs {
            let model = config.arm_model(arch);
            model.validate()?;
            arms.push(Arm::new(model, seed));
        }
    }
    let prepared = prepare(config)?;
    let dir = prepare_output(config)?;
    let split = &prepared.split;
    let results = run_arms(&arms, split, &config.train_config())?;

    let mut rows = Vec::new();
    for group in results.chunks(archs.len()) {
        rows.extend(compare_results(group, base)?.rows);
    }
    let report = StudyReport {
        dataset: prepared.description,
        rows,
        ..compare_results(&results[..archs.len()], base)?
    };
    let summary = summarize(&results, archs, base)?;
    write_study(&dir, &report)?;
    write_json(&dir.join("summary.json"), &summary)?;
    fs::write(dir.join("summary.txt"), summary_table(&summary))?;
    let fingerprint = split.fingerprint();
    for r in &results {
        write_arm(&dir, r, &fingerprint)?;
    }
    Ok(CompareOutcome {
        report,
        summary,
        results,
    })
}

/// CoNet at every configured λ, for every study seed.
pub fn cmd_lambda_sweep(config: &RunConfig) -> Result<StudyReport> {
    config.train_config().validate()?;
    let base = config.arm_model(Architecture::CoNet);
    base.validate()?;
    let prepared = prepare(config)?;
    let dir = prepare_output(config)?;
    let train = config.train_config();
    let mut report: Option<StudyReport> = None;
    for seed in config.study_seeds() {
        let r = lambda_sweep(&base, &config.lambdas, seed, &prepared.split, &train)?;
        match &mut report {
            Some(acc) => acc.rows.extend(r.rows),
            None => report = Some(r),
        }
    }
    let mut report = report.expect("at least one seed");
    report.dataset = prepared.description;
    write_study(&dir, &report)?;
    Ok(report)
}

/// SCoNet on reduced target training sets against MLP on the full one.
pub fn cmd_reduce_study(config: &RunConfig) -> Result<StudyReport> {
    config.train_config().validate()?;
    if config.levels.is_empty() {
        return Err(Error::config("reduce-study needs at least one removal level"));
    }
    let sconet = config.arm_model(Architecture::CoNet);
    let mlp = config.arm_model(Architecture::Mlp);
    let prepared = prepare(config)?;
    let dir = prepare_output(config)?;
    let mut report = reduce_study(&sconet, &mlp, &config.levels, config.seed, &prepared.split, &config.train_config())?;
    report.dataset = prepared.description;
    write_study(&dir, &report)?;
    Ok(report)
}

/// Zero-entry ratios from a checkpoint and/or a training history. Writes
/// `sparsity.txt`, `sparsity.json` and `sparsity_series.csv`.
pub fn cmd_sparsity_report(
    checkpoint: Option<&Path>,
    history: Option<&Path>,
    output_dir: &Path,
) -> Result<SparsityReport> {
    if checkpoint.is_none() && history.is_none() {
        return Err(Error::config("sparsity-report needs a checkpoint or a history file"));
    }
    let model = checkpoint.map(load_checkpoint).transpose()?.map(|c| c.model);
    let history = history.map(read_history).transpose()?.unwrap_or_default();
    let report = sparsity_report(model.as_ref(), &history)?;
    fs::create_dir_all(output_dir)?;
    fs::write(output_dir.join("sparsity.txt"), report.to_table())?;
    write_json(&output_dir.join("sparsity.json"), &report)?;
    fs::write(output_dir.join("sparsity_series.csv"), report.series_csv())?;
    Ok(report)
}
