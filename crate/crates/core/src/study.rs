//! Multi-run study drivers: architecture comparison, λ sweeps, training-set
//! reduction and sparsity reports. Independent runs train in parallel; each
//! run is a pure function of its configuration and seed.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{reduce_training, LooSplit};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_with, paired_t_test, MetricsReport, ModelScorer, Partition};
use crate::models::{Architecture, Model, ModelConfig, ModelShape};
use crate::numerics::{Matrix, Rng};
use crate::training::{fit, sparsity_ratio, EpochStats, TrainConfig};

/// One training run: a model configuration and the seed for its
/// initialization and batch streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub label: String,
    pub model: ModelConfig,
    pub seed: u64,
}

impl Arm {
    pub fn new(model: ModelConfig, seed: u64) -> Self {
        Self {
            label: model.display_name().to_string(),
            model,
            seed,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

/// Trained model, its history and its test-set report.
#[derive(Debug, Clone)]
pub struct ArmResult {
    pub arm: Arm,
    pub model: Model,
    pub history: Vec<EpochStats>,
    pub test: MetricsReport,
}

pub fn shape_of(split: &LooSplit) -> ModelShape {
    ModelShape {
        num_users: split.num_users(),
        num_target_items: split.train.target.num_items(),
        num_source_items: split.train.source.num_items(),
    }
}

/// Trains `arm` on `split` and evaluates the best-validation model on the
/// test items.
pub fn train_arm(arm: &Arm, split: &LooSplit, train: &TrainConfig) -> Result<ArmResult> {
    let config = TrainConfig {
        seed: arm.seed,
        ..train.clone()
    };
    let model = Model::new(arm.model.clone(), shape_of(split), arm.seed)?;
    let (model, history) = fit(model, split, &config)?;
    let test = evaluate_with(&ModelScorer::new(&model, split), split, Partition::Test, config.eval)?
        .labeled(arm.label.clone(), "");
    Ok(ArmResult {
        arm: arm.clone(),
        model,
        history,
        test,
    })
}

/// Trains every arm, in parallel, returning results in arm order.
pub fn run_arms(arms: &[Arm], split: &LooSplit, train: &TrainConfig) -> Result<Vec<ArmResult>> {
    for arm in arms {
        arm.model.validate()?;
    }
    arms.par_iter().map(|arm| train_arm(arm, split, train)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Compare,
    LambdaSweep,
    Reduce,
    Sparsity,
}

/// One condition of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub condition: String,
    pub model: String,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Paired t-test on per-user NDCG against the baseline row.
    pub p_value: Option<f64>,
    pub epochs_run: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lasso_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_interactions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub h_zero_ratios: Vec<f64>,
}

impl StudyRow {
    fn from_result(condition: String, r: &ArmResult, p_value: Option<f64>) -> Self {
        let hs = r.model.transfer_matrices();
        Self {
            condition,
            model: r.arm.model.display_name().to_string(),
            seed: r.arm.seed,
            metrics: r.test.summary(),
            p_value,
            epochs_run: r.history.len(),
            lasso_lambda: None,
            train_interactions: None,
            removed: None,
            percent: None,
            h_zero_ratios: hs.iter().map(sparsity_ratio).collect(),
        }
    }

    /// Mean zero-entry ratio over the transfer matrices (0 without any).
    pub fn mean_zero_ratio(&self) -> f64 {
        if self.h_zero_ratios.is_empty() {
            0.0
        } else {
            self.h_zero_ratios.iter().sum::<f64>() / self.h_zero_ratios.len() as f64
        }
    }
}

/// Result table of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub kind: StudyKind,
    pub dataset: String,
    /// Condition the p-values compare against.
    pub baseline: String,
    pub rows: Vec<StudyRow>,
    /// Reduction studies: first level at which SCoNet's NDCG drops below
    /// the full-data MLP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover: Option<usize>,
}

impl StudyReport {
    pub fn row(&self, condition: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    /// Plain-text table with one line per row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let reduce = self.kind == StudyKind::Reduce;
        let sweep = self.kind == StudyKind::LambdaSweep;
        let _ = write!(out, "{:<16} {:>5}", "condition", "seed");
        if reduce {
            let _ = write!(out, " {:>8} {:>9}", "percent", "amount");
        }
        if sweep {
            let _ = write!(out, " {:>8} {:>7}", "lambda", "zeros");
        }
        let _ = writeln!(out, " {:>7} {:>7} {:>7} {:>9}", "HR", "NDCG", "MRR", "p-value");
        for r in &self.rows {
            let _ = write!(out, "{:<16} {:>5}", r.condition, r.seed);
            if reduce {
                let pct = r.percent.map_or("-".to_string(), |p| format!("{p:.2}%"));
                let amt = r.removed.map_or("-".to_string(), |a| a.to_string());
                let _ = write!(out, " {pct:>8} {amt:>9}");
            }
            if sweep {
                let _ = write!(
                    out,
                    " {:>8} {:>7.4}",
                    r.lasso_lambda.map_or("-".to_string(), |l| l.to_string()),
                    r.mean_zero_ratio()
                );
            }
            let p = r.p_value.map_or("-".to_string(), |p| format!("{p:.2e}"));
            let _ = writeln!(
                out,
                " {:>7.4} {:>7.4} {:>7.4} {:>9}",
                r.metrics.hr, r.metrics.ndcg, r.metrics.mrr, p
            );
        }
        if let Some(c) = self.crossover {
            let _ = writeln!(out, "crossover at removal level {c}");
        }
        out
    }
}

fn ndcg_p_value(a: &MetricsReport, b: &MetricsReport) -> Result<f64> {
    if a.per_user.iter().map(|r| r.user).ne(b.per_user.iter().map(|r| r.user)) {
        return Err(Error::data("reports were not computed on the same evaluated users"));
    }
    paired_t_test(&a.per_user_ndcg(), &b.per_user_ndcg())
}

/// Trains each arm on one shared split and reports p-values against
/// `arms[baseline]`.
pub fn compare(arms: &[Arm], baseline: usize, split: &LooSplit, train: &TrainConfig) -> Result<StudyReport> {
    if baseline >= arms.len() {
        return Err(Error::config("baseline index out of range"));
    }
    let results = run_arms(arms, split, train)?;
    compare_results(&results, baseline)
}

/// Builds a comparison report from finished runs.
pub fn compare_results(results: &[ArmResult], baseline: usize) -> Result<StudyReport> {
    let base = &results[baseline].test;
    let rows = results
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let p = if k == baseline { None } else { Some(ndcg_p_value(&r.test, base)?) };
            let mut row = StudyRow::from_result(r.arm.label.clone(), r, p);
            row.lasso_lambda = Some(r.arm.model.effective_lambda());
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StudyReport {
        kind: StudyKind::Compare,
        dataset: String::new(),
        baseline: results[baseline].arm.label.clone(),
        rows,
        crossover: None,
    })
}

/// CoNet trained at each λ; p-values against the first λ.
pub fn lambda_sweep(
    base: &ModelConfig,
    lambdas: &[f64],
    seed: u64,
    split: &LooSplit,
    train: &TrainConfig,
) -> Result<StudyReport> {
    if lambdas.is_empty() {
        return Err(Error::config("lambda sweep needs at least one value"));
    }
    if base.architecture != Architecture::CoNet {
        return Err(Error::config("lambda sweeps apply to CoNet only"));
    }
    let arms: Vec<Arm> = lambdas
        .iter()
        .map(|&l| {
            Arm::new(
                ModelConfig {
                    lasso_lambda: l,
                    ..base.clone()
                },
                seed,
            )
            .labeled(format!("lambda={l}"))
        })
        .collect();
    let mut report = compare(&arms, 0, split, train)?;
    report.kind = StudyKind::LambdaSweep;
    Ok(report)
}

/// Trains `sconet` on splits with `levels` target interactions removed per
/// user and `mlp` on the full split. Row `mlp` is the baseline.
pub fn reduce_study(
    sconet: &ModelConfig,
    mlp: &ModelConfig,
    levels: &[usize],
    seed: u64,
    split: &LooSplit,
    train: &TrainConfig,
) -> Result<StudyReport> {
    sconet.validate()?;
    mlp.validate()?;
    let original = split.train.target.len();
    let reduced: Vec<_> = levels
        .iter()
        .map(|&k| reduce_training(split, k, &mut Rng::derived(seed, &format!("reduce/{k}"))))
        .collect();
    let mlp_arm = Arm::new(mlp.clone(), seed).labeled("MLP (full)");
    let mut jobs: Vec<(Arm, &LooSplit)> = vec![(mlp_arm, split)];
    for (k, (s, _)) in levels.iter().zip(&reduced) {
        jobs.push((Arm::new(sconet.clone(), seed).labeled(format!("reduce={k}")), s));
    }
    let results = jobs
        .par_iter()
        .map(|(arm, s)| train_arm(arm, s, train))
        .collect::<Result<Vec<_>>>()?;
    let base = &results[0];
    let mut rows = vec![{
        let mut r = StudyRow::from_result(base.arm.label.clone(), base, None);
        r.train_interactions = Some(original);
        r
    }];
    let mut crossover = None;
    for ((&level, (s, summary)), res) in levels.iter().zip(&reduced).zip(&results[1..]) {
        let mut row = StudyRow::from_result(res.arm.label.clone(), res, Some(ndcg_p_value(&res.test, &base.test)?));
        row.train_interactions = Some(s.train.target.len());
        row.removed = Some(summary.removed);
        row.percent = Some(summary.percent);
        row.lasso_lambda = Some(sconet.effective_lambda());
        if crossover.is_none() && res.test.ndcg < base.test.ndcg {
            crossover = Some(level);
        }
        rows.push(row);
    }
    Ok(StudyReport {
        kind: StudyKind::Reduce,
        dataset: String::new(),
        baseline: base.arm.label.clone(),
        rows,
        crossover,
    })
}

/// Zero-entry ratio of one transfer matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSparsity {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub zero_ratio: f64,
}

/// Per-matrix zero ratios and, when a history is given, their per-epoch
/// series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub matrices: Vec<MatrixSparsity>,
    pub series: Vec<(usize, Vec<f64>)>,
}

impl SparsityReport {
    pub fn mean_zero_ratio(&self) -> f64 {
        if self.matrices.is_empty() {
            return 0.0;
        }
        self.matrices.iter().map(|m| m.zero_ratio).sum::<f64>() / self.matrices.len() as f64
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("matrix      shape     zero_ratio\n");
        for m in &self.matrices {
            let _ = writeln!(out, "{:<11} {:<9} {:.4}", m.name, format!("{}x{}", m.rows, m.cols), m.zero_ratio);
        }
        out
    }

    /// `epoch,H1,H2,...` series for plotting.
    pub fn series_csv(&self) -> String {
        let n = self.series.first().map_or(self.matrices.len(), |(_, r)| r.len());
        let mut out = String::from("epoch");
        for l in 1..=n {
            let _ = write!(out, ",H{l}");
        }
        out.push('\n');
        for (epoch, ratios) in &self.series {
            let _ = write!(out, "{epoch}");
            for r in ratios {
                let _ = write!(out, ",{r}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn sparsity_of(matrices: &[Matrix]) -> Vec<MatrixSparsity> {
    matrices
        .iter()
        .enumerate()
        .map(|(l, h)| MatrixSparsity {
            name: format!("H{}", l + 1),
            rows: h.rows(),
            cols: h.cols(),
            zero_ratio: sparsity_ratio(h),
        })
        .collect()
}

/// Sparsity of a CoNet model's transfer matrices plus the history series.
pub fn sparsity_report(model: Option<&Model>, history: &[EpochStats]) -> Result<SparsityReport> {
    if let Some(m) = model {
        if m.architecture() != Architecture::CoNet {
            return Err(Error::config(format!(
                "{} has no transfer matrices; sparsity reports need a CoNet/SCoNet model",
                m.config().display_name()
            )));
        }
    } else if history.is_empty() || history.iter().all(|s| s.h_zero_ratios.is_empty()) {
        return Err(Error::config("history carries no transfer-matrix ratios"));
    }
    let matrices = model.map(|m| sparsity_of(m.transfer_matrices())).unwrap_or_else(|| {
        let last = history.last().expect("checked above");
        last.h_zero_ratios
            .iter()
            .enumerate()
            .map(|(l, &r)| MatrixSparsity {
                name: format!("H{}", l + 1),
                rows: 0,
                cols: 0,
                zero_ratio: r,
            })
            .collect()
    });
    Ok(SparsityReport {
        matrices,
        series: history.iter().map(|s| (s.epoch, s.h_zero_ratios.clone())).collect(),
    })
}
