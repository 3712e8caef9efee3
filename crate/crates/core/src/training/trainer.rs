use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::debug;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState, StepScope};
use super::pairing::{pair_item, PairingMode};
use super::proximal::{proximal_l1_in_place, sparsity_ratio};
use crate::data::{BatchSampler, Domain, LooSplit};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_with, EvalOptions, ModelScorer, Partition};
use crate::models::{backward_into, lasso_penalty, Labels, Model};
use crate::numerics::Rng;

/// Optimizer and schedule settings. The sparsity weight λ lives in the
/// model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Positives per batch; each brings `negative_ratio` sampled negatives.
    pub batch_size: usize,
    pub negative_ratio: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Epochs without a validation NDCG improvement before stopping
    /// (0 disables early stopping).
    pub patience: usize,

    pub seed: u64,
    /// Keep the transfer matrices at their current values.
    pub freeze_transfer: bool,
    pub eval: EvalOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 128,
            negative_ratio: 1,
            epochs: 30,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 5,
            seed: 0,
            freeze_transfer: false,
            eval: EvalOptions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam epsilon must be positive"));
        }
        if self.eval.top_n == 0 {
            return Err(Error::config("top_n must be at least 1"));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

/// Summary of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    /// Mean cross-entropy per target-labeled example.
    pub loss_target: f64,
    /// Mean cross-entropy per source-labeled example (0 for MLP).
    pub loss_source: f64,
    /// ℓ1 penalty at the end of the epoch.
    pub penalty: f64,
    pub val_hr: f64,
    pub val_ndcg: f64,
    pub val_mrr: f64,
    pub h_zero_ratios: Vec<f64>,
}

/// Optimizer state and batch streams for one model on one split.
///
/// A round is one target batch followed, for coupled models, by one source
/// batch. An epoch is enough rounds for the larger domain to complete one
/// pass; the smaller domain's stream wraps around.
pub struct Trainer<'a> {
    split: &'a LooSplit,
    config: TrainConfig,
    model: Model,
    grads: Model,
    adam: AdamState,
    samplers: [BatchSampler; 2],
    batch_rngs: [Rng; 2],
    pair_rngs: [Rng; 2],
    epochs_done: usize,
    sums: [(f64, usize); 2],
}

fn slot(domain: Domain) -> usize {
    match domain {
        Domain::Target => 0,
        Domain::Source => 1,
    }
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, split: &'a LooSplit, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let shape = model.shape();
        let data = &split.train;
        if shape.num_users != data.num_users() || shape.num_target_items != data.target.num_items() {
            return Err(Error::config(format!(
                "model is sized for {} users / {} target items but the split has {} / {}",
                shape.num_users,
                shape.num_target_items,
                data.num_users(),
                data.target.num_items()
            )));
        }
        if model.architecture().is_coupled() && shape.num_source_items != data.source.num_items() {
            return Err(Error::config(format!(
                "model is sized for {} source items but the split has {}",
                shape.num_source_items,
                data.source.num_items()
            )));
        }
        let seed = config.seed;
        Ok(Self {
            grads: model.zeros_like(),
            adam: AdamState::new(&model),
            samplers: [
                BatchSampler::new(&data.target, Domain::Target),
                BatchSampler::new(&data.source, Domain::Source),
            ],
            batch_rngs: [
                Rng::derived(seed, "train/batches/target"),
                Rng::derived(seed, "train/batches/source"),
            ],
            pair_rngs: [
                Rng::derived(seed, "train/pairing/target"),
                Rng::derived(seed, "train/pairing/source"),
            ],
            model,
            split,
            config,
            epochs_done: 0,
            sums: [(0.0, 0); 2],
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn adam_state(&self) -> &AdamState {
        &self.adam
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Rounds per epoch: one pass over the larger domain of the split.
    /// Single-domain models follow the same schedule, skipping the source
    /// batches, so every architecture takes the same target steps.
    pub fn rounds_per_epoch(&self) -> usize {
        let bs = self.config.batch_size;
        self.samplers[0]
            .batches_per_pass(bs)
            .max(self.samplers[1].batches_per_pass(bs))
    }

    /// One target batch, then one source batch for coupled models.
    pub fn train_round(&mut self) -> Result<()> {
        self.step(Domain::Target)?;
        if self.model.architecture().is_coupled() {
            self.step(Domain::Source)?;
        }
        Ok(())
    }

    /// One optimizer step on the next batch of `domain`. Returns the summed
    /// loss and the number of examples.
    pub fn step(&mut self, domain: Domain) -> Result<(f64, usize)> {
        let d = slot(domain);
        let data = self.split.train.domain(domain);
        let other = self.split.train.domain(domain.other());
        let batch = self.samplers[d].next_batch(
            data,
            self.config.batch_size,
            self.config.negative_ratio,
            &mut self.batch_rngs[d],
        );
        if batch.is_empty() {
            return Ok((0.0, 0));
        }
        for (_, g) in self.grads.blocks_mut() {
            g.fill(0.0);
        }
        let coupled = self.model.architecture().is_coupled();
        let mut total = 0.0;
        for ex in &batch {
            let paired = if coupled {
                pair_item(other.items_of(ex.user), &mut self.pair_rngs[d], PairingMode::Train)
            } else {
                None
            };
            let r = ex.target();
            let (target_item, source_item, labels) = match domain {
                Domain::Target => (Some(ex.item), paired, Labels::target(r)),
                Domain::Source => (paired, Some(ex.item), Labels::source(r)),
            };
            let (_, _, trace) = self.model.forward(ex.user, target_item, source_item)?;
            let loss = backward_into(&self.model, &trace, labels, &mut self.grads)?;
            total += loss.target + loss.source;
        }
        if !total.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite {} loss at epoch {}, optimizer step {}",
                domain.as_str(),
                self.epochs_done + 1,
                self.adam.t + 1
            )));
        }
        let scope = StepScope {
            groups: [true, domain == Domain::Target, domain == Domain::Source],
            freeze_transfer: self.config.freeze_transfer,
            grad_scale: 1.0 / batch.len() as f64,
        };
        adam_step(&mut self.model, &self.grads, &mut self.adam, &self.config.adam(), scope)?;
        let lambda = self.model.config().effective_lambda();
        if lambda > 0.0 && !self.config.freeze_transfer {
            let threshold = self.config.learning_rate * lambda;
            for h in self.model.transfer_matrices_mut() {
                proximal_l1_in_place(h, threshold);
            }
        }
        self.sums[d].0 += total;
        self.sums[d].1 += batch.len();
        Ok((total, batch.len()))
    }

    /// Runs one epoch and evaluates on the validation items.
    pub fn train_epoch(&mut self) -> Result<EpochStats> {
        self.sums = [(0.0, 0); 2];
        for _ in 0..self.rounds_per_epoch() {
            self.train_round()?;
        }
        self.epochs_done += 1;
        let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
        let report = evaluate_with(
            &ModelScorer::new(&self.model, self.split),
            self.split,
            Partition::Validation,
            self.config.eval,
        )?;
        let hs = self.model.transfer_matrices();
        let stats = EpochStats {
            epoch: self.epochs_done,
            loss_target: mean(self.sums[0]),
            loss_source: mean(self.sums[1]),
            penalty: lasso_penalty(hs, self.model.config().effective_lambda()),
            val_hr: report.hr,
            val_ndcg: report.ndcg,
            val_mrr: report.mrr,
            h_zero_ratios: hs.iter().map(sparsity_ratio).collect(),
        };
        debug!(
            "{} epoch {}: loss_t {:.5} loss_s {:.5} val_ndcg {:.4}",
            self.model.config().display_name(),
            stats.epoch,
            stats.loss_target,
            stats.loss_source,
            stats.val_ndcg
        );
        Ok(stats)
    }
}

/// One epoch of a fresh trainer (optimizer state starts at zero).
pub fn train_epoch(model: Model, split: &LooSplit, config: &TrainConfig) -> Result<(Model, EpochStats)> {
    let mut trainer = Trainer::new(model, split, config.clone())?;
    let stats = trainer.train_epoch()?;
    Ok((trainer.into_model(), stats))
}

/// Trains for up to `config.epochs` epochs with early stopping on
/// validation NDCG and returns the best-validation model.
pub fn fit(model: Model, split: &LooSplit, config: &TrainConfig) -> Result<(Model, Vec<EpochStats>)> {
    let mut best = model.clone();
    let mut trainer = Trainer::new(model, split, config.clone())?;
    let mut history = Vec::new();
    let mut best_ndcg = f64::NEG_INFINITY;
    let mut stale = 0;
    for _ in 0..config.epochs {
        let stats = trainer.train_epoch()?;
        if stats.val_ndcg > best_ndcg {
            best_ndcg = stats.val_ndcg;
            best = trainer.model().clone();
            stale = 0;
        } else {
            stale += 1;
        }
        history.push(stats);
        if config.patience > 0 && stale >= config.patience {
            break;
        }
    }
    Ok((best, history))
}

/// Epoch history as JSON lines.
pub fn write_history(path: &Path, history: &[EpochStats]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in history {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<EpochStats>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: k + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
