//! Leave-one-out ranking evaluation and paired significance tests.

mod metrics;
mod significance;

pub use metrics::{
    hit_at, hit_ratio, mrr, mrr_uncut, ndcg, ndcg_at, rank_among, rank_test_item, reciprocal_rank_at,
    EvalOptions, MetricsReport, RankingResult, DEFAULT_TOP_N,
};
pub use significance::paired_t_test;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LooSplit;
use crate::error::{Error, Result};
use crate::models::Model;
use crate::numerics::Rng;
use crate::training::{pair_source_item, PairingMode};

/// Deterministic `(user, target item) → score` map.
pub trait Scorer: Sync {
    fn score(&self, user: usize, item: usize) -> Result<f64>;
}

/// Scores with a trained model; coupled models pair each user with their
/// smallest-index source item.
#[derive(Debug, Clone, Copy)]
pub struct ModelScorer<'a> {
    pub model: &'a Model,
    pub split: &'a LooSplit,
}

impl<'a> ModelScorer<'a> {
    pub fn new(model: &'a Model, split: &'a LooSplit) -> Self {
        Self { model, split }
    }
}

impl Scorer for ModelScorer<'_> {
    fn score(&self, user: usize, item: usize) -> Result<f64> {
        let source = if self.model.architecture().is_coupled() {
            // eval mode never draws
            pair_source_item(user, self.split, &mut Rng::new(0), PairingMode::Eval)
        } else {
            None
        };
        Ok(self.model.forward(user, Some(item), source)?.0)
    }
}

impl<F> Scorer for F
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    fn score(&self, user: usize, item: usize) -> Result<f64> {
        self(user, item)
    }
}

/// Which held-out item is ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Partition {
    Validation,
    Test,
}

/// Test-set metrics with the default cutoff.
pub fn evaluate(scorer: &dyn Scorer, split: &LooSplit) -> Result<MetricsReport> {
    evaluate_with(scorer, split, Partition::Test, EvalOptions::default())
}

/// Ranks every evaluated user's held-out item against the split's frozen
/// negatives. Users are processed in parallel and merged in index order.
pub fn evaluate_with(
    scorer: &dyn Scorer,
    split: &LooSplit,
    partition: Partition,
    options: EvalOptions,
) -> Result<MetricsReport> {
    let users: Vec<usize> = split.evaluated_users().collect();
    if users.is_empty() {
        return Err(Error::data("split has no evaluated users"));
    }
    let results = users
        .par_iter()
        .map(|&u| {
            let held_out = match partition {
                Partition::Test => split.test[u],
                Partition::Validation => split.validation[u],
            }
            .expect("evaluated users have held-out items");
            let score = |i: usize| {
                scorer
                    .score(u, i)
                    .map_err(|e| Error::data(format!("scoring user {u}, item {i}: {e}")))
            };
            let test = score(held_out)?;
            let negatives = split.eval_negatives[u].iter().map(|&i| score(i)).collect::<Result<Vec<_>>>()?;
            let hit_position = rank_among(test, &negatives)
                .map_err(|e| Error::Numeric(format!("user {u}: {e}")))?;
            Ok(RankingResult { user: u, hit_position })
        })
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_results(results, options)
}

#[cfg(test)]
mod tests;
