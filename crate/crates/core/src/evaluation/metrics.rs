use serde::{Deserialize, Serialize};

use crate::data::EVAL_NEGATIVES;
use crate::error::{Error, Result};

/// Cutoff of the ranked list.
pub const DEFAULT_TOP_N: usize = 10;

/// 1-based rank of a user's held-out item among its candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingResult {
    pub user: usize,
    pub hit_position: usize,
}

/// Cutoff settings shared by the three metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub top_n: usize,
    /// Apply the cutoff to MRR too (otherwise MRR averages `1/p` over all
    /// positions).
    pub mrr_cutoff: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            top_n: DEFAULT_TOP_N,
            mrr_cutoff: true,
        }
    }
}

/// `1 + #{negatives scoring at least as high}`: ties rank against the
/// held-out item.
pub fn rank_test_item(test_score: f64, negative_scores: &[f64]) -> Result<usize> {
    if negative_scores.len() != EVAL_NEGATIVES {
        return Err(Error::data(format!(
            "expected {EVAL_NEGATIVES} negative scores, got {}",
            negative_scores.len()
        )));
    }
    rank_among(test_score, negative_scores)
}

/// [`rank_test_item`] for any number of negatives.
pub fn rank_among(test_score: f64, negative_scores: &[f64]) -> Result<usize> {
    if !test_score.is_finite() || negative_scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite ranking score".into()));
    }
    Ok(1 + negative_scores.iter().filter(|&&s| s >= test_score).count())
}

pub fn hit_at(p: usize, top_n: usize) -> f64 {
    if p <= top_n {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at(p: usize, top_n: usize) -> f64 {
    if p <= top_n {
        std::f64::consts::LN_2 / ((p + 1) as f64).ln()
    } else {
        0.0
    }
}

pub fn reciprocal_rank_at(p: usize, top_n: usize) -> f64 {
    if p <= top_n {
        1.0 / p as f64
    } else {
        0.0
    }
}

fn mean_of(results: &[RankingResult], f: impl Fn(usize) -> f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::data("no evaluated users"));
    }
    Ok(results.iter().map(|r| f(r.hit_position)).sum::<f64>() / results.len() as f64)
}

pub fn hit_ratio(results: &[RankingResult], top_n: usize) -> Result<f64> {
    mean_of(results, |p| hit_at(p, top_n))
}

pub fn ndcg(results: &[RankingResult], top_n: usize) -> Result<f64> {
    mean_of(results, |p| ndcg_at(p, top_n))
}

pub fn mrr(results: &[RankingResult], top_n: usize) -> Result<f64> {
    mean_of(results, |p| reciprocal_rank_at(p, top_n))
}

/// MRR without the cutoff.
pub fn mrr_uncut(results: &[RankingResult]) -> Result<f64> {
    mean_of(results, |p| 1.0 / p as f64)
}

/// Aggregated metrics plus the per-user positions they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub dataset: String,
    #[serde(rename = "topN")]
    pub top_n: usize,
    pub hr: f64,
    pub ndcg: f64,
    pub mrr: f64,
    pub num_users: usize,
    pub mrr_cutoff: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_user: Vec<RankingResult>,
}

impl MetricsReport {
    pub fn from_results(results: Vec<RankingResult>, options: EvalOptions) -> Result<Self> {
        let mrr = if options.mrr_cutoff {
            mrr(&results, options.top_n)?
        } else {
            mrr_uncut(&results)?
        };
        Ok(Self {
            model: String::new(),
            dataset: String::new(),
            top_n: options.top_n,
            hr: hit_ratio(&results, options.top_n)?,
            ndcg: ndcg(&results, options.top_n)?,
            mrr,
            num_users: results.len(),
            mrr_cutoff: options.mrr_cutoff,
            per_user: results,
        })
    }

    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            top_n: self.top_n,
            mrr_cutoff: self.mrr_cutoff,
        }
    }

    pub fn labeled(mut self, model: impl Into<String>, dataset: impl Into<String>) -> Self {
        self.model = model.into();
        self.dataset = dataset.into();
        self
    }

    /// Per-user NDCG contributions in user order.
    pub fn per_user_ndcg(&self) -> Vec<f64> {
        self.per_user.iter().map(|r| ndcg_at(r.hit_position, self.top_n)).collect()
    }

    pub fn per_user_hr(&self) -> Vec<f64> {
        self.per_user.iter().map(|r| hit_at(r.hit_position, self.top_n)).collect()
    }

    pub fn per_user_mrr(&self) -> Vec<f64> {
        self.per_user
            .iter()
            .map(|r| {
                if self.mrr_cutoff {
                    reciprocal_rank_at(r.hit_position, self.top_n)
                } else {
                    1.0 / r.hit_position as f64
                }
            })
            .collect()
    }

    /// Same report without the per-user list.
    pub fn summary(&self) -> Self {
        Self {
            per_user: Vec::new(),
            ..self.clone()
        }
    }

    /// Rebuilds the aggregates from `per_user`.
    pub fn recompute(&self) -> Result<Self> {
        Ok(Self::from_results(self.per_user.clone(), self.options())?.labeled(&self.model, &self.dataset))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn results(ps: &[usize]) -> Vec<RankingResult> {
        ps.iter()
            .enumerate()
            .map(|(user, &hit_position)| RankingResult { user, hit_position })
            .collect()
    }

    #[test]
    fn ranking_examples() {
        let mut neg = vec![0.1; 99];
        assert_eq!(rank_test_item(0.9, &neg).unwrap(), 1);
        assert_eq!(rank_test_item(0.0, &neg).unwrap(), 100);
        neg[3] = 0.5;
        neg[40] = 0.5;
        assert_eq!(rank_test_item(0.5, &neg).unwrap(), 3);
        assert!(rank_test_item(f64::NAN, &neg).is_err());
        assert!(rank_test_item(0.5, &neg[..98]).is_err());
    }

    #[test]
    fn hit_ratio_examples() {
        assert_eq!(hit_ratio(&results(&[1, 1, 1]), 10).unwrap(), 1.0);
        assert_eq!(hit_ratio(&results(&[11, 11]), 10).unwrap(), 0.0);
        assert_eq!(hit_ratio(&results(&[1, 5, 11, 50]), 10).unwrap(), 0.5);
        assert!(hit_ratio(&[], 10).is_err());
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at(1, 10), 1.0);
        assert_eq!(ndcg_at(3, 10), 0.5);
        assert_eq!(ndcg(&results(&[1, 3]), 10).unwrap(), 0.75);
        assert_eq!(ndcg_at(11, 10), 0.0);
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(reciprocal_rank_at(1, 10), 1.0);
        assert_eq!(reciprocal_rank_at(4, 10), 0.25);
        assert_eq!(mrr(&results(&[2, 20]), 10).unwrap(), 0.25);
        assert_eq!(mrr_uncut(&results(&[2, 20])).unwrap(), 0.275);
    }

    #[test]
    fn report_json_key_order() {
        let r = MetricsReport::from_results(results(&[1, 3]), EvalOptions::default())
            .unwrap()
            .labeled("conet", "synthetic");
        let json = serde_json::to_string(&r.summary()).unwrap();
        assert!(json.starts_with(r#"{"model":"conet","dataset":"synthetic","topN":10,"hr":1.0,"ndcg":0.75"#));
        assert!(!json.contains("per_user"));
        let back: MetricsReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn bounds(ps in prop::collection::vec(1usize..=100, 1..60)) {
            let r = MetricsReport::from_results(results(&ps), EvalOptions::default()).unwrap();
            prop_assert!(0.0 <= r.mrr && r.mrr <= r.ndcg && r.ndcg <= r.hr && r.hr <= 1.0);
            prop_assert_eq!(r.recompute().unwrap(), r);
        }

        #[test]
        fn monotone_in_added_users(ps in prop::collection::vec(1usize..=100, 1..60)) {
            let base = MetricsReport::from_results(results(&ps), EvalOptions::default()).unwrap();
            let mut better = ps.clone();
            better.push(1);
            let up = MetricsReport::from_results(results(&better), EvalOptions::default()).unwrap();
            prop_assert!(up.hr >= base.hr && up.ndcg >= base.ndcg && up.mrr >= base.mrr);
            let mut worse = ps.clone();
            worse.push(100);
            let down = MetricsReport::from_results(results(&worse), EvalOptions::default()).unwrap();
            prop_assert!(down.hr <= base.hr && down.ndcg <= base.ndcg && down.mrr <= base.mrr);
        }

        #[test]
        fn rank_is_invariant_under_increasing_maps(
            scores in prop::collection::vec(-5.0f64..5.0, 100),
        ) {
            let p = rank_test_item(scores[0], &scores[1..]).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|&s| (0.7 * s).exp() + s * s * s).collect();
            prop_assert_eq!(rank_test_item(mapped[0], &mapped[1..]).unwrap(), p);
        }
    }
}
