use serde::{Deserialize, Serialize};

use super::dataset::{Domain, InteractionDataset};
use super::split::LooSplit;
use crate::numerics::Rng;

/// One labeled training pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub user: usize,
    pub item: usize,
    /// 1 for an observed interaction, 0 for a sampled negative.
    pub label: u8,
    pub domain: Domain,
}

impl TrainingExample {
    pub fn target(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Epoch-shuffled stream of positive interactions for one domain.
///
/// Each pass visits every training interaction once in a freshly shuffled
/// order; a batch never straddles two passes, so the final batch of a pass
/// may be short. Negatives are drawn fresh for every positive.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    domain: Domain,
    positives: Vec<(usize, usize)>,
    cursor: usize,
    passes: usize,
}

impl BatchSampler {
    pub fn new(data: &InteractionDataset, domain: Domain) -> Self {
        Self {
            domain,
            positives: data.pairs().collect(),
            cursor: 0,
            passes: 0,
        }
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn num_positives(&self) -> usize {
        self.positives.len()
    }

    pub fn batches_per_pass(&self, batch_size: usize) -> usize {
        self.positives.len().div_ceil(batch_size)
    }

    /// Completed-or-started passes so far.
    pub fn passes(&self) -> usize {
        self.passes
    }

    /// Next batch: up to `batch_size` positives, each followed by
    /// `negative_ratio` negatives for the same user.
    pub fn next_batch(
        &mut self,
        data: &InteractionDataset,
        batch_size: usize,
        negative_ratio: usize,
        rng: &mut Rng,
    ) -> Vec<TrainingExample> {
        if self.positives.is_empty() {
            return Vec::new();
        }
        if self.cursor == 0 {
            rng.shuffle(&mut self.positives);
            self.passes += 1;
        }
        let end = (self.cursor + batch_size).min(self.positives.len());
        let mut batch = Vec::with_capacity((end - self.cursor) * (1 + negative_ratio));
        for k in self.cursor..end {
            let (user, item) = self.positives[k];
            batch.push(TrainingExample {
                user,
                item,
                label: 1,
                domain: self.domain,
            });
            for _ in 0..negative_ratio {
                if let Some(j) = sample_unobserved(data, user, rng) {
                    batch.push(TrainingExample {
                        user,
                        item: j,
                        label: 0,
                        domain: self.domain,
                    });
                }
            }
        }
        self.cursor = if end == self.positives.len() { 0 } else { end };
        batch
    }
}

/// Uniform item the user has not interacted with, or `None` if the user
/// has interacted with every item.
pub fn sample_unobserved(data: &InteractionDataset, user: usize, rng: &mut Rng) -> Option<usize> {
    let seen = data.items_of(user);
    let n = data.num_items();
    if seen.len() >= n {
        return None;
    }
    if seen.len() * 2 <= n {
        loop {
            let j = rng.below(n);
            if seen.binary_search(&j).is_err() {
                return Some(j);
            }
        }
    }
    // Dense user: pick the k-th unobserved item directly.
    let mut k = rng.below(n - seen.len());
    let mut prev = 0;
    for &s in seen {
        let gap = s - prev;
        if k < gap {
            return Some(prev + k);
        }
        k -= gap;
        prev = s + 1;
    }
    Some(prev + k)
}

/// One batch from a fresh sampler over `domain`'s training interactions.
pub fn sample_training_batch(
    split: &LooSplit,
    domain: Domain,
    batch_size: usize,
    negative_ratio: usize,
    rng: &mut Rng,
) -> Vec<TrainingExample> {
    let data = split.train.domain(domain);
    BatchSampler::new(data, domain).next_batch(data, batch_size.max(1), negative_ratio, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{loo_split, CrossDomainDataset};
    use std::collections::HashSet;

    fn split() -> LooSplit {
        let target = InteractionDataset::from_pairs(
            40,
            300,
            (0..40).flat_map(|u| (0..12).map(move |j| (u, (u * 13 + j * 5) % 300))),
        )
        .unwrap();
        let source =
            InteractionDataset::from_pairs(40, 50, (0..40).flat_map(|u| (0..4).map(move |j| (u, (u + j * 11) % 50)))).unwrap();
        loo_split(&CrossDomainDataset::with_generated_ids(target, source).unwrap(), &mut Rng::new(0)).unwrap()
    }

    #[test]
    fn batch_shape_with_ratio_one() {
        let s = split();
        let b = sample_training_batch(&s, Domain::Target, 128, 1, &mut Rng::new(1));
        assert_eq!(b.len(), 256);
        assert_eq!(b.iter().filter(|e| e.label == 1).count(), 128);
    }

    #[test]
    fn ratio_zero_gives_positives_only() {
        let s = split();
        let b = sample_training_batch(&s, Domain::Source, 32, 0, &mut Rng::new(1));
        assert_eq!(b.len(), 32);
        assert!(b.iter().all(|e| e.label == 1 && s.train.source.contains(e.user, e.item)));
    }

    #[test]
    fn labels_match_membership() {
        let s = split();
        let b = sample_training_batch(&s, Domain::Target, 64, 4, &mut Rng::new(2));
        for e in &b {
            assert_eq!(e.label == 1, s.train.target.contains(e.user, e.item));
        }
    }

    #[test]
    fn pass_visits_every_positive_once() {
        let s = split();
        let data = &s.train.target;
        let mut sampler = BatchSampler::new(data, Domain::Target);
        let mut rng = Rng::new(5);
        let mut seen = HashSet::new();
        for _ in 0..sampler.batches_per_pass(100) {
            for e in sampler.next_batch(data, 100, 1, &mut rng) {
                if e.label == 1 {
                    assert!(seen.insert((e.user, e.item)));
                }
            }
        }
        assert_eq!(seen.len(), data.len());
        assert_eq!(sampler.passes(), 1);
        sampler.next_batch(data, 100, 1, &mut rng);
        assert_eq!(sampler.passes(), 2);
    }

    #[test]
    fn dense_user_negatives() {
        let d = InteractionDataset::from_pairs(1, 6, [(0, 0), (0, 1), (0, 3), (0, 4)]).unwrap();
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let j = sample_unobserved(&d, 0, &mut rng).unwrap();
            assert!(j == 2 || j == 5);
        }
        let full = InteractionDataset::from_pairs(1, 2, [(0, 0), (0, 1)]).unwrap();
        assert_eq!(sample_unobserved(&full, 0, &mut rng), None);
    }
}
