//! Latent-factor generator for cross-domain implicit feedback with a
//! tunable degree of relatedness between the two domains.

use serde::{Deserialize, Serialize};

use super::dataset::{CrossDomainDataset, InteractionDataset};
use crate::error::{Error, Result};
use crate::numerics::{dot, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_target_items: usize,
    pub num_source_items: usize,
    pub latent_dim: usize,
    /// ρ: weight of the shared user factors in the source domain.
    pub relatedness: f64,
    pub target_density: f64,
    pub source_density: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_users: 1000,
            num_target_items: 1000,
            num_source_items: 1000,
            latent_dim: 4,
            relatedness: 0.9,
            target_density: 0.005,
            source_density: 0.015,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.latent_dim == 0 {
            return Err(Error::config("synthetic: num_users and latent_dim must be positive"));
        }
        if !(0.0..=1.0).contains(&self.relatedness) {
            return Err(Error::config(format!(
                "synthetic: relatedness must lie in [0, 1], got {}",
                self.relatedness
            )));
        }
        for (name, n, density) in [
            ("target", self.num_target_items, self.target_density),
            ("source", self.num_source_items, self.source_density),
        ] {
            if !(density > 0.0 && density < 1.0) {
                return Err(Error::config(format!(
                    "synthetic: {name} density must lie in (0, 1), got {density}"
                )));
            }
            let total = interaction_total(self.num_users, n, density);
            if total < self.num_users || total > self.num_users * n {
                return Err(Error::config(format!(
                    "synthetic: {name} density {density} cannot give every one of {} users \
                     between 1 and {n} interactions",
                    self.num_users
                )));
            }
        }
        Ok(())
    }

    /// Same generator with the two domains' shapes exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            num_target_items: self.num_source_items,
            num_source_items: self.num_target_items,
            target_density: self.source_density,
            source_density: self.target_density,
            ..self.clone()
        }
    }
}

fn interaction_total(m: usize, n: usize, density: f64) -> usize {
    (density * m as f64 * n as f64).round() as usize
}

/// Draws shared user factors `U`, source-side factors
/// `ρ·U + (1−ρ)·U′`, and unit-length item factors per domain, then gives
/// every user their top-scoring items until each domain hits its density.
/// Unit item vectors keep item popularity from dominating the choices.
///
/// Item factors are keyed by the domain's shape (item count and density)
/// rather than its role, so exchanging the two domains' configurations
/// with `ρ = 1` mirrors the dataset. Item indices are relabeled by first
/// appearance in user-major order, which makes the TSV export load back
/// with identical indices.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<CrossDomainDataset> {
    config.validate()?;
    let m = config.num_users;
    let k = config.latent_dim;
    let rho = config.relatedness;

    let mut rng = Rng::derived(config.seed, "synthetic/users");
    let users: Vec<f64> = (0..m * k).map(|_| rng.normal(1.0)).collect();
    let mut rng = Rng::derived(config.seed, "synthetic/users-independent");
    let independent: Vec<f64> = (0..m * k).map(|_| rng.normal(1.0)).collect();
    let source_users: Vec<f64> = users
        .iter()
        .zip(&independent)
        .map(|(u, v)| rho * u + (1.0 - rho) * v)
        .collect();

    let target = domain(config.seed, &users, m, k, config.num_target_items, config.target_density);
    let source = domain(config.seed, &source_users, m, k, config.num_source_items, config.source_density);
    CrossDomainDataset::with_generated_ids(target, source)
}

fn domain(seed: u64, users: &[f64], m: usize, k: usize, n: usize, density: f64) -> InteractionDataset {
    let label = format!("synthetic/items/{n}/{:016x}", density.to_bits());
    let mut rng = Rng::derived(seed, &label);
    let mut items: Vec<f64> = (0..n * k).map(|_| rng.normal(1.0)).collect();
    for v in items.chunks_exact_mut(k) {
        let norm = dot(v, v).sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    }

    let total = interaction_total(m, n, density);
    let (base, extra) = (total / m, total % m);
    let mut adjacency = Vec::with_capacity(m);
    let mut scores: Vec<(f64, usize)> = Vec::with_capacity(n);
    for u in 0..m {
        let count = base + usize::from(u < extra);
        let uf = &users[u * k..(u + 1) * k];
        scores.clear();
        scores.extend((0..n).map(|i| (dot(uf, &items[i * k..(i + 1) * k]), i)));
        let by_score = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if count < n {
            scores.select_nth_unstable_by(count, by_score);
        }
        adjacency.push(scores[..count].iter().map(|&(_, i)| i).collect::<Vec<_>>());
    }
    canonical(n, adjacency)
}

/// Relabels items by first appearance when users are visited in order and
/// each user's items in ascending original index; unused items go last.
fn canonical(n: usize, mut adjacency: Vec<Vec<usize>>) -> InteractionDataset {
    let mut relabel = vec![usize::MAX; n];
    let mut next = 0;
    for items in &mut adjacency {
        items.sort_unstable();
        for i in items.iter() {
            if relabel[*i] == usize::MAX {
                relabel[*i] = next;
                next += 1;
            }
        }
    }
    for slot in relabel.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = next;
        next += 1;
    }
    for items in &mut adjacency {
        for i in items.iter_mut() {
            *i = relabel[*i];
        }
    }
    InteractionDataset::from_adjacency(n, adjacency)
}
