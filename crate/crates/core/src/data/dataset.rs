use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Which half of a cross-domain problem an interaction belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Target,
    Source,
}

impl Domain {
    pub fn other(self) -> Self {
        match self {
            Domain::Target => Domain::Source,
            Domain::Source => Domain::Target,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Target => "target",
            Domain::Source => "source",
        }
    }
}

/// Binary implicit feedback for one domain, stored as per-user sorted
/// adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionDataset {
    num_items: usize,
    adjacency: Vec<Vec<usize>>,
    len: usize,
}

impl InteractionDataset {
    /// Builds a dataset from `(user, item)` pairs, dropping duplicates.
    pub fn from_pairs(
        num_users: usize,
        num_items: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); num_users];
        for (u, i) in pairs {
            if u >= num_users || i >= num_items {
                return Err(Error::data(format!(
                    "interaction ({u}, {i}) out of range for {num_users} users x {num_items} items"
                )));
            }
            adjacency[u].push(i);
        }
        Ok(Self::from_adjacency(num_items, adjacency))
    }

    /// Normalizes (sorts and dedups) each list. Indices must be in range.
    pub(crate) fn from_adjacency(num_items: usize, mut adjacency: Vec<Vec<usize>>) -> Self {
        let mut len = 0;
        for items in &mut adjacency {
            items.sort_unstable();
            items.dedup();
            debug_assert!(items.last().is_none_or(|&i| i < num_items));
            len += items.len();
        }
        Self {
            num_items,
            adjacency,
            len,
        }
    }

    pub fn num_users(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Number of interactions.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn density(&self) -> f64 {
        self.len as f64 / (self.num_users() as f64 * self.num_items as f64)
    }

    /// Sorted items of user `u`.
    pub fn items_of(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.adjacency[u].binary_search(&i).is_ok()
    }

    /// All pairs in user-then-item order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, items)| items.iter().map(move |&i| (u, i)))
    }

    pub(crate) fn adjacency_mut(&mut self) -> &mut Vec<Vec<usize>> {
        &mut self.adjacency
    }

    pub(crate) fn recount(&mut self) {
        self.len = self.adjacency.iter().map(Vec::len).sum();
    }

    pub(crate) fn hash_into(&self, hasher: &mut Sha256) {
        hasher.update((self.num_users() as u64).to_le_bytes());
        hasher.update((self.num_items as u64).to_le_bytes());
        for items in &self.adjacency {
            hasher.update((items.len() as u64).to_le_bytes());
            for &i in items {
                hasher.update((i as u64).to_le_bytes());
            }
        }
    }
}

/// Target and source interactions over one shared user index space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossDomainDataset {
    pub target: InteractionDataset,
    pub source: InteractionDataset,
    pub user_ids: Vec<String>,
    pub target_item_ids: Vec<String>,
    pub source_item_ids: Vec<String>,
}

impl CrossDomainDataset {
    pub fn new(
        target: InteractionDataset,
        source: InteractionDataset,
        user_ids: Vec<String>,
        target_item_ids: Vec<String>,
        source_item_ids: Vec<String>,
    ) -> Result<Self> {
        if target.num_users() != source.num_users() {
            return Err(Error::data(format!(
                "domains disagree on user count: target {} vs source {}",
                target.num_users(),
                source.num_users()
            )));
        }
        if user_ids.len() != target.num_users()
            || target_item_ids.len() != target.num_items()
            || source_item_ids.len() != source.num_items()
        {
            return Err(Error::data("vocabulary sizes do not match dataset shapes"));
        }
        Ok(Self {
            target,
            source,
            user_ids,
            target_item_ids,
            source_item_ids,
        })
    }

    /// Dataset with synthetic `u{n}` / `t{n}` / `s{n}` identifiers.
    pub fn with_generated_ids(target: InteractionDataset, source: InteractionDataset) -> Result<Self> {
        let users = (0..target.num_users()).map(|u| format!("u{u}")).collect();
        let t = (0..target.num_items()).map(|i| format!("t{i}")).collect();
        let s = (0..source.num_items()).map(|i| format!("s{i}")).collect();
        Self::new(target, source, users, t, s)
    }

    pub fn num_users(&self) -> usize {
        self.target.num_users()
    }

    pub fn domain(&self, domain: Domain) -> &InteractionDataset {
        match domain {
            Domain::Target => &self.target,
            Domain::Source => &self.source,
        }
    }

    /// Hex SHA-256 over both domains' shapes and adjacency.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.target.hash_into(&mut h);
        self.source.hash_into(&mut h);
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_and_density() {
        let d = InteractionDataset::from_pairs(2, 3, [(0, 1), (0, 1), (1, 2), (0, 0)]).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.items_of(0), &[0, 1]);
        assert!((d.density() - 0.5).abs() < 1e-15);
        assert!(d.contains(1, 2));
        assert!(!d.contains(1, 0));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(InteractionDataset::from_pairs(2, 2, [(2, 0)]).is_err());
        assert!(InteractionDataset::from_pairs(2, 2, [(0, 2)]).is_err());
    }

    #[test]
    fn user_counts_must_agree() {
        let t = InteractionDataset::from_pairs(2, 2, [(0, 0)]).unwrap();
        let s = InteractionDataset::from_pairs(3, 2, [(0, 0)]).unwrap();
        assert!(CrossDomainDataset::with_generated_ids(t, s).is_err());
    }
}
