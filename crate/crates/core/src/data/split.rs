use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{hex, CrossDomainDataset, InteractionDataset};
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Negatives ranked against each held-out item.
pub const EVAL_NEGATIVES: usize = 99;

/// Users need this many target interactions to be held out (test,
/// validation and at least one left for training).
pub const MIN_EVAL_INTERACTIONS: usize = 3;

/// Leave-one-out split of the target domain.
///
/// The source domain is never split. Evaluated users have one test and one
/// validation item removed from their target training interactions and a
/// frozen list of [`EVAL_NEGATIVES`] items they never interacted with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LooSplit {
    pub train: CrossDomainDataset,
    pub validation: Vec<Option<usize>>,
    pub test: Vec<Option<usize>>,
    /// Empty for users that are not evaluated.
    pub eval_negatives: Vec<Vec<usize>>,
}

impl LooSplit {
    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn is_evaluated(&self, user: usize) -> bool {
        self.test[user].is_some()
    }

    pub fn evaluated_users(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_users()).filter(|&u| self.is_evaluated(u))
    }

    pub fn num_evaluated(&self) -> usize {
        self.test.iter().filter(|t| t.is_some()).count()
    }

    /// Every target item of `user` across train, validation and test.
    pub fn all_target_items(&self, user: usize) -> Vec<usize> {
        let mut items = self.train.target.items_of(user).to_vec();
        items.extend(self.validation[user]);
        items.extend(self.test[user]);
        items.sort_unstable();
        items
    }

    /// Hex SHA-256 over the training data and all held-out conditions.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        self.train.target.hash_into(&mut h);
        self.train.source.hash_into(&mut h);
        for u in 0..self.num_users() {
            for held in [self.validation[u], self.test[u]] {
                h.update(held.map_or(u64::MAX, |i| i as u64).to_le_bytes());
            }
            h.update((self.eval_negatives[u].len() as u64).to_le_bytes());
            for &j in &self.eval_negatives[u] {
                h.update((j as u64).to_le_bytes());
            }
        }
        hex(&h.finalize())
    }

    pub fn to_manifest(&self, seed: Option<u64>) -> SplitManifest {
        let mut test = BTreeMap::new();
        let mut validation = BTreeMap::new();
        let mut eval_negatives = BTreeMap::new();
        for u in self.evaluated_users() {
            test.insert(u, self.test[u].expect("evaluated"));
            validation.insert(u, self.validation[u].expect("evaluated"));
            eval_negatives.insert(u, self.eval_negatives[u].clone());
        }
        SplitManifest {
            fingerprint: self.fingerprint(),
            num_users: self.num_users(),
            num_target_items: self.train.target.num_items(),
            seed,
            test,
            validation,
            eval_negatives,
        }
    }

    /// Rebuilds a split from the full dataset and a previously exported
    /// manifest, checking the fingerprint.
    pub fn from_manifest(data: &CrossDomainDataset, manifest: &SplitManifest) -> Result<Self> {
        let m = data.num_users();
        if manifest.num_users != m || manifest.num_target_items != data.target.num_items() {
            return Err(Error::data(format!(
                "split manifest is for {} users x {} items, dataset has {} x {}",
                manifest.num_users,
                manifest.num_target_items,
                m,
                data.target.num_items()
            )));
        }
        let mut test = vec![None; m];
        let mut validation = vec![None; m];
        let mut eval_negatives = vec![Vec::new(); m];
        let mut adjacency: Vec<Vec<usize>> = (0..m).map(|u| data.target.items_of(u).to_vec()).collect();
        for (&u, &t) in &manifest.test {
            let v = *manifest
                .validation
                .get(&u)
                .ok_or_else(|| Error::data(format!("manifest: user {u} has test but no validation")))?;
            let negs = manifest
                .eval_negatives
                .get(&u)
                .ok_or_else(|| Error::data(format!("manifest: user {u} has no negatives")))?;
            if u >= m {
                return Err(Error::data(format!("manifest: user {u} out of range")));
            }
            for held in [t, v] {
                let pos = adjacency[u].binary_search(&held).map_err(|_| {
                    Error::data(format!("manifest: item {held} is not an interaction of user {u}"))
                })?;
                adjacency[u].remove(pos);
            }
            test[u] = Some(t);
            validation[u] = Some(v);
            eval_negatives[u] = negs.clone();
        }
        let target = InteractionDataset::from_adjacency(data.target.num_items(), adjacency);
        let split = LooSplit {
            train: CrossDomainDataset::new(
                target,
                data.source.clone(),
                data.user_ids.clone(),
                data.target_item_ids.clone(),
                data.source_item_ids.clone(),
            )?,
            validation,
            test,
            eval_negatives,
        };
        let fp = split.fingerprint();
        if fp != manifest.fingerprint {
            return Err(Error::data(format!(
                "split fingerprint mismatch: manifest {} vs rebuilt {fp}",
                manifest.fingerprint
            )));
        }
        Ok(split)
    }
}

/// JSON export of a split's held-out conditions, keyed by user index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub fingerprint: String,
    pub num_users: usize,
    pub num_target_items: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub test: BTreeMap<usize, usize>,
    pub validation: BTreeMap<usize, usize>,
    pub eval_negatives: BTreeMap<usize, Vec<usize>>,
}

/// Leave-one-out split: for every user with at least
/// [`MIN_EVAL_INTERACTIONS`] target interactions, one uniformly chosen
/// interaction becomes the test item and another the validation item.
pub fn loo_split(data: &CrossDomainDataset, rng: &mut Rng) -> Result<LooSplit> {
    let m = data.num_users();
    let n = data.target.num_items();
    let mut adjacency = Vec::with_capacity(m);
    let mut test = vec![None; m];
    let mut validation = vec![None; m];
    let mut eval_negatives = vec![Vec::new(); m];
    for u in 0..m {
        let full = data.target.items_of(u);
        let mut items = full.to_vec();
        if items.len() >= MIN_EVAL_INTERACTIONS {
            let t = items.remove(rng.below(items.len()));
            let v = items.remove(rng.below(items.len()));
            test[u] = Some(t);
            validation[u] = Some(v);
            eval_negatives[u] = sample_negatives(full, n, rng).map_err(|e| match e {
                Error::Data(msg) => Error::data(format!("user {u}: {msg}")),
                other => other,
            })?;
        }
        adjacency.push(items);
    }
    let target = InteractionDataset::from_adjacency(n, adjacency);
    Ok(LooSplit {
        train: CrossDomainDataset::new(
            target,
            data.source.clone(),
            data.user_ids.clone(),
            data.target_item_ids.clone(),
            data.source_item_ids.clone(),
        )?,
        validation,
        test,
        eval_negatives,
    })
}

/// Draws [`EVAL_NEGATIVES`] distinct target items that `user` never
/// interacted with in any partition of `split`.
pub fn sample_eval_negatives(split: &LooSplit, user: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if !split.is_evaluated(user) {
        return Err(Error::data(format!("user {user} is not evaluated")));
    }
    sample_negatives(&split.all_target_items(user), split.train.target.num_items(), rng)
}

/// Uniform sample without replacement from `0..num_items` minus `taken`
/// (sorted). Rejection sampling when eligible items are plentiful,
/// enumeration otherwise.
fn sample_negatives(taken: &[usize], num_items: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let eligible = num_items - taken.len();
    if eligible < EVAL_NEGATIVES {
        return Err(Error::data(format!(
            "only {eligible} non-interacted items, need {EVAL_NEGATIVES}"
        )));
    }
    if eligible >= 4 * EVAL_NEGATIVES {
        let mut chosen = HashSet::with_capacity(EVAL_NEGATIVES);
        let mut out = Vec::with_capacity(EVAL_NEGATIVES);
        while out.len() < EVAL_NEGATIVES {
            let j = rng.below(num_items);
            if taken.binary_search(&j).is_err() && chosen.insert(j) {
                out.push(j);
            }
        }
        Ok(out)
    } else {
        let pool: Vec<usize> = (0..num_items)
            .filter(|j| taken.binary_search(j).is_err())
            .collect();
        Ok(rng
            .sample_distinct(pool.len(), EVAL_NEGATIVES)
            .into_iter()
            .map(|k| pool[k])
            .collect())
    }
}

/// Outcome of [`reduce_training`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub per_user_removal: usize,
    pub removed: usize,
    pub original: usize,
    /// `100 · removed / original`.
    pub percent: f64,
}

/// Removes up to `per_user_removal` uniformly chosen target training
/// interactions per user, never leaving a user with fewer than one.
/// Held-out items and negatives are untouched.
pub fn reduce_training(
    split: &LooSplit,
    per_user_removal: usize,
    rng: &mut Rng,
) -> (LooSplit, ReductionSummary) {
    let original = split.train.target.len();
    let mut reduced = split.clone();
    let mut removed = 0;
    {
        let adjacency = reduced.train.target.adjacency_mut();
        for items in adjacency.iter_mut() {
            let k = per_user_removal.min(items.len().saturating_sub(1));
            for _ in 0..k {
                items.remove(rng.below(items.len()));
            }
            removed += k;
        }
    }
    reduced.train.target.recount();
    let percent = if original == 0 {
        0.0
    } else {
        100.0 * removed as f64 / original as f64
    };
    (
        reduced,
        ReductionSummary {
            per_user_removal,
            removed,
            original,
            percent,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(per_user: &[usize], num_items: usize) -> CrossDomainDataset {
        let target = InteractionDataset::from_pairs(
            per_user.len(),
            num_items,
            per_user
                .iter()
                .enumerate()
                .flat_map(|(u, &k)| (0..k).map(move |j| (u, (u * 7 + j * 3) % num_items))),
        )
        .unwrap();
        let source = InteractionDataset::from_pairs(per_user.len(), 5, (0..per_user.len()).map(|u| (u, u % 5))).unwrap();
        CrossDomainDataset::with_generated_ids(target, source).unwrap()
    }

    #[test]
    fn ten_interactions_leave_eight() {
        let d = dataset(&[10, 2], 200);
        let s = loo_split(&d, &mut Rng::new(1)).unwrap();
        assert_eq!(s.train.target.items_of(0).len(), 8);
        assert!(s.is_evaluated(0));
        assert_eq!(s.train.target.items_of(1).len(), 2);
        assert!(!s.is_evaluated(1));
        assert!(s.eval_negatives[1].is_empty());
        assert_eq!(s.train.source, d.source);
    }

    #[test]
    fn split_is_a_disjoint_partition() {
        let d = dataset(&[3, 4, 10, 25, 1, 0, 7], 300);
        let s = loo_split(&d, &mut Rng::new(9)).unwrap();
        for u in 0..d.num_users() {
            assert_eq!(s.all_target_items(u), d.target.items_of(u));
            if let (Some(t), Some(v)) = (s.test[u], s.validation[u]) {
                assert_ne!(t, v);
                assert!(!s.train.target.contains(u, t));
                assert!(!s.train.target.contains(u, v));
                let negs = &s.eval_negatives[u];
                assert_eq!(negs.len(), EVAL_NEGATIVES);
                let uniq: HashSet<_> = negs.iter().collect();
                assert_eq!(uniq.len(), EVAL_NEGATIVES);
                assert!(negs.iter().all(|j| !d.target.contains(u, *j)));
            }
        }
    }

    #[test]
    fn split_is_deterministic() {
        let d = dataset(&[5, 6, 7], 150);
        let a = loo_split(&d, &mut Rng::new(4)).unwrap();
        let b = loo_split(&d, &mut Rng::new(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn negatives_forced_when_exactly_99_eligible() {
        let target = InteractionDataset::from_pairs(1, 100, [(0, 42)]).unwrap();
        let source = InteractionDataset::from_pairs(1, 1, [(0, 0)]).unwrap();
        let d = CrossDomainDataset::with_generated_ids(target, source).unwrap();
        let mut negs = sample_negatives(d.target.items_of(0), 100, &mut Rng::new(0)).unwrap();
        negs.sort_unstable();
        let expected: Vec<usize> = (0..100).filter(|&j| j != 42).collect();
        assert_eq!(negs, expected);
    }

    #[test]
    fn too_few_items_is_an_error() {
        let d = dataset(&[5], 50);
        assert!(matches!(loo_split(&d, &mut Rng::new(0)), Err(Error::Data(_))));
    }

    #[test]
    fn eval_negatives_are_seeded() {
        let d = dataset(&[5, 6], 400);
        let s = loo_split(&d, &mut Rng::new(2)).unwrap();
        let a = sample_eval_negatives(&s, 0, &mut Rng::new(8)).unwrap();
        let b = sample_eval_negatives(&s, 0, &mut Rng::new(8)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|j| !s.all_target_items(0).contains(j)));
    }

    #[test]
    fn manifest_round_trip() {
        let d = dataset(&[5, 2, 9, 4], 300);
        let s = loo_split(&d, &mut Rng::new(5)).unwrap();
        let json = serde_json::to_string(&s.to_manifest(Some(5))).unwrap();
        let manifest: SplitManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(LooSplit::from_manifest(&d, &manifest).unwrap(), s);

        let mut tampered = manifest.clone();
        tampered.eval_negatives.get_mut(&0).unwrap().reverse();
        assert!(LooSplit::from_manifest(&d, &tampered).is_err());
    }

    #[test]
    fn reduction_rules() {
        let d = dataset(&[3, 10, 12], 300);
        let s = loo_split(&d, &mut Rng::new(3)).unwrap();

        let (same, summary) = reduce_training(&s, 0, &mut Rng::new(1));
        assert_eq!(same, s);
        assert_eq!(summary.removed, 0);

        // user 0 is down to one training item and must keep it
        let (r, summary) = reduce_training(&s, 2, &mut Rng::new(1));
        assert_eq!(r.train.target.items_of(0).len(), 1);
        assert_eq!(r.train.target.items_of(1).len(), 6);
        assert_eq!(summary.removed, 4);
        assert_eq!(r.train.target.len(), s.train.target.len() - 4);
        assert_eq!(r.test, s.test);
        assert_eq!(r.validation, s.validation);
        assert_eq!(r.eval_negatives, s.eval_negatives);
        assert!((summary.percent - 100.0 * 4.0 / 19.0).abs() < 1e-12);
    }
}
