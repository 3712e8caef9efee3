use serde::{Deserialize, Serialize};

use crate::data::LooSplit;
use crate::numerics::Rng;

/// How the other domain's item is chosen for a coupled forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingMode {
    /// Uniform over the user's interactions, drawn fresh per example.
    Train,
    /// The user's smallest-index interaction.
    Eval,
}

/// Picks one of `items` (sorted ascending). `None` when the user has no
/// history, which makes the item half of the tower input zero.
pub fn pair_item(items: &[usize], rng: &mut Rng, mode: PairingMode) -> Option<usize> {
    if items.is_empty() {
        return None;
    }
    match mode {
        PairingMode::Train => Some(items[rng.below(items.len())]),
        PairingMode::Eval => Some(items[0]),
    }
}

/// Source item accompanying a target example of `user`.
pub fn pair_source_item(user: usize, split: &LooSplit, rng: &mut Rng, mode: PairingMode) -> Option<usize> {
    pair_item(split.train.source.items_of(user), rng, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_item_is_forced() {
        let mut rng = Rng::new(1);
        for mode in [PairingMode::Train, PairingMode::Eval] {
            assert_eq!(pair_item(&[7], &mut rng, mode), Some(7));
        }
    }

    #[test]
    fn eval_is_deterministic_and_smallest() {
        let mut rng = Rng::new(2);
        let items = [3, 9, 11];
        assert_eq!(pair_item(&items, &mut rng, PairingMode::Eval), Some(3));
        assert_eq!(pair_item(&items, &mut rng, PairingMode::Eval), Some(3));
    }

    #[test]
    fn empty_history_gives_none() {
        assert_eq!(pair_item(&[], &mut Rng::new(3), PairingMode::Train), None);
    }

    #[test]
    fn train_covers_all_items() {
        let mut rng = Rng::new(4);
        let items = [1, 4, 6];
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            let j = pair_item(&items, &mut rng, PairingMode::Train).unwrap();
            seen[items.iter().position(|&x| x == j).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| (800..1200).contains(&c)), "{seen:?}");
    }
}
