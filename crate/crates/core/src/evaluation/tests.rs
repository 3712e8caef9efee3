use super::*;
use crate::data::{generate_synthetic, loo_split, SyntheticConfig};
use crate::error::Result;
use crate::models::{Architecture, ModelConfig, ModelShape};

fn small_split(num_users: usize, seed: u64) -> LooSplit {
    let data = generate_synthetic(&SyntheticConfig {
        num_users,
        num_target_items: 300,
        num_source_items: 300,
        target_density: 0.02,
        source_density: 0.03,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap();
    loo_split(&data, &mut Rng::new(seed)).unwrap()
}

#[test]
fn constant_scorer_ranks_last() {
    let split = small_split(40, 1);
    let r = evaluate(&|_: usize, _: usize| -> Result<f64> { Ok(0.3) }, &split).unwrap();
    assert!(r.per_user.iter().all(|x| x.hit_position == 100));
    assert_eq!((r.hr, r.ndcg, r.mrr), (0.0, 0.0, 0.0));
}

#[test]
fn oracle_scorer_is_perfect() {
    let split = small_split(40, 2);
    let s = |u: usize, i: usize| -> Result<f64> { Ok(if split.test[u] == Some(i) { 1.0 } else { 0.0 }) };
    let r = evaluate(&s, &split).unwrap();
    assert_eq!((r.hr, r.ndcg, r.mrr), (1.0, 1.0, 1.0));
    assert_eq!(r.num_users, split.num_evaluated());
    let v = |u: usize, i: usize| -> Result<f64> { Ok(if split.validation[u] == Some(i) { 1.0 } else { 0.0 }) };
    let r = evaluate_with(&v, &split, Partition::Validation, EvalOptions::default()).unwrap();
    assert_eq!(r.hr, 1.0);
}

#[test]
fn scorer_errors_carry_user_context() {
    let split = small_split(20, 3);
    let s = |u: usize, _: usize| -> Result<f64> {
        if u == 5 {
            Err(crate::Error::Numeric("boom".into()))
        } else {
            Ok(0.0)
        }
    };
    let msg = evaluate(&s, &split).unwrap_err().to_string();
    assert!(msg.contains("user 5"), "{msg}");
}

#[test]
fn non_finite_scores_are_rejected() {
    let split = small_split(20, 4);
    let s = |_: usize, _: usize| -> Result<f64> { Ok(f64::NAN) };
    assert!(evaluate(&s, &split).is_err());
}

#[test]
fn model_scorer_is_deterministic() {
    let split = small_split(30, 5);
    let shape = ModelShape {
        num_users: split.num_users(),
        num_target_items: split.train.target.num_items(),
        num_source_items: split.train.source.num_items(),
    };
    let mut cfg = ModelConfig::new(Architecture::CoNet);
    cfg.embedding_dim = 4;
    cfg.hidden_widths = vec![8, 4];
    let m = Model::with_init_std(cfg, shape, 1, 0.3).unwrap();
    let a = evaluate(&ModelScorer::new(&m, &split), &split).unwrap();
    let b = evaluate(&ModelScorer::new(&m, &split), &split).unwrap();
    assert_eq!(a, b);
}
