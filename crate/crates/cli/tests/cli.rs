use std::fs;
use std::path::Path;
use std::process::Command;

use conet_cli::{
    cmd_compare, cmd_evaluate, cmd_generate, cmd_reduce_study, cmd_sparsity_report, cmd_train, prepare, RunConfig,
    RESOLVED_CONFIG,
};
use conet_core::data::load_interactions;
use conet_core::evaluation::Partition;
use conet_core::models::{save_checkpoint, Architecture, Model, ModelConfig, Params};
use conet_core::study::shape_of;
use conet_core::Error;

fn small(dir: &Path) -> RunConfig {
    let mut c = RunConfig::default();
    for kv in [
        "synthetic.num_users=100",
        "synthetic.num_target_items=200",
        "synthetic.num_source_items=200",
        "synthetic.target_density=0.03",
        "synthetic.source_density=0.05",
        "epochs=2",
    ] {
        c.apply_override(kv).unwrap();
    }
    c.output_dir = dir.to_path_buf();
    c
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small(&tmp.path().join("a"));
    let b = small(&tmp.path().join("b"));
    cmd_generate(&a).unwrap();
    cmd_generate(&b).unwrap();
    for f in ["target.tsv", "source.tsv", "manifest.json"] {
        assert_eq!(fs::read(a.output_dir.join(f)).unwrap(), fs::read(b.output_dir.join(f)).unwrap(), "{f}");
    }
    assert!(a.output_dir.join(RESOLVED_CONFIG).exists());
}

#[test]
fn relatedness_changes_the_source_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut a = small(&tmp.path().join("a"));
    let mut b = small(&tmp.path().join("b"));
    a.apply_override("synthetic.relatedness=0").unwrap();
    b.apply_override("synthetic.relatedness=1").unwrap();
    cmd_generate(&a).unwrap();
    cmd_generate(&b).unwrap();
    let read = |c: &RunConfig, f: &str| fs::read(c.output_dir.join(f)).unwrap();
    assert_ne!(read(&a, "source.tsv"), read(&b, "source.tsv"));
    assert_eq!(read(&a, "target.tsv"), read(&b, "target.tsv"));
}

#[test]
fn manifest_densities_match_a_recount() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small(tmp.path());
    let manifest = cmd_generate(&c).unwrap();
    for (file, items, requested) in [
        ("target.tsv", manifest.num_target_items, manifest.requested_target_density),
        ("source.tsv", manifest.num_source_items, manifest.requested_source_density),
    ] {
        let text = fs::read_to_string(tmp.path().join(file)).unwrap();
        let lines = text.lines().filter(|l| !l.is_empty()).count();
        let density = lines as f64 / (manifest.num_users * items) as f64;
        assert!((density / requested - 1.0).abs() < 0.05, "{file}: {density}");
    }
}

#[test]
fn one_epoch_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(tmp.path());
    c.apply_override("epochs=1").unwrap();
    let out = cmd_train(&c).unwrap();
    assert_eq!(out.history.len(), 1);
    for f in ["checkpoint.bin", "history.jsonl", RESOLVED_CONFIG, "split.json", "metrics-test.json"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let resolved = RunConfig::from_file(&tmp.path().join(RESOLVED_CONFIG)).unwrap();
    assert_eq!(resolved, c);
}

#[test]
fn rerun_with_same_seed_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = cmd_train(&small(&tmp.path().join("a"))).unwrap();
    let b = cmd_train(&small(&tmp.path().join("b"))).unwrap();
    assert_eq!(a.test, b.test);
    assert_eq!(a.history, b.history);
    let ckpt = |d: &str| fs::read(tmp.path().join(d).join("checkpoint.bin")).unwrap();
    assert_eq!(ckpt("a"), ckpt("b"));
}

#[test]
fn mlp_trains_from_files_with_a_source_present() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = small(&tmp.path().join("gen"));
    cmd_generate(&gen).unwrap();
    let mut c = small(&tmp.path().join("mlp"));
    c.target_path = Some(gen.output_dir.join("target.tsv"));
    c.source_path = Some(gen.output_dir.join("source.tsv"));
    c.apply_override("architecture=mlp").unwrap();
    c.apply_override("epochs=1").unwrap();
    let out = cmd_train(&c).unwrap();
    assert_eq!(out.model.architecture(), Architecture::Mlp);
    assert_eq!(out.model.shape().num_users, 100);
}

#[test]
fn evaluate_reproduces_best_validation_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small(tmp.path());
    let out = cmd_train(&c).unwrap();
    let best = out.history.iter().map(|s| s.val_ndcg).fold(f64::NEG_INFINITY, f64::max);
    let ckpt = tmp.path().join("checkpoint.bin");
    let val = cmd_evaluate(&c, &ckpt, Partition::Validation).unwrap();
    assert_eq!(val.ndcg, best);
    let t1 = cmd_evaluate(&c, &ckpt, Partition::Test).unwrap();
    let t2 = cmd_evaluate(&c, &ckpt, Partition::Test).unwrap();
    assert_eq!(t1, t2);
    assert_eq!(t1.ndcg, out.test.ndcg);
}

#[test]
fn evaluate_rejects_a_foreign_split() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(tmp.path());
    c.apply_override("epochs=1").unwrap();
    cmd_train(&c).unwrap();
    c.apply_override("data_seed=9").unwrap();
    let err = cmd_evaluate(&c, &tmp.path().join("checkpoint.bin"), Partition::Test).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

/// MLP whose user row is the one-hot of that user's test item and whose
/// first layer fires only where the user and item one-hots agree.
fn oracle_model(c: &RunConfig) -> (Model, String) {
    let split = prepare(c).unwrap().split;
    let shape = shape_of(&split);
    let n = shape.num_target_items;
    let config = ModelConfig {
        architecture: Architecture::Mlp,
        embedding_dim: n,
        hidden_widths: vec![2 * n, 2],
        ..ModelConfig::default()
    };
    let mut model = Model::zeros(config, shape).unwrap();
    let Params::Single(p) = model.params_mut() else { unreachable!() };
    for u in 0..shape.num_users {
        if let Some(t) = split.test[u] {
            p.user_embedding.set(u, t, 1.0);
        }
    }
    for i in 0..n {
        p.tower.item_embedding.set(i, i, 1.0);
    }
    let (first, second) = p.tower.layers.split_at_mut(1);
    for k in 0..n {
        first[0].weight.set(k, k, 1.0);
        first[0].weight.set(k, n + k, 1.0);
        first[0].bias[k] = -1.0;
        second[0].weight.set(0, k, 1.0);
    }
    p.tower.output[0] = 10.0;
    (model, split.fingerprint())
}

#[test]
fn oracle_checkpoint_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small(tmp.path());
    let (model, fp) = oracle_model(&c);
    let ckpt = tmp.path().join("oracle.bin");
    save_checkpoint(&ckpt, &model, &fp).unwrap();
    let r = cmd_evaluate(&c, &ckpt, Partition::Test).unwrap();
    assert_eq!((r.hr, r.ndcg, r.mrr), (1.0, 1.0, 1.0));
}

#[test]
fn comparing_a_model_with_itself_gives_p_one() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(tmp.path());
    c.apply_override("epochs=1").unwrap();
    c.apply_override("architectures=mlp,mlp").unwrap();
    let out = cmd_compare(&c).unwrap();
    assert_eq!(out.report.rows.len(), 2);
    assert_eq!(out.report.rows[0].metrics, out.report.rows[1].metrics);
    assert_eq!(out.report.rows[1].p_value, Some(1.0));
    assert!(tmp.path().join("report.json").exists());
}

#[test]
fn compare_has_one_row_per_architecture_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(tmp.path());
    c.apply_override("epochs=1").unwrap();
    c.apply_override("architectures=mlp,mlp++,conet").unwrap();
    c.apply_override("seeds=1,2").unwrap();
    let out = cmd_compare(&c).unwrap();
    assert_eq!(out.report.rows.len(), 6);
    assert_eq!(out.summary.len(), 3);
    assert!(out.summary[2].p_value.is_some());
    let names: Vec<_> = out.report.rows.iter().map(|r| (r.model.as_str(), r.seed)).collect();
    assert_eq!(names[..3], [("MLP", 1), ("MLP++", 1), ("SCoNet", 1)]);
}

#[test]
fn reduction_levels_shrink_the_training_set() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(tmp.path());
    c.apply_override("epochs=1").unwrap();
    c.apply_override("levels=0,1,2").unwrap();
    let report = cmd_reduce_study(&c).unwrap();
    let sizes: Vec<usize> = report.rows[1..].iter().map(|r| r.train_interactions.unwrap()).collect();
    assert!(sizes.windows(2).all(|w| w[1] < w[0]), "{sizes:?}");
    assert_eq!(report.rows[1].removed, Some(0));
    assert_eq!(sizes[0], report.rows[0].train_interactions.unwrap());
    let table = report.to_table();
    assert!(table.contains("percent") && table.contains("amount"));
}

#[test]
fn dense_run_has_no_zero_transfer_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(tmp.path());
    c.apply_override("epochs=1").unwrap();
    c.apply_override("lasso_lambda=0").unwrap();
    cmd_train(&c).unwrap();
    let report = cmd_sparsity_report(
        Some(&tmp.path().join("checkpoint.bin")),
        Some(&tmp.path().join("history.jsonl")),
        &tmp.path().join("sparsity"),
    )
    .unwrap();
    assert_eq!(report.matrices.len(), 3);
    assert!(report.mean_zero_ratio() < 0.01);
    assert_eq!(report.series.len(), 1);
}

#[test]
fn cross_stitch_with_tapering_widths_is_refused_up_front() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small(&tmp.path().join("out"));
    c.apply_override("architecture=csn").unwrap();
    let err = cmd_train(&c).unwrap_err();
    assert!(matches!(err, Error::Config(ref m) if m.contains("width")), "{err}");
    assert!(!c.output_dir.exists());
}

#[test]
fn loaded_files_round_trip_generated_data() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small(tmp.path());
    cmd_generate(&c).unwrap();
    let t = load_interactions(&tmp.path().join("target.tsv"), 3).unwrap();
    let generated = prepare(&c).unwrap().data;
    // Items nobody interacted with cannot appear in the file.
    let used = (0..generated.target.num_items())
        .filter(|&i| (0..100).any(|u| generated.target.contains(u, i)))
        .count();
    assert_eq!(t.dataset.num_items(), used);
    assert_eq!(t.dataset.pairs().collect::<Vec<_>>(), generated.target.pairs().collect::<Vec<_>>());
}

#[test]
fn binary_reports_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_conet");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .env("RUST_LOG", "off")
            .stdout(std::process::Stdio::null())
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap()
            .code()
    };
    let out = tmp.path().to_str().unwrap();
    assert_eq!(run(&["train", "-o", out, "-s", "architecture=csn"]), Some(2));
    assert_eq!(run(&["train", "-o", out, "-s", "nonsense=1"]), Some(2));
    assert_eq!(
        run(&["train", "-o", out, "-s", "target_path=/nonexistent/t.tsv", "-s", "source_path=/nonexistent/s.tsv"]),
        Some(3)
    );
    assert_eq!(
        run(&[
            "generate",
            "-o",
            out,
            "-s",
            "synthetic.num_users=50",
            "-s",
            "synthetic.num_target_items=100",
            "-s",
            "synthetic.num_source_items=100",
            "-s",
            "synthetic.target_density=0.05",
            "-s",
            "synthetic.source_density=0.05",
        ]),
        Some(0)
    );
}
