use feae_core::data::{
    generate_synthetic, load_flows, write_flows, ColumnMapping, FlowDataset, SyntheticConfig,
};
use feae_core::fewshot::classify;
use feae_core::pipeline::{
    evaluate, evaluate_model, export_embeddings, graph_labels, k_sweep, read_embeddings,
    run_pipeline, summarize_sweep, DataSource, Model, TrainConfig,
};
use feae_core::FeaeError;

fn quick(seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: 16,
        mlp_hidden: 16,
        encoder_epochs_max: 20,
        encoder_patience: 20,
        decoder_epochs_max: 60,
        decoder_patience: 60,
        sample_frac: 1.0,
        seed,
        ..Default::default()
    }
}

fn data(seed: u64) -> FlowDataset {
    generate_synthetic(&SyntheticConfig::blobs(600, 60, 0.05, 3, 3.0, seed)).unwrap()
}

#[test]
fn run_is_reproducible_and_model_reloads() {
    let src = DataSource::Dataset(data(1));
    let a = run_pipeline(&quick(7), &src).unwrap();
    let b = run_pipeline(&quick(7), &src).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    assert_eq!(a.history, b.history);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    a.model.save(&path).unwrap();
    let loaded = Model::load(&path).unwrap();
    assert_eq!(loaded.to_json().unwrap(), a.model.to_json().unwrap());
    let probs = loaded
        .predict_proba(&loaded.embed(&a.test_graph).unwrap())
        .unwrap();
    assert_eq!(probs, a.test_probs);
    let m = evaluate(
        &classify(&probs, loaded.config.threshold),
        &graph_labels(&a.test_graph),
    )
    .unwrap();
    assert_eq!(m, a.metrics);
}

#[test]
fn few_shot_edges_come_from_train_only() {
    let run = run_pipeline(&quick(3), &DataSource::Dataset(data(3))).unwrap();
    let labels = run.train_labels();
    assert_eq!(run.selection.mal_edges.len(), 3);
    for &e in &run.selection.mal_edges {
        assert!(labels[e].is_attack());
    }
    let train_keys: usize = run.train_graph.num_edges();
    assert!(run
        .selection
        .mal_edges
        .iter()
        .chain(&run.selection.benign_edges)
        .all(|&e| e < train_keys));
    assert_eq!(
        run.train_graph.num_edges() + run.test_graph.num_edges(),
        600
    );
}

#[test]
fn zero_shot_run_completes() {
    let cfg = TrainConfig { k: 0, ..quick(2) };
    let run = run_pipeline(&cfg, &DataSource::Dataset(data(2))).unwrap();
    assert!(run.selection.mal_edges.is_empty());
    assert!(run.history.encoder.iter().all(|l| l.l_few == 0.0));
}

#[test]
fn csv_source_matches_in_memory_source() {
    let ds = data(4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flows.csv");
    write_flows(&path, &ds, &ColumnMapping::default()).unwrap();
    let back = load_flows(&path, &ColumnMapping::default()).unwrap();
    assert_eq!(back.records, ds.records);
    let from_csv = run_pipeline(
        &quick(4),
        &DataSource::Csv {
            path,
            mapping: ColumnMapping::default(),
        },
    )
    .unwrap();
    let from_mem = run_pipeline(&quick(4), &DataSource::Dataset(ds)).unwrap();
    assert_eq!(from_csv.metrics, from_mem.metrics);
}

#[test]
fn saved_model_scores_new_data() {
    let run = run_pipeline(&quick(5), &DataSource::Dataset(data(5))).unwrap();
    let fresh = data(6);
    let m = evaluate_model(&run.model, &fresh).unwrap();
    assert_eq!(m.tp + m.fp + m.tn + m.fn_, fresh.len());

    let mut narrow = fresh.clone();
    narrow.schema.pop();
    for r in &mut narrow.records {
        r.features.pop();
    }
    assert!(matches!(
        evaluate_model(&run.model, &narrow),
        Err(FeaeError::Schema(_))
    ));
}

#[test]
fn embeddings_export_round_trips() {
    let run = run_pipeline(&quick(6), &DataSource::Dataset(data(6))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    let labels = run.train_labels();
    let flags = run.train_few_shot_flags();
    export_embeddings(&path, &run.train_embeddings, &labels, &flags).unwrap();
    let (h, l, f) = read_embeddings(&path).unwrap();
    assert_eq!(h, run.train_embeddings);
    assert_eq!(l, labels);
    assert_eq!(f, flags);
    assert_eq!(
        f.iter().filter(|&&x| x).count(),
        run.selection.mal_edges.len()
    );
}

#[test]
fn sweep_reports_every_k_and_seed() {
    let src = DataSource::Dataset(data(8));
    let rows = k_sweep(&quick(8), &src, &[0, 2], 2).unwrap();
    assert_eq!(rows.len(), 4);
    let again = k_sweep(&quick(8), &src, &[0, 2], 2).unwrap();
    assert_eq!(rows, again);
    let summary = summarize_sweep(&rows);
    assert_eq!(summary.iter().map(|s| s.0).collect::<Vec<_>>(), [0, 2]);
    assert!(k_sweep(&quick(8), &src, &[], 2).is_err());
}
