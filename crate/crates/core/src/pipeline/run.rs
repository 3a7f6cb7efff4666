use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DecoderMode, TrainConfig};
use super::metrics::{evaluate, separation_ratio, MetricsReport};
use super::model::Model;
use super::train::{decoder_examples, train_decoder, train_encoder, TrainHistory};
use crate::data::{
    apply_scaler, fit_scaler, generate_synthetic, load_flows, sample_fraction, train_test_split,
    ColumnMapping, FlowDataset, Label, SyntheticConfig,
};
use crate::error::{FeaeError, Result};
use crate::fewshot::{classify, select_few_shot, FewShotSelection};
use crate::graph::{build_graph, FlowGraph};
use crate::nn::Matrix;
use crate::rng::{derive_seed, stream_rng, Stream};

#[derive(Debug, Clone)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        mapping: ColumnMapping,
    },
    Synthetic(SyntheticConfig),
    Dataset(FlowDataset),
}

impl DataSource {
    pub fn load(&self) -> Result<FlowDataset> {
        match self {
            DataSource::Csv { path, mapping } => load_flows(path, mapping),
            DataSource::Synthetic(cfg) => generate_synthetic(cfg),
            DataSource::Dataset(ds) => Ok(ds.clone()),
        }
    }
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub metrics: MetricsReport,
    pub model: Model,
    pub history: TrainHistory,
    pub selection: FewShotSelection,
    pub train_graph: FlowGraph,
    pub train_embeddings: Matrix<f32>,
    pub test_graph: FlowGraph,
    pub test_embeddings: Matrix<f32>,
    pub test_probs: Vec<f32>,
    pub runtime_seconds: f64,
}

impl PipelineRun {
    /// Per-row labels of the training graph.
    pub fn train_labels(&self) -> Vec<Label> {
        graph_labels(&self.train_graph)
    }

    /// Flags the training rows that were labeled attacks.
    pub fn train_few_shot_flags(&self) -> Vec<bool> {
        self.selection.mal_mask(self.train_graph.num_edges())
    }

    /// Attack-to-benign-centroid over benign-to-centroid distance on the test
    /// embeddings.
    pub fn test_separation(&self) -> Option<f64> {
        let truth: Vec<bool> = graph_labels(&self.test_graph)
            .iter()
            .map(|l| l.is_attack())
            .collect();
        separation_ratio(&self.test_embeddings, &truth)
    }
}

pub fn graph_labels(g: &FlowGraph) -> Vec<Label> {
    match &g.labels {
        Some(l) => l.iter().map(|e| e.label).collect(),
        None => vec![Label::Benign; g.num_edges()],
    }
}

/// Sample, split, scale, build graphs, select few-shot edges, train encoder
/// and decoder, then evaluate on the held-out graph.
pub fn run_pipeline(cfg: &TrainConfig, source: &DataSource) -> Result<PipelineRun> {
    let start = Instant::now();
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let full = source.load().map_err(|e| e.in_stage("load"))?;
    let sampled =
        sample_fraction(&full, cfg.sample_frac, cfg.seed).map_err(|e| e.in_stage("sample"))?;
    let (train, test) =
        train_test_split(&sampled, cfg.train_frac, cfg.seed).map_err(|e| e.in_stage("split"))?;
    if test.is_empty() {
        return Err(FeaeError::Precondition("the test split is empty".into()).in_stage("split"));
    }
    let scaler =
        fit_scaler(&train, cfg.quantile_low, cfg.quantile_high).map_err(|e| e.in_stage("scale"))?;
    let train = apply_scaler(&train, &scaler).map_err(|e| e.in_stage("scale"))?;
    let test = apply_scaler(&test, &scaler).map_err(|e| e.in_stage("scale"))?;
    let train_graph = build_graph(&train, cfg.neighborhood).map_err(|e| e.in_stage("graph"))?;
    let test_graph = build_graph(&test, cfg.neighborhood).map_err(|e| e.in_stage("graph"))?;

    let mut select_rng = stream_rng(cfg.seed, Stream::FewShot);
    let selection = select_few_shot(
        &train_graph,
        cfg.k,
        cfg.benign_frac,
        cfg.benign_source,
        &mut select_rng,
    )
    .map_err(|e| e.in_stage("select"))?;

    let (encoder, ssl, mut history) =
        train_encoder(&train_graph, &selection, cfg).map_err(|e| e.in_stage("encoder"))?;
    let embed =
        |g: &FlowGraph| crate::encoder::encode_graph(g, &encoder).map_err(|e| e.in_stage("embed"));
    let train_embeddings = embed(&train_graph)?;
    let test_embeddings = embed(&test_graph)?;

    let examples = decoder_examples(
        &train_graph,
        &selection,
        cfg.decoder_mode == DecoderMode::Supervised,
    )
    .map_err(|e| e.in_stage("decoder"))?;
    let (decoder, decoder_losses, best_decoder) =
        train_decoder(&train_embeddings, &examples, cfg).map_err(|e| e.in_stage("decoder"))?;
    history.decoder = decoder_losses;
    history.best_decoder_epoch = best_decoder;

    let model = Model {
        config: cfg.clone(),
        feature_names: full.schema.clone(),
        scaler,
        encoder,
        ssl,
        decoder,
    };
    let test_probs = model
        .predict_proba(&test_embeddings)
        .map_err(|e| e.in_stage("classify"))?;
    let predictions = classify(&test_probs, cfg.threshold);
    let metrics =
        evaluate(&predictions, &graph_labels(&test_graph)).map_err(|e| e.in_stage("evaluate"))?;
    Ok(PipelineRun {
        metrics,
        model,
        history,
        selection,
        train_graph,
        train_embeddings,
        test_graph,
        test_embeddings,
        test_probs,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Scores a trained model on every flow of `ds`.
pub fn evaluate_model(model: &Model, ds: &FlowDataset) -> Result<MetricsReport> {
    let g = model.prepare_graph(ds)?;
    let h = model.embed(&g)?;
    let probs = model.predict_proba(&h)?;
    evaluate(&classify(&probs, model.config.threshold), &graph_labels(&g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub seed: u64,
    pub macro_f1: f64,
    pub attack_precision: f64,
}

/// Runs the pipeline for every `k` under `n_seeds` seeds derived from
/// `cfg.seed`. The same seeds are used for every `k`.
pub fn k_sweep(
    cfg: &TrainConfig,
    source: &DataSource,
    k_values: &[usize],
    n_seeds: usize,
) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if n_seeds == 0 || k_values.is_empty() {
        return Err(FeaeError::Config(
            "a sweep needs at least one k and one seed".into(),
        ));
    }
    let data = DataSource::Dataset(source.load().map_err(|e| e.in_stage("load"))?);
    let jobs: Vec<(usize, u64)> = k_values
        .iter()
        .flat_map(|&k| (0..n_seeds as u64).map(move |i| (k, derive_seed(cfg.seed, i))))
        .collect();
    jobs.par_iter()
        .map(|&(k, seed)| {
            let run_cfg = TrainConfig {
                k,
                seed,
                ..cfg.clone()
            };
            let run = run_pipeline(&run_cfg, &data)?;
            Ok(SweepRow {
                k,
                seed,
                macro_f1: run.metrics.macro_f1,
                attack_precision: run.metrics.attack_precision,
            })
        })
        .collect()
}

/// Per-k means of a sweep, in first-appearance order of k.
pub fn summarize_sweep(rows: &[SweepRow]) -> Vec<(usize, f64, f64)> {
    let mut out: Vec<(usize, f64, f64, usize)> = Vec::new();
    for r in rows {
        match out.iter_mut().find(|o| o.0 == r.k) {
            Some(o) => {
                o.1 += r.macro_f1;
                o.2 += r.attack_precision;
                o.3 += 1;
            }
            None => out.push((r.k, r.macro_f1, r.attack_precision, 1)),
        }
    }
    out.into_iter()
        .map(|(k, f, p, n)| (k, f / n as f64, p / n as f64))
        .collect()
}
