//! Trained model and its on-disk form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::data::{apply_scaler, FlowDataset, Scaler};
use crate::encoder::{encode_graph, EncoderParams};
use crate::error::{FeaeError, Result};
use crate::fewshot::{decode, DecoderParams};
use crate::graph::{build_graph, FlowGraph};
use crate::nn::Matrix;
use crate::ssl::SslParams;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub scaler: Scaler,
    pub encoder: EncoderParams,
    pub ssl: SslParams,
    pub decoder: DecoderParams,
}

/// Values are widened to f64 so the text form round-trips exactly.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl StoredMatrix {
    fn from(m: &Matrix<f32>) -> Self {
        StoredMatrix {
            rows: m.rows(),
            cols: m.cols(),
            data: m.data().iter().map(|&v| v as f64).collect(),
        }
    }

    fn into_matrix(self, name: &str) -> Result<Matrix<f32>> {
        let narrowed: Vec<f32> = self.data.iter().map(|&v| v as f32).collect();
        if narrowed
            .iter()
            .zip(&self.data)
            .any(|(&n, &w)| n as f64 != w)
        {
            return Err(FeaeError::Format(format!(
                "{name} holds values that are not 32-bit floats"
            )));
        }
        Matrix::new(self.rows, self.cols, narrowed)
            .map_err(|e| FeaeError::Format(format!("{name}: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Weights {
    w_agg: StoredMatrix,
    w_edge: StoredMatrix,
    w_disc: StoredMatrix,
    w_rec: StoredMatrix,
    dec_w1: StoredMatrix,
    dec_b1: StoredMatrix,
    dec_w2: StoredMatrix,
    dec_b2: StoredMatrix,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    config: TrainConfig,
    feature_names: Vec<String>,
    scaler: Scaler,
    weights: Weights,
}

fn format_err(e: FeaeError) -> FeaeError {
    match e {
        FeaeError::Format(_) => e,
        other => FeaeError::Format(other.to_string()),
    }
}

impl Model {
    fn check(&self) -> Result<()> {
        let d = self.feature_names.len();
        let hidden = self.encoder.hidden();
        if self.scaler.num_features() != d
            || self.scaler.upper.len() != d
            || self.encoder.input_dim() != d
            || self.ssl.output_dim() != d
        {
            return Err(FeaeError::Format(format!(
                "feature width disagrees: {d} names, scaler {}, W_agg {}, W_rec {}",
                self.scaler.num_features(),
                self.encoder.input_dim(),
                self.ssl.output_dim()
            )));
        }
        if self.ssl.hidden() != hidden || self.decoder.input_dim() != hidden {
            return Err(FeaeError::Format(format!(
                "hidden width disagrees: encoder {hidden}, SSL {}, decoder {}",
                self.ssl.hidden(),
                self.decoder.input_dim()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check()?;
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
            weights: Weights {
                w_agg: StoredMatrix::from(&self.encoder.w_agg.value),
                w_edge: StoredMatrix::from(&self.encoder.w_edge.value),
                w_disc: StoredMatrix::from(&self.ssl.w_disc.value),
                w_rec: StoredMatrix::from(&self.ssl.w_rec.value),
                dec_w1: StoredMatrix::from(&self.decoder.w1.value),
                dec_b1: StoredMatrix::from(&self.decoder.b1.value),
                dec_w2: StoredMatrix::from(&self.decoder.w2.value),
                dec_b2: StoredMatrix::from(&self.decoder.b2.value),
            },
        };
        let mut text =
            serde_json::to_string_pretty(&file).map_err(|e| FeaeError::Format(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| FeaeError::Format(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(FeaeError::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                file.format_version
            )));
        }
        file.config.validate().map_err(format_err)?;
        let w = file.weights;
        let encoder = EncoderParams::from_matrices(
            w.w_agg.into_matrix("w_agg")?,
            w.w_edge.into_matrix("w_edge")?,
        )
        .map_err(format_err)?;
        let ssl = SslParams::from_matrices(
            w.w_disc.into_matrix("w_disc")?,
            w.w_rec.into_matrix("w_rec")?,
        )
        .map_err(format_err)?;
        let decoder = DecoderParams::from_matrices(
            w.dec_w1.into_matrix("dec_w1")?,
            w.dec_b1.into_matrix("dec_b1")?,
            w.dec_w2.into_matrix("dec_w2")?,
            w.dec_b2.into_matrix("dec_b2")?,
        )
        .map_err(format_err)?;
        let model = Model {
            config: file.config,
            feature_names: file.feature_names,
            scaler: file.scaler,
            encoder,
            ssl,
            decoder,
        };
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| FeaeError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| FeaeError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Scales `ds` with the stored scaler and builds its graph.
    pub fn prepare_graph(&self, ds: &FlowDataset) -> Result<FlowGraph> {
        if ds.schema != self.feature_names {
            return Err(FeaeError::Schema(format!(
                "dataset features do not match the model's {} features",
                self.feature_names.len()
            )));
        }
        build_graph(&apply_scaler(ds, &self.scaler)?, self.config.neighborhood)
    }

    pub fn embed(&self, g: &FlowGraph) -> Result<Matrix<f32>> {
        encode_graph(g, &self.encoder)
    }

    pub fn predict_proba(&self, h: &Matrix<f32>) -> Result<Vec<f32>> {
        decode(h, &self.decoder)
    }
}
