//! Flow records and the preprocessing that turns raw NetFlow rows into
//! normalized edge features.

mod csv_io;
mod scaler;
mod split;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{FeaeError, Result};

pub use csv_io::{load_flows, write_flows, ColumnMapping, NF_V2_FEATURES};
pub use scaler::{apply_scaler, fit_scaler, Scaler};
pub use split::{sample_fraction, train_test_split};
pub use synthetic::{generate_synthetic, FamilySpec, SyntheticConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Benign,
    Attack,
}

impl Label {
    pub fn is_attack(self) -> bool {
        self == Label::Attack
    }
}

/// One flow: its endpoints, feature vector, and ground truth when known.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub src_addr: String,
    pub dst_addr: String,
    pub features: Vec<f64>,
    pub label: Label,
    /// Attack family; present exactly when `label` is `Attack`.
    pub family: Option<String>,
}

impl FlowRecord {
    pub fn benign(src: &str, dst: &str, features: Vec<f64>) -> Self {
        FlowRecord {
            src_addr: src.into(),
            dst_addr: dst.into(),
            features,
            label: Label::Benign,
            family: None,
        }
    }

    pub fn attack(src: &str, dst: &str, features: Vec<f64>, family: &str) -> Self {
        FlowRecord {
            src_addr: src.into(),
            dst_addr: dst.into(),
            features,
            label: Label::Attack,
            family: Some(family.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowDataset {
    pub records: Vec<FlowRecord>,
    pub schema: Vec<String>,
    pub provenance: String,
}

impl FlowDataset {
    /// Validates record widths and label/family consistency.
    pub fn new(
        records: Vec<FlowRecord>,
        schema: Vec<String>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        for (i, r) in records.iter().enumerate() {
            if r.features.len() != schema.len() {
                return Err(FeaeError::Dimension(format!(
                    "record {i} has {} features, schema has {}",
                    r.features.len(),
                    schema.len()
                )));
            }
            if r.label.is_attack() != r.family.is_some() {
                return Err(FeaeError::Precondition(format!(
                    "record {i}: attack family must be present exactly for attack rows"
                )));
            }
        }
        Ok(FlowDataset {
            records,
            schema,
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.schema.len()
    }

    pub fn attack_count(&self) -> usize {
        self.records.iter().filter(|r| r.label.is_attack()).count()
    }

    /// Sub-dataset of the given record indices, in that order.
    pub fn subset(&self, idx: &[usize], provenance: impl Into<String>) -> FlowDataset {
        FlowDataset {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            schema: self.schema.clone(),
            provenance: provenance.into(),
        }
    }
}
