use serde::{Deserialize, Serialize};

use super::FlowDataset;
use crate::error::{FeaeError, Result};

/// Per-feature quantile clip followed by an affine map onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Scaler {
    pub fn identity(n_features: usize) -> Self {
        Scaler {
            lower: vec![0.0; n_features],
            upper: vec![1.0; n_features],
        }
    }

    pub fn num_features(&self) -> usize {
        self.lower.len()
    }

    /// Maps one raw value of feature `j`; constant features map to 0.
    pub fn transform_value(&self, j: usize, x: f64) -> f64 {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        if hi <= lo {
            return 0.0;
        }
        ((x.clamp(lo, hi) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn fit_scaler(train: &FlowDataset, q_low: f64, q_high: f64) -> Result<Scaler> {
    if train.is_empty() {
        return Err(FeaeError::Precondition(
            "cannot fit a scaler on an empty dataset".into(),
        ));
    }
    if !(0.0..=1.0).contains(&q_low) || !(0.0..=1.0).contains(&q_high) || q_low > q_high {
        return Err(FeaeError::Precondition(format!(
            "invalid quantiles ({q_low}, {q_high})"
        )));
    }
    let d = train.num_features();
    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut column = Vec::with_capacity(train.len());
    for j in 0..d {
        column.clear();
        column.extend(train.records.iter().map(|r| r.features[j]));
        column.sort_by(f64::total_cmp);
        lower.push(quantile(&column, q_low));
        upper.push(quantile(&column, q_high));
    }
    Ok(Scaler { lower, upper })
}

pub fn apply_scaler(ds: &FlowDataset, scaler: &Scaler) -> Result<FlowDataset> {
    if ds.num_features() != scaler.num_features() {
        return Err(FeaeError::Dimension(format!(
            "dataset has {} features, scaler expects {}",
            ds.num_features(),
            scaler.num_features()
        )));
    }
    let mut out = ds.clone();
    for r in &mut out.records {
        for (j, v) in r.features.iter_mut().enumerate() {
            *v = scaler.transform_value(j, *v);
        }
    }
    Ok(out)
}
