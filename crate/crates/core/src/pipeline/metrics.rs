use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{FeaeError, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassMetrics {
    /// From true positives, false positives and false negatives of one class;
    /// any 0/0 is taken as 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // Harmonic mean of precision and recall, from the counts directly.
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        ClassMetrics {
            precision,
            recall,
            f1,
        }
    }
}

/// Counts are with respect to the attack class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub benign: ClassMetrics,
    pub attack: ClassMetrics,
    pub macro_f1: f64,
    pub attack_precision: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Wall-clock seconds; absent unless timing was requested.
    pub runtime_seconds: Option<f64>,
}

pub fn evaluate(predictions: &[Label], truth: &[Label]) -> Result<MetricsReport> {
    if predictions.len() != truth.len() {
        return Err(FeaeError::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(FeaeError::Precondition(
            "cannot evaluate zero predictions".into(),
        ));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(truth) {
        match (p.is_attack(), t.is_attack()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let attack = ClassMetrics::from_counts(tp, fp, fn_);
    let benign = ClassMetrics::from_counts(tn, fn_, fp);
    Ok(MetricsReport {
        benign,
        attack,
        macro_f1: (benign.f1 + attack.f1) / 2.0,
        attack_precision: attack.precision,
        tp,
        fp,
        tn,
        fn_,
        runtime_seconds: None,
    })
}

fn distance(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &c)| (x as f64 - c).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Mean distance of attack rows to the benign centroid over the mean
/// distance of benign rows to it. `None` without both classes.
pub fn separation_ratio(h: &Matrix<f32>, is_attack: &[bool]) -> Option<f64> {
    let benign: Vec<usize> = (0..h.rows()).filter(|&i| !is_attack[i]).collect();
    let attack: Vec<usize> = (0..h.rows()).filter(|&i| is_attack[i]).collect();
    if benign.is_empty() || attack.is_empty() {
        return None;
    }
    let mut centroid = vec![0.0f64; h.cols()];
    for &i in &benign {
        for (c, &v) in centroid.iter_mut().zip(h.row(i)) {
            *c += v as f64;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= benign.len() as f64);
    let mean_dist = |rows: &[usize]| {
        rows.iter()
            .map(|&i| distance(h.row(i), &centroid))
            .sum::<f64>()
            / rows.len() as f64
    };
    let spread = mean_dist(&benign);
    if spread == 0.0 {
        return None;
    }
    Some(mean_dist(&attack) / spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Attack as A, Benign as B};

    #[test]
    fn perfect() {
        let m = evaluate(&[A, B, B], &[A, B, B]).unwrap();
        assert_eq!((m.macro_f1, m.attack_precision), (1.0, 1.0));
    }

    #[test]
    fn all_benign_predictions() {
        let m = evaluate(&[B, B, B, B], &[B, B, B, A]).unwrap();
        assert!((m.benign.f1 - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(m.attack.f1, 0.0);
        assert!((m.macro_f1 - 3.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn no_attacks_anywhere() {
        let m = evaluate(&[B, B], &[B, B]).unwrap();
        assert_eq!(
            (m.attack.precision, m.attack.recall, m.attack.f1),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(m.macro_f1, 0.5);
    }

    #[test]
    fn errors() {
        assert!(evaluate(&[], &[]).is_err());
        assert!(evaluate(&[A], &[A, B]).is_err());
    }

    #[test]
    fn separation() {
        let h = Matrix::from_rows(&[[0.0f32, 1.0], [0.0, -1.0], [3.0, 0.0]]).unwrap();
        assert_eq!(separation_ratio(&h, &[false, false, true]), Some(3.0));
        assert_eq!(separation_ratio(&h, &[false, false, false]), None);
    }
}
