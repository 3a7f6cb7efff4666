use std::path::Path;

use crate::data::Label;
use crate::error::{FeaeError, Result};
use crate::nn::Matrix;

/// Writes one row per edge: `h0..h{n-1}`, `label` (0/1), `few_shot` (0/1).
pub fn export_embeddings(
    path: impl AsRef<Path>,
    h: &Matrix<f32>,
    labels: &[Label],
    few_shot: &[bool],
) -> Result<()> {
    if labels.len() != h.rows() || few_shot.len() != h.rows() {
        return Err(FeaeError::Dimension(format!(
            "{} embeddings but {} labels and {} few-shot flags",
            h.rows(),
            labels.len(),
            few_shot.len()
        )));
    }
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header: Vec<String> = (0..h.cols()).map(|j| format!("h{j}")).collect();
    header.push("label".into());
    header.push("few_shot".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(h.cols() + 2);
    for i in 0..h.rows() {
        row.clear();
        row.extend(h.row(i).iter().map(|v| v.to_string()));
        row.push(if labels[i].is_attack() { "1" } else { "0" }.to_string());
        row.push(if few_shot[i] { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| FeaeError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> FeaeError {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => FeaeError::io(path, io),
            other => FeaeError::Format(format!("{other:?}")),
        }
    } else {
        FeaeError::Csv(e)
    }
}

/// Reads a file written by [`export_embeddings`].
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<(Matrix<f32>, Vec<Label>, Vec<bool>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let width = r.headers()?.len();
    if width < 2 {
        return Err(FeaeError::Format(
            "embedding export needs label and few_shot columns".into(),
        ));
    }
    let cols = width - 2;
    let (mut data, mut labels, mut flags) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| FeaeError::Parse {
            row: i + 1,
            message: what.to_string(),
        };
        for cell in rec.iter().take(cols) {
            data.push(
                cell.parse::<f32>()
                    .map_err(|_| bad("embedding value is not a number"))?,
            );
        }
        labels.push(match &rec[cols] {
            "0" => Label::Benign,
            "1" => Label::Attack,
            _ => return Err(bad("label must be 0 or 1")),
        });
        flags.push(match &rec[cols + 1] {
            "0" => false,
            "1" => true,
            _ => return Err(bad("few_shot must be 0 or 1")),
        });
    }
    Ok((Matrix::new(labels.len(), cols, data)?, labels, flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.csv");
        let h = Matrix::from_fn(5, 3, |i, j| (i as f32 - 2.5) * 0.1 + j as f32 * 1e-7);
        let labels = vec![
            Label::Benign,
            Label::Attack,
            Label::Benign,
            Label::Benign,
            Label::Attack,
        ];
        let flags = vec![false, true, false, false, false];
        export_embeddings(&path, &h, &labels, &flags).unwrap();
        let (h2, l2, f2) = read_embeddings(&path).unwrap();
        assert_eq!((h2, l2, f2), (h, labels, flags));
    }

    #[test]
    fn length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let h = Matrix::<f32>::zeros(2, 2);
        assert!(export_embeddings(
            dir.path().join("x.csv"),
            &h,
            &[Label::Benign],
            &[false, false]
        )
        .is_err());
    }
}
