use rand::seq::{index, SliceRandom};

use super::FlowDataset;
use crate::error::{FeaeError, Result};
use crate::rng::{stream_rng, Stream};

/// Uniform subset of `round(frac * n)` records without replacement. The
/// chosen records keep their original relative order.
pub fn sample_fraction(ds: &FlowDataset, frac: f64, seed: u64) -> Result<FlowDataset> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(FeaeError::Precondition(format!(
            "sample fraction {frac} outside (0, 1]"
        )));
    }
    let n = ds.len();
    let k = (frac * n as f64).round() as usize;
    let mut rng = stream_rng(seed, Stream::Sample);
    let mut idx = index::sample(&mut rng, n, k.min(n)).into_vec();
    idx.sort_unstable();
    Ok(ds.subset(&idx, format!("{} | sample {frac}", ds.provenance)))
}

/// Disjoint random split with `round(train_frac * n)` training records.
pub fn train_test_split(
    ds: &FlowDataset,
    train_frac: f64,
    seed: u64,
) -> Result<(FlowDataset, FlowDataset)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(FeaeError::Precondition(format!(
            "train fraction {train_frac} outside (0, 1)"
        )));
    }
    let n = ds.len();
    let n_train = (train_frac * n as f64).round() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, Stream::Split));
    let (train, test) = idx.split_at_mut(n_train);
    train.sort_unstable();
    test.sort_unstable();
    Ok((
        ds.subset(train, format!("{} | train", ds.provenance)),
        ds.subset(test, format!("{} | test", ds.provenance)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FlowRecord;

    fn numbered(n: usize) -> FlowDataset {
        let recs = (0..n)
            .map(|i| FlowRecord::benign("a", "b", vec![i as f64]))
            .collect();
        FlowDataset::new(recs, vec!["id".into()], "t").unwrap()
    }

    fn ids(ds: &FlowDataset) -> Vec<usize> {
        ds.records.iter().map(|r| r.features[0] as usize).collect()
    }

    #[test]
    fn sample_sizes_and_determinism() {
        let d = numbered(1000);
        let a = sample_fraction(&d, 0.1, 5).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(ids(&a), ids(&sample_fraction(&d, 0.1, 5).unwrap()));
        assert_ne!(ids(&a), ids(&sample_fraction(&d, 0.1, 6).unwrap()));
        assert_eq!(sample_fraction(&d, 1.0, 1).unwrap().records, d.records);
    }

    #[test]
    fn sample_rejects_bad_fraction() {
        let d = numbered(10);
        assert!(sample_fraction(&d, 0.0, 1).is_err());
        assert!(sample_fraction(&d, 1.5, 1).is_err());
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let d = numbered(10);
        let (tr, te) = train_test_split(&d, 0.7, 11).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        let mut all = ids(&tr);
        all.extend(ids(&te));
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let (tr2, _) = train_test_split(&d, 0.7, 11).unwrap();
        assert_eq!(ids(&tr), ids(&tr2));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let d = numbered(10);
        assert!(train_test_split(&d, 1.0, 0).is_err());
        assert!(train_test_split(&d, 0.0, 0).is_err());
    }
}
