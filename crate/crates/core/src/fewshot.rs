//! Few-shot edge selection and the MLP decoder trained on it.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{FeaeError, Result};
use crate::graph::FlowGraph;
use crate::nn::{bce_value, xavier_init, Grads, Matrix, Param, Scalar, Tape, Var};

/// Where the benign supplement comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenignSource {
    /// Random non-selected edges, assumed benign without looking at labels.
    #[default]
    Assumed,
    /// Random edges that really are benign. Diagnostics only.
    Clean,
}

/// The labeled edge set: `mal_edges` (label 1) and `benign_edges` (label 0).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FewShotSelection {
    pub mal_edges: Vec<usize>,
    pub benign_edges: Vec<usize>,
}

impl FewShotSelection {
    pub fn len(&self) -> usize {
        self.mal_edges.len() + self.benign_edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(edge, is_malicious)` pairs, malicious edges first.
    pub fn labeled(&self) -> Vec<(usize, bool)> {
        let mal = self.mal_edges.iter().map(|&e| (e, true));
        mal.chain(self.benign_edges.iter().map(|&e| (e, false)))
            .collect()
    }

    /// Per-edge flag over `num_edges` edges, true on `mal_edges`.
    pub fn mal_mask(&self, num_edges: usize) -> Vec<bool> {
        let mut mask = vec![false; num_edges];
        for &e in &self.mal_edges {
            mask[e] = true;
        }
        mask
    }
}

/// Picks `min(k, family size)` labeled attacks per family plus
/// `ceil(benign_frac * |E|)` other edges taken as benign.
pub fn select_few_shot<R: Rng + ?Sized>(
    g: &FlowGraph,
    k: usize,
    benign_frac: f64,
    source: BenignSource,
    rng: &mut R,
) -> Result<FewShotSelection> {
    if !(benign_frac > 0.0 && benign_frac <= 1.0) {
        return Err(FeaeError::Precondition(format!(
            "benign fraction {benign_frac} outside (0, 1]"
        )));
    }
    let labels = g.labels.as_ref().ok_or_else(|| {
        FeaeError::Precondition("few-shot selection needs a labeled graph".into())
    })?;

    let mut families: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (e, l) in labels.iter().enumerate() {
        if l.label.is_attack() {
            families
                .entry(l.family.as_deref().unwrap_or(""))
                .or_default()
                .push(e);
        }
    }
    let mut mal_edges = Vec::new();
    for edges in families.values() {
        let take = k.min(edges.len());
        mal_edges.extend(
            index::sample(rng, edges.len(), take)
                .into_iter()
                .map(|i| edges[i]),
        );
    }
    mal_edges.sort_unstable();

    let is_mal = |e: &usize| mal_edges.binary_search(e).is_ok();
    let candidates: Vec<usize> = match source {
        BenignSource::Assumed => (0..g.num_edges()).filter(|e| !is_mal(e)).collect(),
        BenignSource::Clean => (0..g.num_edges())
            .filter(|&e| !labels[e].label.is_attack())
            .collect(),
    };
    let want = (benign_frac * g.num_edges() as f64).ceil() as usize;
    let mut benign_edges: Vec<usize> =
        index::sample(rng, candidates.len(), want.min(candidates.len()))
            .into_iter()
            .map(|i| candidates[i])
            .collect();
    benign_edges.sort_unstable();
    Ok(FewShotSelection {
        mal_edges,
        benign_edges,
    })
}

/// `sigmoid(relu(H . W1 + b1) . W2 + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams<T: Scalar = f32> {
    pub w1: Param<T>,
    pub b1: Param<T>,
    pub w2: Param<T>,
    pub b2: Param<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct DecoderVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
}

impl<T: Scalar> DecoderParams<T> {
    /// Xavier weights and zero biases.
    pub fn init<R: Rng + ?Sized>(hidden: usize, mlp_hidden: usize, rng: &mut R) -> Result<Self> {
        Self::from_matrices(
            xavier_init(hidden, mlp_hidden, rng)?,
            Matrix::zeros(1, mlp_hidden),
            xavier_init(mlp_hidden, 1, rng)?,
            Matrix::zeros(1, 1),
        )
    }

    pub fn from_matrices(
        w1: Matrix<T>,
        b1: Matrix<T>,
        w2: Matrix<T>,
        b2: Matrix<T>,
    ) -> Result<Self> {
        let m = w1.cols();
        if b1.shape() != (1, m) || w2.shape() != (m, 1) || b2.shape() != (1, 1) {
            return Err(FeaeError::Dimension(format!(
                "decoder shapes do not chain: W1 {:?}, b1 {:?}, W2 {:?}, b2 {:?}",
                w1.shape(),
                b1.shape(),
                w2.shape(),
                b2.shape()
            )));
        }
        Ok(DecoderParams {
            w1: Param::new("dec_w1", w1),
            b1: Param::new("dec_b1", b1),
            w2: Param::new("dec_w2", w2),
            b2: Param::new("dec_b2", b2),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> DecoderVars {
        DecoderVars {
            w1: tape.param(&self.w1),
            b1: tape.param(&self.b1),
            w2: tape.param(&self.w2),
            b2: tape.param(&self.b2),
        }
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn accumulate(&mut self, grads: &Grads<T>, vars: DecoderVars) {
        grads.accumulate_into(vars.w1, &mut self.w1);
        grads.accumulate_into(vars.b1, &mut self.b1);
        grads.accumulate_into(vars.w2, &mut self.w2);
        grads.accumulate_into(vars.b2, &mut self.b2);
    }

    pub fn cast<U: Scalar>(&self) -> DecoderParams<U> {
        DecoderParams {
            w1: self.w1.cast(),
            b1: self.b1.cast(),
            w2: self.w2.cast(),
            b2: self.b2.cast(),
        }
    }
}

/// Pre-sigmoid scores as a column, one row per row of `h`.
pub fn decode_logits_on<T: Scalar>(tape: &mut Tape<T>, h: Var, vars: DecoderVars) -> Result<Var> {
    let z1 = tape.matmul(h, vars.w1)?;
    let z1 = tape.add_row(z1, vars.b1)?;
    let a1 = tape.relu(z1);
    let z2 = tape.matmul(a1, vars.w2)?;
    tape.add_row(z2, vars.b2)
}

/// Probabilities as a column, one row per row of `h`.
pub fn decode_on<T: Scalar>(tape: &mut Tape<T>, h: Var, vars: DecoderVars) -> Result<Var> {
    let z = decode_logits_on(tape, h, vars)?;
    Ok(tape.sigmoid(z))
}

pub fn decode<T: Scalar>(h: &Matrix<T>, p: &DecoderParams<T>) -> Result<Vec<T>> {
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let hv = tape.leaf(h.clone());
    let out = decode_on(&mut tape, hv, vars)?;
    Ok(tape.value(out).data().to_vec())
}

/// Mean clamped cross-entropy of `probs` over the labeled edges only.
pub fn decoder_loss<T: Scalar>(probs: &[T], selection: &FewShotSelection) -> Result<f64> {
    if selection.is_empty() {
        return Err(FeaeError::Precondition("few-shot edge set is empty".into()));
    }
    let labeled = selection.labeled();
    if let Some(&(e, _)) = labeled.iter().find(|&&(e, _)| e >= probs.len()) {
        return Err(FeaeError::Dimension(format!(
            "labeled edge {e} beyond {} predictions",
            probs.len()
        )));
    }
    let p: Vec<f64> = labeled
        .iter()
        .map(|&(e, _)| probs[e].to_f64().unwrap_or(f64::NAN))
        .collect();
    let y: Vec<f64> = labeled
        .iter()
        .map(|&(_, m)| if m { 1.0 } else { 0.0 })
        .collect();
    Ok(bce_value(&p, &y))
}

/// Mean cross-entropy of the decoder on the rows `examples` of `h`.
pub fn decoder_loss_on<T: Scalar>(
    tape: &mut Tape<T>,
    h: Var,
    examples: &[(usize, bool)],
    vars: DecoderVars,
) -> Result<Var> {
    let rows: Arc<[usize]> = examples.iter().map(|&(e, _)| e).collect();
    let targets: Arc<[T]> = examples
        .iter()
        .map(|&(_, m)| if m { T::one() } else { T::zero() })
        .collect();
    let picked = tape.gather_rows(h, rows)?;
    let logits = decode_logits_on(tape, picked, vars)?;
    tape.bce_logits(logits, targets)
}

/// Attack iff the probability is strictly above `threshold`.
pub fn classify<T: Scalar>(probs: &[T], threshold: f64) -> Vec<Label> {
    let t = T::lit(threshold);
    probs
        .iter()
        .map(|&p| if p > t { Label::Attack } else { Label::Benign })
        .collect()
}
