//! Contrastive (DGI) loss plus the few-shot-aware reconstruction terms.
//!
//! ```text
//! s        = sigmoid(mean over rows of H)
//! D(H)     = sigmoid(H . W_disc . s^T)
//! l_dgi    = -(sum log D(H) + sum log(1 - D(H~))) / (|E| + |E~|)
//! X^       = sigmoid(H . W_rec)
//! l_total  = l_dgi + alpha * l_nonfew - beta * l_few
//! ```

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode_on, EncoderVars};
use crate::error::{FeaeError, Result};
use crate::graph::FlowGraph;
use crate::nn::{bce_value, xavier_init, Grads, Matrix, Param, Scalar, Tape, Var};

/// How the reconstruction errors within each edge set are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    /// Mean over (edges x features) of the set.
    #[default]
    Mean,
    /// Plain sum of squared errors.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SslMode {
    /// Contrastive loss plus the weighted reconstruction terms.
    #[default]
    Hybrid,
    /// Contrastive loss only.
    DgiOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_dgi: f64,
    pub l_few: f64,
    pub l_nonfew: f64,
    pub l_total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.l_dgi, self.l_few, self.l_nonfew, self.l_total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `l_total = l_dgi + alpha * l_nonfew - beta * l_few`. Callers keep
/// `alpha, beta >= 0`.
pub fn feae_loss(l_dgi: f64, l_few: f64, l_nonfew: f64, alpha: f64, beta: f64) -> LossBreakdown {
    LossBreakdown {
        l_dgi,
        l_few,
        l_nonfew,
        l_total: l_dgi + alpha * l_nonfew - beta * l_few,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SslParams<T: Scalar = f32> {
    pub w_disc: Param<T>,
    pub w_rec: Param<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct SslVars {
    pub w_disc: Var,
    pub w_rec: Var,
}

impl<T: Scalar> SslParams<T> {
    pub fn init<R: Rng + ?Sized>(hidden: usize, input_dim: usize, rng: &mut R) -> Result<Self> {
        Self::from_matrices(
            xavier_init(hidden, hidden, rng)?,
            xavier_init(hidden, input_dim, rng)?,
        )
    }

    pub fn from_matrices(w_disc: Matrix<T>, w_rec: Matrix<T>) -> Result<Self> {
        if w_disc.rows() != w_disc.cols() || w_rec.rows() != w_disc.rows() {
            return Err(FeaeError::Dimension(format!(
                "W_disc {}x{} and W_rec {}x{} disagree on the hidden size",
                w_disc.rows(),
                w_disc.cols(),
                w_rec.rows(),
                w_rec.cols()
            )));
        }
        Ok(SslParams {
            w_disc: Param::new("w_disc", w_disc),
            w_rec: Param::new("w_rec", w_rec),
        })
    }

    pub fn hidden(&self) -> usize {
        self.w_disc.value.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w_rec.value.cols()
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> SslVars {
        SslVars {
            w_disc: tape.param(&self.w_disc),
            w_rec: tape.param(&self.w_rec),
        }
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.w_disc, &mut self.w_rec]
    }

    pub fn accumulate(&mut self, grads: &Grads<T>, vars: SslVars) {
        grads.accumulate_into(vars.w_disc, &mut self.w_disc);
        grads.accumulate_into(vars.w_rec, &mut self.w_rec);
    }

    pub fn cast<U: Scalar>(&self) -> SslParams<U> {
        SslParams {
            w_disc: self.w_disc.cast(),
            w_rec: self.w_rec.cast(),
        }
    }
}

/// Summary vector `sigmoid(column mean of h)` as a 1 x hidden row.
pub fn readout_on<T: Scalar>(tape: &mut Tape<T>, h: Var) -> Result<Var> {
    let m = tape.mean_rows(h)?;
    Ok(tape.sigmoid(m))
}

/// Per-row scores `h_i . W_disc . s^T` as a column.
pub fn discriminator_logits_on<T: Scalar>(
    tape: &mut Tape<T>,
    h: Var,
    s: Var,
    w_disc: Var,
) -> Result<Var> {
    let st = tape.transpose(s);
    let ws = tape.matmul(w_disc, st)?;
    tape.matmul(h, ws)
}

/// Per-row probabilities `sigmoid(h_i . W_disc . s^T)` as a column.
pub fn discriminate_on<T: Scalar>(tape: &mut Tape<T>, h: Var, s: Var, w_disc: Var) -> Result<Var> {
    let logits = discriminator_logits_on(tape, h, s, w_disc)?;
    Ok(tape.sigmoid(logits))
}

/// Contrastive loss from discriminator logits, with both sums under the
/// shared `|pos| + |neg|` normalizer.
pub fn dgi_loss_on<T: Scalar>(tape: &mut Tape<T>, pos_logits: Var, neg_logits: Var) -> Result<Var> {
    let (np, nn) = (tape.value(pos_logits).len(), tape.value(neg_logits).len());
    if np == 0 || nn == 0 {
        return Err(FeaeError::Precondition(
            "contrastive loss needs both positive and negative edges".into(),
        ));
    }
    let both = tape.concat_rows(pos_logits, neg_logits)?;
    let targets: Arc<[T]> = std::iter::repeat_n(T::one(), np)
        .chain(std::iter::repeat_n(T::zero(), nn))
        .collect();
    tape.bce_logits(both, targets)
}

pub fn reconstruct_on<T: Scalar>(tape: &mut Tape<T>, h: Var, w_rec: Var) -> Result<Var> {
    let z = tape.matmul(h, w_rec)?;
    Ok(tape.sigmoid(z))
}

/// Reconstruction error of the rows `rows` of `x_hat` against `target`.
fn set_error_on<T: Scalar>(
    tape: &mut Tape<T>,
    x_hat: Var,
    rows: Vec<usize>,
    target: Matrix<T>,
    reduction: Reduction,
) -> Result<Var> {
    let scale = match reduction {
        Reduction::Sum => T::one(),
        Reduction::Mean if rows.is_empty() => T::zero(),
        Reduction::Mean => T::one() / T::lit((rows.len() * target.cols()) as f64),
    };
    tape.squared_error(x_hat, rows.into(), Arc::new(target), scale)
}

/// `(l_few, l_nonfew)` on the tape. `x` holds the original features of the
/// rows of `x_hat`, and `mal_mask[i]` marks row `i` as a labeled attack.
pub fn recon_losses_on<T: Scalar>(
    tape: &mut Tape<T>,
    x: &Matrix<T>,
    x_hat: Var,
    mal_mask: &[bool],
    reduction: Reduction,
) -> Result<(Var, Var)> {
    let xh = tape.value(x_hat);
    if xh.shape() != x.shape() || mal_mask.len() != x.rows() {
        return Err(FeaeError::Dimension(format!(
            "reconstruction {}x{} vs features {}x{} with {} mask entries",
            xh.rows(),
            xh.cols(),
            x.rows(),
            x.cols(),
            mal_mask.len()
        )));
    }
    let (few, nonfew): (Vec<usize>, Vec<usize>) = (0..x.rows()).partition(|&i| mal_mask[i]);
    let few_target = x.select_rows(&few);
    let nonfew_target = x.select_rows(&nonfew);
    let l_few = set_error_on(tape, x_hat, few, few_target, reduction)?;
    let l_nonfew = set_error_on(tape, x_hat, nonfew, nonfew_target, reduction)?;
    Ok((l_few, l_nonfew))
}

fn run_value<T: Scalar, F>(f: F) -> Result<Matrix<T>>
where
    F: FnOnce(&mut Tape<T>) -> Result<Var>,
{
    let mut tape = Tape::new();
    let out = f(&mut tape)?;
    Ok(tape.value(out).clone())
}

pub fn readout<T: Scalar>(h: &Matrix<T>) -> Result<Vec<T>> {
    if h.is_empty() {
        return Err(FeaeError::Precondition(
            "readout of an empty embedding matrix".into(),
        ));
    }
    Ok(run_value(|t| {
        let hv = t.leaf(h.clone());
        readout_on(t, hv)
    })?
    .into_data())
}

pub fn discriminate<T: Scalar>(h: &Matrix<T>, s: &[T], w_disc: &Param<T>) -> Result<Vec<T>> {
    Ok(run_value(|t| {
        let hv = t.leaf(h.clone());
        let sv = t.leaf(Matrix::row_vector(s.to_vec()));
        let w = t.param(w_disc);
        discriminate_on(t, hv, sv, w)
    })?
    .into_data())
}

pub fn dgi_loss(pos_probs: &[f64], neg_probs: &[f64]) -> Result<f64> {
    if pos_probs.is_empty() || neg_probs.is_empty() {
        return Err(FeaeError::Precondition(
            "contrastive loss needs both positive and negative edges".into(),
        ));
    }
    let probs: Vec<f64> = pos_probs.iter().chain(neg_probs).copied().collect();
    let targets: Vec<f64> = std::iter::repeat_n(1.0, pos_probs.len())
        .chain(std::iter::repeat_n(0.0, neg_probs.len()))
        .collect();
    Ok(bce_value(&probs, &targets))
}

pub fn reconstruct<T: Scalar>(h: &Matrix<T>, w_rec: &Param<T>) -> Result<Matrix<T>> {
    run_value(|t| {
        let hv = t.leaf(h.clone());
        let w = t.param(w_rec);
        reconstruct_on(t, hv, w)
    })
}

pub fn recon_losses<T: Scalar>(
    x: &Matrix<T>,
    x_hat: &Matrix<T>,
    mal_mask: &[bool],
    reduction: Reduction,
) -> Result<(T, T)> {
    let mut tape = Tape::new();
    let xh = tape.leaf(x_hat.clone());
    let (few, nonfew) = recon_losses_on(&mut tape, x, xh, mal_mask, reduction)?;
    Ok((tape.scalar(few), tape.scalar(nonfew)))
}

/// Loss weights and switches for one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveSettings {
    pub alpha: f64,
    pub beta: f64,
    pub reduction: Reduction,
    pub mode: SslMode,
}

/// Tape handles of the recorded loss terms.
#[derive(Debug, Clone, Copy)]
pub struct ObjectiveVars {
    pub total: Var,
    pub dgi: Var,
    pub few: Var,
    pub nonfew: Var,
    pub h_pos: Var,
}

impl ObjectiveVars {
    pub fn breakdown<T: Scalar>(&self, tape: &Tape<T>) -> LossBreakdown {
        let v = |x: Var| tape.scalar(x).to_f64().unwrap_or(f64::NAN);
        LossBreakdown {
            l_dgi: v(self.dgi),
            l_few: v(self.few),
            l_nonfew: v(self.nonfew),
            l_total: v(self.total),
        }
    }
}

/// Records the full objective on `tape`.
///
/// `pos` and `neg` are the two augmented views; `mal_mask` is indexed by the
/// edges of the graph both views were derived from. Reconstruction covers the
/// positive view's edges that have an origin there, against their positive
/// view features. In `DgiOnly` mode the reconstruction terms are still
/// recorded (for reporting) but do not reach `total`.
#[allow(clippy::too_many_arguments)]
pub fn objective_on<T: Scalar>(
    tape: &mut Tape<T>,
    pos: &FlowGraph,
    neg: &FlowGraph,
    mal_mask: &[bool],
    enc: EncoderVars,
    ssl: SslVars,
    settings: &ObjectiveSettings,
) -> Result<ObjectiveVars> {
    let x_pos = tape.leaf(pos.x.cast());
    let x_neg = tape.leaf(neg.x.cast());
    let h_pos = encode_on(tape, pos, x_pos, enc)?;
    let h_neg = encode_on(tape, neg, x_neg, enc)?;

    let s = readout_on(tape, h_pos)?;
    let z_pos = discriminator_logits_on(tape, h_pos, s, ssl.w_disc)?;
    let z_neg = discriminator_logits_on(tape, h_neg, s, ssl.w_disc)?;
    let dgi = dgi_loss_on(tape, z_pos, z_neg)?;

    let mut kept = Vec::with_capacity(pos.num_edges());
    let mut mask = Vec::with_capacity(pos.num_edges());
    for (e, o) in pos.origin.iter().enumerate() {
        if let Some(o) = *o {
            let m = *mal_mask.get(o).ok_or_else(|| {
                FeaeError::Dimension(format!(
                    "edge origin {o} outside a mask of {} edges",
                    mal_mask.len()
                ))
            })?;
            kept.push(e);
            mask.push(m);
        }
    }
    let h_kept = if kept.len() == pos.num_edges() {
        h_pos
    } else {
        tape.gather_rows(h_pos, kept.clone().into())?
    };
    let x_hat = reconstruct_on(tape, h_kept, ssl.w_rec)?;
    let target = pos.x.select_rows(&kept).cast();
    let (few, nonfew) = recon_losses_on(tape, &target, x_hat, &mask, settings.reduction)?;

    let total = match settings.mode {
        SslMode::DgiOnly => dgi,
        SslMode::Hybrid => {
            let a = tape.scale(nonfew, T::lit(settings.alpha));
            let b = tape.scale(few, T::lit(-settings.beta));
            let recon = tape.add(a, b)?;
            tape.add(dgi, recon)?
        }
    };
    Ok(ObjectiveVars {
        total,
        dgi,
        few,
        nonfew,
        h_pos,
    })
}
