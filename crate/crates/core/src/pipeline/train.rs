use log::debug;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::encoder::EncoderParams;
use crate::error::{FeaeError, Result};
use crate::fewshot::{decoder_loss_on, DecoderParams, FewShotSelection};
use crate::graph::FlowGraph;
use crate::nn::{adam_step, AdamConfig, Matrix, Tape};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::ssl::{corrupt, objective_on, LossBreakdown, ObjectiveSettings, SslParams};

/// Smallest drop in loss that counts as an improvement for early stopping.
pub const MIN_IMPROVEMENT: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub encoder: Vec<LossBreakdown>,
    pub decoder: Vec<f64>,
    pub best_encoder_epoch: Option<usize>,
    pub best_decoder_epoch: Option<usize>,
}

/// Tracks the best loss seen and how long since it last improved.
struct EarlyStop {
    best: f64,
    best_epoch: Option<usize>,
    waited: usize,
    patience: usize,
}

impl EarlyStop {
    fn new(patience: usize) -> Self {
        EarlyStop {
            best: f64::INFINITY,
            best_epoch: None,
            waited: 0,
            patience,
        }
    }

    /// Records `loss`; returns true when it is a new best.
    fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if self.best_epoch.is_none() || loss < self.best - MIN_IMPROVEMENT {
            self.best = loss;
            self.best_epoch = Some(epoch);
            self.waited = 0;
            true
        } else {
            self.waited += 1;
            false
        }
    }

    fn exhausted(&self) -> bool {
        self.waited >= self.patience
    }
}

/// Joint encoder and SSL training on the full graph, one step per epoch.
/// Returns the parameters that produced the lowest total loss.
pub fn train_encoder(
    g: &FlowGraph,
    selection: &FewShotSelection,
    cfg: &TrainConfig,
) -> Result<(EncoderParams, SslParams, TrainHistory)> {
    cfg.validate()?;
    let d = g.num_features();
    let mut init_rng = stream_rng(cfg.seed, Stream::Init);
    let mut enc = EncoderParams::<f32>::init(d, cfg.hidden, &mut init_rng)?;
    let mut ssl = SslParams::<f32>::init(cfg.hidden, d, &mut init_rng)?;
    let mut aug_rng = stream_rng(cfg.seed, Stream::Augment);
    let (aug_pos, aug_neg) = cfg.augmentation.pair(cfg.random_edge_ratio);
    let mal_mask = selection.mal_mask(g.num_edges());
    let settings = ObjectiveSettings {
        alpha: cfg.alpha,
        beta: cfg.beta,
        reduction: cfg.recon_reduction,
        mode: cfg.ssl_mode,
    };
    let adam = AdamConfig::new(cfg.lr_encoder, cfg.wd_encoder);

    let mut history = TrainHistory::default();
    let mut stop = EarlyStop::new(cfg.encoder_patience);
    let mut best = (enc.clone(), ssl.clone());
    for epoch in 0..cfg.encoder_epochs_max {
        let pos = corrupt(g, &aug_pos, &mut aug_rng)?;
        let neg = corrupt(g, &aug_neg, &mut aug_rng)?;
        let mut tape = Tape::new();
        let ev = enc.bind(&mut tape);
        let sv = ssl.bind(&mut tape);
        let obj = objective_on(&mut tape, &pos, &neg, &mal_mask, ev, sv, &settings)?;
        let losses = obj.breakdown(&tape);
        if !losses.is_finite() {
            return Err(FeaeError::Numeric(format!(
                "encoder loss is not finite at epoch {epoch}: {losses:?}"
            )));
        }
        history.encoder.push(losses);
        if stop.observe(epoch, losses.l_total) {
            best = (enc.clone(), ssl.clone());
        } else if stop.exhausted() {
            debug!(
                "encoder early stop at epoch {epoch}, best {:?}",
                stop.best_epoch
            );
            break;
        }
        let grads = tape.backward(obj.total)?;
        enc.accumulate(&grads, ev);
        ssl.accumulate(&grads, sv);
        let [a, b] = enc.params_mut();
        let [c, e] = ssl.params_mut();
        adam_step(&mut [a, b, c, e], &adam).map_err(|err| {
            FeaeError::Numeric(format!("epoch {epoch}: {err} (losses {losses:?})"))
        })?;
    }
    history.best_encoder_epoch = stop.best_epoch;
    let (mut enc, mut ssl) = best;
    for p in enc.params_mut().into_iter().chain(ssl.params_mut()) {
        p.reset_state();
    }
    Ok((enc, ssl, history))
}

/// Labeled rows for the decoder: the few-shot set, or every labeled edge of
/// `g` in supervised mode.
pub fn decoder_examples(
    g: &FlowGraph,
    selection: &FewShotSelection,
    supervised: bool,
) -> Result<Vec<(usize, bool)>> {
    if !supervised {
        return Ok(selection.labeled());
    }
    let labels = g.labels.as_ref().ok_or_else(|| {
        FeaeError::Precondition("supervised decoder training needs labels".into())
    })?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(e, l)| (e, l.label.is_attack()))
        .collect())
}

/// Full-batch decoder training on the rows `examples` of the frozen
/// embeddings `h`. Returns the best-loss parameters and the loss per epoch.
pub fn train_decoder(
    h: &Matrix<f32>,
    examples: &[(usize, bool)],
    cfg: &TrainConfig,
) -> Result<(DecoderParams, Vec<f64>, Option<usize>)> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(FeaeError::Precondition("few-shot edge set is empty".into()));
    }
    let mut rng = stream_rng(derive_seed(cfg.seed, 1), Stream::Init);
    let mut dec = DecoderParams::<f32>::init(h.cols(), cfg.mlp_hidden, &mut rng)?;
    let adam = AdamConfig::new(cfg.lr_decoder, cfg.wd_decoder);

    // Only the labeled rows ever reach the decoder.
    let rows: Vec<usize> = examples.iter().map(|&(e, _)| e).collect();
    if let Some(&e) = rows.iter().find(|&&e| e >= h.rows()) {
        return Err(FeaeError::Dimension(format!(
            "labeled edge {e} beyond {} embeddings",
            h.rows()
        )));
    }
    let picked = h.select_rows(&rows);
    let local: Vec<(usize, bool)> = examples
        .iter()
        .enumerate()
        .map(|(i, &(_, m))| (i, m))
        .collect();

    let mut losses = Vec::new();
    let mut stop = EarlyStop::new(cfg.decoder_patience);
    let mut best = dec.clone();
    for epoch in 0..cfg.decoder_epochs_max {
        let mut tape = Tape::new();
        let vars = dec.bind(&mut tape);
        let hv = tape.leaf(picked.clone());
        let loss_var = decoder_loss_on(&mut tape, hv, &local, vars)?;
        let loss = tape.scalar(loss_var) as f64;
        if !loss.is_finite() {
            return Err(FeaeError::Numeric(format!(
                "decoder loss is not finite at epoch {epoch}"
            )));
        }
        losses.push(loss);
        if stop.observe(epoch, loss) {
            best = dec.clone();
        } else if stop.exhausted() {
            debug!(
                "decoder early stop at epoch {epoch}, best {:?}",
                stop.best_epoch
            );
            break;
        }
        let grads = tape.backward(loss_var)?;
        dec.accumulate(&grads, vars);
        adam_step(&mut dec.params_mut(), &adam)
            .map_err(|err| FeaeError::Numeric(format!("epoch {epoch}: {err}")))?;
    }
    for p in best.params_mut() {
        p.reset_state();
    }
    Ok((best, losses, stop.best_epoch))
}
