//! Few-shot, self-supervised detection of malicious flows in a host graph.
//!
//! Flows become edges of a host multigraph. A one-layer edge encoder is
//! trained with a contrastive (infomax) objective plus a reconstruction term
//! that is minimized on unlabeled edges and maximized on the handful of
//! labeled malicious edges. A small MLP decoder is then fitted on the few-shot
//! edge embeddings and classifies every flow.
//!
//! Module map:
//! - [`nn`]: dense matrices, reverse-mode tape, Adam, gradient checking
//! - [`data`]: NetFlow ingestion, scaling, sampling, synthetic datasets
//! - [`graph`]: host multigraph and neighbor-edge aggregation
//! - [`encoder`]: the edge encoder
//! - [`ssl`]: augmentations and the hybrid self-supervised objective
//! - [`fewshot`]: few-shot edge selection and the MLP decoder
//! - [`pipeline`]: training loops, evaluation, persistence, sweeps

pub mod data;
pub mod encoder;
pub mod error;
pub mod fewshot;
pub mod graph;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod ssl;

pub use error::{ErrorClass, FeaeError, Result};
