//! Graph augmentations used to build positive and negative views.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{FeaeError, Result};
use crate::graph::{EdgeLabel, FlowGraph};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Augmentation {
    Identity,
    /// Permute the feature rows over a fixed topology.
    EdgeShuffle,
    /// Remove `ceil(p * |V|)` hosts together with every edge touching them.
    NodeDrop {
        p: f64,
    },
    /// Append `ceil(ratio * |E|)` edges between random hosts with uniform features.
    RandomEdgeAdd {
        ratio: f64,
    },
    /// Zero the feature rows of `ceil(p * |E|)` random edges.
    EdgeMask {
        p: f64,
    },
}

impl Augmentation {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(FeaeError::Precondition(format!(
                    "{name} = {v} must lie in (0, 1)"
                )))
            }
        };
        match *self {
            Augmentation::NodeDrop { p } => check("node_drop p", p),
            Augmentation::RandomEdgeAdd { ratio } => check("random_edge_add ratio", ratio),
            Augmentation::EdgeMask { p } => check("edge_mask p", p),
            Augmentation::Identity | Augmentation::EdgeShuffle => Ok(()),
        }
    }
}

/// Named (positive, negative) augmentation pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationPreset {
    /// Original graph vs. feature-shuffled graph.
    #[default]
    DgiDefault,
    /// Host-dropped graph vs. feature-shuffled graph.
    Aug1,
    /// Graph with random extra edges vs. edge-masked graph.
    Aug2,
}

impl AugmentationPreset {
    pub fn pair(self, random_edge_ratio: f64) -> (Augmentation, Augmentation) {
        match self {
            AugmentationPreset::DgiDefault => (Augmentation::Identity, Augmentation::EdgeShuffle),
            AugmentationPreset::Aug1 => {
                (Augmentation::NodeDrop { p: 0.3 }, Augmentation::EdgeShuffle)
            }
            AugmentationPreset::Aug2 => (
                Augmentation::RandomEdgeAdd {
                    ratio: random_edge_ratio,
                },
                Augmentation::EdgeMask { p: 0.3 },
            ),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AugmentationPreset::DgiDefault => "dgi_default",
            AugmentationPreset::Aug1 => "aug1",
            AugmentationPreset::Aug2 => "aug2",
        }
    }
}

impl fmt::Display for AugmentationPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentationPreset {
    type Err = FeaeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dgi_default" => Ok(AugmentationPreset::DgiDefault),
            "aug1" => Ok(AugmentationPreset::Aug1),
            "aug2" => Ok(AugmentationPreset::Aug2),
            other => Err(FeaeError::Config(format!(
                "unknown augmentation preset `{other}`"
            ))),
        }
    }
}

fn count(frac: f64, n: usize) -> usize {
    ((frac * n as f64).ceil() as usize).min(n)
}

/// Applies `spec` to `g`. The result's `origin` maps each edge back to its
/// edge in `g`.
pub fn corrupt<R: Rng + ?Sized>(
    g: &FlowGraph,
    spec: &Augmentation,
    rng: &mut R,
) -> Result<FlowGraph> {
    spec.validate()?;
    match *spec {
        Augmentation::Identity => Ok(g.clone()),
        Augmentation::EdgeShuffle => {
            let mut perm: Vec<usize> = (0..g.num_edges()).collect();
            perm.shuffle(rng);
            g.with_features(g.x.select_rows(&perm))
        }
        Augmentation::EdgeMask { p } => {
            let mut x = g.x.clone();
            for e in index::sample(rng, g.num_edges(), count(p, g.num_edges())) {
                x.row_mut(e).fill(0.0);
            }
            g.with_features(x)
        }
        Augmentation::NodeDrop { p } => {
            let n_drop = count(p, g.num_nodes);
            if n_drop >= g.num_nodes {
                return Err(FeaeError::Precondition(
                    "node drop would remove every host".into(),
                ));
            }
            let mut dropped = vec![false; g.num_nodes];
            for u in index::sample(rng, g.num_nodes, n_drop) {
                dropped[u] = true;
            }
            let mut remap = HashMap::new();
            let mut host_keys = Vec::new();
            for (u, key) in g.host_keys.iter().enumerate() {
                if !dropped[u] {
                    remap.insert(u, host_keys.len());
                    host_keys.push(key.clone());
                }
            }
            let kept: Vec<usize> = (0..g.num_edges())
                .filter(|&e| {
                    let (s, d) = g.edge(e);
                    !dropped[s] && !dropped[d]
                })
                .collect();
            let edges = kept.iter().map(|&e| {
                let (s, d) = g.edge(e);
                (remap[&s], remap[&d])
            });
            FlowGraph::from_parts(
                host_keys,
                edges.collect(),
                g.x.select_rows(&kept),
                g.labels
                    .as_ref()
                    .map(|l| kept.iter().map(|&e| l[e].clone()).collect()),
                kept.iter().map(|&e| g.origin[e]).collect(),
                g.neighborhood(),
            )
        }
        Augmentation::RandomEdgeAdd { ratio } => {
            if g.num_nodes == 0 {
                return Err(FeaeError::Precondition(
                    "cannot add edges to an empty graph".into(),
                ));
            }
            let n_add = count(ratio, g.num_edges());
            let d = g.num_features();
            let mut edges: Vec<(usize, usize)> = g.edges().collect();
            let mut data = g.x.data().to_vec();
            let mut origin = g.origin.clone();
            let mut labels = g.labels.clone();
            for _ in 0..n_add {
                let s = rng.random_range(0..g.num_nodes);
                let mut t = rng.random_range(0..g.num_nodes);
                while g.num_nodes > 1 && t == s {
                    t = rng.random_range(0..g.num_nodes);
                }
                edges.push((s, t));
                data.extend((0..d).map(|_| rng.random::<f32>()));
                origin.push(None);
                if let Some(l) = labels.as_mut() {
                    l.push(EdgeLabel {
                        label: Label::Benign,
                        family: None,
                    });
                }
            }
            let x = Matrix::new(edges.len(), d, data)?;
            FlowGraph::from_parts(
                g.host_keys.clone(),
                edges,
                x,
                labels,
                origin,
                g.neighborhood(),
            )
        }
    }
}
