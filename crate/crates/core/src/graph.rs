//! Host multigraph: one node per address, one edge per flow.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{FlowDataset, Label};
use crate::error::{FeaeError, Result};
use crate::nn::{group_sum_value, Csr, Matrix, Scalar, Tape, Var};

/// Which incident edges a node aggregates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Neighborhood {
    /// In- and out-edges; a self-loop counts once.
    #[default]
    Both,
    /// Only edges whose destination is the node.
    Incoming,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLabel {
    pub label: Label,
    pub family: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub num_nodes: usize,
    pub host_keys: Vec<String>,
    src: Arc<[usize]>,
    dst: Arc<[usize]>,
    /// Edge features, one row per edge, entries in [0, 1].
    pub x: Matrix<f32>,
    incidence: Arc<Csr>,
    neighborhood: Neighborhood,
    /// Ground truth, used for few-shot selection and evaluation only.
    pub labels: Option<Vec<EdgeLabel>>,
    /// Index of the edge in the graph this one was derived from; `None` for
    /// edges an augmentation invented.
    pub origin: Vec<Option<usize>>,
}

fn incidence_lists(num_nodes: usize, src: &[usize], dst: &[usize], mode: Neighborhood) -> Csr {
    let mut groups = vec![Vec::new(); num_nodes];
    for (e, (&s, &d)) in src.iter().zip(dst).enumerate() {
        match mode {
            Neighborhood::Both => {
                groups[s].push(e);
                if d != s {
                    groups[d].push(e);
                }
            }
            Neighborhood::Incoming => groups[d].push(e),
        }
    }
    Csr::from_groups(&groups)
}

impl FlowGraph {
    /// Assembles a graph from parts, checking endpoint and feature invariants.
    pub fn from_parts(
        host_keys: Vec<String>,
        edges: Vec<(usize, usize)>,
        x: Matrix<f32>,
        labels: Option<Vec<EdgeLabel>>,
        origin: Vec<Option<usize>>,
        neighborhood: Neighborhood,
    ) -> Result<Self> {
        let num_nodes = host_keys.len();
        if let Some(&(s, d)) = edges
            .iter()
            .find(|&&(s, d)| s >= num_nodes || d >= num_nodes)
        {
            return Err(FeaeError::Dimension(format!(
                "edge ({s}, {d}) out of range for {num_nodes} nodes"
            )));
        }
        if x.rows() != edges.len() || origin.len() != edges.len() {
            return Err(FeaeError::Dimension(format!(
                "{} edges but {} feature rows and {} origins",
                edges.len(),
                x.rows(),
                origin.len()
            )));
        }
        if labels.as_ref().is_some_and(|l| l.len() != edges.len()) {
            return Err(FeaeError::Dimension(
                "label count differs from edge count".into(),
            ));
        }
        if x.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(FeaeError::Precondition(
                "edge features must lie in [0, 1]".into(),
            ));
        }
        let src: Arc<[usize]> = edges.iter().map(|e| e.0).collect();
        let dst: Arc<[usize]> = edges.iter().map(|e| e.1).collect();
        let incidence = Arc::new(incidence_lists(num_nodes, &src, &dst, neighborhood));
        Ok(FlowGraph {
            num_nodes,
            host_keys,
            src,
            dst,
            x,
            incidence,
            neighborhood,
            labels,
            origin,
        })
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn num_features(&self) -> usize {
        self.x.cols()
    }

    pub fn neighborhood(&self) -> Neighborhood {
        self.neighborhood
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        (self.src[e], self.dst[e])
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.src.iter().copied().zip(self.dst.iter().copied())
    }

    pub fn src_index(&self) -> Arc<[usize]> {
        self.src.clone()
    }

    pub fn dst_index(&self) -> Arc<[usize]> {
        self.dst.clone()
    }

    pub fn incidence(&self) -> &Arc<Csr> {
        &self.incidence
    }

    /// Edges incident to node `u` under the graph's neighborhood mode.
    pub fn incident_edges(&self, u: usize) -> &[usize] {
        self.incidence.group(u)
    }

    pub fn is_attack(&self, e: usize) -> Option<bool> {
        self.labels.as_ref().map(|l| l[e].label.is_attack())
    }

    /// Same topology and labels with a different feature matrix.
    pub fn with_features(&self, x: Matrix<f32>) -> Result<Self> {
        FlowGraph::from_parts(
            self.host_keys.clone(),
            self.edges().collect(),
            x,
            self.labels.clone(),
            self.origin.clone(),
            self.neighborhood,
        )
    }
}

/// One node per distinct address, one edge per record in record order.
/// Parallel edges and self-loops are kept.
pub fn build_graph(ds: &FlowDataset, neighborhood: Neighborhood) -> Result<FlowGraph> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut host_keys = Vec::new();
    let mut edges = Vec::with_capacity(ds.len());
    for r in &ds.records {
        let mut ends = [0usize; 2];
        for (slot, key) in ends
            .iter_mut()
            .zip([r.src_addr.as_str(), r.dst_addr.as_str()])
        {
            *slot = *index.entry(key).or_insert_with(|| {
                host_keys.push(key.to_string());
                host_keys.len() - 1
            });
        }
        edges.push((ends[0], ends[1]));
    }
    let d = ds.num_features();
    let mut data = Vec::with_capacity(ds.len() * d);
    for r in &ds.records {
        data.extend(r.features.iter().map(|&v| v as f32));
    }
    let x = Matrix::new(ds.len(), d, data)?;
    let labels = ds
        .records
        .iter()
        .map(|r| EdgeLabel {
            label: r.label,
            family: r.family.clone(),
        })
        .collect();
    let origin = (0..ds.len()).map(Some).collect();
    FlowGraph::from_parts(host_keys, edges, x, Some(labels), origin, neighborhood)
}

/// Row `u` is the sum of the feature rows of the edges incident to `u`.
pub fn aggregate_neighbor_edges<T: Scalar>(g: &FlowGraph, x: &Matrix<T>) -> Result<Matrix<T>> {
    if x.rows() != g.num_edges() {
        return Err(FeaeError::Dimension(format!(
            "{} feature rows for {} edges",
            x.rows(),
            g.num_edges()
        )));
    }
    group_sum_value(x, g.incidence())
}

/// Differentiable form of [`aggregate_neighbor_edges`].
pub fn aggregate_on<T: Scalar>(tape: &mut Tape<T>, g: &FlowGraph, x: Var) -> Result<Var> {
    if tape.value(x).rows() != g.num_edges() {
        return Err(FeaeError::Dimension(format!(
            "{} feature rows for {} edges",
            tape.value(x).rows(),
            g.num_edges()
        )));
    }
    tape.group_sum(x, g.incidence().clone())
}
