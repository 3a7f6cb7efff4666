//! One-layer edge encoder.
//!
//! ```text
//! agg_u = sum of features of edges incident to u
//! h_u   = relu(agg_u . W_agg)
//! H_uv  = [h_u || h_v] . W_edge        (no activation)
//! ```
//!
//! The concatenation is evaluated as `h_u . W_top + h_v . W_bottom`, where
//! `W_top`/`W_bottom` are the first/second halves of `W_edge`'s rows, so the
//! wide product runs per node rather than per edge.

use rand::Rng;

use crate::error::{FeaeError, Result};
use crate::graph::{aggregate_on, FlowGraph};
use crate::nn::{xavier_init, Matrix, Param, Scalar, Tape, Var};
use crate::ssl::{corrupt, Augmentation};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T: Scalar = f32> {
    pub w_agg: Param<T>,
    pub w_edge: Param<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderVars {
    pub w_agg: Var,
    pub w_edge: Var,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        Self::from_matrices(
            xavier_init(input_dim, hidden, rng)?,
            xavier_init(2 * hidden, hidden, rng)?,
        )
    }

    pub fn from_matrices(w_agg: Matrix<T>, w_edge: Matrix<T>) -> Result<Self> {
        if w_edge.rows() != 2 * w_agg.cols() || w_edge.cols() != w_agg.cols() {
            return Err(FeaeError::Dimension(format!(
                "W_edge is {}x{}, expected {}x{} for W_agg {}x{}",
                w_edge.rows(),
                w_edge.cols(),
                2 * w_agg.cols(),
                w_agg.cols(),
                w_agg.rows(),
                w_agg.cols()
            )));
        }
        Ok(EncoderParams {
            w_agg: Param::new("w_agg", w_agg),
            w_edge: Param::new("w_edge", w_edge),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w_agg.value.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_agg.value.cols()
    }

    pub fn bind(&self, tape: &mut Tape<T>) -> EncoderVars {
        EncoderVars {
            w_agg: tape.param(&self.w_agg),
            w_edge: tape.param(&self.w_edge),
        }
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.w_agg, &mut self.w_edge]
    }

    pub fn accumulate(&mut self, grads: &crate::nn::Grads<T>, vars: EncoderVars) {
        grads.accumulate_into(vars.w_agg, &mut self.w_agg);
        grads.accumulate_into(vars.w_edge, &mut self.w_edge);
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            w_agg: self.w_agg.cast(),
            w_edge: self.w_edge.cast(),
        }
    }
}

/// Records the encoder on `tape` and returns the |E| x hidden edge embeddings.
pub fn encode_on<T: Scalar>(
    tape: &mut Tape<T>,
    g: &FlowGraph,
    x: Var,
    vars: EncoderVars,
) -> Result<Var> {
    let (xr, xc) = tape.value(x).shape();
    let (ar, hidden) = tape.value(vars.w_agg).shape();
    if xc != ar {
        return Err(FeaeError::dim(
            (xr, xc),
            (ar, hidden),
            "edge features vs W_agg",
        ));
    }
    let agg = aggregate_on(tape, g, x)?;
    let pre = tape.matmul(agg, vars.w_agg)?;
    let nodes = tape.relu(pre);
    let top = tape.slice_rows(vars.w_edge, 0, hidden)?;
    let bottom = tape.slice_rows(vars.w_edge, hidden, 2 * hidden)?;
    let from_src = tape.matmul(nodes, top)?;
    let from_dst = tape.matmul(nodes, bottom)?;
    tape.gather_add(from_src, from_dst, g.src_index(), g.dst_index())
}

/// Edge embeddings of `g` with features `x`.
pub fn encode<T: Scalar>(g: &FlowGraph, x: &Matrix<T>, p: &EncoderParams<T>) -> Result<Matrix<T>> {
    let mut tape = Tape::new();
    let vars = p.bind(&mut tape);
    let xv = tape.leaf(x.clone());
    let h = encode_on(&mut tape, g, xv, vars)?;
    Ok(tape.value(h).clone())
}

/// Embeddings of the graph's own (f32) features.
pub fn encode_graph(g: &FlowGraph, p: &EncoderParams<f32>) -> Result<Matrix<f32>> {
    encode(g, &g.x, p)
}

/// Embeddings of the positive and negative views of `g`, both under `p`.
/// The positive view is drawn from `rng` before the negative one.
pub fn encode_pair<R: Rng + ?Sized>(
    g: &FlowGraph,
    aug_pos: &Augmentation,
    aug_neg: &Augmentation,
    p: &EncoderParams<f32>,
    rng: &mut R,
) -> Result<(Matrix<f32>, Matrix<f32>)> {
    let pos = corrupt(g, aug_pos, rng)?;
    let neg = corrupt(g, aug_neg, rng)?;
    Ok((encode_graph(&pos, p)?, encode_graph(&neg, p)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Neighborhood;

    fn tiny_graph(x: Matrix<f32>, edges: Vec<(usize, usize)>, n: usize) -> FlowGraph {
        let m = edges.len();
        FlowGraph::from_parts(
            (0..n).map(|i| format!("h{i}")).collect(),
            edges,
            x,
            None,
            (0..m).map(Some).collect(),
            Neighborhood::Both,
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_zero_embeddings() {
        let g = tiny_graph(Matrix::filled(3, 4, 0.7), vec![(0, 1), (1, 2), (2, 0)], 3);
        let p = EncoderParams::from_matrices(Matrix::zeros(4, 5), Matrix::zeros(10, 5)).unwrap();
        let h = encode_graph(&g, &p).unwrap();
        assert_eq!(h.shape(), (3, 5));
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_two_node_graph() {
        // one edge u->v with features e = [0.5, 1.0]; both nodes aggregate e.
        let g = tiny_graph(
            Matrix::from_rows(&[[0.5f32, 1.0]]).unwrap(),
            vec![(0, 1)],
            2,
        );
        let w_agg = Matrix::from_rows(&[[1.0f32, -2.0], [0.5, 1.0]]).unwrap();
        // e . W_agg = [0.5*1 + 1*0.5, 0.5*-2 + 1*1] = [1.0, 0.0] -> relu [1, 0]
        let w_edge =
            Matrix::from_rows(&[[1.0f32, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]]).unwrap();
        // [1, 0, 1, 0] . W_edge = [1 + 5, 2 + 6] = [6, 8]
        let p = EncoderParams::from_matrices(w_agg, w_edge).unwrap();
        let h = encode_graph(&g, &p).unwrap();
        assert_eq!(h.data(), &[6.0, 8.0]);
    }

    #[test]
    fn equal_halves_make_direction_irrelevant() {
        let x = Matrix::from_fn(4, 3, |i, j| ((i * 3 + j) % 5) as f32 / 5.0);
        let fwd = tiny_graph(x.clone(), vec![(0, 1), (1, 2), (3, 1), (2, 0)], 4);
        let rev = tiny_graph(x, vec![(1, 0), (2, 1), (1, 3), (0, 2)], 4);
        let b = Matrix::from_fn(3, 3, |i, j| (i as f32 - j as f32) * 0.3);
        let mut stacked = b.data().to_vec();
        stacked.extend_from_slice(b.data());
        let w_edge = Matrix::new(6, 3, stacked).unwrap();
        let w_agg = Matrix::from_fn(3, 3, |i, j| 0.2 + (i * j) as f32 * 0.1);
        let p = EncoderParams::from_matrices(w_agg, w_edge).unwrap();
        assert_eq!(
            encode_graph(&fwd, &p).unwrap(),
            encode_graph(&rev, &p).unwrap()
        );
    }

    #[test]
    fn pair_views() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let edges: Vec<(usize, usize)> = (0..10).map(|i| (i % 6, (i * 5 + 1) % 6)).collect();
        let p = EncoderParams::init(3, 4, &mut rng).unwrap();

        let constant = tiny_graph(Matrix::filled(10, 3, 0.4), edges.clone(), 6);
        let (h, ht) = encode_pair(
            &constant,
            &Augmentation::Identity,
            &Augmentation::EdgeShuffle,
            &p,
            &mut rng,
        )
        .unwrap();
        assert_eq!(h, ht);
        let (h, ht) = encode_pair(
            &constant,
            &Augmentation::Identity,
            &Augmentation::Identity,
            &p,
            &mut rng,
        )
        .unwrap();
        assert_eq!(h, ht);

        let distinct = tiny_graph(
            Matrix::from_fn(10, 3, |i, j| ((i * 3 + j) % 10) as f32 / 10.0),
            edges,
            6,
        );
        let (h, ht) = encode_pair(
            &distinct,
            &Augmentation::Identity,
            &Augmentation::EdgeShuffle,
            &p,
            &mut rng,
        )
        .unwrap();
        assert_ne!(h, ht);
    }

    #[test]
    fn receptive_field_is_incident_edges() {
        // edges 0: 0->1, 1: 1->2, 2: 3->4; edge 2 shares no host with edge 0.
        let x = Matrix::from_fn(3, 2, |i, j| (i + j) as f32 / 5.0);
        let g = tiny_graph(x.clone(), vec![(0, 1), (1, 2), (3, 4)], 5);
        let mut x2 = x;
        x2.set(2, 0, 0.9);
        let g2 = g.with_features(x2).unwrap();
        let p = EncoderParams::init(
            2,
            3,
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3),
        )
        .unwrap();
        let (a, b) = (
            encode_graph(&g, &p).unwrap(),
            encode_graph(&g2, &p).unwrap(),
        );
        assert_eq!(a.row(0), b.row(0));
        assert_eq!(a.row(1), b.row(1));
    }

    #[test]
    fn rejects_mismatched_dims() {
        assert!(
            EncoderParams::<f32>::from_matrices(Matrix::zeros(4, 5), Matrix::zeros(9, 5)).is_err()
        );
        let g = tiny_graph(Matrix::filled(1, 3, 0.1), vec![(0, 1)], 2);
        let p = EncoderParams::from_matrices(Matrix::zeros(4, 2), Matrix::zeros(4, 2)).unwrap();
        assert!(encode_graph(&g, &p).is_err());
    }
}
