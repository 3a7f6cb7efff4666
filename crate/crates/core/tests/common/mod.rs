#![allow(dead_code)]

use feae_core::data::Label;
use feae_core::encoder::EncoderParams;
use feae_core::graph::{EdgeLabel, FlowGraph, Neighborhood};
use feae_core::nn::{grad_check, Matrix, Param, Tape};
use feae_core::ssl::{
    corrupt, objective_on, Augmentation, ObjectiveSettings, Reduction, SslMode, SslParams,
};
use feae_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random labeled multigraph; may contain self-loops and parallel edges.
pub fn random_graph(nodes: usize, edges: usize, d: usize, seed: u64) -> FlowGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..edges)
        .map(|_| (rng.random_range(0..nodes), rng.random_range(0..nodes)))
        .collect();
    let x = Matrix::from_fn(edges, d, |_, _| rng.random::<f32>());
    let labels = (0..edges)
        .map(|e| {
            if e % 7 == 3 {
                EdgeLabel {
                    label: Label::Attack,
                    family: Some(format!("F{}", e % 2)),
                }
            } else {
                EdgeLabel {
                    label: Label::Benign,
                    family: None,
                }
            }
        })
        .collect();
    let keys = (0..nodes).map(|i| format!("h{i}")).collect();
    FlowGraph::from_parts(
        keys,
        pairs,
        x,
        Some(labels),
        (0..edges).map(Some).collect(),
        Neighborhood::Both,
    )
    .unwrap()
}

/// Max relative error of the full hybrid loss gradient over all four weight
/// matrices, in f64, with fixed positive and negative views.
pub fn full_loss_grad_error(seed: u64, reduction: Reduction, mode: SslMode) -> Result<f64> {
    let g = random_graph(10, 20, 4, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let neg = corrupt(&g, &Augmentation::EdgeShuffle, &mut rng)?;
    let enc = EncoderParams::<f64>::init(4, 3, &mut rng)?;
    let ssl = SslParams::<f64>::init(3, 4, &mut rng)?;
    let mut mask = vec![false; 20];
    mask[2] = true;
    mask[9] = true;
    let settings = ObjectiveSettings {
        alpha: 0.2,
        beta: 0.8,
        reduction,
        mode,
    };
    let mut params: Vec<Param<f64>> = vec![
        enc.w_agg.clone(),
        enc.w_edge.clone(),
        ssl.w_disc.clone(),
        ssl.w_rec.clone(),
    ];
    grad_check(&mut params, 1e-5, |ps| {
        let enc = EncoderParams::from_matrices(ps[0].value.clone(), ps[1].value.clone())?;
        let ssl = SslParams::from_matrices(ps[2].value.clone(), ps[3].value.clone())?;
        let mut tape = Tape::<f64>::new();
        let ev = enc.bind(&mut tape);
        let sv = ssl.bind(&mut tape);
        let obj = objective_on(&mut tape, &g, &neg, &mask, ev, sv, &settings)?;
        let grads = tape.backward(obj.total)?;
        let vars = [ev.w_agg, ev.w_edge, sv.w_disc, sv.w_rec];
        for (p, v) in ps.iter_mut().zip(vars) {
            grads.accumulate_into(v, p);
        }
        Ok(tape.scalar(obj.total))
    })
}

/// Brute-force aggregation: every (node, edge) pair, summing rows of edges
/// that touch the node, a self-loop once.
pub fn brute_aggregate(g: &FlowGraph, x: &Matrix<f64>) -> Matrix<f64> {
    let mut out = Matrix::zeros(g.num_nodes, x.cols());
    for u in 0..g.num_nodes {
        for e in 0..g.num_edges() {
            let (s, d) = g.edge(e);
            if s == u || d == u {
                for j in 0..x.cols() {
                    let v = out.get(u, j) + x.get(e, j);
                    out.set(u, j, v);
                }
            }
        }
    }
    out
}

/// Confusion-matrix oracle: (tp, fp, tn, fn) and the macro F1 computed from
/// those counts directly.
pub fn hand_macro_f1(pred: &[bool], truth: &[bool]) -> ((usize, usize, usize, usize), f64) {
    let mut c = (0, 0, 0, 0);
    for (&p, &t) in pred.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, false) => c.2 += 1,
            (false, true) => c.3 += 1,
        }
    }
    let f1 = |tp: usize, fp: usize, fn_: usize| {
        if 2 * tp + fp + fn_ == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let attack = f1(c.0, c.1, c.3);
    let benign = f1(c.2, c.3, c.1);
    (c, (attack + benign) / 2.0)
}
