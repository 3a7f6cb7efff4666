mod common;

use std::sync::Arc;

use feae_core::encoder::{encode, EncoderParams};
use feae_core::fewshot::{decoder_loss, decoder_loss_on, DecoderParams, FewShotSelection};
use feae_core::nn::{grad_check, Matrix, Param, Tape};
use feae_core::ssl::{dgi_loss, Reduction, SslMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn full_loss_gradients_match_finite_differences() {
    for seed in 0..3 {
        for reduction in [Reduction::Mean, Reduction::Sum] {
            let err = common::full_loss_grad_error(seed, reduction, SslMode::Hybrid).unwrap();
            assert!(err < 1e-4, "seed {seed} {reduction:?}: {err}");
        }
        let err = common::full_loss_grad_error(seed, Reduction::Mean, SslMode::DgiOnly).unwrap();
        assert!(err < 1e-4, "seed {seed} dgi only: {err}");
    }
}

#[test]
fn decoder_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = Matrix::from_fn(12, 5, |i, j| ((i * 3 + j * 5) % 7) as f64 / 7.0 - 0.4);
    let examples = [(0, true), (3, false), (4, false), (7, true), (11, false)];
    let dec = DecoderParams::<f64>::init(5, 4, &mut rng).unwrap();
    let mut params: Vec<Param<f64>> = vec![
        dec.w1.clone(),
        dec.b1.clone(),
        dec.w2.clone(),
        dec.b2.clone(),
    ];
    let err = grad_check(&mut params, 1e-5, |ps| {
        let d = DecoderParams::from_matrices(
            ps[0].value.clone(),
            ps[1].value.clone(),
            ps[2].value.clone(),
            ps[3].value.clone(),
        )?;
        let mut tape = Tape::<f64>::new();
        let hv = tape.leaf(h.clone());
        let vars = d.bind(&mut tape);
        let loss = decoder_loss_on(&mut tape, hv, &examples, vars)?;
        let grads = tape.backward(loss)?;
        for (p, v) in ps.iter_mut().zip([vars.w1, vars.b1, vars.w2, vars.b2]) {
            grads.accumulate_into(v, p);
        }
        Ok(tape.scalar(loss))
    })
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn analytic_anchors() {
    let ln2 = std::f64::consts::LN_2;
    assert!((dgi_loss(&[0.5; 6], &[0.5; 6]).unwrap() - ln2).abs() < 1e-3);
    let sel = FewShotSelection {
        mal_edges: vec![0],
        benign_edges: vec![1, 2],
    };
    assert!((decoder_loss(&[0.5; 4], &sel).unwrap() - ln2).abs() < 1e-6);

    let g = common::random_graph(6, 9, 3, 1);
    let p = EncoderParams::from_matrices(Matrix::<f64>::zeros(3, 4), Matrix::zeros(8, 4)).unwrap();
    let h = encode(&g, &g.x.cast(), &p).unwrap();
    assert!(h.data().iter().all(|&v| v == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn encoder_gradients_hold_on_random_graphs(seed in 0u64..10_000, nodes in 2usize..8, edges in 1usize..16) {
        let g = common::random_graph(nodes, edges, 3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = EncoderParams::<f64>::init(3, 2, &mut rng).unwrap();
        let x = g.x.cast::<f64>();
        let mut params = vec![enc.w_agg.clone(), enc.w_edge.clone()];
        let err = grad_check(&mut params, 1e-5, |ps| {
            let e = EncoderParams::from_matrices(ps[0].value.clone(), ps[1].value.clone())?;
            let mut tape = Tape::<f64>::new();
            let xv = tape.leaf(x.clone());
            let vars = e.bind(&mut tape);
            let h = feae_core::encoder::encode_on(&mut tape, &g, xv, vars)?;
            let n = tape.value(h).rows();
            let target = Arc::new(Matrix::from_fn(n, 2, |i, j| (i + j) as f64 * 0.1));
            let sq = tape.squared_error(h, (0..n).collect(), target, 1.0)?;
            let grads = tape.backward(sq)?;
            grads.accumulate_into(vars.w_agg, &mut ps[0]);
            grads.accumulate_into(vars.w_edge, &mut ps[1]);
            Ok(tape.scalar(sq))
        }).unwrap();
        prop_assert!(err < 1e-4, "{}", err);
    }
}
