mod common;

use common::{bilstm_fd_worst, random_seq};
use lane_intent::bilstm::{bilstm_layer, lstm_cell, BiLstmEncoder, LayerParams, LstmParams, Pooling};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gate equations written out one at a time, without the stacked layout tricks.
fn reference_cell(x: &[f64], h: &[f64], c: &[f64], p: &LstmParams) -> (Vec<f64>, Vec<f64>) {
    let hd = p.hidden;
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let gate = |block: usize, j: usize| {
        let r = block * hd + j;
        let wx: f64 = (0..p.d_in).map(|k| p.w[r * p.d_in + k] * x[k]).sum();
        let uh: f64 = (0..hd).map(|k| p.u[r * hd + k] * h[k]).sum();
        wx + uh + p.b[r]
    };
    let mut h_new = Vec::new();
    let mut c_new = Vec::new();
    for j in 0..hd {
        let f = sig(gate(0, j));
        let i = sig(gate(1, j));
        let cand = gate(2, j).tanh();
        let o = sig(gate(3, j));
        let cj = f * c[j] + i * cand;
        c_new.push(cj);
        h_new.push(o * cj.tanh());
    }
    (h_new, c_new)
}

#[test]
fn cell_matches_reference_implementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let enc = BiLstmEncoder::init(3, 4, Pooling::Mean, &mut rng);
        let p = &enc.layer1.forward;
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (h1, c1) = lstm_cell(&x, &h, &c, p).unwrap();
        let (h2, c2) = reference_cell(&x, &h, &c, p);
        for j in 0..4 {
            assert!((h1[j] - h2[j]).abs() < 1e-12);
            assert!((c1[j] - c2[j]).abs() < 1e-12);
            assert!(h1[j].abs() < 1.0);
        }
    }
}

#[test]
fn reversed_input_with_swapped_directions_mirrors_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let enc = BiLstmEncoder::init(3, 4, Pooling::Mean, &mut rng);
    let seq = random_seq(7, 3, &mut rng);
    let out = bilstm_layer(&seq.data, 7, &enc.layer1).unwrap();
    let reversed: Vec<f64> = (0..7).rev().flat_map(|t| seq.row(t).to_vec()).collect();
    let swapped = LayerParams {
        forward: enc.layer1.backward.clone(),
        backward: enc.layer1.forward.clone(),
    };
    let mirrored = bilstm_layer(&reversed, 7, &swapped).unwrap();
    for t in 0..7 {
        let a = &out[t * 8..(t + 1) * 8];
        let b = &mirrored[(6 - t) * 8..(7 - t) * 8];
        assert_eq!(&a[..4], &b[4..]);
        assert_eq!(&a[4..], &b[..4]);
    }
}

#[test]
fn palindrome_with_shared_parameters_is_half_swapped() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let enc = BiLstmEncoder::init(2, 3, Pooling::Mean, &mut rng);
    let shared = LayerParams {
        forward: enc.layer1.forward.clone(),
        backward: enc.layer1.forward.clone(),
    };
    let half: Vec<[f64; 2]> = (0..3).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let rows: Vec<[f64; 2]> = half.iter().chain(half.iter().rev()).copied().collect();
    let xs: Vec<f64> = rows.iter().flatten().copied().collect();
    let out = bilstm_layer(&xs, 6, &shared).unwrap();
    for t in 0..6 {
        let a = &out[t * 6..(t + 1) * 6];
        let b = &out[(5 - t) * 6..(6 - t) * 6];
        assert_eq!(&a[..3], &b[3..]);
    }
}

#[test]
fn bptt_matches_finite_differences_for_every_tensor() {
    for (pooling, seed) in [(Pooling::Mean, 1), (Pooling::Last, 2), (Pooling::Max, 3)] {
        let err = bilstm_fd_worst(pooling, seed);
        assert!(err < 1e-4, "{pooling:?}: max relative error {err:e}");
    }
}
