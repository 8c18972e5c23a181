mod common;

use rdw_core::rnn::{Activation, CellKind};

const HEADS: [Activation; 4] = [Activation::Relu, Activation::Softsign, Activation::Softmax, Activation::Softplus];

#[test]
fn lstm_bptt_matches_finite_differences() {
    for (k, act) in HEADS.into_iter().enumerate() {
        let err = common::gradient_check(CellKind::Lstm, 4, 5, act, 100 + k as u64);
        assert!(err < 1e-4, "{act}: {err:e}");
    }
}

#[test]
fn gru_bptt_matches_finite_differences() {
    for (k, act) in HEADS.into_iter().enumerate() {
        let err = common::gradient_check(CellKind::Gru, 4, 5, act, 200 + k as u64);
        assert!(err < 1e-4, "{act}: {err:e}");
    }
}

#[test]
fn long_sequences_keep_exact_gradients() {
    for cell in [CellKind::Lstm, CellKind::Gru] {
        let err = common::gradient_check(cell, 8, 10, Activation::Tanh, 7);
        assert!(err < 1e-4, "{cell}: {err:e}");
    }
}
