mod common;

use common::{check_split_oracle, softmax_fd_worst};
use lane_intent::gbdt::{leaf_value, split_gain};

#[test]
fn best_split_matches_exhaustive_enumeration() {
    let found = check_split_oracle(200, 2024).unwrap();
    assert!(found > 150, "only {found} instances had a split");
}

#[test]
fn split_gain_hand_arithmetic() {
    // (gl, hl, gr, hr, lambda, gamma, expected)
    let table = [
        (-4.0, 2.0, 6.0, 3.0, 1.0, 0.0, 0.5 * (16.0 / 3.0 + 36.0 / 4.0 - 4.0 / 6.0)),
        (2.0, 1.0, -2.0, 1.0, 0.0, 0.0, 4.0),
        (2.0, 1.0, -2.0, 1.0, 1.0, 0.5, 1.5),
        (3.0, 2.0, 3.0, 2.0, 1.0, 0.0, 0.5 * (3.0 + 3.0 - 36.0 / 5.0)),
        (1.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.5),
    ];
    for (gl, hl, gr, hr, lambda, gamma, want) in table {
        let got = split_gain(gl, hl, gr, hr, lambda, gamma);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert_eq!(leaf_value(-4.0, 2.0, 1.0), 4.0 / 3.0);
    assert_eq!(leaf_value(3.0, 0.0, 0.0), 0.0);
}

#[test]
fn softmax_derivatives_match_finite_differences() {
    let worst = softmax_fd_worst(100, 77);
    assert!(worst < 1e-5, "worst relative error {worst}");
}
