use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect(),
    )
    .unwrap()
}

/// Contracts the op output against fixed random weights so every output
/// entry carries a distinct upstream gradient.
fn weighted_sum(tape: &mut Tape, out: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(out).shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = tape.constant(random(&mut rng, r, c, -1.0, 1.0));
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

const POINTS: usize = 20;
const KINK: f64 = 1e-3;
const TOL: f64 = 1e-5;

/// Runs the finite-difference check at `POINTS` random inputs away from
/// kinks and returns the worst relative error.
fn check_op<F>(name: &str, shapes: &[(usize, usize)], range: (f64, f64), op: F) -> f64
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 7919);
    let f = |tape: &mut Tape, vars: &[Var]| -> Result<Var> {
        let out = op(tape, vars)?;
        weighted_sum(tape, out, 11)
    };
    let mut worst = 0.0f64;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < POINTS {
        attempts += 1;
        assert!(attempts < 1000, "{name}: could not sample smooth points");
        let params: Vec<Tensor> = shapes
            .iter()
            .map(|&(r, c)| random(&mut rng, r, c, range.0, range.1))
            .collect();
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        f(&mut tape, &vars).unwrap();
        if tape.kink_margin() < KINK {
            continue;
        }
        let report = grad_check(f, &params, DEFAULT_EPS).unwrap();
        worst = worst.max(report.max_rel_error);
        accepted += 1;
    }
    assert!(worst < TOL, "{name}: max relative error {worst:e}");
    worst
}

fn ring_pattern(n: usize) -> Arc<SparseMatrix> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 1.0));
        t.push((i, (i + 1) % n, 1.0));
        t.push(((i + 1) % n, i, 0.5));
    }
    t.push((0, n / 2, 2.0));
    Arc::new(SparseMatrix::from_triplets(n, n, t).unwrap())
}

#[test]
fn record_identities() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_rows(&[[1.0, -2.0], [3.0, 4.0]]));
    let zero = tape.constant(Tensor::zeros(2, 2));
    let sum = tape.add(x, zero).unwrap();
    assert_eq!(tape.value(sum), tape.value(x));
    let id = tape.constant(Tensor::identity(2));
    let prod = tape.matmul(id, x).unwrap();
    assert_eq!(tape.value(prod), tape.value(x));
    let r = tape.param(Tensor::row_vector(vec![-1.0, 2.0]));
    let relu = tape.relu(r);
    assert_eq!(tape.value(relu).data(), &[0.0, 2.0]);
}

#[test]
fn backward_of_sum_is_ones() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]));
    let loss = tape.sum(x);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &Tensor::full(2, 3, 1.0));
}

#[test]
fn backward_of_half_squared_norm_is_identity() {
    let mut tape = Tape::new();
    let xv = Tensor::row_vector(vec![0.5, -1.5, 2.0]);
    let x = tape.param(xv.clone());
    let sq = tape.mul(x, x).unwrap();
    let s = tape.sum(sq);
    let loss = tape.scale(s, 0.5);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &xv);
}

#[test]
fn backward_through_relu_sum() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::row_vector(vec![-1.0, 2.0]));
    let r = tape.relu(x);
    let loss = tape.sum(r);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[0.0, 1.0]);
}

#[test]
fn relu_at_zero_has_zero_slope() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::row_vector(vec![0.0]));
    let r = tape.relu(x);
    let loss = tape.sum(r);
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap().data(), &[0.0]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::zeros(2, 1));
    assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
}

#[test]
fn sparsemax_singleton_support_blocks_gradient() {
    let mut tape = Tape::new();
    let z = tape.param(Tensor::row_vector(vec![2.0, 0.0]));
    let s = tape.sparsemax_row(z);
    assert_eq!(tape.value(s).data(), &[1.0, 0.0]);
    let loss = weighted_sum(&mut tape, s, 3).unwrap();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(z).unwrap().data(), &[0.0, 0.0]);
}

#[test]
fn col_max_routes_to_first_maximal_row() {
    let mut tape = Tape::new();
    let x = tape.param(Tensor::from_rows(&[[1.0, 5.0], [3.0, 5.0], [3.0, 0.0]]));
    let m = tape.col_max(x).unwrap();
    assert_eq!(tape.value(m).data(), &[3.0, 5.0]);
    let loss = tape.sum(m);
    tape.backward(loss).unwrap();
    assert_eq!(
        tape.grad(x).unwrap(),
        &Tensor::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
    );
}

#[test]
fn shared_variable_accumulates_both_paths() {
    // loss = sum(x ⊙ x + 3x) through one leaf versus two duplicated leaves.
    let xv = Tensor::from_rows(&[[0.3, -0.7], [1.1, 2.0]]);
    let build = |tape: &mut Tape, a: Var, b: Var| {
        let sq = tape.mul(a, b).unwrap();
        let lin = tape.scale(a, 3.0);
        let lin2 = tape.scale(b, 0.0);
        let s = tape.add(sq, lin).unwrap();
        let s = tape.add(s, lin2).unwrap();
        tape.sum(s)
    };
    let mut shared = Tape::new();
    let x = shared.param(xv.clone());
    let loss = build(&mut shared, x, x);
    shared.backward(loss).unwrap();

    let mut split = Tape::new();
    let a = split.param(xv.clone());
    let b = split.param(xv.clone());
    let loss = build(&mut split, a, b);
    split.backward(loss).unwrap();
    let expected = split.grad(a).unwrap().add(split.grad(b).unwrap()).unwrap();
    assert_eq!(shared.grad(x).unwrap(), &expected);
    let closed_form = xv.scale(2.0).map(|v| v + 3.0);
    assert!(expected.sub(&closed_form).unwrap().max_abs() < 1e-12);
}

#[test]
fn zero_grad_then_backward_is_bitwise_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut tape = Tape::new();
    let x = tape.param(random(&mut rng, 4, 3, -1.0, 1.0));
    let w = tape.param(random(&mut rng, 3, 2, -1.0, 1.0));
    let h = tape.matmul(x, w).unwrap();
    let h = tape.tanh(h);
    let s = tape.sparsemax_row(h);
    let loss = weighted_sum(&mut tape, s, 9).unwrap();
    tape.backward(loss).unwrap();
    let first = (tape.grad(x).unwrap().clone(), tape.grad(w).unwrap().clone());
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &first.0.scale(2.0));
    tape.zero_grad();
    tape.backward(loss).unwrap();
    assert_eq!(tape.grad(x).unwrap(), &first.0);
    assert_eq!(tape.grad(w).unwrap(), &first.1);
}

#[test]
fn cross_entropy_values() {
    let mut tape = Tape::new();
    let l = tape.constant(Tensor::row_vector(vec![0.0, 0.0]));
    let ce = tape.cross_entropy(l, 0).unwrap();
    assert!((tape.value(ce).data()[0] - std::f64::consts::LN_2).abs() < 1e-15);
    let l = tape.constant(Tensor::row_vector(vec![800.0, 0.0]));
    let ce = tape.cross_entropy(l, 0).unwrap();
    assert_eq!(tape.value(ce).data()[0], 0.0);
    assert!(matches!(tape.cross_entropy(l, 2), Err(Error::Index(_))));
}

#[test]
fn shape_errors_propagate() {
    let mut tape = Tape::new();
    let a = tape.param(Tensor::zeros(2, 3));
    let b = tape.param(Tensor::zeros(2, 2));
    assert!(matches!(tape.matmul(a, a), Err(Error::Shape { .. })));
    assert!(matches!(tape.add(a, b), Err(Error::Shape { .. })));
    let row = tape.constant(Tensor::zeros(1, 3));
    assert!(matches!(tape.concat_cols(a, row), Err(Error::Shape { .. })));
}

#[test]
fn grad_check_examples() {
    let half_sq = |tape: &mut Tape, v: &[Var]| -> Result<Var> {
        let sq = tape.mul(v[0], v[0])?;
        let s = tape.sum(sq);
        Ok(tape.scale(s, 0.5))
    };
    let x = Tensor::row_vector(vec![0.4, -1.3, 2.2]);
    let report = grad_check(half_sq, &[x], DEFAULT_EPS).unwrap();
    assert!(report.max_rel_error < 1e-9, "{}", report.max_rel_error);

    let constant =
        |tape: &mut Tape, _: &[Var]| -> Result<Var> { Ok(tape.constant(Tensor::scalar(3.0))) };
    let report = grad_check(constant, &[Tensor::zeros(2, 2)], DEFAULT_EPS).unwrap();
    assert_eq!(report.max_rel_error, 0.0);
    assert!(grad_check(constant, &[Tensor::zeros(1, 1)], 0.0).is_err());

    let big = Tensor::from_vec(10, 10, (0..100).map(|i| (i as f64).cos()).collect()).unwrap();
    let report =
        grad_check_sampled(half_sq, std::slice::from_ref(&big), DEFAULT_EPS, 7, 1).unwrap();
    assert!(report.max_rel_error < 1e-9);
    let checked = report.numeric[0]
        .data()
        .iter()
        .filter(|&&v| v != 0.0)
        .count();
    assert_eq!(checked, 7);
    let everything = grad_check_sampled(half_sq, &[big], DEFAULT_EPS, 1000, 1).unwrap();
    assert!(everything.numeric[0].data().iter().all(|&v| v != 0.0));
}

#[test]
fn every_op_matches_finite_differences() {
    let pm = (-2.0, 2.0);
    check_op("add", &[(3, 2), (3, 2)], pm, |t, v| t.add(v[0], v[1]));
    check_op("sub", &[(3, 2), (3, 2)], pm, |t, v| t.sub(v[0], v[1]));
    check_op("scale", &[(2, 3)], pm, |t, v| Ok(t.scale(v[0], -1.7)));
    check_op("mul", &[(2, 3), (2, 3)], pm, |t, v| t.mul(v[0], v[1]));
    check_op("matmul", &[(2, 2), (2, 2)], pm, |t, v| t.matmul(v[0], v[1]));
    check_op("matmul-rect", &[(3, 4), (4, 2)], pm, |t, v| {
        t.matmul(v[0], v[1])
    });
    let s = ring_pattern(5);
    let s2 = s.clone();
    check_op("spmm", &[(5, 3)], pm, move |t, v| t.spmm(s2.clone(), v[0]));
    let nnz = s.nnz();
    let s3 = s.clone();
    check_op("pattern_matmul", &[(nnz, 1), (5, 2)], pm, move |t, v| {
        t.pattern_matmul(s3.clone(), v[0], v[1])
    });
    check_op("add_row", &[(4, 3), (1, 3)], pm, |t, v| {
        t.add_row(v[0], v[1])
    });
    check_op("relu", &[(4, 3)], pm, |t, v| Ok(t.relu(v[0])));
    check_op("tanh", &[(4, 3)], pm, |t, v| Ok(t.tanh(v[0])));
    check_op("log", &[(3, 3)], (0.2, 3.0), |t, v| t.log(v[0]));
    check_op("concat", &[(3, 2), (3, 1)], pm, |t, v| {
        t.concat_cols(v[0], v[1])
    });
    check_op("row_mean", &[(5, 3)], pm, |t, v| t.row_mean(v[0]));
    check_op("col_max", &[(5, 3)], pm, |t, v| t.col_max(v[0]));
    check_op("row_select", &[(5, 2)], pm, |t, v| {
        t.row_select(v[0], &[4, 1, 1, 0])
    });
    check_op("softmax_row", &[(3, 4)], pm, |t, v| Ok(t.softmax_row(v[0])));
    check_op("sparsemax_row", &[(3, 5)], pm, |t, v| {
        Ok(t.sparsemax_row(v[0]))
    });
    let segs: Segments = Arc::new(vec![0, 1, 4, 9]);
    let sg = segs.clone();
    check_op("segment_softmax", &[(9, 1)], pm, move |t, v| {
        t.segment_softmax(v[0], sg.clone())
    });
    let sg = segs.clone();
    check_op("segment_sparsemax", &[(9, 1)], pm, move |t, v| {
        t.segment_sparsemax(v[0], sg.clone())
    });
    let s4 = s.clone();
    check_op("pair_scores", &[(5, 3), (1, 6)], pm, move |t, v| {
        t.pair_scores(v[0], v[1], s4.clone())
    });
    check_op("sum", &[(3, 3)], pm, |t, v| Ok(t.sum(v[0])));
    check_op("cross_entropy", &[(1, 4)], pm, |t, v| {
        t.cross_entropy(v[0], 2)
    });
}

#[test]
fn pair_scores_match_hand_value() {
    let mut tape = Tape::new();
    let h = tape.constant(Tensor::from_rows(&[[2.0], [3.0]]));
    let a = tape.constant(Tensor::row_vector(vec![1.0, 1.0]));
    let pattern = Arc::new(SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap());
    let e = tape.pair_scores(h, a, pattern).unwrap();
    assert_eq!(tape.value(e).data(), &[5.0]);
}
