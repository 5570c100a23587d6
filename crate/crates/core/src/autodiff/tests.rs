use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::seed;

fn m(rows: &[&[f64]]) -> Matrix {
    let v: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    Matrix::from_rows(&v, rows.first().map_or(0, |r| r.len())).unwrap()
}

fn random(rows: usize, cols: usize, rng: &mut seed::Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

/// `Σ out ∘ R` for a fixed random `R`, giving well-scaled gradients.
fn weighted_sum(tape: &mut Tape, out: Var, r: &Matrix) -> Result<Var> {
    let w = tape.constant(r.clone());
    let prod = tape.mul(out, w)?;
    Ok(tape.sum_all(prod))
}

type Result<T> = crate::Result<T>;

#[test]
fn matmul_examples() {
    let mut t = Tape::new();
    let i = t.constant(Matrix::identity(2));
    let a = t.constant(m(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let p = t.matmul(i, a).unwrap();
    assert_eq!(t.value(p), &m(&[&[1.0, 2.0], &[3.0, 4.0]]));
    let r = t.constant(m(&[&[1.0, 2.0]]));
    let c = t.constant(m(&[&[3.0], &[4.0]]));
    let p = t.matmul(r, c).unwrap();
    assert_eq!(t.value(p).item(), 11.0);
    assert!(t.matmul(r, r).is_err());
}

#[test]
fn matmul_gradient_matches_differences() {
    let mut rng = seed::rng(1);
    let a = random(3, 4, &mut rng);
    let b = random(4, 2, &mut rng);
    let check = grad_check(
        |t, v| {
            let p = t.matmul(v[0], v[1])?;
            Ok(t.sum_all(p))
        },
        &[a, b],
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(check.max_relative_error < 1e-6, "{}", check.max_relative_error);
}

#[test]
fn elementwise_examples() {
    let mut t = Tape::new();
    let a = t.param(m(&[&[1.0]]));
    let b = t.param(m(&[&[2.0]]));
    let s = t.add(a, b).unwrap();
    assert_eq!(t.value(s).item(), 3.0);
    let d = t.sub(a, b).unwrap();
    assert_eq!(t.value(d).item(), -1.0);
    let z = t.constant(Matrix::zeros(1, 1));
    let p = t.mul(a, z).unwrap();
    assert_eq!(t.value(p).item(), 0.0);
    let c = t.scale(b, -1.5);
    assert_eq!(t.value(c).item(), -3.0);
    let bad = t.constant(Matrix::zeros(2, 1));
    assert!(t.add(a, bad).is_err());
}

#[test]
fn product_gradient_is_other_factor() {
    let mut rng = seed::rng(2);
    let av = random(2, 3, &mut rng);
    let bv = random(2, 3, &mut rng);
    let mut t = Tape::new();
    let a = t.param(av);
    let b = t.param(bv.clone());
    let p = t.mul(a, b).unwrap();
    let s = t.sum_all(p);
    t.backward(s).unwrap();
    assert_eq!(t.grad(a).unwrap(), &bv);
}

#[test]
fn concat_examples() {
    let mut t = Tape::new();
    let a = t.param(m(&[&[1.0]]));
    let b = t.param(m(&[&[2.0]]));
    let c = t.concat_cols(a, b).unwrap();
    assert_eq!(t.value(c), &m(&[&[1.0, 2.0]]));
    let empty = t.constant(Matrix::zeros(1, 0));
    let same = t.concat_cols(a, empty).unwrap();
    assert_eq!(t.value(same), t.value(a));
    let r = t.constant(m(&[&[5.0, 7.0]]));
    let w = t.mul(c, r).unwrap();
    let s = t.sum_all(w);
    t.backward(s).unwrap();
    assert_eq!(t.grad(a).unwrap(), &m(&[&[5.0]]));
    assert_eq!(t.grad(b).unwrap(), &m(&[&[7.0]]));
    let tall = t.constant(Matrix::zeros(2, 1));
    assert!(t.concat_cols(a, tall).is_err());
}

#[test]
fn activation_examples() {
    assert_eq!(Activation::Relu.apply(-1.0), 0.0);
    assert_eq!(Activation::Relu.derivative(0.0, 0.0), 0.0);
    assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
    assert_eq!(Activation::LeakyRelu(0.2).apply(-2.0), -0.4);
    let check = grad_check(
        |t, v| {
            let y = t.activation(v[0], Activation::Tanh);
            Ok(t.sum_all(y))
        },
        &[Matrix::scalar(0.0)],
        DEFAULT_EPS,
    )
    .unwrap();
    assert!((check.analytic[0].item() - 1.0).abs() < 1e-15);
    assert!(check.max_relative_error < 1e-9);
}

#[test]
fn activation_gradients() {
    let mut rng = seed::rng(3);
    for act in [
        Activation::Identity,
        Activation::Relu,
        Activation::Sigmoid,
        Activation::Tanh,
        Activation::LeakyRelu(0.2),
    ] {
        let x = random(4, 3, &mut rng);
        let r = random(4, 3, &mut rng);
        let check = grad_check(
            |t, v| {
                let y = t.activation(v[0], act);
                weighted_sum(t, y, &r)
            },
            &[x],
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(check.max_relative_error < 1e-6, "{act:?}: {}", check.max_relative_error);
    }
}

#[test]
fn segment_reduce_examples() {
    let mut t = Tape::new();
    let rows = t.param(m(&[&[1.0], &[3.0]]));
    let seg = Arc::new(vec![0, 0]);
    let mean = t.segment_reduce(rows, Arc::clone(&seg), 2, Reduce::Mean).unwrap();
    assert_eq!(t.value(mean), &m(&[&[2.0], &[0.0]]));
    let max = t.segment_reduce(rows, Arc::clone(&seg), 1, Reduce::Max).unwrap();
    assert_eq!(t.value(max).item(), 3.0);
    let s = t.sum_all(max);
    t.backward(s).unwrap();
    assert_eq!(t.grad(rows).unwrap(), &m(&[&[0.0], &[1.0]]));
    assert!(t.segment_reduce(rows, Arc::new(vec![0, 5]), 2, Reduce::Sum).is_err());
}

#[test]
fn max_ties_route_to_first_row() {
    let mut t = Tape::new();
    let rows = t.param(m(&[&[2.0], &[2.0], &[1.0]]));
    let max = t.segment_reduce(rows, Arc::new(vec![0, 0, 0]), 1, Reduce::Max).unwrap();
    let s = t.sum_all(max);
    t.backward(s).unwrap();
    assert_eq!(t.grad(rows).unwrap(), &m(&[&[1.0], &[0.0], &[0.0]]));
}

#[test]
fn gather_and_segment_gradients() {
    let mut rng = seed::rng(4);
    let h = random(5, 3, &mut rng);
    let src = Arc::new(vec![0, 2, 4, 1, 2, 3]);
    let dst = Arc::new(vec![1, 1, 0, 3, 3, 3]);
    for kind in [Reduce::Sum, Reduce::Mean, Reduce::Max] {
        let r = random(5, 3, &mut rng);
        let check = grad_check(
            |t, v| {
                let g = t.gather_rows(v[0], Arc::clone(&src))?;
                let y = t.segment_reduce(g, Arc::clone(&dst), 5, kind)?;
                weighted_sum(t, y, &r)
            },
            std::slice::from_ref(&h),
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(check.max_relative_error < 1e-6, "{kind:?}: {}", check.max_relative_error);
    }
}

#[test]
fn fused_gather_reduce_matches_two_step() {
    let mut rng = seed::rng(14);
    let h = random(5, 3, &mut rng);
    let src = Arc::new(vec![0, 2, 4, 1, 2, 3]);
    let dst = Arc::new(vec![1, 1, 0, 3, 3, 3]);
    for kind in [Reduce::Sum, Reduce::Mean] {
        let r = random(5, 3, &mut rng);
        let mut t = Tape::new();
        let v = t.param(h.clone());
        let g = t.gather_rows(v, Arc::clone(&src)).unwrap();
        let two = t.segment_reduce(g, Arc::clone(&dst), 5, kind).unwrap();
        let fused = t.gather_reduce(v, Arc::clone(&src), Arc::clone(&dst), 5, kind).unwrap();
        assert!(t.value(two).max_abs_diff(t.value(fused)) < 1e-15);
        let check = grad_check(
            |t, v| {
                let y = t.gather_reduce(v[0], Arc::clone(&src), Arc::clone(&dst), 5, kind)?;
                weighted_sum(t, y, &r)
            },
            std::slice::from_ref(&h),
            DEFAULT_EPS,
        )
        .unwrap();
        assert!(check.max_relative_error < 1e-6, "{kind:?}: {}", check.max_relative_error);
    }
    let mut t = Tape::new();
    let v = t.param(h);
    assert!(t.gather_reduce(v, Arc::new(vec![9]), Arc::new(vec![0]), 1, Reduce::Sum).is_err());
}

#[test]
fn softmax_examples() {
    let mut t = Tape::new();
    let s = t.param(m(&[&[0.0], &[0.0]]));
    let p = t.segment_softmax(s, Arc::new(vec![0, 0]), 1).unwrap();
    assert_eq!(t.value(p), &m(&[&[0.5], &[0.5]]));
    let one = t.param(m(&[&[-3.0]]));
    let p = t.segment_softmax(one, Arc::new(vec![0]), 2).unwrap();
    assert_eq!(t.value(p).item(), 1.0);

    let base = m(&[&[0.3], &[-1.2], &[2.0], &[0.7]]);
    let seg = Arc::new(vec![0, 1, 0, 0]);
    let a = t.constant(base.clone());
    let b = t.constant(base.map(|x| x + 123.4));
    let pa = t.segment_softmax(a, Arc::clone(&seg), 2).unwrap();
    let pb = t.segment_softmax(b, seg, 2).unwrap();
    assert!(t.value(pa).max_abs_diff(t.value(pb)) < 1e-12);
}

#[test]
fn softmax_gradient() {
    let mut rng = seed::rng(5);
    let s = random(6, 1, &mut rng);
    let r = random(6, 1, &mut rng);
    let seg = Arc::new(vec![2, 0, 2, 2, 0, 1]);
    let check = grad_check(
        |t, v| {
            let p = t.segment_softmax(v[0], Arc::clone(&seg), 3)?;
            weighted_sum(t, p, &r)
        },
        &[s],
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(check.max_relative_error < 1e-6, "{}", check.max_relative_error);
}

#[test]
fn l2_examples_and_gradient() {
    let mut t = Tape::new();
    let h = t.param(m(&[&[3.0, 4.0], &[0.0, 0.0]]));
    let n = t.l2_normalize_rows(h);
    assert_eq!(t.value(n), &m(&[&[0.6, 0.8], &[0.0, 0.0]]));

    let mut rng = seed::rng(6);
    let x = random(4, 3, &mut rng);
    let r = random(4, 3, &mut rng);
    let check = grad_check(
        |t, v| {
            let y = t.l2_normalize_rows(v[0]);
            weighted_sum(t, y, &r)
        },
        &[x],
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(check.max_relative_error < 1e-6, "{}", check.max_relative_error);
}

#[test]
fn loss_examples() {
    let mut t = Tape::new();
    let x = m(&[&[1.0, -2.0], &[0.5, 4.0]]);
    let p = t.param(x.clone());
    let l = t.mse(p, &x).unwrap();
    assert_eq!(t.value(l).item(), 0.0);
    let z = t.param(Matrix::scalar(0.0));
    let l = t.bce_with_logits(z, &[1.0]).unwrap();
    assert!((t.value(l).item() - std::f64::consts::LN_2).abs() < 1e-15);
    let logits = t.param(m(&[&[0.0, 0.0]]));
    assert!(t.cross_entropy(logits, &[2]).is_err());
    let big = t.param(m(&[&[1000.0], &[-1000.0]]));
    let l = t.bce_with_logits(big, &[1.0, 0.0]).unwrap();
    assert!(t.value(l).item().abs() < 1e-12);
}

#[test]
fn loss_gradients() {
    let mut rng = seed::rng(7);
    let logits = random(5, 3, &mut rng);
    let check = grad_check(|t, v| t.cross_entropy(v[0], &[0, 2, 1, 1, 0]), &[logits], DEFAULT_EPS).unwrap();
    assert!(check.max_relative_error < 1e-5, "ce: {}", check.max_relative_error);
    let col = random(5, 1, &mut rng);
    let check = grad_check(|t, v| t.bce_with_logits(v[0], &[1.0, 0.0, 0.0, 1.0, 1.0]), &[col], DEFAULT_EPS).unwrap();
    assert!(check.max_relative_error < 1e-5, "bce: {}", check.max_relative_error);
    let pred = random(3, 2, &mut rng);
    let target = random(3, 2, &mut rng);
    let check = grad_check(|t, v| t.mse(v[0], &target), &[pred], DEFAULT_EPS).unwrap();
    assert!(check.max_relative_error < 1e-6, "mse: {}", check.max_relative_error);
}

#[test]
fn bias_and_row_scale_gradients() {
    let mut rng = seed::rng(8);
    let a = random(4, 3, &mut rng);
    let b = random(1, 3, &mut rng);
    let s = random(4, 1, &mut rng);
    let r = random(4, 3, &mut rng);
    let check = grad_check(
        |t, v| {
            let y = t.add_row_bias(v[0], v[1])?;
            let y = t.row_scale(y, v[2])?;
            weighted_sum(t, y, &r)
        },
        &[a, b, s],
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(check.max_relative_error < 1e-6, "{}", check.max_relative_error);
}

#[test]
fn backward_requires_scalar() {
    let mut t = Tape::new();
    let a = t.param(Matrix::zeros(2, 1));
    assert!(t.backward(a).is_err());
}

#[test]
fn reused_parameter_accumulates() {
    let mut t = Tape::new();
    let w = t.param(Matrix::scalar(3.0));
    let sq = t.mul(w, w).unwrap();
    let y = t.add(sq, w).unwrap();
    t.backward(y).unwrap();
    assert_eq!(t.grad(w).unwrap().item(), 7.0);
}

#[test]
fn linear_function_has_no_error() {
    let check = grad_check(
        |t, v| {
            let y = t.scale(v[0], 2.5);
            Ok(t.sum_all(y))
        },
        &[m(&[&[0.1, -0.4, 2.0]])],
        DEFAULT_EPS,
    )
    .unwrap();
    assert!(check.max_relative_error < 1e-9);
}

#[test]
fn corrupted_gradient_is_detected() {
    let mut rng = seed::rng(9);
    let x = random(3, 3, &mut rng);
    let check = grad_check(
        |t, v| {
            let y = t.activation(v[0], Activation::Tanh);
            Ok(t.sum_all(y))
        },
        &[x],
        DEFAULT_EPS,
    )
    .unwrap();
    let corrupted: Vec<Matrix> = check.analytic.iter().map(|g| g.map(|x| x * 1.1)).collect();
    assert!(max_relative_error(&corrupted, &check.numeric) > 1e-2);
}

#[test]
fn repeated_backward_is_bit_identical() {
    let run = || {
        let mut rng = seed::rng(10);
        let x = random(6, 4, &mut rng);
        let w = random(4, 2, &mut rng);
        let mut t = Tape::new();
        let xv = t.param(x);
        let wv = t.param(w);
        let y = t.matmul(xv, wv).unwrap();
        let y = t.segment_reduce(y, Arc::new(vec![0, 1, 0, 2, 2, 2]), 3, Reduce::Mean).unwrap();
        let y = t.activation(y, Activation::Sigmoid);
        let s = t.sum_all(y);
        t.backward(s).unwrap();
        (t.grad(xv).unwrap().clone(), t.grad(wv).unwrap().clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn log_sum_exp_is_stable() {
    let v = tape::log_sum_exp(&[1000.0, 1000.0]);
    assert!((v - (1000.0 + std::f64::consts::LN_2)).abs() < 1e-12);
    assert!(tape::sigmoid(-800.0) >= 0.0);
    assert_eq!(tape::sigmoid(800.0), 1.0);
}

proptest! {
    #[test]
    fn segment_sum_conserves_mass(
        n_rows in 1usize..20,
        n_seg in 1usize..6,
        seed_v in any::<u64>(),
    ) {
        let mut rng = seed::rng(seed_v);
        let rows = random(n_rows, 2, &mut rng);
        let seg: Vec<usize> = (0..n_rows).map(|_| rng.gen_range(0..n_seg)).collect();
        let mut t = Tape::new();
        let r = t.constant(rows.clone());
        let out = t.segment_reduce(r, Arc::new(seg), n_seg, Reduce::Sum).unwrap();
        prop_assert!((t.value(out).sum() - rows.sum()).abs() < 1e-12);
    }

    #[test]
    fn softmax_is_a_distribution_per_segment(
        scores in proptest::collection::vec(-50.0f64..50.0, 1..20),
        n_seg in 1usize..5,
        seed_v in any::<u64>(),
    ) {
        let mut rng = seed::rng(seed_v);
        let seg: Vec<usize> = (0..scores.len()).map(|_| rng.gen_range(0..n_seg)).collect();
        let mut t = Tape::new();
        let s = t.constant(Matrix::column(&scores));
        let p = t.segment_softmax(s, Arc::new(seg.clone()), n_seg).unwrap();
        let p = t.value(p);
        let mut sums = vec![0.0; n_seg];
        for (i, &g) in seg.iter().enumerate() {
            let v = p.get(i, 0);
            prop_assert!(v > 0.0 && v <= 1.0);
            sums[g] += v;
        }
        for (g, s) in sums.iter().enumerate() {
            if seg.contains(&g) {
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
