mod common;

use ccsc::csc::{FeatureMaps, FilterBank};
use ccsc::tensor::{conv_full, corr_valid, fidelity_and_gradients, forward, Grid2, Shape};
use common::*;
use proptest::prelude::*;

fn grid_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = Grid2> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c).prop_map(move |v| Grid2::new(r, c, v).unwrap())
    })
}

#[test]
fn conv_full_matches_naive_loops_on_4x4_by_3x3() {
    let mut r = rng(11);
    for _ in 0..20 {
        let a = random_grid(&mut r, 4, 4);
        let b = random_grid(&mut r, 3, 3);
        let fast = conv_full(&a, &b).unwrap();
        let slow = naive_conv_full(&a, &b);
        assert_eq!(fast.shape(), Shape::new(6, 6));
        for (x, y) in fast.values().iter().zip(slow.values()) {
            assert_close(*x, *y, 1e-12, "conv_full");
        }
    }
}

#[test]
fn adjoint_identity_on_6x6_with_3x3() {
    let mut r = rng(12);
    for _ in 0..20 {
        let f = random_grid(&mut r, 3, 3);
        let z = random_grid(&mut r, 6, 6);
        let res = random_grid(&mut r, 8, 8);
        let lhs = naive_dot(&naive_conv_full(&f, &z), &res);
        let rhs = naive_dot(&z, &corr_valid(&res, &f).unwrap());
        assert!(rel_err(lhs, rhs) <= 1e-10, "{lhs} vs {rhs}");
    }
}

#[test]
fn forward_k2_matches_sum_of_naive_convolutions() {
    let mut r = rng(13);
    let fs = vec![random_grid(&mut r, 3, 2), random_grid(&mut r, 3, 2)];
    let zs = vec![random_grid(&mut r, 5, 6), random_grid(&mut r, 5, 6)];
    let out = forward(
        &FilterBank::new(fs.clone()).unwrap(),
        &FeatureMaps::new(zs.clone()).unwrap(),
    )
    .unwrap();
    let expect = naive_forward(&fs, &zs);
    assert_eq!(out.shape(), Shape::new(7, 7));
    for (x, y) in out.values().iter().zip(expect.values()) {
        assert_close(*x, *y, 1e-12, "forward");
    }
}

#[test]
fn gradients_match_finite_differences_on_8x8() {
    let mut r = rng(14);
    let f = random_grid(&mut r, 3, 3);
    let z = random_grid(&mut r, 6, 6);
    let y = random_grid(&mut r, 8, 8);
    let filters = FilterBank::new(vec![f.clone()]).unwrap();
    let maps = FeatureMaps::new(vec![z.clone()]).unwrap();
    let g = fidelity_and_gradients(&y, &filters, &maps).unwrap();
    assert!(
        rel_err(
            g.cost,
            naive_fidelity(&y, std::slice::from_ref(&f), std::slice::from_ref(&z))
        ) < 1e-12
    );
    let (gm, gf) = finite_difference_gradients(&y, &[f], &[z], 1e-6);
    for (a, b) in g.maps.get(0).values().iter().zip(gm[0].values()) {
        assert!(rel_err(*a, *b) <= 1e-5, "map grad {a} vs {b}");
    }
    for (a, b) in g.filters.get(0).values().iter().zip(gf[0].values()) {
        assert!(rel_err(*a, *b) <= 1e-5, "filter grad {a} vs {b}");
    }
}

#[test]
fn perfect_reconstruction_has_zero_cost_and_gradients() {
    let mut r = rng(15);
    let f = random_grid(&mut r, 2, 3);
    let z = random_grid(&mut r, 4, 4);
    let y = naive_conv_full(&f, &z);
    let g = fidelity_and_gradients(
        &y,
        &FilterBank::new(vec![f]).unwrap(),
        &FeatureMaps::new(vec![z]).unwrap(),
    )
    .unwrap();
    assert!(g.cost < 1e-24);
    assert!(g.maps.coefficients().all(|v| v.abs() < 1e-12));
    assert!(g.filters.coefficients().all(|v| v.abs() < 1e-12));
}

#[test]
fn mismatched_shapes_are_rejected() {
    let f = FilterBank::new(vec![Grid2::zeros(Shape::new(3, 3))]).unwrap();
    let z = FeatureMaps::new(vec![Grid2::zeros(Shape::new(4, 4))]).unwrap();
    assert!(fidelity_and_gradients(&Grid2::zeros(Shape::new(5, 5)), &f, &z).is_err());
    assert!(corr_valid(&Grid2::zeros(Shape::new(2, 5)), &Grid2::zeros(Shape::new(3, 1))).is_err());
    let z2 = FeatureMaps::new(vec![Grid2::zeros(Shape::new(4, 4)); 2]).unwrap();
    assert!(forward(&f, &z2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_full_commutes(a in grid_strategy(6, 6), b in grid_strategy(6, 6)) {
        let ab = conv_full(&a, &b).unwrap();
        let ba = conv_full(&b, &a).unwrap();
        prop_assert_eq!(ab.shape(), Shape::new(a.rows() + b.rows() - 1, a.cols() + b.cols() - 1));
        for (x, y) in ab.values().iter().zip(ba.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn conv_full_agrees_with_reference(a in grid_strategy(7, 7), b in grid_strategy(5, 5)) {
        let fast = conv_full(&a, &b).unwrap();
        let slow = naive_conv_full(&a, &b);
        for (x, y) in fast.values().iter().zip(slow.values()) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn corr_valid_agrees_with_reference(a in grid_strategy(9, 9), b in grid_strategy(9, 9)) {
        prop_assume!(b.rows() <= a.rows() && b.cols() <= a.cols());
        let fast = corr_valid(&a, &b).unwrap();
        let slow = naive_corr_valid(&a, &b);
        prop_assert_eq!(fast.shape(), slow.shape());
        for (x, y) in fast.values().iter().zip(slow.values()) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn conv_and_corr_are_adjoint(f in grid_strategy(4, 4), z in grid_strategy(6, 6), seed in any::<u64>()) {
        let p = Shape::new(f.rows() + z.rows() - 1, f.cols() + z.cols() - 1);
        let mut r = rng(seed);
        let res = random_grid(&mut r, p.rows, p.cols);
        let lhs = naive_dot(&conv_full(&f, &z).unwrap(), &res);
        let rhs = naive_dot(&z, &corr_valid(&res, &f).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn forward_shape_relation(k in 1usize..4, mr in 1usize..5, mc in 1usize..5, qr in 1usize..6, qc in 1usize..6) {
        let f = FilterBank::zeros(k, Shape::new(mr, mc));
        let z = FeatureMaps::zeros(k, Shape::new(qr, qc));
        let y = forward(&f, &z).unwrap();
        prop_assert_eq!(y.shape(), Shape::new(mr + qr - 1, mc + qc - 1));
        prop_assert!(y.values().iter().all(|v| *v == 0.0));
    }
}
