mod common;

use common::*;
use hiercast::hloss::{
    hloss_gradient, hloss_objective, hloss_value, make_context, squared_error_objective, DenseHierarchicalLoss,
    IndexMap,
};
use hiercast::linalg::DenseMatrix;
use proptest::prelude::*;

fn instance(seed: u64) -> (hiercast::hloss::ObjectiveContext, DenseMatrix, DenseMatrix) {
    let mut r = rng(seed);
    let cs = random_hierarchy(&mut r, 8, 3, 4);
    let te = random_hierarchy(&mut r, 8, 3, 4);
    let (nb, nt) = (cs.n_b(), te.n_b());
    let y_hat = random_matrix(&mut r, nb, nt);
    let y = random_matrix(&mut r, nb, nt);
    (make_context(cs, te, IndexMap::full(nb, nt)).unwrap(), y_hat, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_matches_naive_loops(seed in any::<u64>()) {
        let (ctx, y_hat, y) = instance(seed);
        let want = naive_hloss(ctx.h_cs(), ctx.h_te(), &y_hat, &y);
        prop_assert!(rel_err(hloss_value(&ctx, &y_hat, &y).unwrap(), want) < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let (ctx, y_hat, y) = instance(seed);
        let g = hloss_gradient(&ctx, &y_hat, &y).unwrap();
        let step = 1e-3;
        let fd = DenseMatrix::from_fn(y_hat.n_rows(), y_hat.n_cols(), |i, j| {
            let mut plus = y_hat.clone();
            let mut minus = y_hat.clone();
            plus.set(i, j, y_hat.get(i, j) + step);
            minus.set(i, j, y_hat.get(i, j) - step);
            (naive_hloss(ctx.h_cs(), ctx.h_te(), &plus, &y) - naive_hloss(ctx.h_cs(), ctx.h_te(), &minus, &y)) / (2.0 * step)
        });
        prop_assert!(rel_matrix_err(&g, &fd) < 1e-6, "{}", rel_matrix_err(&g, &fd));
    }

    #[test]
    fn second_derivative_matches_second_differences(seed in any::<u64>()) {
        let (ctx, y_hat, y) = instance(seed);
        let step = 0.5;
        let base = hloss_value(&ctx, &y_hat, &y).unwrap();
        let fd = DenseMatrix::from_fn(y_hat.n_rows(), y_hat.n_cols(), |i, j| {
            let mut plus = y_hat.clone();
            let mut minus = y_hat.clone();
            plus.set(i, j, y_hat.get(i, j) + step);
            minus.set(i, j, y_hat.get(i, j) - step);
            let lp = hloss_value(&ctx, &plus, &y).unwrap();
            let lm = hloss_value(&ctx, &minus, &y).unwrap();
            (lp - 2.0 * base + lm) / (step * step)
        });
        prop_assert!(rel_matrix_err(ctx.hess(), &fd) < 1e-5);
    }

    #[test]
    fn sparse_and_dense_paths_agree(seed in any::<u64>()) {
        let (ctx, y_hat, y) = instance(seed);
        let dense = DenseHierarchicalLoss::new(ctx.h_cs(), ctx.h_te());
        let (dv, dg) = dense.value_and_gradient(&y_hat, &y).unwrap();
        let (sv, sg) = ctx.value_and_gradient(&y_hat, &y).unwrap();
        prop_assert!(rel_err(dv, sv) < 1e-12);
        prop_assert!(rel_matrix_err(&dg, &sg) < 1e-12);
        prop_assert!(rel_matrix_err(&dense.hess().unwrap(), ctx.hess()) < 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_the_targets(seed in any::<u64>()) {
        let (ctx, _, y) = instance(seed);
        prop_assert_eq!(hloss_value(&ctx, &y, &y).unwrap(), 0.0);
        prop_assert_eq!(hloss_gradient(&ctx, &y, &y).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn trivial_hierarchies_reduce_to_squared_error(n_b in 1usize..10, n_t in 1usize..10, seed in any::<u64>()) {
        let mut r = rng(seed);
        let pred: Vec<f64> = random_matrix(&mut r, n_b, n_t).into_values();
        let target: Vec<f64> = random_matrix(&mut r, n_b, n_t).into_values();
        let ctx = make_context(trivial(n_b), trivial(n_t), IndexMap::full(n_b, n_t)).unwrap();
        prop_assert_eq!(
            hloss_objective(&ctx, &pred, &target).unwrap(),
            squared_error_objective(&pred, &target).unwrap()
        );
    }

    #[test]
    fn partial_index_map_ignores_unmapped_cells(seed in any::<u64>()) {
        let (ctx, y_hat, y) = instance(seed);
        let (nb, nt) = ctx.grid_shape();
        // drop every other cell: missing cells behave as zero error
        let cells: Vec<(u32, u32)> = ctx.index_map().cells().iter().copied().step_by(2).collect();
        let map = IndexMap::new(nb, nt, cells).unwrap();
        let sub = make_context(ctx.h_cs().clone(), ctx.h_te().clone(), map.clone()).unwrap();
        let pred = map.gather(&y_hat);
        let target = map.gather(&y);
        let gh = hloss_objective(&sub, &pred, &target).unwrap();
        let full_hat = map.scatter(&pred).unwrap();
        let full_y = map.scatter(&target).unwrap();
        let g = hloss_gradient(&ctx, &full_hat, &full_y).unwrap();
        prop_assert_eq!(gh.grad, map.gather(&g));
        prop_assert_eq!(gh.hess, map.gather(ctx.hess()));
    }
}
