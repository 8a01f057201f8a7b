mod common;

use common::*;
use hiercast::hierarchy::Hierarchy;
use hiercast::linalg::DenseMatrix;
use hiercast::pipeline::coherence_violation;
use hiercast::reconcile::{fit_erm, fit_reconciler, projection, Method, Reconciler, Weights};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn fit_all(h: &Hierarchy, seed: u64) -> Vec<Reconciler> {
    let mut r = rng(seed);
    let t = 2 * h.n() + 5;
    let residuals = random_matrix(&mut r, h.n(), t);
    let y = random_matrix(&mut r, h.n(), t);
    let y_hat = y.add(&random_matrix(&mut r, h.n(), t)).unwrap();
    let mut out: Vec<Reconciler> = [Method::BottomUp, Method::Ols, Method::WlsStruct, Method::WlsVar, Method::MintShrink]
        .into_iter()
        .map(|m| fit_reconciler(m, h, Some(&residuals)).unwrap())
        .collect();
    out.push(fit_erm(h, &y, &y_hat).unwrap());
    out
}

fn sg(r: &Reconciler) -> DenseMatrix {
    r.s().to_dense().matmul(&r.g().unwrap().to_dense()).unwrap()
}

/// Minimizes `||Y - S P Y_hat||_F` over `vec(P)` as one ordinary
/// least-squares problem with design matrix `Y_hatᵀ ⊗ S`.
fn brute_force_erm(h: &Hierarchy, y: &DenseMatrix, y_hat: &DenseMatrix) -> DenseMatrix {
    let s = h.s().to_dense();
    let (n, n_b, t) = (h.n(), h.n_b(), y.n_cols());
    let mut design = DMatrix::<f64>::zeros(n * t, n_b * n);
    for col_t in 0..t {
        for j in 0..n {
            for i in 0..n_b {
                let coef = y_hat.get(j, col_t);
                for row in 0..n {
                    design[(col_t * n + row, j * n_b + i)] = s.get(row, i) * coef;
                }
            }
        }
    }
    let rhs = DMatrix::from_fn(n * t, 1, |k, _| y.get(k % n, k / n));
    let sol = design.svd(true, true).solve(&rhs, 1e-12).unwrap();
    DenseMatrix::from_fn(n_b, n, |i, j| sol[(j * n_b + i, 0)])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_method_is_coherent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_hierarchy(&mut r, 30, 4, 6);
        let u_t = h.partition().u_t.to_dense();
        let base = random_matrix(&mut r, h.n(), 5);
        for rec in fit_all(&h, seed) {
            let usg = u_t.matmul(&sg(&rec)).unwrap();
            prop_assert!(usg.max_abs() < 1e-8, "{}: {}", rec.method(), usg.max_abs());
            let out = rec.reconcile_panel(&base).unwrap();
            prop_assert!(coherence_violation(&h, &out).unwrap() < 1e-8 * (1.0 + out.max_abs()));
        }
    }

    #[test]
    fn projections_are_idempotent_and_unbiased(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_hierarchy(&mut r, 30, 4, 6);
        let s = h.s().to_dense();
        for rec in fit_all(&h, seed).into_iter().filter(|r| r.method() != Method::Erm) {
            let p = sg(&rec);
            prop_assert!(p.matmul(&p).unwrap().max_abs_diff(&p) < 1e-8, "{}", rec.method());
            let gs = rec.g().unwrap().to_dense().matmul(&s).unwrap();
            prop_assert!(gs.max_abs_diff(&DenseMatrix::identity(h.n_b())) < 1e-8, "{}", rec.method());
        }
    }

    #[test]
    fn reconciling_coherent_forecasts_changes_nothing(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_hierarchy(&mut r, 30, 4, 6);
        let coherent = h.aggregate_rows(&random_matrix(&mut r, h.n_b(), 4)).unwrap();
        for rec in fit_all(&h, seed).into_iter().filter(|r| r.method() != Method::Erm) {
            let out = rec.reconcile_panel(&coherent).unwrap();
            prop_assert!(out.max_abs_diff(&coherent) < 1e-8, "{}", rec.method());
        }
    }

    #[test]
    fn identity_weights_give_ols(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_hierarchy(&mut r, 20, 3, 5);
        let ols = fit_reconciler(Method::Ols, &h, None).unwrap().g().unwrap().to_dense();
        let mint = projection(&h, &Weights::Dense(DenseMatrix::identity(h.n()))).unwrap();
        prop_assert!(ols.max_abs_diff(&mint) < 1e-12);
    }

    #[test]
    fn erm_matches_brute_force_least_squares(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = loop {
            let h = random_hierarchy(&mut r, 6, 2, 3);
            if h.n() <= 12 {
                break h;
            }
        };
        let t = 3 * h.n();
        let y = random_matrix(&mut r, h.n(), t);
        let y_hat = y.add(&random_matrix(&mut r, h.n(), t)).unwrap();
        let got = fit_erm(&h, &y, &y_hat).unwrap();
        prop_assert!(!got.pinv_fallback());
        let want = brute_force_erm(&h, &y, &y_hat);
        prop_assert!(got.g().unwrap().to_dense().max_abs_diff(&want) < 1e-8);
    }
}

#[test]
fn toy_ols_closed_form() {
    let g = fit_reconciler(Method::Ols, &toy(), None).unwrap().g().unwrap().to_dense();
    let want = DenseMatrix::from_rows(&[vec![1.0 / 3.0, 2.0 / 3.0, -1.0 / 3.0], vec![1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]]).unwrap();
    assert!(g.max_abs_diff(&want) < 1e-12);
}

#[test]
fn bottom_up_keeps_bottom_forecasts() {
    let h = toy();
    let rec = fit_reconciler(Method::BottomUp, &h, None).unwrap();
    assert_eq!(rec.reconcile(&[100.0, 1.0, 2.0]).unwrap(), vec![3.0, 1.0, 2.0]);
}

#[test]
fn rank_deficient_forecasts_use_the_pseudo_inverse() {
    let h = toy();
    let mut r = rng(3);
    let y = random_matrix(&mut r, 3, 10);
    // identical rows: rank one
    let row: Vec<f64> = (0..10).map(|t| t as f64).collect();
    let y_hat = DenseMatrix::from_fn(3, 10, |_, t| row[t]);
    let rec = fit_erm(&h, &y, &y_hat).unwrap();
    assert!(rec.pinv_fallback());
    assert!(coherence_violation(&h, &rec.reconcile_panel(&y_hat).unwrap()).unwrap() < 1e-9);
}
