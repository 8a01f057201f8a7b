#![allow(dead_code)]

use hiercast::hierarchy::{build_cross_sectional, sample_random_hierarchy, Hierarchy, LevelSpec};
use hiercast::linalg::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two bottom series under one total.
pub fn toy() -> Hierarchy {
    let k = ["a", "b"];
    build_cross_sectional(&k, &[LevelSpec::total("total", &k)]).unwrap()
}

pub fn trivial(n: usize) -> Hierarchy {
    let k: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    build_cross_sectional(&k, &[]).unwrap()
}

/// Random hierarchy with up to `max_b` bottom series.
pub fn random_hierarchy(rng: &mut ChaCha8Rng, max_b: usize, max_levels: usize, max_cats: usize) -> Hierarchy {
    let n_b = rng.random_range(1..=max_b);
    sample_random_hierarchy(n_b, max_levels, max_cats, rng.random()).unwrap()
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-3.0..3.0))
}

/// Textbook dense evaluation of the hierarchical loss: explicit loops over
/// all aggregated cells, no shared code with the library.
pub fn naive_hloss(cs: &Hierarchy, te: &Hierarchy, y_hat: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let s1 = cs.s().to_dense();
    let s2 = te.s().to_dense();
    let l1 = cs.n_levels() as f64;
    let l2 = te.n_levels() as f64;
    let mut total = 0.0;
    for a in 0..s1.n_rows() {
        let d1 = l1 * s1.row(a).iter().sum::<f64>();
        for b in 0..s2.n_rows() {
            let d2 = l2 * s2.row(b).iter().sum::<f64>();
            let mut r = 0.0;
            for i in 0..s1.n_cols() {
                for j in 0..s2.n_cols() {
                    r += s1.get(a, i) * (y_hat.get(i, j) - y.get(i, j)) * s2.get(b, j);
                }
            }
            total += 0.5 * r * r / (d1 * d2);
        }
    }
    total
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Largest entrywise difference relative to the larger matrix's max norm.
pub fn rel_matrix_err(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.max_abs_diff(b) / a.max_abs().max(b.max_abs()).max(1e-12)
}
