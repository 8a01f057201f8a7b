//! The hierarchical loss on the smallest non-trivial case: two series under
//! a total, two days under a two-day total.

use hiercast::hierarchy::{build_cross_sectional, LevelSpec};
use hiercast::hloss::{hloss_gradient, hloss_value, make_context, IndexMap};
use hiercast::DenseMatrix;

fn main() -> hiercast::Result<()> {
    let series = ["a", "b"];
    let h_cs = build_cross_sectional(&series, &[LevelSpec::total("total", &series)])?;
    let days = ["d1", "d2"];
    let h_te = build_cross_sectional(&days, &[LevelSpec::total("both days", &days)])?;
    let s = h_cs.s().to_dense();
    for (i, label) in h_cs.row_labels().iter().enumerate() {
        println!("S[{label:>5}] = {:?}", s.row(i));
    }
    println!("d_cs = {:?}, d_te = {:?}", h_cs.d(), h_te.d());

    let ctx = make_context(h_cs, h_te, IndexMap::full(2, 2))?;
    let y = DenseMatrix::zeros(2, 2);
    // an error of one unit on series a, day 1
    let y_hat = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]])?;
    println!("loss = {}", hloss_value(&ctx, &y_hat, &y)?);
    let g = hloss_gradient(&ctx, &y_hat, &y)?;
    for (i, name) in series.iter().enumerate() {
        println!("gradient {name}: {:?}", g.row(i));
    }
    println!("second derivative: {:?}", ctx.hess().values());
    Ok(())
}
