//! Dense vs sparse hierarchical-loss gradient timings over growing
//! hierarchies, with log-log slopes and an SVG plot.
//!
//! cargo run --example gradient_scaling -- [out.svg]

use hiercast::bench::{gradient_scaling, gradient_slopes, plot_gradient_svg, GradientBenchConfig};

fn main() -> hiercast::Result<()> {
    let timings = gradient_scaling(&GradientBenchConfig::default())?;
    println!("{:>6} {:>7} {:>8} {:>12} {:>12} {:>8}", "n_b", "n", "nnz", "sparse (s)", "dense (s)", "ratio");
    for t in &timings {
        println!(
            "{:>6} {:>7} {:>8} {:>12.5} {:>12.5} {:>8.1}",
            t.n_b, t.n, t.nnz, t.sparse_seconds, t.dense_seconds, t.speedup()
        );
    }
    let (sparse, dense) = gradient_slopes(&timings)?;
    println!("log-log slope: sparse {sparse:.2}, dense {dense:.2}");
    if let Some(path) = std::env::args().nth(1) {
        plot_gradient_svg(path.as_ref(), &timings)?;
        println!("plot written to {path}");
    }
    Ok(())
}
