//! Every reconciliation method applied to incoherent base forecasts on a
//! synthetic hierarchy: coherence before and after, and the MinT shrinkage
//! intensity.

use hiercast::linalg::DenseMatrix;
use hiercast::pipeline::{coherence_violation, generate, synth_hierarchy_spec, SynthConfig};
use hiercast::reconcile::{fit_erm, fit_reconciler, Method};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> hiercast::Result<()> {
    let panel = generate(&SynthConfig {
        n_series: 60,
        n_days: 400,
        ..SynthConfig::default()
    })?;
    let h = panel.hierarchy(&synth_hierarchy_spec())?;
    let actual = h.aggregate_rows(panel.target())?;

    // noisy "fitted values" whose noise grows with the series' scale
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let fitted = DenseMatrix::from_fn(h.n(), actual.n_cols(), |i, t| {
        actual.get(i, t) + (1.0 + actual.get(i, t).abs().sqrt()) * noise.sample(&mut rng)
    });
    let residuals = fitted.sub(&actual)?;
    let test = DenseMatrix::from_fn(h.n(), 28, |i, t| fitted.get(i, actual.n_cols() - 28 + t));

    println!("base coherence violation: {:.3}", coherence_violation(&h, &test)?);
    for method in Method::ALL {
        let r = match method {
            Method::Erm => fit_erm(&h, &actual, &fitted)?,
            m => fit_reconciler(m, &h, Some(&residuals))?,
        };
        let out = r.reconcile_panel(&test)?;
        let truth = DenseMatrix::from_fn(h.n(), 28, |i, t| actual.get(i, actual.n_cols() - 28 + t));
        let rmse = (out.sub(&truth)?.values().iter().map(|e| e * e).sum::<f64>() / out.values().len() as f64).sqrt();
        println!(
            "{:<12} violation {:>9.2e}  rmse {:>7.3}{}",
            method.as_str(),
            coherence_violation(&h, &out)?,
            rmse,
            r.lambda().map_or(String::new(), |l| format!("  lambda {l:.3}"))
        );
    }
    Ok(())
}
