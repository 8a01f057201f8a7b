//! Fitting the gradient-boosted trees directly on a feature matrix, with a
//! validation set for early stopping, then saving and reloading the model.

use hiercast::gbdt::{fit, Booster, FeatureMatrix, TrainConfig, Validation};
use hiercast::objective::{SquaredError, SquaredErrorMetric};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rng: &mut ChaCha8Rng, n: usize) -> (FeatureMatrix, Vec<f64>) {
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    // a feature with missing values that still carries signal
    let x1: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.2) { f64::NAN } else { rng.random_range(0.0..1.0) })
        .collect();
    let y = x0
        .iter()
        .zip(&x1)
        .map(|(a, b)| a.sin() + if b.is_nan() { 1.0 } else { *b } + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    let features = FeatureMatrix::new(vec!["x0".into(), "x1".into()], vec![x0, x1]).expect("valid columns");
    (features, y)
}

fn main() -> hiercast::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (train_x, train_y) = sample(&mut rng, 4000);
    let (valid_x, valid_y) = sample(&mut rng, 1000);
    let config = TrainConfig {
        n_estimators: 500,
        learning_rate: 0.1,
        num_leaves: 15,
        early_stopping_rounds: Some(25),
        ..TrainConfig::default()
    };
    let train = train_x.bin(&train_y, config.max_bins)?;
    let valid = valid_x.bin_with(&valid_y, train.mappers().to_vec())?;
    let booster = fit(
        &train,
        Some(Validation {
            data: &valid,
            metric: &SquaredErrorMetric,
        }),
        &mut SquaredError,
        &config,
    )?;
    println!(
        "{} trees grown, best iteration {}",
        booster.trees().len(),
        booster.best_iteration()
    );
    for log in booster.history().iter().step_by(20) {
        println!("iter {:>4} train {:.4} valid {:.4}", log.iteration, log.train_loss, log.valid_metric.unwrap_or(f64::NAN));
    }

    let path = std::env::temp_dir().join("hiercast_example_model.json");
    booster.save(&path)?;
    let reloaded = Booster::load(&path)?;
    assert_eq!(reloaded.predict(&valid_x)?, booster.predict(&valid_x)?);
    println!("model round-tripped through {}", path.display());
    Ok(())
}
