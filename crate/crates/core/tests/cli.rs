use std::path::Path;

use hiercast::cli::run;

fn hc(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["hiercast".to_string(), "--out-dir".into(), dir.display().to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    run(full)
}

fn synth(dir: &Path) -> (String, String) {
    let code = hc(dir, &["synth", "--n-series", "16", "--n-days", "420", "--n-stores", "2", "--n-departments", "2"]);
    assert_eq!(code, 0);
    (
        dir.join("panel.csv").display().to_string(),
        dir.join("hierarchy.json").display().to_string(),
    )
}

const FAST: [&str; 6] = ["--n-estimators", "25", "--n-validation-sets", "1", "--train-days", "200"];

#[test]
fn train_forecast_reconcile_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let (panel, hier) = synth(&data);
    let bu = tmp.path().join("bu");

    let mut args = vec!["train", "--data", &panel, "--hierarchy", &hier, "--objective", "hl", "--metric", "hl"];
    args.extend(FAST);
    assert_eq!(hc(&bu, &args), 0);
    assert!(bu.join("models/model.json").exists());
    assert!(bu.join("training_log.csv").exists());
    let run_json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(bu.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_json["command"], "train");
    assert!(run_json["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));

    assert_eq!(hc(&bu, &["forecast", "--data", &panel, "--hierarchy", &hier]), 0);
    let forecast = bu.join("forecast.csv").display().to_string();
    assert_eq!(
        hc(&bu, &["reconcile", "--data", &panel, "--hierarchy", &hier, "--forecasts", &forecast, "--method", "bottom-up"]),
        0
    );
    let reconciled = bu.join("reconciled.csv").display().to_string();
    assert_eq!(hc(&bu, &["evaluate", "--data", &panel, "--hierarchy", &hier, "--forecasts", &reconciled]), 0);
    let report = std::fs::read_to_string(bu.join("report.csv")).unwrap();
    assert!(report.contains("All series"));
}

#[test]
fn separate_aggregations_trains_one_model_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let (panel, hier) = synth(&tmp.path().join("data"));
    let out = tmp.path().join("sep");
    let mut args = vec![
        "train", "--data", &panel, "--hierarchy", &hier, "--scenario", "separate-aggregations", "--reconciliation",
        "mint-shrink",
    ];
    args.extend(FAST);
    assert_eq!(hc(&out, &args), 0);
    let models = std::fs::read_dir(out.join("models")).unwrap().count();
    // total, store, department and product levels
    assert_eq!(models, 4);
    assert!(out.join("reconciler.json").exists());

    assert_eq!(hc(&out, &["forecast", "--data", &panel, "--hierarchy", &hier]), 0);
    let forecast = out.join("forecast.csv").display().to_string();
    let rec = out.join("reconciler.json").display().to_string();
    assert_eq!(
        hc(&out, &["reconcile", "--data", &panel, "--hierarchy", &hier, "--forecasts", &forecast, "--reconciler", &rec]),
        0
    );
}

#[test]
fn reruns_write_identical_models() {
    let tmp = tempfile::tempdir().unwrap();
    let (panel, hier) = synth(&tmp.path().join("data"));
    let mut read = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        let mut args = vec!["--seed", "5", "train", "--data", &panel, "--hierarchy", &hier];
        args.extend(FAST);
        assert_eq!(hc(&out, &args), 0);
        read.push(std::fs::read(out.join("models/model.json")).unwrap());
    }
    assert_eq!(read[0], read[1]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (panel, hier) = synth(&tmp.path().join("data"));
    let out = tmp.path().join("x");
    let out = out.as_path();
    assert_eq!(hc(out, &["no-such-command"]), 2);
    assert_eq!(hc(out, &["train", "--data", "/nonexistent/panel.csv", "--hierarchy", &hier]), 2);
    // reconciliation is not part of the bottom-up scenario
    assert_eq!(hc(out, &["train", "--data", &panel, "--hierarchy", &hier, "--reconciliation", "ols"]), 2);
    // random hierarchies need the hierarchical loss
    assert_eq!(hc(out, &["train", "--data", &panel, "--hierarchy", &hier, "--random-hierarchy"]), 2);

    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "no_such_option = 1\n").unwrap();
    assert_eq!(hc(out, &["--config", &bad.display().to_string(), "synth"]), 2);

    let broken = tmp.path().join("broken.csv");
    std::fs::write(&broken, "series_id,date,target\na,2024-01-01,oops\n").unwrap();
    assert_eq!(hc(out, &["build-hierarchy", "--data", &broken.display().to_string(), "--hierarchy", &hier]), 3);
}

#[test]
fn build_hierarchy_exports_summing_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let (panel, hier) = synth(&tmp.path().join("data"));
    let out = tmp.path().join("h");
    assert_eq!(hc(&out, &["build-hierarchy", "--data", &panel, "--hierarchy", &hier]), 0);
    let mtx = std::fs::read_to_string(out.join("summing_matrix.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket"));
    let rows = std::fs::read_to_string(out.join("rows.csv")).unwrap();
    assert!(rows.lines().count() > 16);
}

#[test]
fn random_search_logs_trials() {
    let tmp = tempfile::tempdir().unwrap();
    let (panel, hier) = synth(&tmp.path().join("data"));
    let out = tmp.path().join("search");
    let mut args = vec!["train", "--data", &panel, "--hierarchy", &hier, "--search-trials", "2"];
    args.extend(FAST);
    assert_eq!(hc(&out, &args), 0);
    let trials = std::fs::read_to_string(out.join("search_trials.csv")).unwrap();
    // header plus the unmodified configuration and two draws
    assert_eq!(trials.lines().count(), 4);
    let no_validation = ["train", "--data", &panel, "--hierarchy", &hier, "--search-trials", "2", "--n-validation-sets", "0"];
    assert_eq!(hc(&out, &no_validation), 2);
}
