//! Loading a long-format CSV panel with metadata, building its hierarchy and
//! looking at the engineered feature rows.

use std::io::Write;

use hiercast::hierarchy::HierarchySpec;
use hiercast::pipeline::{build_features, feature_names, load_panel};

fn main() -> hiercast::Result<()> {
    let dir = std::env::temp_dir().join("hiercast_panel_example");
    std::fs::create_dir_all(&dir)?;
    let data = dir.join("panel.csv");
    let mut f = std::fs::File::create(&data)?;
    writeln!(f, "series_id,date,target,sell_price,event")?;
    for day in 1..=20 {
        // series b skips day 10; the loader zero-fills it
        for (id, base) in [("a", 2.0), ("b", 5.0)] {
            if id == "b" && day == 10 {
                continue;
            }
            let event = if day == 15 { "holiday" } else { "" };
            writeln!(f, "{id},2024-03-{day:02},{},{:.2},{event}", base + (day % 7) as f64, 1.5)?;
        }
    }
    let meta = dir.join("metadata.csv");
    std::fs::write(&meta, "series_id,store\na,s1\nb,s1\n")?;

    let panel = load_panel(&data, Some(&meta))?;
    println!(
        "{} series x {} days from {}; exogenous columns {:?}",
        panel.n_series(),
        panel.n_days(),
        panel.start(),
        panel.exog().iter().map(|c| c.name.as_str()).collect::<Vec<_>>()
    );
    println!("series b, day 10 (zero-filled): {}", panel.target().get(1, 9));

    let spec = HierarchySpec::from_json(r#"{"levels": [{"name": "total"}, {"name": "store", "column": "store"}]}"#)?;
    let h = panel.hierarchy(&spec)?;
    println!("hierarchy rows: {:?}", h.row_labels());

    let frame = build_features(&panel, 14..16)?;
    let names = feature_names(&panel);
    for row in 0..frame.n_rows() {
        let values: Vec<String> = names
            .iter()
            .zip(frame.features.columns())
            .map(|(n, c)| format!("{n}={}", c[row]))
            .collect();
        println!("series {} day {}: {}", frame.series[row], frame.day[row], values.join(" "));
    }
    Ok(())
}
