//! Finite-n Monte Carlo against the limit value, through a run config.

use std::path::PathBuf;

use mlglm::cli::{load_config, run_config, Overrides};

fn main() -> mlglm::Result<()> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/compare.json");
    let out = std::env::temp_dir().join("mlglm-compare");
    let overrides = Overrides {
        out: Some(out.clone()),
        set: vec!["params.simulate.replications=50".into()],
        ..Overrides::default()
    };
    let config = load_config(&path, &overrides)?;
    let report = run_config(&config)?;
    println!("limit {}", report.results["limit"]);
    for row in report.results["comparison"].as_array().into_iter().flatten() {
        println!(
            "n = {}: mean {:.5}, stderr {:.5}, pass {}",
            row["n"], row["mean"].as_f64().unwrap_or(f64::NAN), row["stderr"].as_f64().unwrap_or(f64::NAN), row["pass"]
        );
    }
    println!("report in {}", out.display());
    Ok(())
}
