use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mlglm::cli::{run, Overrides};

/// Run one task described by a JSON config.
#[derive(Parser, Debug)]
#[command(name = "mlglm", version)]
struct Args {
    /// Path of the JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// `dotted.key=value` override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(k) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("{}", serde_json::json!({ "category": "config", "message": e.to_string() }));
            return ExitCode::from(2);
        }
    }
    let overrides = Overrides { seed: args.seed, out: args.out, set: args.set };
    match run(&args.config, &overrides) {
        Ok(report) => {
            let dir = &report.config.output.dir;
            println!("{}", dir.join("report.json").display());
            for a in &report.artifacts {
                println!("{}", dir.join(a).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let category = e.category();
            eprintln!(
                "{}",
                serde_json::json!({ "category": category, "message": e.to_string() })
            );
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
