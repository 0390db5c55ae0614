use std::path::PathBuf;
use std::process::ExitCode;

use bjj_probe_cli::presets::{catalog, preset};
use bjj_probe_cli::{init_threads, run, validate, ExperimentConfig, ProbeError};
use clap::{Parser, Subcommand};

/// Workbench for a cavity-probed bosonic Josephson junction.
#[derive(Parser)]
#[command(name = "probe", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config or a named preset.
    Run {
        /// Path to the experiment config.
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Name of a built-in preset (see `probe presets`).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory; defaults to the config's `output` or `results/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config against the schema and report the physical regime.
    Validate {
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
    },
    /// List the built-in presets.
    Presets {
        /// Print the full config of every preset as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn load(config: Option<PathBuf>, name: Option<String>) -> Result<ExperimentConfig, ProbeError> {
    if let Some(name) = name {
        return preset(&name).ok_or_else(|| ProbeError::Schema(format!("unknown preset `{name}`")));
    }
    let path = config.expect("clap enforces one source");
    let text = std::fs::read_to_string(&path).map_err(|source| ProbeError::Io { path, source })?;
    ExperimentConfig::from_json(&text)
}

fn main_inner(cli: Cli) -> Result<(), ProbeError> {
    match cli.command {
        Command::Run { config, preset, out } => {
            init_threads()?;
            let cfg = load(config, preset)?;
            let dir = out
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
            let bundle = run(&cfg)?;
            for p in bundle.write(&dir)? {
                println!("{}", p.display());
            }
            eprintln!("{} finished in {:.1} s", cfg.name, bundle.meta.wall_seconds);
        }
        Command::Validate { config, preset } => {
            let cfg = load(config, preset)?;
            let report = validate(&cfg)?;
            println!("schema: ok");
            for item in &report.regime.items {
                let ratio = item.ratio.map_or("n/a".to_string(), |r| format!("{r:.3}"));
                println!("regime: {:<28} ratio {:>10}  {:?}", item.condition, ratio, item.status);
            }
            if report.regime_status != bjj_probe::probe_mapping::RegimeStatus::Satisfied {
                eprintln!("warning: regime {:?}", report.regime_status);
            }
        }
        Command::Presets { json } => {
            for p in catalog() {
                if json {
                    print!("{}", p.config.to_json());
                } else {
                    println!("{:<14} {:<12} {}", p.name, p.config.task.kind(), p.summary);
                    for d in &p.config.deviations {
                        println!("{:<14} deviation: {d}", "");
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
