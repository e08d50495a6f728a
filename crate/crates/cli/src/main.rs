use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wavelab::experiments::{list_experiments, output_root, run_experiment, ExperimentConfig, Kind, OUT_ENV};
use wavelab::profiles::ModelParams;
use wavelab::Error;

/// Blow-up experiments for the focusing semilinear wave equation.
#[derive(Parser)]
#[command(name = "wavelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Output root; a timestamped run directory is created inside.
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for independent sub-runs.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List experiment kinds and their default configs.
    List {
        /// Print only the default config of one kind.
        #[arg(long, value_name = "KIND")]
        schema: Option<String>,
    },
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn default_model() -> ModelParams {
    ModelParams::new(1, 3.0).expect("N = 1, p = 3 is admissible")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { schema: None } => match list_experiments(default_model()) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_RUNTIME, &e),
        },
        Command::List { schema: Some(name) } => {
            let Some(kind) = Kind::ALL.into_iter().find(|k| k.name() == name) else {
                eprintln!("error: unknown experiment kind {name:?}");
                return ExitCode::from(EXIT_CONFIG);
            };
            match ExperimentConfig::default_for(kind, default_model()).to_toml() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(EXIT_RUNTIME, &e),
            }
        }
        Command::Run { config, out, seed, threads } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(EXIT_CONFIG, &e),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            let root = output_root(out.as_deref());
            match run_experiment(&cfg, &root) {
                Ok((dir, manifest)) => {
                    for c in &manifest.checks {
                        println!("{} {}: {:.6e} (tolerance {:.3e}) {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance, c.detail);
                    }
                    println!("artifacts: {}", dir.display());
                    if manifest.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_CHECK_FAILED)
                    }
                }
                Err(e @ (Error::InvalidConfig(_) | Error::Config { .. })) => fail(EXIT_CONFIG, &e),
                Err(e) => fail(EXIT_RUNTIME, &e),
            }
        }
    }
}

fn fail(code: u8, e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}
