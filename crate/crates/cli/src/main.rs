use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use coopdipole_cli::config::ParseFailure;
use coopdipole_cli::run::exit;
use coopdipole_cli::{parse_config, presets, resolve_threads, run, CliError, RunRequest, THREADS_ENV};

/// Coupled-dipole simulations of dual-species atom arrays.
#[derive(Parser)]
#[command(name = "coopdipole", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (overrides config and environment).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config and print it with all defaults filled in.
    Validate { config: PathBuf },
    /// Bundled configs reproducing each figure.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Write a preset to a file (default `<name>.json`).
    Copy {
        name: String,
        #[arg(long)]
        to: Option<PathBuf>,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, threads } => run_command(&config, out, threads),
        Command::Validate { config } => validate_command(&config),
        Command::Presets { action } => presets_command(action),
    };
    ExitCode::from(code as u8)
}

fn report(e: &CliError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

fn load(path: &Path) -> Result<(coopdipole_cli::RunConfig, Vec<u8>), CliError> {
    parse_config(path).map_err(|f| match f {
        ParseFailure::Io(e) => CliError::io(format!("reading {}", path.display()), e),
        ParseFailure::Config(e) => CliError::config(e),
    })
}

fn run_command(path: &Path, out: Option<PathBuf>, threads: Option<usize>) -> i32 {
    let start = Instant::now();
    let (config, bytes) = match load(path) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    let env = std::env::var(THREADS_ENV).ok();
    let threads = resolve_threads(threads, config.solver.threads, env.as_deref());
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("could not size the thread pool: {e}");
    }
    let out = out.or_else(|| config.output.clone()).unwrap_or_else(|| {
        let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        path.parent().unwrap_or(Path::new(".")).join(format!("{stem}-out"))
    });
    log::info!("task {} with {threads} threads into {}", config.task.name(), out.display());
    let request =
        RunRequest { config, config_bytes: &bytes, config_path: path, out, threads, parse_seconds: start.elapsed().as_secs_f64() };
    match run(request) {
        Ok(manifest) => {
            log::info!("wrote {} artifacts in {:.2}s", manifest.artifacts.len(), manifest.timings.run_seconds);
            exit::OK
        }
        Err(e) => report(&e),
    }
}

fn validate_command(path: &Path) -> i32 {
    match load(path) {
        Ok((config, _)) => match serde_json::to_string_pretty(&config) {
            Ok(text) => {
                println!("{text}");
                exit::OK
            }
            Err(e) => report(&CliError::io("serializing config", e)),
        },
        Err(e) => report(&e),
    }
}

fn presets_command(action: PresetAction) -> i32 {
    match action {
        PresetAction::List => {
            for (name, _) in presets::PRESETS {
                let description = presets::parse(name)
                    .and_then(|r| r.ok())
                    .and_then(|c| c.description)
                    .unwrap_or_default();
                println!("{name:8} {description}");
            }
            exit::OK
        }
        PresetAction::Copy { name, to, force } => {
            let Some(text) = presets::get(&name) else {
                let known: Vec<&str> = presets::PRESETS.iter().map(|(n, _)| *n).collect();
                eprintln!("error: unknown preset `{name}`; known presets: {}", known.join(", "));
                return exit::CONFIG;
            };
            let dest = to.unwrap_or_else(|| PathBuf::from(format!("{name}.json")));
            if dest.exists() && !force {
                eprintln!("error: {} exists; pass --force to overwrite", dest.display());
                return exit::IO;
            }
            match std::fs::write(&dest, text) {
                Ok(()) => {
                    println!("{}", dest.display());
                    exit::OK
                }
                Err(e) => report(&CliError::io(format!("writing {}", dest.display()), e)),
            }
        }
    }
}
