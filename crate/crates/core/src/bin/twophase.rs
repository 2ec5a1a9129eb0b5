use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use twophase_el::io::{
    exit_code, run_command, validate_command, CommandConfig, RunConfig, SimulateConfig, EXIT_CONFIG,
};
use twophase_el::Error;

#[derive(Parser)]
#[command(name = "twophase", version, about = "Two-phase outcome-dependent sampling estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel work.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit estimators to a two-phase dataset.
    Fit,
    /// Run a simulation study from a config or a named preset.
    Simulate {
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Draw a stratified phase-2 sample from complete data.
    Subsample,
    /// Check a configuration and its data without running it.
    Validate,
}

fn load(cli: &Cli, mode: Option<&str>) -> Result<RunConfig, Error> {
    let mut run = match (&cli.config, &cli.command) {
        (Some(path), _) => RunConfig::load(path, mode)?,
        (None, Command::Simulate { preset: Some(p), .. }) => RunConfig {
            seed: None,
            out_dir: None,
            threads: None,
            command: CommandConfig::Simulate(SimulateConfig::preset(p)),
        },
        (None, _) => return Err(Error::Config("--config is required".into())),
    };
    if let Command::Simulate { preset, replications } = &cli.command {
        if let CommandConfig::Simulate(sim) = &mut run.command {
            if cli.config.is_some() && preset.is_some() {
                sim.preset = preset.clone();
                sim.scenario = None;
            }
            if replications.is_some() {
                sim.replications = *replications;
            }
        }
    }
    if cli.seed.is_some() {
        run.seed = cli.seed;
    }
    if cli.out_dir.is_some() {
        run.out_dir = cli.out_dir.clone();
    }
    if cli.threads.is_some() {
        run.threads = cli.threads;
    }
    Ok(run)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match cli.command {
        Command::Fit => Some("fit"),
        Command::Simulate { .. } => Some("simulate"),
        Command::Subsample => Some("subsample"),
        Command::Validate => None,
    };
    let result = load(&cli, mode).and_then(|run| {
        if matches!(run.threads, Some(0)) {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        match cli.command {
            Command::Validate => validate_command(&run),
            _ => run_command(&run),
        }
    });
    match result {
        Ok(out) => {
            println!("{}", out.message);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            ExitCode::from(if code == 0 { EXIT_CONFIG } else { code } as u8)
        }
    }
}
