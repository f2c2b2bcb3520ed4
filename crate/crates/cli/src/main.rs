use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use remote_cnot_cli::config::CONFIG_ENV;
use remote_cnot_cli::{run, CliError, Command, RunConfig, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "remote-cnot", version, about = "Simulate, calibrate and benchmark a cross-resonance CNOT")]
struct Cli {
    /// Run configuration (TOML)
    #[arg(long, short, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set experiment.xeb.circuits=5`
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Worker threads (default: one per core)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the resolved configuration and exit
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config(vec![format!("no configuration: pass --config or set {CONFIG_ENV}")]))?;
    let cfg = RunConfig::load(path, &cli.overrides)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let manifest = run(cli.command, &cfg, cli.threads)?;
    for s in &manifest.stages {
        println!("{}: {}", s.name, s.summary.as_deref().unwrap_or(""));
    }
    println!("outputs in {}", cfg.output.dir.display());
    Ok(())
}
