use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use semilab_cli::{
    exit_code, print_outcome, run, Command, ExampleKind, Format, LemmaKind, Overrides, ScenarioConfig, EXIT_FAIL, EXIT_PASS,
};

#[derive(Parser)]
#[command(
    name = "semilab",
    version,
    about = "Moduli, generators and inequality checks for one-parameter semigroups"
)]
struct Cli {
    /// Scenario file (TOML)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sample seed, overriding the scenario
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Pass tolerance, overriding the scenario
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Semigroup law residuals and T-moduli
    Check,
    /// Certified generator estimate and Cauchy residuals
    Generator,
    /// One of the inequality verifiers
    Lemma {
        #[arg(value_enum)]
        which: LemmaKind,
    },
    /// The corner table or the ℓ∞ path-length table
    Example {
        #[arg(value_enum)]
        name: ExampleKind,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Check => Command::Check,
        Cmd::Generator => Command::Generator,
        Cmd::Lemma { which } => Command::Lemma(which),
        Cmd::Example { name } => Command::Example(name),
    };
    let result = (|| {
        let mut cfg = match &cli.config {
            Some(p) => ScenarioConfig::load(p)?,
            None if matches!(command, Command::Example(_)) => ScenarioConfig::default(),
            None => anyhow::bail!(semilab_cli::ConfigError("--config is required for this command".into())),
        };
        Overrides {
            out: cli.out.clone(),
            seed: cli.seed,
            tolerance: cli.tolerance,
            format: cli.format,
        }
        .apply(&mut cfg);
        run(&cfg, command)
    })();
    match result {
        Ok((outcome, files)) => {
            let _ = print_outcome(&outcome, std::io::stdout().lock());
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(if outcome.pass { EXIT_PASS } else { EXIT_FAIL } as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
