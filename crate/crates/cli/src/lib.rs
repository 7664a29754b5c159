//! Scenario-driven front end for `semigroup-lab`: loads a TOML scenario,
//! runs checks, generator estimates, inequality verifiers or the worked
//! examples, and writes CSV and JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use semigroup_lab::Error;

pub use commands::{cmd_check, cmd_example, cmd_generator, cmd_lemma, print_outcome, ExampleKind, LemmaKind, Outcome};
pub use config::{ConfigError, Format, ScenarioConfig};
pub use output::Sink;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_HYPOTHESIS: i32 = 4;

/// Exit code for an error: scenario problems are 2, unmet hypotheses
/// (including a missing `δ₁` or diverging quotients) are 4, the rest 3.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::HypothesisNotMet { .. } | Error::NoDelta1(_) | Error::Diverging { .. } => EXIT_HYPOTHESIS,
                Error::BadParameter(_)
                | Error::DimensionMismatch { .. }
                | Error::MarginViolation { .. }
                | Error::ContractViolation(_)
                | Error::Expression(_)
                | Error::EmptySample
                | Error::DegeneratePair { .. }
                | Error::OutsideDomain { .. }
                | Error::Unsupported(_) => EXIT_CONFIG,
                Error::TrajectoryEscape(_)
                | Error::StiffnessFailure { .. }
                | Error::CurveExitsDomain { .. }
                | Error::Unreachable
                | Error::Lp(_)
                | Error::Io(_) => EXIT_RUNTIME,
            };
        }
    }
    EXIT_RUNTIME
}

/// Which command to run.
#[derive(Debug, Clone, Copy)]
pub enum Command {
    Check,
    Generator,
    Lemma(LemmaKind),
    Example(ExampleKind),
}

/// Command-line overrides applied on top of a scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub format: Option<Format>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = Some(o.display().to_string());
        }
    }
}

/// Runs a command on a resolved scenario and returns its outcome with the
/// files written.
pub fn run(cfg: &ScenarioConfig, command: Command) -> anyhow::Result<(Outcome, Vec<PathBuf>)> {
    cfg.validate()?;
    let dir = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| "semilab-out".into()));
    let mut sink = Sink::new(&dir, cfg.output.format, cfg)?;
    let outcome = match command {
        Command::Check => cmd_check(cfg, &mut sink)?,
        Command::Generator => cmd_generator(cfg, &mut sink)?,
        Command::Lemma(k) => cmd_lemma(cfg, k, &mut sink)?,
        Command::Example(k) => cmd_example(cfg, k, &mut sink)?,
    };
    Ok((outcome, sink.written().to_vec()))
}
