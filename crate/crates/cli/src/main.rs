//! `micromag` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical breakdown,
//! 4 failed self-check (`converge`), 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use micromag::problems::Scale;
use micromag::{Command, RunConfig, StepperKind};

mod run;

#[derive(Debug, Parser)]
#[command(name = "micromag", version, about = "Finite-difference micromagnetics with Gauss-Seidel projection steppers")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Manufactured-solution convergence studies.
    Converge(Common),
    /// Damping-stability study on a Permalloy square.
    Stability(Common),
    /// Standard problem 4: field-driven reversal of a thin rectangle.
    Std4(Common),
    /// Standard problem 5: current-driven vortex motion.
    Std5(Common),
    /// Relax a start state under a static field.
    Relax(Common),
    /// Free-form run from a config file.
    Custom(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// gspm, gspm1f or gspm-bdf2.
    #[arg(long)]
    stepper: Option<StepperKind>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// full or desk (stability study only).
    #[arg(long)]
    scale: Option<Scale>,
    /// Worker threads for independent cases or levels.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

impl Cmd {
    fn split(&self) -> (Command, &Common) {
        match self {
            Cmd::Converge(c) => (Command::Converge, c),
            Cmd::Stability(c) => (Command::Stability, c),
            Cmd::Std4(c) => (Command::Std4, c),
            Cmd::Std5(c) => (Command::Std5, c),
            Cmd::Relax(c) => (Command::Relax, c),
            Cmd::Custom(c) => (Command::Custom, c),
        }
    }
}

fn resolve(command: Command, args: &Common) -> micromag::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None if command == Command::Custom => {
            return Err(micromag::Error::Config("custom runs need --config".into()));
        }
        None => RunConfig::defaults(command),
    };
    if cfg.command != command {
        return Err(micromag::Error::InvalidKey {
            key: "command".into(),
            message: format!("config is for `{}` but the `{command}` subcommand was invoked", cfg.command),
        });
    }
    if let Some(s) = args.stepper {
        cfg.stepper = Some(s);
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(scale) = args.scale {
        cfg.stability.scale = scale;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = cli.command.split();
    let cfg = match resolve(command, args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run::execute(&cfg, args.jobs.max(1)) {
        Ok(run::Outcome::Passed) => ExitCode::SUCCESS,
        Ok(run::Outcome::CheckFailed(msgs)) => {
            for m in msgs {
                eprintln!("check failed: {m}");
            }
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<micromag::Error>() {
                Some(me) if me.is_config() => ExitCode::from(2),
                Some(me) if me.is_breakdown() => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
