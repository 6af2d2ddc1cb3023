//! Command-line front end: load an experiment config, run one task, write
//! CSV artifacts and print a deterministic summary.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical guard
//! (conditioning or coverage).

pub mod config;
pub mod tasks;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;

pub use config::{ConfigError, ExperimentConfig, Task};
pub use tasks::{run_task, Artifact, TaskOutput};

/// Built-in configuration used when `--config` is absent.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, Parser)]
#[command(name = "edgecalc", about = "Edge pseudodifferential calculus experiments")]
pub struct Args {
    /// Experiment config (TOML); the built-in default when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Task to run; overrides `task` in the config.
    #[arg(long)]
    pub task: Option<String>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Artifact directory; overrides `output` in the config (default: out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] edgecalc_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(e) if e.is_numerical_guard() => 2,
            _ => 1,
        }
    }
}

/// Parse, run and write artifacts. Returns the task output.
pub fn execute(args: &Args) -> Result<TaskOutput, RunError> {
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::parse(DEFAULT_CONFIG, Path::new("."))?,
    };
    let task = match &args.task {
        Some(name) => name.parse::<Task>()?,
        None => cfg.task.ok_or_else(|| ConfigError::new("task", "no task given in the config or on the command line"))?,
    };
    let output = run_task(task, &cfg, args.seed)?;
    let dir = args.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)?;
    for a in &output.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(output)
}

/// Run with the given streams; returns the process exit code.
pub fn run(args: &Args, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    match execute(args) {
        Ok(out) => {
            if !args.quiet {
                for line in &out.summary {
                    let _ = writeln!(stdout, "{line}");
                }
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = ExperimentConfig::parse(DEFAULT_CONFIG, Path::new(".")).unwrap();
        assert_eq!(cfg.task, Some(Task::LpCheck));
    }

    #[test]
    fn exit_codes() {
        let guard = RunError::Core(edgecalc_core::Error::Conditioning("x".into()));
        assert_eq!(guard.exit_code(), 2);
        assert_eq!(RunError::Core(edgecalc_core::Error::Coverage("x".into())).exit_code(), 2);
        assert_eq!(RunError::Core(edgecalc_core::Error::Shape("x".into())).exit_code(), 1);
        assert_eq!(RunError::Config(ConfigError::new("grid.points", "x")).exit_code(), 1);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
    }
}
