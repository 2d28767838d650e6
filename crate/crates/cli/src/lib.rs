//! Scenario runner and self-check harness for the `qsfe` binary.

pub mod runner;
pub mod scenario;
pub mod selfcheck;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::scenario::{load_scenario, Mode, Preset, Scenario};

#[derive(Debug, Parser)]
#[command(name = "qsfe", version, about = "Fidelity bounds for noisy Bell-type qudit states")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the randomized invariant suite.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = selfcheck::DEFAULT_TRIALS)]
        trials: usize,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Output directory for the CSV table and JSON sidecar.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Exit nonzero if any exact-mode row falls outside its bounds.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace exact probabilities with this many samples per table.
    #[arg(long)]
    pub shots: Option<u64>,
}

/// Scenario selected by the flags, with `--shots`/`--seed` applied.
pub fn scenario_from_args(args: &RunArgs) -> anyhow::Result<(Scenario, u64)> {
    let mut sc = match (&args.scenario, args.preset) {
        (Some(path), None) => load_scenario(path)?,
        (None, Some(p)) => p.scenario(),
        _ => anyhow::bail!("give exactly one of --scenario <path> or --preset fig1|fig2|fig3"),
    };
    let file_seed = match sc.mode {
        Mode::Shots { seed, .. } => seed,
        Mode::Exact => 0,
    };
    let seed = args.seed.unwrap_or(file_seed);
    match (args.shots, sc.mode) {
        (Some(n), _) => sc.mode = Mode::Shots { n, seed },
        (None, Mode::Shots { n, .. }) => sc.mode = Mode::Shots { n, seed },
        (None, Mode::Exact) => {}
    }
    Ok((sc, seed))
}

/// Runs the CLI and returns the process exit code.
pub fn execute(cli: Cli) -> anyhow::Result<i32> {
    if let Some(Command::Selfcheck { seed, trials }) = cli.command {
        anyhow::ensure!(trials >= 1, "--trials must be at least 1");
        let summary = selfcheck::selfcheck(selfcheck::SelfcheckOptions { seed, trials, corrupt_verifier: false });
        println!("{summary}");
        return Ok(if summary.ok() { 0 } else { 1 });
    }
    let (scenario, seed) = scenario_from_args(&cli.run)?;
    let resolved = scenario.resolve()?;
    let out = runner::run(&resolved, seed);
    let (csv, json) = runner::write_outputs(&out, &cli.run.out)?;
    let violations = out.violations();
    println!("wrote {} rows to {} and {}", out.rows.len(), csv.display(), json.display());
    if violations > 0 {
        eprintln!("{violations} row(s) outside their bounds");
        if cli.run.strict && out.is_exact() {
            return Ok(2);
        }
    }
    Ok(0)
}
