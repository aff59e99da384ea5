use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use debt_reduction::config::ScenarioConfig;
use debt_reduction::io::write_json;
use debt_reduction::scenario::{Runner, Stage};
use debt_reduction::validation::run_validation_timed;
use debt_reduction::Error;

#[derive(Parser)]
#[command(version, about = "Debt-ratio reduction under a hidden growth regime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `outputs.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate full-information paths.
    Simulate(Common),
    /// Filter simulated paths, or an observation CSV.
    Filter {
        #[command(flatten)]
        common: Common,
        /// Observation file with columns t,x0,eta,jump_mark.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Solve the stopping problem and extract the free boundary.
    SolveStopping(Common),
    /// Build the control value and its HJB residual.
    SolveControl(Common),
    /// Monte Carlo evaluation of the reflection policy and alternatives.
    Evaluate(Common),
    /// Run the full acceptance suite.
    Validate(Common),
}

fn load(common: &Common) -> Result<(ScenarioConfig, PathBuf), Error> {
    let mut config = ScenarioConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| config.outputs.dir.clone());
    Ok((config, out))
}

fn stage_run(common: &Common, stage: Stage, observations: Option<PathBuf>) -> Result<(), Error> {
    let (config, out) = load(common)?;
    let mut runner = Runner::new(&config, &out, observations)?;
    runner.run(stage)?;
    let manifest = runner.finish(stage)?;
    for a in &manifest.artifacts {
        println!("{}", out.join(a).display());
    }
    Ok(())
}

fn validate(common: &Common) -> Result<bool, Error> {
    let (config, out) = load(common)?;
    let mut runner = Runner::new(&config, &out, None)?;
    let start = Instant::now();
    let (report, timings) = run_validation_timed(&config)?;
    for (id, secs) in timings {
        runner.push_timing_label(&format!("check_{id}"), secs);
    }
    runner.push_timing(Stage::Validate, start.elapsed().as_secs_f64());
    for c in &report.checks {
        println!("{}", c.line());
    }
    let file = out.join("validation_report.json");
    write_json(&file, &report)?;
    runner.push_artifact(&file);
    runner.finish(Stage::Validate)?;
    println!(
        "{}: {}/{} checks passed",
        if report.all_pass { "PASS" } else { "FAIL" },
        report.checks.iter().filter(|c| c.pass).count(),
        report.checks.len()
    );
    Ok(report.all_pass)
}

fn fail(e: Error, config: &Path) -> ExitCode {
    eprintln!("error ({}): {e}", config.display());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (result, config) = match &cli.command {
        Command::Simulate(c) => (stage_run(c, Stage::Simulate, None), &c.config),
        Command::Filter {
            common,
            observations,
        } => (
            stage_run(common, Stage::Filter, observations.clone()),
            &common.config,
        ),
        Command::SolveStopping(c) => (stage_run(c, Stage::SolveStopping, None), &c.config),
        Command::SolveControl(c) => (stage_run(c, Stage::SolveControl, None), &c.config),
        Command::Evaluate(c) => (stage_run(c, Stage::Evaluate, None), &c.config),
        Command::Validate(c) => {
            return match validate(c) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(3),
                Err(e) => fail(e, &c.config),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e, config),
    }
}
