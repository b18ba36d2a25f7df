//! Command-line front end: `dme run` executes one experiment config and
//! writes trace + summary CSVs; `dme suite` runs a sweep. Every config key
//! has a matching flag, and flags override file values.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dme_core::harness::{
    run_experiment, run_suite, write_csv, ConfigDraft, ExperimentConfig, SuiteConfig,
};
use dme_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dme", about = "Distributed best-arm identification simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write its trace and summary CSVs.
    Run(RunArgs),
    /// Run a sweep suite, producing one CSV per algorithm.
    Suite {
        /// Suite config file (sweep, values, algos, out_dir plus base keys).
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config file (`key = value` lines, '#' comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem preset: problem1 | problem2.
    #[arg(long)]
    problem: Option<String>,
    /// Population: uniform | pareto8020.
    #[arg(long)]
    population: Option<String>,
    /// Player count.
    #[arg(long)]
    n: Option<usize>,
    /// Vote base of the protocol (defaults to the population group size).
    #[arg(long = "n-gamma")]
    n_gamma: Option<usize>,
    /// Instance count for edme.
    #[arg(long)]
    m: Option<usize>,
    /// Algorithm: dme | edme | me_local | me_central | ucb_central.
    #[arg(long)]
    algo: Option<String>,
    /// Approximation budget in [0, 1).
    #[arg(long)]
    eps: Option<f64>,
    /// Failure budget in (0, 1].
    #[arg(long)]
    delta: Option<f64>,
    /// Event horizon.
    #[arg(long)]
    horizon: Option<u64>,
    /// Trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Base seed; trial i uses stream i of this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace CSV path (the summary lands next to it).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Checkpoint stride of the regret trace.
    #[arg(long)]
    stride: Option<u64>,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut draft = ConfigDraft::default();
        if let Some(path) = &self.config {
            let file = ExperimentConfig::from_file(path)?;
            draft = ConfigDraft {
                problem: Some(file.problem),
                population: Some(file.population),
                n: Some(file.n),
                n_gamma: file.n_gamma,
                m: file.m,
                algo: Some(file.algo),
                eps: Some(file.eps),
                delta: Some(file.delta),
                horizon: Some(file.horizon),
                trials: Some(file.trials),
                seed: Some(file.seed),
                out: file.out,
                stride: Some(file.stride),
            };
        }
        if let Some(v) = &self.problem {
            draft.problem = Some(v.parse()?);
        }
        if let Some(v) = &self.population {
            draft.population = Some(v.parse()?);
        }
        if let Some(v) = &self.algo {
            draft.algo = Some(v.parse()?);
        }
        draft.n = self.n.or(draft.n);
        draft.n_gamma = self.n_gamma.or(draft.n_gamma);
        draft.m = self.m.or(draft.m);
        draft.eps = self.eps.or(draft.eps);
        draft.delta = self.delta.or(draft.delta);
        draft.horizon = self.horizon.or(draft.horizon);
        draft.trials = self.trials.or(draft.trials);
        draft.seed = self.seed.or(draft.seed);
        draft.out = self.out.or(draft.out);
        draft.stride = self.stride.or(draft.stride);
        draft.build()
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Run(args) => {
            let cfg = args.into_config()?;
            let out = cfg
                .out
                .clone()
                .ok_or_else(|| Error::Config("run requires an output path (out / --out)".into()))?;
            let result = run_experiment(&cfg)?;
            write_csv(&result.trace, &result.summary, &out)?;
            let s = &result.summary;
            println!(
                "{} n={} n_gamma_or_m={} final_regret={:.3} bits={} stopped={:.2} failed={:.2} -> {}",
                s.algorithm,
                s.n,
                s.n_gamma_or_m,
                s.final_regret,
                s.bits_up + s.bits_down,
                s.stopped_fraction,
                s.failed_fraction,
                out.display()
            );
        }
        Cmd::Suite { config } => {
            let suite = SuiteConfig::from_file(&config)?;
            let written = run_suite(&suite)?;
            for path in written {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
