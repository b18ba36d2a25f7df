//! Experiment runner: flat key-value configs mirrored by CLI flags, seeded
//! trials run in parallel, averaged pseudo-regret traces, and deterministic
//! CSV output.
//!
//! Pseudo-regret accrues the true mean gap of every chosen arm, so a trace
//! is exactly `T * mu_* - sum_t mu_{k_t}` and averaging over trials only
//! removes the arm-choice randomness. Communication for the centralized
//! baselines is reported by formula (64 bits per event times the action
//! code width) since they ship every event to the center; the local
//! baseline transmits nothing.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::bandit::{LocalMe, UcbState};
use crate::edme::{EdmeConfig, EdmeWorld};
use crate::env::{
    epsilon_optimal_set, make_problem, ArmSet, PlayerPopulation, PopulationKind, ProblemId,
    RandomSource,
};
use crate::error::{Error, Result};
use crate::protocol::{code_width, DmeWorld, MessageLedger};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Dme,
    Edme,
    MeLocal,
    MeCentral,
    UcbCentral,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dme" => Ok(Self::Dme),
            "edme" => Ok(Self::Edme),
            "me_local" => Ok(Self::MeLocal),
            "me_central" => Ok(Self::MeCentral),
            "ucb_central" => Ok(Self::UcbCentral),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Dme => "dme",
            Self::Edme => "edme",
            Self::MeLocal => "me_local",
            Self::MeCentral => "me_central",
            Self::UcbCentral => "ucb_central",
        };
        write!(f, "{name}")
    }
}

/// One experiment: problem, population, algorithm, budgets, horizon,
/// trial count, and base seed.
///
/// `n_gamma` is the protocol's vote base and defaults to the population's
/// most-active group size (N for uniform, ceil(0.2 N) for pareto8020).
/// `m` is the instance count for `edme`. `stride` subsamples the regret
/// trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub population: PopulationKind,
    pub n: usize,
    pub n_gamma: Option<usize>,
    pub m: Option<usize>,
    pub algo: Algorithm,
    pub eps: f64,
    pub delta: f64,
    pub horizon: u64,
    pub trials: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub stride: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(Error::Config(format!(
                "eps must lie in [0, 1), got {}",
                self.eps
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if self.n < 1 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if self.stride < 1 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if let Some(ng) = self.n_gamma {
            if ng < 1 || ng > self.n {
                return Err(Error::Config(format!(
                    "n_gamma must lie in [1, {}], got {ng}",
                    self.n
                )));
            }
        }
        if self.algo == Algorithm::Edme && self.m.is_none() {
            return Err(Error::Config("edme requires m".into()));
        }
        if let Some(m) = self.m {
            if m < 1 {
                return Err(Error::Config("m must be >= 1".into()));
            }
        }
        // Constructing the population surfaces kind-specific constraints
        // (pareto8020 needs n >= 2, for instance).
        self.population_instance()?;
        Ok(())
    }

    pub fn population_instance(&self) -> Result<PlayerPopulation> {
        PlayerPopulation::from_kind(self.population, self.n)
    }

    pub fn arms(&self) -> ArmSet {
        make_problem(self.problem)
    }

    /// Protocol vote base: configured, or the population's group size.
    pub fn effective_n_gamma(&self) -> Result<usize> {
        Ok(self
            .n_gamma
            .unwrap_or(self.population_instance()?.n_gamma()))
    }

    /// Parses the flat `key = value` file format ('#' starts a comment).
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_pairs(parse_kv(&text)?)
    }

    pub fn from_pairs(pairs: BTreeMap<String, String>) -> Result<Self> {
        let mut draft = ConfigDraft::default();
        for (key, value) in &pairs {
            draft.set(key, value)?;
        }
        draft.build()
    }
}

/// Partially specified experiment, filled from a file and/or CLI flags.
#[derive(Debug, Clone, Default)]
pub struct ConfigDraft {
    pub problem: Option<ProblemId>,
    pub population: Option<PopulationKind>,
    pub n: Option<usize>,
    pub n_gamma: Option<usize>,
    pub m: Option<usize>,
    pub algo: Option<Algorithm>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
    pub horizon: Option<u64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub stride: Option<u64>,
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

impl ConfigDraft {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "problem" => self.problem = Some(value.parse()?),
            "population" => self.population = Some(value.parse()?),
            "n" => self.n = Some(parse_num(key, value)?),
            "n_gamma" => self.n_gamma = Some(parse_num(key, value)?),
            "m" => self.m = Some(parse_num(key, value)?),
            "algo" => self.algo = Some(value.parse()?),
            "eps" => self.eps = Some(parse_num(key, value)?),
            "delta" => self.delta = Some(parse_num(key, value)?),
            "horizon" => self.horizon = Some(parse_num(key, value)?),
            "trials" => self.trials = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "stride" => self.stride = Some(parse_num(key, value)?),
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        let require = |name: &str| Error::Config(format!("missing required key '{name}'"));
        let cfg = ExperimentConfig {
            problem: self.problem.ok_or_else(|| require("problem"))?,
            population: self.population.ok_or_else(|| require("population"))?,
            n: self.n.ok_or_else(|| require("n"))?,
            n_gamma: self.n_gamma,
            m: self.m,
            algo: self.algo.ok_or_else(|| require("algo"))?,
            eps: self.eps.ok_or_else(|| require("eps"))?,
            delta: self.delta.ok_or_else(|| require("delta"))?,
            horizon: self.horizon.ok_or_else(|| require("horizon"))?,
            trials: self.trials.ok_or_else(|| require("trials"))?,
            seed: self.seed.ok_or_else(|| require("seed"))?,
            out: self.out,
            stride: self.stride.unwrap_or(1000),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut pairs = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        pairs.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(pairs)
}

// ---------------------------------------------------------------------------
// Traces and stats
// ---------------------------------------------------------------------------

/// Cumulative pseudo-regret sampled at checkpoint steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub stride: u64,
    pub steps: Vec<u64>,
    pub values: Vec<f64>,
}

/// Accumulates per-event regret gaps and records a checkpoint every
/// `stride` steps plus a final one at the horizon.
pub struct TraceBuilder {
    stride: u64,
    horizon: u64,
    step: u64,
    cum: f64,
    trace: RegretTrace,
}

impl TraceBuilder {
    pub fn new(stride: u64, horizon: u64) -> Self {
        Self {
            stride,
            horizon,
            step: 0,
            cum: 0.0,
            trace: RegretTrace {
                stride,
                steps: Vec::new(),
                values: Vec::new(),
            },
        }
    }

    pub fn record(&mut self, gap: f64) {
        self.step += 1;
        self.cum += gap;
        if self.step.is_multiple_of(self.stride) || self.step == self.horizon {
            self.trace.steps.push(self.step);
            self.trace.values.push(self.cum);
        }
    }

    pub fn cumulative(&self) -> f64 {
        self.cum
    }

    pub fn finish(self) -> RegretTrace {
        self.trace
    }
}

/// Pointwise arithmetic mean of equally shaped traces.
pub fn average_traces(traces: &[RegretTrace]) -> RegretTrace {
    assert!(!traces.is_empty(), "no traces to average");
    let first = &traces[0];
    assert!(
        traces.iter().all(|t| t.steps == first.steps),
        "traces have mismatched checkpoints"
    );
    let mut values = vec![0.0; first.values.len()];
    for trace in traces {
        for (acc, v) in values.iter_mut().zip(&trace.values) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= traces.len() as f64;
    }
    RegretTrace {
        stride: first.stride,
        steps: first.steps.clone(),
        values,
    }
}

/// Per-trial outcome: protocol stop time (draws of players), per-player
/// event counts, the ledger snapshot, and whether any player's output fell
/// outside the eps-optimal set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub stop_time: Option<u64>,
    pub pulls_per_player: Vec<u64>,
    pub bits: MessageLedger,
    pub failed: bool,
    pub output_arms: Vec<usize>,
}

/// Stop-time ratio of a local baseline over a distributed run; absent if
/// either run did not stop within its horizon.
pub fn empirical_speedup(dist: &RunStats, local: &RunStats) -> Option<f64> {
    match (dist.stop_time, local.stop_time) {
        (Some(d), Some(l)) if d > 0 => Some(l as f64 / d as f64),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Trial loops
// ---------------------------------------------------------------------------

fn centralized_ledger(horizon: u64, k: usize) -> MessageLedger {
    // Unlimited-communication baselines ship one 64-bit reward record per
    // event per action code: 64 * T * ceil(log2 K) bits upward.
    let width = code_width(k);
    MessageLedger {
        upward_msgs: horizon,
        downward_msgs: 0,
        bits_up: 64 * horizon * width as u64,
        bits_down: 0,
        width,
    }
}

/// Runs one seeded trial of the configured algorithm to the horizon.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<(RegretTrace, RunStats)> {
    let arms = cfg.arms();
    let pop = cfg.population_instance()?;
    let good: Vec<usize> = epsilon_optimal_set(&arms, cfg.eps);
    let best = arms.best_mean();
    let mut rng = RandomSource::for_trial(cfg.seed, trial);
    let mut builder = TraceBuilder::new(cfg.stride, cfg.horizon);
    let mut pulls = vec![0u64; cfg.n];

    let (stop_time, bits, outputs) = match cfg.algo {
        Algorithm::Dme => {
            let mut world = DmeWorld::new(
                arms.clone(),
                pop,
                cfg.eps,
                cfg.delta,
                Some(cfg.effective_n_gamma()?),
            )?;
            let mut stop = None;
            for _ in 0..cfg.horizon {
                let rec = if world.stopped() {
                    world.exploit_event(&mut rng)?
                } else {
                    world.event(&mut rng)?
                };
                if stop.is_none() && world.stopped() {
                    stop = Some(world.t());
                }
                pulls[rec.player - 1] += 1;
                builder.record(best - rec.true_mean);
            }
            (stop, world.ledger().clone(), world.output_arms())
        }
        Algorithm::Edme => {
            let m = cfg.m.expect("validated");
            let ecfg = EdmeConfig::new(cfg.eps, cfg.delta, cfg.n, arms.len(), m)?;
            let mut world = EdmeWorld::new(arms.clone(), pop, ecfg)?;
            let mut stop = None;
            for _ in 0..cfg.horizon {
                let rec = if world.stopped() {
                    world.exploit_event(&mut rng)?
                } else {
                    world.event(&mut rng)?
                };
                if stop.is_none() && world.stopped() {
                    stop = Some(world.t());
                }
                pulls[rec.player - 1] += 1;
                builder.record(best - rec.true_mean);
            }
            (stop, world.ledger().clone(), world.output_arms())
        }
        Algorithm::MeLocal => {
            let mut learners: Vec<LocalMe> = (0..cfg.n)
                .map(|_| LocalMe::new(arms.len(), cfg.eps, cfg.delta))
                .collect::<Result<_>>()?;
            let mut done = learners.iter().filter(|l| l.done()).count();
            let mut stop = None;
            for t in 1..=cfg.horizon {
                let player = pop.draw_player(rng.next_unit());
                let learner = &mut learners[player - 1];
                let was_done = learner.done();
                let arm = learner.next_action();
                let y = arms.sample_reward(arm, rng.next_unit());
                learner.observe(arm, y);
                if !was_done && learner.done() {
                    done += 1;
                    if done == cfg.n && stop.is_none() {
                        stop = Some(t);
                    }
                }
                pulls[player - 1] += 1;
                builder.record(best - arms.mean(arm));
            }
            let outputs = learners.iter().map(|l| l.output_arm()).collect();
            (stop, MessageLedger::new(code_width(arms.len())), outputs)
        }
        Algorithm::MeCentral => {
            let mut learner = LocalMe::new(arms.len(), cfg.eps, cfg.delta)?;
            let mut stop = None;
            for t in 1..=cfg.horizon {
                let player = pop.draw_player(rng.next_unit());
                let arm = learner.next_action();
                let y = arms.sample_reward(arm, rng.next_unit());
                learner.observe(arm, y);
                if stop.is_none() && learner.done() {
                    stop = Some(t);
                }
                pulls[player - 1] += 1;
                builder.record(best - arms.mean(arm));
            }
            let outputs = vec![learner.output_arm()];
            (stop, centralized_ledger(cfg.horizon, arms.len()), outputs)
        }
        Algorithm::UcbCentral => {
            let mut learner = UcbState::new(arms.len());
            for _ in 0..cfg.horizon {
                let player = pop.draw_player(rng.next_unit());
                let arm = learner.select();
                let y = arms.sample_reward(arm, rng.next_unit());
                learner.update(arm, y);
                pulls[player - 1] += 1;
                builder.record(best - arms.mean(arm));
            }
            let outputs = vec![learner.best_arm()];
            (None, centralized_ledger(cfg.horizon, arms.len()), outputs)
        }
    };

    let failed = outputs.iter().any(|arm| !good.contains(arm));
    Ok((
        builder.finish(),
        RunStats {
            stop_time,
            pulls_per_player: pulls,
            bits,
            failed,
            output_arms: outputs,
        },
    ))
}

// ---------------------------------------------------------------------------
// Aggregation and CSV output
// ---------------------------------------------------------------------------

/// Trial-averaged view of one experiment, written as the summary CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algorithm: Algorithm,
    pub n: usize,
    pub n_gamma_or_m: usize,
    pub bits_up: f64,
    pub bits_down: f64,
    pub upward_msgs: f64,
    pub downward_msgs: f64,
    pub stop_time: Option<f64>,
    pub failed_fraction: f64,
    pub final_regret: f64,
    pub stopped_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub trace: RegretTrace,
    pub stats: Vec<RunStats>,
    pub summary: Summary,
}

/// Runs all trials (in parallel; outputs are merged in trial order, so
/// results do not depend on scheduling) and aggregates them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let outcomes: Vec<(RegretTrace, RunStats)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, trial))
        .collect::<Result<_>>()?;

    let traces: Vec<RegretTrace> = outcomes.iter().map(|(t, _)| t.clone()).collect();
    let stats: Vec<RunStats> = outcomes.into_iter().map(|(_, s)| s).collect();
    let trace = average_traces(&traces);

    let trials = stats.len() as f64;
    let mean = |f: &dyn Fn(&RunStats) -> u64| stats.iter().map(|s| f(s) as f64).sum::<f64>() / trials;
    let stopped: Vec<u64> = stats.iter().filter_map(|s| s.stop_time).collect();
    let summary = Summary {
        algorithm: cfg.algo,
        n: cfg.n,
        n_gamma_or_m: match cfg.algo {
            Algorithm::Edme => cfg.m.unwrap_or(1),
            _ => cfg.effective_n_gamma()?,
        },
        bits_up: mean(&|s| s.bits.bits_up),
        bits_down: mean(&|s| s.bits.bits_down),
        upward_msgs: mean(&|s| s.bits.upward_msgs),
        downward_msgs: mean(&|s| s.bits.downward_msgs),
        stop_time: if stopped.is_empty() {
            None
        } else {
            Some(stopped.iter().map(|&t| t as f64).sum::<f64>() / stopped.len() as f64)
        },
        failed_fraction: stats.iter().filter(|s| s.failed).count() as f64 / trials,
        final_regret: trace.values.last().copied().unwrap_or(0.0),
        stopped_fraction: stopped.len() as f64 / trials,
    };

    Ok(ExperimentResult {
        trace,
        stats,
        summary,
    })
}

/// Path of the summary CSV written next to a trace CSV.
pub fn summary_path(trace_path: &Path) -> PathBuf {
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    trace_path.with_file_name(format!("{stem}_summary.csv"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the trace CSV (`step,mean_regret`) at `path` and the one-row
/// summary CSV next to it. Full-precision decimal formatting keeps reruns
/// byte-identical.
pub fn write_csv(trace: &RegretTrace, summary: &Summary, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut out = String::from("step,mean_regret\n");
    for (step, value) in trace.steps.iter().zip(&trace.values) {
        out.push_str(&format!("{step},{value}\n"));
    }
    std::fs::write(path, out)?;

    let mut srow = String::from(
        "algorithm,n,n_gamma_or_m,bits_up,bits_down,upward_msgs,downward_msgs,stop_time,failed_fraction\n",
    );
    srow.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        summary.algorithm,
        summary.n,
        summary.n_gamma_or_m,
        summary.bits_up,
        summary.bits_down,
        summary.upward_msgs,
        summary.downward_msgs,
        fmt_opt(summary.stop_time),
        summary.failed_fraction,
    ));
    std::fs::write(summary_path(path), srow)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    N,
    NGamma,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Self::N),
            "n_gamma" => Ok(Self::NGamma),
            other => Err(Error::Config(format!("unknown sweep '{other}'"))),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::N => write!(f, "n"),
            Self::NGamma => write!(f, "n_gamma"),
        }
    }
}

/// A sweep over player counts or vote bases, one CSV per algorithm.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub base: ExperimentConfig,
    pub sweep: SweepKind,
    pub values: Vec<usize>,
    pub algos: Vec<Algorithm>,
    pub out_dir: PathBuf,
}

impl SuiteConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut pairs = parse_kv(&text)?;
        let sweep: SweepKind = pairs
            .remove("sweep")
            .ok_or_else(|| Error::Config("missing required key 'sweep'".into()))?
            .parse()?;
        let values = pairs
            .remove("values")
            .ok_or_else(|| Error::Config("missing required key 'values'".into()))?
            .split(',')
            .map(|v| parse_num::<usize>("values", v.trim()))
            .collect::<Result<Vec<_>>>()?;
        let algos = pairs
            .remove("algos")
            .ok_or_else(|| Error::Config("missing required key 'algos'".into()))?
            .split(',')
            .map(|a| a.trim().parse::<Algorithm>())
            .collect::<Result<Vec<_>>>()?;
        let out_dir = PathBuf::from(
            pairs
                .remove("out_dir")
                .ok_or_else(|| Error::Config("missing required key 'out_dir'".into()))?,
        );
        if values.is_empty() || algos.is_empty() {
            return Err(Error::Config("empty sweep values or algos".into()));
        }
        let base = ExperimentConfig::from_pairs(pairs)?;
        Ok(Self {
            base,
            sweep,
            values,
            algos,
            out_dir,
        })
    }

    fn point(&self, algo: Algorithm, value: usize) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        cfg.algo = algo;
        match self.sweep {
            SweepKind::N => {
                cfg.n = value;
                // The vote base follows the population group at each point
                // unless the file pinned it explicitly.
                cfg.n_gamma = self.base.n_gamma;
            }
            SweepKind::NGamma => cfg.n_gamma = Some(value),
        }
        cfg
    }
}

/// Runs the sweep and writes `sweep_<kind>_<algo>.csv` per algorithm.
/// Returns the written paths.
pub fn run_suite(suite: &SuiteConfig) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&suite.out_dir)?;
    let mut written = Vec::new();
    for &algo in &suite.algos {
        let mut out = String::from(
            "value,algorithm,n,n_gamma_or_m,final_regret,bits_up,bits_down,upward_msgs,downward_msgs,stop_time,stopped_fraction,failed_fraction\n",
        );
        for &value in &suite.values {
            let cfg = suite.point(algo, value);
            cfg.validate()?;
            let result = run_experiment(&cfg)?;
            let s = result.summary;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                value,
                s.algorithm,
                s.n,
                s.n_gamma_or_m,
                s.final_regret,
                s.bits_up,
                s.bits_down,
                s.upward_msgs,
                s.downward_msgs,
                fmt_opt(s.stop_time),
                s.stopped_fraction,
                s.failed_fraction,
            ));
        }
        let path = suite.out_dir.join(format!("sweep_{}_{}.csv", suite.sweep, algo));
        std::fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemId::Problem1,
            population: PopulationKind::Uniform,
            n: 4,
            n_gamma: None,
            m: None,
            algo: Algorithm::Dme,
            eps: 0.5,
            delta: 0.1,
            horizon: 20_000,
            trials: 2,
            seed: 7,
            out: None,
            stride: 1000,
        }
    }

    #[test]
    fn trace_builder_per_step_gaps() {
        // Three events on arms with means (0.7, 0.5, 0.7) under problem1:
        // cumulative regret (0, 0.2, 0.2).
        let mut b = TraceBuilder::new(1, 3);
        for mean in [0.7, 0.5, 0.7] {
            b.record(0.7 - mean);
        }
        let trace = b.finish();
        assert_eq!(trace.steps, vec![1, 2, 3]);
        let expect = [0.0, 0.2, 0.2];
        for (v, e) in trace.values.iter().zip(expect) {
            assert!((v - e).abs() < 1e-12);
        }

        // An oracle always playing the best arm accrues zero regret.
        let mut b = TraceBuilder::new(2, 5);
        for _ in 0..5 {
            b.record(0.0);
        }
        let trace = b.finish();
        assert_eq!(trace.steps, vec![2, 4, 5]);
        assert!(trace.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn average_traces_examples() {
        let t1 = RegretTrace {
            stride: 1,
            steps: vec![1, 2, 3],
            values: vec![0.0, 2.0, 4.0],
        };
        let t2 = RegretTrace {
            stride: 1,
            steps: vec![1, 2, 3],
            values: vec![0.0, 0.0, 0.0],
        };
        assert_eq!(average_traces(std::slice::from_ref(&t1)), t1);
        let avg = average_traces(&[t1.clone(), t2]);
        assert_eq!(avg.values, vec![0.0, 1.0, 2.0]);

        let same = average_traces(&[t1.clone(), t1.clone(), t1.clone()]);
        for (a, b) in same.values.iter().zip(&t1.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn speedup_examples() {
        let stats = |stop: Option<u64>| RunStats {
            stop_time: stop,
            pulls_per_player: vec![],
            bits: MessageLedger::new(4),
            failed: false,
            output_arms: vec![],
        };
        assert_eq!(
            empirical_speedup(&stats(Some(5000)), &stats(Some(5000))),
            Some(1.0)
        );
        assert_eq!(
            empirical_speedup(&stats(Some(10_000)), &stats(Some(80_000))),
            Some(8.0)
        );
        assert_eq!(empirical_speedup(&stats(None), &stats(Some(80_000))), None);
        assert_eq!(empirical_speedup(&stats(Some(10_000)), &stats(None)), None);
    }

    #[test]
    fn config_parsing_and_validation() {
        let pairs = parse_kv(
            "# comment\nproblem = problem1\npopulation = uniform\nn = 8\nalgo = dme\n\
             eps = 0.5\ndelta = 0.05\nhorizon = 1000\ntrials = 2\nseed = 3\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_pairs(pairs).unwrap();
        assert_eq!(cfg.n, 8);
        assert_eq!(cfg.stride, 1000);
        assert_eq!(cfg.effective_n_gamma().unwrap(), 8);

        let bad = parse_kv("problem = problem1\nbogus = 1\n");
        assert!(ExperimentConfig::from_pairs(bad.unwrap()).is_err());

        let mut cfg = base_cfg();
        cfg.eps = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.algo = Algorithm::Edme;
        assert!(cfg.validate().is_err(), "edme needs m");
        let mut cfg = base_cfg();
        cfg.n_gamma = Some(9);
        assert!(cfg.validate().is_err());
        let mut cfg = base_cfg();
        cfg.population = PopulationKind::Pareto8020;
        cfg.n = 1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pareto_defaults_vote_base_to_group_size() {
        let mut cfg = base_cfg();
        cfg.population = PopulationKind::Pareto8020;
        cfg.n = 64;
        assert_eq!(cfg.effective_n_gamma().unwrap(), 13);
        cfg.n_gamma = Some(32);
        assert_eq!(cfg.effective_n_gamma().unwrap(), 32);
    }

    #[test]
    fn run_trial_is_deterministic() {
        let cfg = base_cfg();
        let (t1, s1) = run_trial(&cfg, 0).unwrap();
        let (t2, s2) = run_trial(&cfg, 0).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(s1, s2);
        let (t3, _) = run_trial(&cfg, 1).unwrap();
        assert_ne!(t1.values, t3.values, "distinct trials differ");

        // problem1 has a unique strictly best arm, so cumulative
        // pseudo-regret never decreases.
        assert!(t1.values.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn trace_matches_closed_form() {
        // T * mu_* - sum of chosen means, within 1e-6 at each checkpoint.
        let cfg = base_cfg();
        let arms = cfg.arms();
        let pop = cfg.population_instance().unwrap();
        let mut world = DmeWorld::new(arms.clone(), pop, cfg.eps, cfg.delta, None).unwrap();
        let mut rng = RandomSource::for_trial(cfg.seed, 0);
        let mut sum_means = 0.0;
        let mut builder = TraceBuilder::new(cfg.stride, cfg.horizon);
        for _ in 0..cfg.horizon {
            let rec = if world.stopped() {
                world.exploit_event(&mut rng).unwrap()
            } else {
                world.event(&mut rng).unwrap()
            };
            sum_means += rec.true_mean;
            builder.record(arms.best_mean() - rec.true_mean);
        }
        let trace = builder.finish();
        let last = *trace.values.last().unwrap();
        let closed = cfg.horizon as f64 * arms.best_mean() - sum_means;
        assert!((last - closed).abs() < 1e-6);
    }

    #[test]
    fn me_central_collapses_to_single_local_learner() {
        // me_central over N players and me_local over one player consume
        // the same event-level stream, so their traces are identical.
        let mut central = base_cfg();
        central.algo = Algorithm::MeCentral;
        central.n = 4;
        central.horizon = 50_000;
        let mut local = central.clone();
        local.algo = Algorithm::MeLocal;
        local.n = 1;

        let (tc, sc) = run_trial(&central, 0).unwrap();
        let (tl, sl) = run_trial(&local, 0).unwrap();
        assert_eq!(tc, tl);
        assert_eq!(sc.stop_time, sl.stop_time);
        assert_eq!(sc.output_arms, sl.output_arms);
    }

    #[test]
    fn baseline_bit_reporting() {
        let mut cfg = base_cfg();
        cfg.horizon = 5000;
        cfg.trials = 1;

        cfg.algo = Algorithm::MeLocal;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.summary.bits_up + r.summary.bits_down, 0.0);

        cfg.algo = Algorithm::MeCentral;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.summary.bits_up, (64 * 5000 * 4) as f64);
        assert_eq!(r.summary.bits_down, 0.0);

        cfg.algo = Algorithm::UcbCentral;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(
            r.summary.bits_up + r.summary.bits_down,
            (64 * 5000 * 4) as f64
        );
    }

    #[test]
    fn write_csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");

        // Empty trace: header only.
        let empty = RegretTrace {
            stride: 1000,
            steps: vec![],
            values: vec![],
        };
        let summary = Summary {
            algorithm: Algorithm::Dme,
            n: 4,
            n_gamma_or_m: 4,
            bits_up: 12.0,
            bits_down: 8.0,
            upward_msgs: 3.0,
            downward_msgs: 2.0,
            stop_time: None,
            failed_fraction: 0.0,
            final_regret: 0.0,
            stopped_fraction: 0.0,
        };
        write_csv(&empty, &summary, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "step,mean_regret\n"
        );
        let srow = std::fs::read_to_string(summary_path(&path)).unwrap();
        assert!(srow.ends_with("dme,4,4,12,8,3,2,,0\n"));

        // Rewriting with the same inputs is byte-identical.
        let trace = RegretTrace {
            stride: 1,
            steps: vec![1, 2],
            values: vec![0.25, 0.5],
        };
        write_csv(&trace, &summary, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_csv(&trace, &summary, &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn suite_single_point_produces_one_csv() {
        let dir = tempfile::tempdir().unwrap();
        let suite = SuiteConfig {
            base: {
                let mut cfg = base_cfg();
                cfg.horizon = 2000;
                cfg.trials = 1;
                cfg
            },
            sweep: SweepKind::N,
            values: vec![16],
            algos: vec![Algorithm::MeLocal],
            out_dir: dir.path().join("fig"),
        };
        let written = run_suite(&suite).unwrap();
        assert_eq!(written.len(), 1);
        let text = std::fs::read_to_string(&written[0]).unwrap();
        assert_eq!(text.lines().count(), 2, "header plus one row");
        assert!(text.lines().nth(1).unwrap().starts_with("16,me_local,16,"));
    }

    #[test]
    fn summary_bits_identity() {
        let mut cfg = base_cfg();
        cfg.horizon = 30_000;
        cfg.trials = 3;
        let r = run_experiment(&cfg).unwrap();
        let total: f64 = r
            .stats
            .iter()
            .map(|s| s.bits.total_bits() as f64)
            .sum::<f64>()
            / r.stats.len() as f64;
        assert!((r.summary.bits_up + r.summary.bits_down - total).abs() < 1e-9);
    }
}
