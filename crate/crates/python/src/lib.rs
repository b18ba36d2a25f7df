//! Python bindings: the experiment runner and a stepwise protocol world,
//! plus the small pure helpers (problem presets, thresholds, action codes).
//!
//! Build with `cargo build --release -p dme-py`, then copy or symlink
//! `target/release/libdme_py.so` to `dme_py.so` somewhere on `sys.path`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dme_core::env::{ArmSet, PlayerPopulation, RandomSource};
use dme_core::harness::{run_experiment, ConfigDraft};
use dme_core::protocol::DmeWorld;
use dme_core::Error;

fn to_py_err(err: Error) -> PyErr {
    match err {
        Error::InvalidParameter(_) | Error::Config(_) => PyValueError::new_err(err.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

/// True mean rewards of a named problem preset ("problem1" or "problem2").
#[pyfunction]
fn problem_means(name: &str) -> PyResult<Vec<f64>> {
    let id = name.parse().map_err(to_py_err)?;
    Ok(dme_core::env::make_problem(id).means().to_vec())
}

/// Indices of the arms within `eps` of the best mean.
#[pyfunction]
fn epsilon_optimal(means: Vec<f64>, eps: f64) -> PyResult<Vec<usize>> {
    let arms = ArmSet::new(means).map_err(to_py_err)?;
    Ok(dme_core::env::epsilon_optimal_set(&arms, eps))
}

/// Pulls each arm needs before an epoch may close.
#[pyfunction]
fn pull_threshold(eps_l: f64, eta_l: f64, k: usize) -> PyResult<u64> {
    dme_core::bandit::pull_threshold(eps_l, eta_l, k).map_err(to_py_err)
}

/// Fixed-width big-endian binary code of an arm index.
#[pyfunction]
fn encode_action_index(k: usize, n_arms: usize) -> PyResult<String> {
    dme_core::protocol::encode_action_index(k, n_arms).map_err(to_py_err)
}

/// Width in bits of the action code for `n_arms` arms.
#[pyfunction]
fn code_width(n_arms: usize) -> usize {
    dme_core::protocol::code_width(n_arms)
}

fn build_population(kind: &str, n: usize) -> PyResult<PlayerPopulation> {
    let kind = kind.parse().map_err(to_py_err)?;
    PlayerPopulation::from_kind(kind, n).map_err(to_py_err)
}

/// A stepwise distributed run: one protocol world plus its random source.
///
/// `step()` advances one event (exploring or exploiting as appropriate)
/// and returns `(t, player, arm, reward)`.
#[pyclass]
struct DmeSim {
    world: DmeWorld,
    rng: RandomSource,
}

#[pymethods]
impl DmeSim {
    #[new]
    #[pyo3(signature = (problem="problem1", population="uniform", n=8, eps=0.5, delta=0.05, seed=0, n_gamma=None))]
    fn new(
        problem: &str,
        population: &str,
        n: usize,
        eps: f64,
        delta: f64,
        seed: u64,
        n_gamma: Option<usize>,
    ) -> PyResult<Self> {
        let arms = dme_core::env::make_problem(problem.parse().map_err(to_py_err)?);
        let pop = build_population(population, n)?;
        let world = DmeWorld::new(arms, pop, eps, delta, n_gamma).map_err(to_py_err)?;
        Ok(Self {
            world,
            rng: RandomSource::new(seed),
        })
    }

    fn step(&mut self) -> PyResult<(u64, usize, usize, f64)> {
        let rec = if self.world.stopped() {
            self.world.exploit_event(&mut self.rng)
        } else {
            self.world.event(&mut self.rng)
        }
        .map_err(to_py_err)?;
        Ok((rec.t, rec.player, rec.arm, rec.reward))
    }

    /// Runs until the protocol stops or `max_events` elapse; returns the
    /// stop time or None.
    fn run_until_stopped(&mut self, max_events: u64) -> PyResult<Option<u64>> {
        while !self.world.stopped() {
            if self.world.t() >= max_events {
                return Ok(None);
            }
            self.world.event(&mut self.rng).map_err(to_py_err)?;
        }
        Ok(Some(self.world.t()))
    }

    #[getter]
    fn stopped(&self) -> bool {
        self.world.stopped()
    }

    #[getter]
    fn t(&self) -> u64 {
        self.world.t()
    }

    #[getter]
    fn total_bits(&self) -> u64 {
        self.world.ledger().total_bits()
    }

    fn ledger(&self, py: Python<'_>) -> PyResult<Py<PyDict>> {
        let ledger = self.world.ledger();
        let dict = PyDict::new(py);
        dict.set_item("upward_msgs", ledger.upward_msgs)?;
        dict.set_item("downward_msgs", ledger.downward_msgs)?;
        dict.set_item("bits_up", ledger.bits_up)?;
        dict.set_item("bits_down", ledger.bits_down)?;
        dict.set_item("width", ledger.width)?;
        Ok(dict.unbind())
    }

    /// Each player's output arm, indexed by player - 1.
    fn output_arms(&self) -> Vec<usize> {
        self.world.output_arms()
    }

    fn __repr__(&self) -> String {
        format!(
            "DmeSim(t={}, stopped={}, total_bits={})",
            self.world.t(),
            self.world.stopped(),
            self.world.ledger().total_bits()
        )
    }
}

/// A complete experiment: seeded trials, averaged regret trace, and the
/// protocol summary.
#[pyclass]
struct Experiment {
    cfg: dme_core::harness::ExperimentConfig,
}

#[pymethods]
impl Experiment {
    #[new]
    #[pyo3(signature = (algo, problem="problem1", population="uniform", n=8, eps=0.5, delta=0.05,
                        horizon=100_000, trials=10, seed=0, n_gamma=None, m=None, stride=1000))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        algo: &str,
        problem: &str,
        population: &str,
        n: usize,
        eps: f64,
        delta: f64,
        horizon: u64,
        trials: u64,
        seed: u64,
        n_gamma: Option<usize>,
        m: Option<usize>,
        stride: u64,
    ) -> PyResult<Self> {
        let draft = ConfigDraft {
            problem: Some(problem.parse().map_err(to_py_err)?),
            population: Some(population.parse().map_err(to_py_err)?),
            n: Some(n),
            n_gamma,
            m,
            algo: Some(algo.parse().map_err(to_py_err)?),
            eps: Some(eps),
            delta: Some(delta),
            horizon: Some(horizon),
            trials: Some(trials),
            seed: Some(seed),
            out: None,
            stride: Some(stride),
        };
        Ok(Self {
            cfg: draft.build().map_err(to_py_err)?,
        })
    }

    /// Runs every trial and returns `{"steps": [...], "mean_regret": [...],
    /// "summary": {...}}`.
    fn run(&self, py: Python<'_>) -> PyResult<Py<PyDict>> {
        let result = run_experiment(&self.cfg).map_err(to_py_err)?;
        let s = &result.summary;
        let summary = PyDict::new(py);
        summary.set_item("algorithm", s.algorithm.to_string())?;
        summary.set_item("n", s.n)?;
        summary.set_item("n_gamma_or_m", s.n_gamma_or_m)?;
        summary.set_item("bits_up", s.bits_up)?;
        summary.set_item("bits_down", s.bits_down)?;
        summary.set_item("upward_msgs", s.upward_msgs)?;
        summary.set_item("downward_msgs", s.downward_msgs)?;
        summary.set_item("stop_time", s.stop_time)?;
        summary.set_item("failed_fraction", s.failed_fraction)?;
        summary.set_item("stopped_fraction", s.stopped_fraction)?;
        summary.set_item("final_regret", s.final_regret)?;

        let out = PyDict::new(py);
        out.set_item("steps", result.trace.steps)?;
        out.set_item("mean_regret", result.trace.values)?;
        out.set_item("summary", summary)?;
        Ok(out.unbind())
    }

    fn __repr__(&self) -> String {
        format!(
            "Experiment(algo={}, n={}, horizon={}, trials={})",
            self.cfg.algo, self.cfg.n, self.cfg.horizon, self.cfg.trials
        )
    }
}

#[pymodule]
fn dme_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(problem_means, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(pull_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(encode_action_index, m)?)?;
    m.add_function(wrap_pyfunction!(code_width, m)?)?;
    m.add_class::<DmeSim>()?;
    m.add_class::<Experiment>()?;
    Ok(())
}
