//! Reward environments, player populations, and the deterministic random
//! source. Rewards are Bernoulli with the configured means; player ids are
//! 1-based while arm indices are 0-based.

use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Arms
// ---------------------------------------------------------------------------

/// The `K` arms of one problem instance with their true mean rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    means: Vec<f64>,
}

impl ArmSet {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "an arm set needs at least 2 arms, got {}",
                means.len()
            )));
        }
        if let Some(&m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidParameter(format!(
                "arm mean {m} outside [0, 1]"
            )));
        }
        Ok(Self { means })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.means[k]
    }

    /// Index of the maximal mean, lowest index on ties.
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for (k, &m) in self.means.iter().enumerate() {
            if m > self.means[best] {
                best = k;
            }
        }
        best
    }

    pub fn best_mean(&self) -> f64 {
        self.means[self.best_arm()]
    }

    /// Bernoulli reward: 1 if `u < mean(k)`, else 0.
    pub fn sample_reward(&self, k: usize, u: f64) -> f64 {
        assert!(k < self.means.len(), "arm index {k} out of range");
        if u < self.means[k] {
            1.0
        } else {
            0.0
        }
    }
}

/// Arms within `eps` of the best mean: `{k : mu_k >= mu_* - eps}`.
/// Test oracle; returned indices are ascending.
pub fn epsilon_optimal_set(arms: &ArmSet, eps: f64) -> Vec<usize> {
    let cutoff = arms.best_mean() - eps;
    (0..arms.len()).filter(|&k| arms.mean(k) >= cutoff).collect()
}

/// The two benchmark problems, addressable by name from configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Problem1,
    Problem2,
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "problem1" => Ok(Self::Problem1),
            "problem2" => Ok(Self::Problem2),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Problem1 => write!(f, "problem1"),
            Self::Problem2 => write!(f, "problem2"),
        }
    }
}

/// problem1: one strong arm, one medium, one weak, seven poor.
/// problem2: the same shape compressed into small gaps.
pub fn make_problem(id: ProblemId) -> ArmSet {
    let means = match id {
        ProblemId::Problem1 => vec![0.7, 0.5, 0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
        ProblemId::Problem2 => vec![0.3, 0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1],
    };
    ArmSet::new(means).expect("preset means are valid")
}

// ---------------------------------------------------------------------------
// Player population
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationKind {
    Uniform,
    Pareto8020,
}

impl FromStr for PopulationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "pareto8020" => Ok(Self::Pareto8020),
            other => Err(Error::Config(format!("unknown population '{other}'"))),
        }
    }
}

impl std::fmt::Display for PopulationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::Pareto8020 => write!(f, "pareto8020"),
        }
    }
}

/// `N` players and the distribution the active player is drawn from.
///
/// `n_gamma` is the size of the most-active group. Under the 80/20
/// distribution the first `n_gamma` players share probability mass 0.8 and
/// the rest share 0.2; under the uniform distribution `n_gamma == n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlayerPopulation {
    n: usize,
    kind: PopulationKind,
    n_gamma: usize,
}

impl PlayerPopulation {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("player count must be >= 1".into()));
        }
        Ok(Self {
            n,
            kind: PopulationKind::Uniform,
            n_gamma: n,
        })
    }

    /// 20% of players generate 80% of events, with the active group sized
    /// `ceil(0.2 * n)`.
    pub fn pareto8020(n: usize) -> Result<Self> {
        let n_gamma = (0.2 * n as f64).ceil() as usize;
        Self::pareto_with_group(n, n_gamma)
    }

    pub fn pareto_with_group(n: usize, n_gamma: usize) -> Result<Self> {
        if n_gamma == 0 || n_gamma >= n {
            return Err(Error::InvalidParameter(format!(
                "pareto8020 requires 0 < n_gamma < n, got n_gamma={n_gamma}, n={n}"
            )));
        }
        Ok(Self {
            n,
            kind: PopulationKind::Pareto8020,
            n_gamma,
        })
    }

    pub fn from_kind(kind: PopulationKind, n: usize) -> Result<Self> {
        match kind {
            PopulationKind::Uniform => Self::uniform(n),
            PopulationKind::Pareto8020 => Self::pareto8020(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> PopulationKind {
        self.kind
    }

    pub fn n_gamma(&self) -> usize {
        self.n_gamma
    }

    /// P(player), player 1-based.
    pub fn probability(&self, player: usize) -> f64 {
        debug_assert!(player >= 1 && player <= self.n);
        match self.kind {
            PopulationKind::Uniform => 1.0 / self.n as f64,
            PopulationKind::Pareto8020 => {
                if player <= self.n_gamma {
                    0.8 / self.n_gamma as f64
                } else {
                    0.2 / (self.n - self.n_gamma) as f64
                }
            }
        }
    }

    /// Inverse-CDF draw of the active player from `u` in [0, 1).
    /// Returns a 1-based player id.
    pub fn draw_player(&self, u: f64) -> usize {
        debug_assert!((0.0..1.0).contains(&u));
        match self.kind {
            PopulationKind::Uniform => {
                let idx = (u * self.n as f64).floor() as usize;
                idx.min(self.n - 1) + 1
            }
            PopulationKind::Pareto8020 => {
                if u < 0.8 {
                    let idx = ((u / 0.8) * self.n_gamma as f64).floor() as usize;
                    idx.min(self.n_gamma - 1) + 1
                } else {
                    let rest = self.n - self.n_gamma;
                    let idx = (((u - 0.8) / 0.2) * rest as f64).floor() as usize;
                    self.n_gamma + idx.min(rest - 1) + 1
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random source
// ---------------------------------------------------------------------------

/// Deterministic, seedable random source. One instance is confined to one
/// trial; distinct trials get independent streams of the same seed, so
/// parallel trials never share generator state and any (seed, trial) pair
/// replays bit-exactly.
#[derive(Debug, Clone)]
pub struct RandomSource {
    rng: ChaCha8Rng,
    draws: u64,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::for_trial(seed, 0)
    }

    pub fn for_trial(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        Self { rng, draws: 0 }
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_unit(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Number of draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}
