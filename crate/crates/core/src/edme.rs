//! The multi-instance extension: several vote-threshold instances run in
//! parallel over one shared action set per player, every pull feeds all
//! instances, and the first instance whose players all reach a singleton
//! wish set decides the outputs.
//!
//! Instance `i` of `M` uses the vote base `N_gamma_i = ceil(N * i / M)` and
//! the failure budget `eta_i = (delta / M)^(2 / N_gamma_i)`, so the union
//! bound over instances keeps the overall failure at `delta`. Upward wishes
//! are never deduplicated across instances; a global elimination is
//! broadcast (and charged) once even when several instances cross their
//! thresholds on the same arm.

use std::collections::VecDeque;

use crate::bandit::MeState;
use crate::env::{ArmSet, PlayerPopulation, RandomSource};
use crate::error::{Error, Result};
use crate::protocol::{code_width, EventRecord, MessageLedger, Phase};

/// Instance layout: the deduplicated `N_gamma_i` spread and the matching
/// per-instance failure budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct EdmeConfig {
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub k: usize,
    pub n_gamma_list: Vec<usize>,
    pub eta_list: Vec<f64>,
}

impl EdmeConfig {
    /// The regular spread `N_gamma_i = ceil(N * i / M)`, with duplicate
    /// values collapsed (fractional spreads can repeat after rounding).
    pub fn new(eps: f64, delta: f64, n: usize, k: usize, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("instance count must be >= 1".into()));
        }
        let mut list: Vec<usize> = (1..=m).map(|i| (n * i).div_ceil(m)).collect();
        list.dedup();
        Self::with_n_gamma_list(eps, delta, n, k, list)
    }

    /// Explicit spread; values are sorted and deduplicated.
    pub fn with_n_gamma_list(
        eps: f64,
        delta: f64,
        n: usize,
        k: usize,
        mut n_gamma_list: Vec<usize>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in [0, 1), got {eps}"
            )));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must lie in (0, 1], got {delta}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("player count must be >= 1".into()));
        }
        if k < 2 {
            return Err(Error::InvalidParameter("arm count must be >= 2".into()));
        }
        n_gamma_list.sort_unstable();
        n_gamma_list.dedup();
        if n_gamma_list.is_empty() {
            return Err(Error::InvalidParameter("empty n_gamma list".into()));
        }
        if n_gamma_list[0] == 0 || *n_gamma_list.last().unwrap() > n {
            return Err(Error::InvalidParameter(format!(
                "n_gamma values must lie in [1, {n}], got {n_gamma_list:?}"
            )));
        }
        let m_eff = n_gamma_list.len() as f64;
        let eta_list = n_gamma_list
            .iter()
            .map(|&ng| ((2.0 / ng as f64) * (delta / m_eff).ln()).exp())
            .collect();
        Ok(Self {
            eps,
            delta,
            n,
            k,
            n_gamma_list,
            eta_list,
        })
    }

    /// Effective instance count after collapsing duplicates.
    pub fn instances(&self) -> usize {
        self.n_gamma_list.len()
    }
}

#[derive(Debug, Clone)]
struct EdmePlayer {
    k_n: Vec<usize>,
    cursor: usize,
    layers: Vec<MeState>,
}

impl EdmePlayer {
    fn next_action(&mut self) -> usize {
        if self.cursor >= self.k_n.len() {
            self.cursor = 0;
        }
        let arm = self.k_n[self.cursor];
        self.cursor = (self.cursor + 1) % self.k_n.len();
        arm
    }

    fn remove_playable(&mut self, k: usize) {
        if let Some(j) = self.k_n.iter().position(|&a| a == k) {
            self.k_n.remove(j);
            if j < self.cursor {
                self.cursor -= 1;
            }
            if self.cursor >= self.k_n.len() {
                self.cursor = 0;
            }
        }
    }
}

/// One upward wish tagged with its instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdmeWish {
    pub t: u64,
    pub instance: usize,
    pub player: usize,
    pub arm: usize,
    pub epoch: u32,
}

/// The multi-instance world: one shared playable set and pull stream per
/// player, one elimination queue and ledger, and per-instance vote
/// matrices and statistics layers.
#[derive(Debug, Clone)]
pub struct EdmeWorld {
    cfg: EdmeConfig,
    arms: ArmSet,
    pop: PlayerPopulation,
    players: Vec<EdmePlayer>,
    // lambda[i][player-1][arm], with per-instance vote column sums.
    lambda: Vec<Vec<Vec<bool>>>,
    votes: Vec<Vec<u64>>,
    eliminated: Vec<bool>,
    eliminated_order: Vec<usize>,
    pending: Vec<VecDeque<usize>>,
    ledger: MessageLedger,
    // singleton[i][player-1]: wish set of that layer has reached size one
    // (absorbing); an instance completes when its count reaches N.
    singleton: Vec<Vec<bool>>,
    singleton_count: Vec<usize>,
    phase: Phase,
    winner: Option<usize>,
    t: u64,
    wish_log: Vec<EdmeWish>,
}

impl EdmeWorld {
    pub fn new(arms: ArmSet, pop: PlayerPopulation, cfg: EdmeConfig) -> Result<Self> {
        if cfg.n != pop.n() {
            return Err(Error::InvalidParameter(format!(
                "config has {} players but population has {}",
                cfg.n,
                pop.n()
            )));
        }
        if cfg.k != arms.len() {
            return Err(Error::InvalidParameter(format!(
                "config has {} arms but environment has {}",
                cfg.k,
                arms.len()
            )));
        }
        let m = cfg.instances();
        let players = (0..cfg.n)
            .map(|_| {
                let layers = cfg
                    .eta_list
                    .iter()
                    .map(|&eta| MeState::new(cfg.k, cfg.eps, eta))
                    .collect::<Result<Vec<_>>>()?;
                Ok(EdmePlayer {
                    k_n: (0..cfg.k).collect(),
                    cursor: 0,
                    layers,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            lambda: vec![vec![vec![false; cfg.k]; cfg.n]; m],
            votes: vec![vec![0; cfg.k]; m],
            eliminated: vec![false; cfg.k],
            eliminated_order: Vec::new(),
            pending: vec![VecDeque::new(); cfg.n],
            ledger: MessageLedger::new(code_width(cfg.k)),
            singleton: vec![vec![false; cfg.n]; m],
            singleton_count: vec![0; m],
            phase: Phase::Exploring,
            winner: None,
            t: 0,
            wish_log: Vec::new(),
            players,
            arms,
            pop,
            cfg,
        })
    }

    /// Convenience constructor from the regular spread.
    pub fn spawn_instances(
        arms: ArmSet,
        pop: PlayerPopulation,
        eps: f64,
        delta: f64,
        m: usize,
    ) -> Result<Self> {
        let cfg = EdmeConfig::new(eps, delta, pop.n(), arms.len(), m)?;
        Self::new(arms, pop, cfg)
    }

    pub fn config(&self) -> &EdmeConfig {
        &self.cfg
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn stopped(&self) -> bool {
        self.phase == Phase::Stopped
    }

    /// Index into `n_gamma_list` of the instance that completed first
    /// (lowest index on simultaneous completion).
    pub fn winner_instance(&self) -> Option<usize> {
        self.winner
    }

    pub fn wish_log(&self) -> &[EdmeWish] {
        &self.wish_log
    }

    pub fn eliminated_arms(&self) -> &[usize] {
        &self.eliminated_order
    }

    pub fn playable(&self, player: usize) -> &[usize] {
        &self.players[player - 1].k_n
    }

    /// Wish set of one (player, instance) layer.
    pub fn wish_set(&self, player: usize, instance: usize) -> &[usize] {
        self.players[player - 1].layers[instance].wish_set()
    }

    fn note_singleton(&mut self, player: usize, instance: usize) {
        if !self.singleton[instance][player - 1]
            && self.players[player - 1].layers[instance].wish_set().len() == 1
        {
            self.singleton[instance][player - 1] = true;
            self.singleton_count[instance] += 1;
        }
    }

    /// One exploration event. A single arm is pulled and its single reward
    /// feeds every instance layer; each layer closes its own epochs and
    /// votes in its own matrix.
    pub fn event(&mut self, rng: &mut RandomSource) -> Result<EventRecord> {
        if self.phase == Phase::Stopped {
            return Err(Error::Phase("event on a stopped world; use exploit_event"));
        }
        self.t += 1;
        let player = self.pop.draw_player(rng.next_unit());
        let m = self.cfg.instances();

        while let Some(arm) = self.pending[player - 1].pop_front() {
            let p = &mut self.players[player - 1];
            if p.k_n.len() > 1 {
                p.remove_playable(arm);
                for layer in &mut p.layers {
                    layer.remove_from_wish_set(arm);
                    if layer.wish_set().is_empty() {
                        layer.refill_from(&p.k_n);
                    }
                }
                for i in 0..m {
                    self.note_singleton(player, i);
                }
            }
        }

        let arm = self.players[player - 1].next_action();
        let reward = self.arms.sample_reward(arm, rng.next_unit());

        for i in 0..m {
            let p = &mut self.players[player - 1];
            p.layers[i].update_estimate(arm, reward);
            if !p.layers[i].epoch_ready(&p.k_n) {
                continue;
            }
            let epoch = p.layers[i].schedule().epoch;
            let wished = p.layers[i].close_epoch();
            self.note_singleton(player, i);
            for &w in &wished {
                self.wish_log.push(EdmeWish {
                    t: self.t,
                    instance: i,
                    player,
                    arm: w,
                    epoch,
                });
                self.submit_wish(i, player, w)?;
            }
        }

        if let Some(i) = self
            .singleton_count
            .iter()
            .position(|&c| c == self.cfg.n)
        {
            self.phase = Phase::Stopped;
            self.winner = Some(i);
        }

        Ok(EventRecord {
            t: self.t,
            player,
            arm,
            reward,
            true_mean: self.arms.mean(arm),
        })
    }

    fn submit_wish(&mut self, instance: usize, player: usize, arm: usize) -> Result<()> {
        let row = &mut self.lambda[instance][player - 1];
        if row[arm] {
            return Err(Error::DuplicateWish { player, arm });
        }
        row[arm] = true;
        self.votes[instance][arm] += 1;
        self.ledger.upward_msgs += 1;
        self.ledger.bits_up += self.ledger.width as u64;

        if !self.eliminated[arm]
            && 2 * self.votes[instance][arm] >= self.cfg.n_gamma_list[instance] as u64
        {
            self.eliminated[arm] = true;
            self.eliminated_order.push(arm);
            for queue in &mut self.pending {
                queue.push_back(arm);
            }
            self.ledger.downward_msgs += self.cfg.n as u64;
            self.ledger.bits_down += (self.cfg.n * self.ledger.width) as u64;
        }
        Ok(())
    }

    /// One exploitation event: the drawn player plays the winning
    /// instance's surviving arm.
    pub fn exploit_event(&mut self, rng: &mut RandomSource) -> Result<EventRecord> {
        if self.phase != Phase::Stopped {
            return Err(Error::Phase("exploit_event before the world stopped"));
        }
        self.t += 1;
        let player = self.pop.draw_player(rng.next_unit());
        let arm = self.output_arm(player);
        let reward = self.arms.sample_reward(arm, rng.next_unit());
        Ok(EventRecord {
            t: self.t,
            player,
            arm,
            reward,
            true_mean: self.arms.mean(arm),
        })
    }

    /// The player's output: the winning instance's survivor once stopped,
    /// otherwise the empirically best candidate of the first instance.
    pub fn output_arm(&self, player: usize) -> usize {
        let layer = self.winner.unwrap_or(0);
        self.players[player - 1].layers[layer].output_arm()
    }

    pub fn output_arms(&self) -> Vec<usize> {
        (1..=self.cfg.n).map(|p| self.output_arm(p)).collect()
    }
}
