//! The vote-synchronized elimination protocol: server vote state, upward
//! and downward message flow with bit-exact accounting, the event-level
//! world transition, and stop detection.
//!
//! Message accounting follows the lossless, instantaneous network model: a
//! wish costs one upward message of `ceil(log2 K)` bits, and a global
//! elimination is charged as one downward message per player at broadcast
//! time even though players apply it lazily the next time they are drawn.
//! A completed run therefore never exceeds `2 N (K - 1) ceil(log2 K)` bits
//! no matter how long the exploitation phase lasts afterwards.

use std::collections::VecDeque;

use crate::bandit::PlayerState;
use crate::env::{ArmSet, PlayerPopulation, RandomSource};
use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Action codes
// ---------------------------------------------------------------------------

/// Width of a fixed binary action code for `k` arms: `ceil(log2 k)`.
pub fn code_width(k: usize) -> usize {
    if k <= 1 {
        0
    } else {
        (usize::BITS - (k - 1).leading_zeros()) as usize
    }
}

/// Fixed-width big-endian binary code of an arm index, e.g. arm 7 of 8 is
/// `"111"` and arm 7 of 10 is `"0111"`.
pub fn encode_action_index(k: usize, n_arms: usize) -> Result<String> {
    if k >= n_arms {
        return Err(Error::InvalidParameter(format!(
            "arm index {k} out of range for {n_arms} arms"
        )));
    }
    let width = code_width(n_arms);
    Ok((0..width)
        .rev()
        .map(|bit| if k >> bit & 1 == 1 { '1' } else { '0' })
        .collect())
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Protocol-wide constants. `eta = delta^(2 / n_gamma)` is the per-player
/// failure budget; the vote rule then eliminates an arm once wishes from at
/// least `n_gamma / 2` players accumulate, for an overall failure
/// probability of `eta^(n_gamma / 2) = delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub eps: f64,
    pub delta: f64,
    pub n: usize,
    pub n_gamma: usize,
    pub k: usize,
    pub eta: f64,
}

impl ProtocolParams {
    pub fn new(eps: f64, delta: f64, n: usize, n_gamma: usize, k: usize) -> Result<Self> {
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
        if n_gamma == 0 || n_gamma > n {
            return Err(Error::InvalidParameter(format!(
                "n_gamma must lie in [1, {n}], got {n_gamma}"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidParameter("arm count must be >= 2".into()));
        }
        let eta = ((2.0 / n_gamma as f64) * delta.ln()).exp();
        Ok(Self {
            eps,
            delta,
            n,
            n_gamma,
            k,
            eta,
        })
    }
}

// ---------------------------------------------------------------------------
// Message ledger
// ---------------------------------------------------------------------------

/// Cumulative message and bit counts. Every message carries one action
/// index of `width` bits, so `bits = msgs * width` on both directions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageLedger {
    pub upward_msgs: u64,
    pub downward_msgs: u64,
    pub bits_up: u64,
    pub bits_down: u64,
    pub width: usize,
}

impl MessageLedger {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            ..Self::default()
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.bits_up + self.bits_down
    }

    fn record_upward(&mut self) {
        self.upward_msgs += 1;
        self.bits_up += self.width as u64;
    }

    fn record_broadcast(&mut self, players: usize) {
        self.downward_msgs += players as u64;
        self.bits_down += (players * self.width) as u64;
    }
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

/// Synchronization-server state: the vote matrix, the globally eliminated
/// arms, and per-player queues of eliminations not yet delivered.
///
/// The server also derives each player's wish-set size from what the
/// protocol transmitted: `K` minus the arms the player voted against or
/// already received as eliminated, floored at one because a player always
/// keeps a candidate. That derived size is what stop detection uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    k: usize,
    lambda: Vec<Vec<bool>>,
    votes: Vec<u64>,
    eliminated: Vec<bool>,
    eliminated_order: Vec<usize>,
    pending: Vec<VecDeque<usize>>,
    // Union of "voted against" and "delivered as eliminated" per player,
    // with per-player cardinality and the count of players whose derived
    // wish-set size has reached one.
    gone: Vec<Vec<bool>>,
    gone_count: Vec<usize>,
    singleton_players: usize,
}

impl ServerState {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            k,
            lambda: vec![vec![false; k]; n],
            votes: vec![0; k],
            eliminated: vec![false; k],
            eliminated_order: Vec::new(),
            pending: vec![VecDeque::new(); n],
            gone: vec![vec![false; k]; n],
            gone_count: vec![0; n],
            singleton_players: 0,
        }
    }

    pub fn lambda(&self, player: usize, arm: usize) -> bool {
        self.lambda[player - 1][arm]
    }

    pub fn votes(&self, arm: usize) -> u64 {
        self.votes[arm]
    }

    pub fn is_eliminated(&self, arm: usize) -> bool {
        self.eliminated[arm]
    }

    /// Globally eliminated arms in elimination order.
    pub fn eliminated_arms(&self) -> &[usize] {
        &self.eliminated_order
    }

    pub fn pending_len(&self, player: usize) -> usize {
        self.pending[player - 1].len()
    }

    /// Next undelivered elimination for `player`, marking it delivered.
    pub fn pop_pending(&mut self, player: usize) -> Option<usize> {
        let arm = self.pending[player - 1].pop_front()?;
        self.mark_gone(player, arm);
        Some(arm)
    }

    /// Wish-set size of `player` as derived from transmitted information.
    pub fn wish_set_size_estimate(&self, player: usize) -> usize {
        (self.k - self.gone_count[player - 1]).max(1)
    }

    /// True once every player's derived wish-set size is one.
    pub fn all_singleton(&self) -> bool {
        self.singleton_players == self.pending.len()
    }

    fn mark_gone(&mut self, player: usize, arm: usize) {
        let row = &mut self.gone[player - 1];
        if !row[arm] {
            row[arm] = true;
            self.gone_count[player - 1] += 1;
            if self.gone_count[player - 1] == self.k - 1 {
                self.singleton_players += 1;
            }
        }
    }
}

/// Records a player's wish to eliminate an arm and fires the downward
/// broadcast once votes reach half the most-active group. Returns whether
/// the broadcast fired. A second wish for the same (player, arm) pair is a
/// protocol violation.
pub fn submit_wish(
    server: &mut ServerState,
    ledger: &mut MessageLedger,
    player: usize,
    arm: usize,
    params: &ProtocolParams,
) -> Result<bool> {
    let row = player - 1;
    if server.lambda[row][arm] {
        return Err(Error::DuplicateWish { player, arm });
    }
    server.lambda[row][arm] = true;
    server.votes[arm] += 1;
    server.mark_gone(player, arm);
    ledger.record_upward();

    // Integer form of votes >= n_gamma / 2.
    if !server.eliminated[arm] && 2 * server.votes[arm] >= params.n_gamma as u64 {
        server.eliminated[arm] = true;
        server.eliminated_order.push(arm);
        for queue in &mut server.pending {
            queue.push_back(arm);
        }
        ledger.record_broadcast(params.n);
        return Ok(true);
    }
    Ok(false)
}

// ---------------------------------------------------------------------------
// World
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Exploring,
    Stopped,
}

/// One step of the event loop, as consumed by the regret trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub t: u64,
    pub player: usize,
    pub arm: usize,
    pub reward: f64,
    pub true_mean: f64,
}

/// One upward wish, kept for diagnostics and equivalence tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WishEvent {
    pub t: u64,
    pub player: usize,
    pub arm: usize,
    pub epoch: u32,
}

/// The complete single-instance world: environment, players, server,
/// ledger, and phase.
#[derive(Debug, Clone)]
pub struct DmeWorld {
    params: ProtocolParams,
    arms: ArmSet,
    pop: PlayerPopulation,
    players: Vec<PlayerState>,
    server: ServerState,
    ledger: MessageLedger,
    phase: Phase,
    t: u64,
    wish_log: Vec<WishEvent>,
}

impl DmeWorld {
    /// `n_gamma` defaults to the population's most-active group size.
    pub fn new(
        arms: ArmSet,
        pop: PlayerPopulation,
        eps: f64,
        delta: f64,
        n_gamma: Option<usize>,
    ) -> Result<Self> {
        let n_gamma = n_gamma.unwrap_or_else(|| pop.n_gamma());
        let params = ProtocolParams::new(eps, delta, pop.n(), n_gamma, arms.len())?;
        let players = (1..=params.n)
            .map(|id| PlayerState::new(id, params.k, params.eps, params.eta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            server: ServerState::new(params.n, params.k),
            ledger: MessageLedger::new(code_width(params.k)),
            players,
            params,
            arms,
            pop,
            phase: Phase::Exploring,
            t: 0,
            wish_log: Vec::new(),
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn arms(&self) -> &ArmSet {
        &self.arms
    }

    pub fn player(&self, id: usize) -> &PlayerState {
        &self.players[id - 1]
    }

    pub fn players(&self) -> &[PlayerState] {
        &self.players
    }

    pub fn server(&self) -> &ServerState {
        &self.server
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn wish_log(&self) -> &[WishEvent] {
        &self.wish_log
    }

    /// Server-side stop detection.
    pub fn stopped(&self) -> bool {
        self.phase == Phase::Stopped
    }

    /// Player-side truth of the stopping predicate; must always agree with
    /// the server's derivation.
    pub fn players_all_singleton(&self) -> bool {
        self.players.iter().all(|p| p.wish_set().len() == 1)
    }

    /// One exploration event: draw a player, deliver its pending
    /// eliminations, pull the next arm, update the estimate, and close the
    /// epoch (sending wishes) if every playable arm has reached the
    /// threshold.
    pub fn event(&mut self, rng: &mut RandomSource) -> Result<EventRecord> {
        if self.phase == Phase::Stopped {
            return Err(Error::Phase("event on a stopped world; use exploit_event"));
        }
        self.t += 1;
        let player = self.pop.draw_player(rng.next_unit());

        while let Some(arm) = self.server.pop_pending(player) {
            self.players[player - 1].apply_downward(arm);
        }

        let arm = self.players[player - 1].next_action();
        let reward = self.arms.sample_reward(arm, rng.next_unit());
        self.players[player - 1].update_estimate(arm, reward);

        if self.players[player - 1].epoch_ready() {
            let epoch = self.players[player - 1].me().schedule().epoch;
            let wished = self.players[player - 1].close_epoch();
            for &w in &wished {
                self.wish_log.push(WishEvent {
                    t: self.t,
                    player,
                    arm: w,
                    epoch,
                });
                submit_wish(&mut self.server, &mut self.ledger, player, w, &self.params)?;
            }
        }

        if self.server.all_singleton() {
            self.phase = Phase::Stopped;
        }

        Ok(EventRecord {
            t: self.t,
            player,
            arm,
            reward,
            true_mean: self.arms.mean(arm),
        })
    }

    /// One exploitation event after the stop: the drawn player plays its
    /// surviving arm. No messages flow, so the ledger is frozen.
    pub fn exploit_event(&mut self, rng: &mut RandomSource) -> Result<EventRecord> {
        if self.phase != Phase::Stopped {
            return Err(Error::Phase("exploit_event before the world stopped"));
        }
        self.t += 1;
        let player = self.pop.draw_player(rng.next_unit());
        let arm = self.players[player - 1].exploit_action()?;
        let reward = self.arms.sample_reward(arm, rng.next_unit());
        Ok(EventRecord {
            t: self.t,
            player,
            arm,
            reward,
            true_mean: self.arms.mean(arm),
        })
    }

    /// Each player's output arm (1-based player order): the wish-set
    /// survivor, or the empirically best candidate if still exploring.
    pub fn output_arms(&self) -> Vec<usize> {
        self.players.iter().map(|p| p.output_arm()).collect()
    }
}
