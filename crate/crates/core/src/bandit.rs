//! Per-player median-elimination machinery and the local baselines:
//! median elimination with local elimination rights, and UCB1.
//!
//! The distributed protocol separates two arm sets per player. `K_n` is the
//! set of arms the player still plays (shrunk only by server broadcasts);
//! the wish set `K_nl` is the subset the player has not yet asked the server
//! to eliminate. Pulls round-robin over `K_n`; epochs close when every arm
//! of `K_n` reaches the pull threshold, at which point the arms of the wish
//! set that sit strictly below the upper median of the empirical means are
//! wished away.

use crate::error::{Error, Result};

/// Pulls each arm needs before an epoch may close:
/// `ceil((4 / eps_l^2) * ln(3K / eta_l))`.
pub fn pull_threshold(eps_l: f64, eta_l: f64, k: usize) -> Result<u64> {
    if eps_l <= 0.0 || !eps_l.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pull threshold needs eps_l > 0, got {eps_l}"
        )));
    }
    if eta_l <= 0.0 || !eta_l.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "pull threshold needs eta_l > 0, got {eta_l}"
        )));
    }
    let arg = 3.0 * k as f64 / eta_l;
    if arg <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "pull threshold needs eta_l < 3K, got eta_l={eta_l}, K={k}"
        )));
    }
    // The cast saturates once the threshold outgrows u64 (epochs that deep
    // never finish anyway).
    Ok(((4.0 / (eps_l * eps_l)) * arg.ln()).ceil() as u64)
}

/// Upper median: the `ceil((m + 1) / 2)`-th smallest of `m` values.
pub fn elimination_median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty list");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("means are never NaN"));
    sorted[sorted.len() / 2]
}

/// Per-epoch approximation and failure budgets.
///
/// Starts at `(eps / 4, eta / 2)` and advances by `eps_l <- 3/4 * eps_l`,
/// `eta_l <- eta_l / 2` each epoch, so the totals stay below `eps` and
/// `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub eps_l: f64,
    pub eta_l: f64,
    pub epoch: u32,
}

impl Schedule {
    pub fn start(eps: f64, eta: f64) -> Self {
        Self {
            eps_l: eps / 4.0,
            eta_l: eta / 2.0,
            epoch: 1,
        }
    }

    pub fn advance(&mut self) {
        self.eps_l *= 0.75;
        self.eta_l /= 2.0;
        self.epoch += 1;
    }
}

// ---------------------------------------------------------------------------
// One median-elimination layer
// ---------------------------------------------------------------------------

/// One median-elimination instance: per-arm pull counts and empirical
/// means, the wish set, and the epoch schedule.
///
/// This is the building block shared by the single-instance protocol and
/// the multi-instance extension (where several layers track the same pull
/// stream under different failure budgets).
#[derive(Debug, Clone, PartialEq)]
pub struct MeState {
    k_total: usize,
    k_nl: Vec<usize>,
    t: Vec<u64>,
    mu_hat: Vec<f64>,
    sched: Schedule,
    threshold: u64,
}

impl MeState {
    pub fn new(k_total: usize, eps: f64, eta: f64) -> Result<Self> {
        if k_total == 0 {
            return Err(Error::InvalidParameter("arm count must be >= 1".into()));
        }
        let sched = Schedule::start(eps, eta);
        let threshold = pull_threshold(sched.eps_l, sched.eta_l, k_total)?;
        Ok(Self {
            k_total,
            k_nl: (0..k_total).collect(),
            t: vec![0; k_total],
            mu_hat: vec![0.0; k_total],
            sched,
            threshold,
        })
    }

    pub fn k_total(&self) -> usize {
        self.k_total
    }

    /// Arms not yet wished away, ascending.
    pub fn wish_set(&self) -> &[usize] {
        &self.k_nl
    }

    pub fn count(&self, k: usize) -> u64 {
        self.t[k]
    }

    pub fn mean(&self, k: usize) -> f64 {
        self.mu_hat[k]
    }

    pub fn schedule(&self) -> Schedule {
        self.sched
    }

    /// Pull threshold of the current epoch.
    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// Incremental mean update. A count of zero discards the stored mean,
    /// so epoch resets need no separate mean reset.
    pub fn update_estimate(&mut self, k: usize, y: f64) {
        debug_assert!((0.0..=1.0).contains(&y));
        self.t[k] += 1;
        let t = self.t[k] as f64;
        self.mu_hat[k] = y / t + (t - 1.0) / t * self.mu_hat[k];
    }

    /// True once every arm of `playable` has reached the epoch threshold.
    /// The quantifier runs over the playable set, not just the wish set.
    pub fn epoch_ready(&self, playable: &[usize]) -> bool {
        playable.iter().all(|&k| self.t[k] >= self.threshold)
    }

    pub fn reset_count(&mut self, k: usize) {
        self.t[k] = 0;
    }

    /// Closes the epoch: wishes away every wish-set arm strictly below the
    /// upper median of the wish-set means, resets the counts of the
    /// pre-removal wish set, and advances the schedule. Returns the wished
    /// arms in ascending order.
    ///
    /// Ties with the median survive, so at most half the wish set leaves
    /// and it never empties here.
    pub fn close_epoch(&mut self) -> Vec<usize> {
        debug_assert!(!self.k_nl.is_empty());
        let snapshot = self.k_nl.clone();
        let values: Vec<f64> = snapshot.iter().map(|&k| self.mu_hat[k]).collect();
        let median = elimination_median(&values);
        let wished: Vec<usize> = snapshot
            .iter()
            .copied()
            .filter(|&k| self.mu_hat[k] < median)
            .collect();
        self.k_nl.retain(|k| !wished.contains(k));
        for &k in &snapshot {
            self.t[k] = 0;
        }
        self.sched.advance();
        self.threshold =
            pull_threshold(self.sched.eps_l, self.sched.eta_l, self.k_total).unwrap_or(u64::MAX);
        wished
    }

    /// Removes a globally eliminated arm from the wish set (downward path).
    pub fn remove_from_wish_set(&mut self, k: usize) {
        self.k_nl.retain(|&a| a != k);
    }

    /// Refills an emptied wish set with the empirically best arm of
    /// `playable` (lowest index on ties).
    pub fn refill_from(&mut self, playable: &[usize]) {
        debug_assert!(self.k_nl.is_empty());
        let mut best = playable[0];
        for &k in playable {
            if self.mu_hat[k] > self.mu_hat[best] {
                best = k;
            }
        }
        self.k_nl.push(best);
    }

    /// The player's output arm: the wish-set survivor, or the empirically
    /// best wish-set arm while more than one candidate remains.
    pub fn output_arm(&self) -> usize {
        let mut best = self.k_nl[0];
        for &k in &self.k_nl {
            if self.mu_hat[k] > self.mu_hat[best] {
                best = k;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// Player state
// ---------------------------------------------------------------------------

/// One player's state in the distributed protocol: the playable set `K_n`
/// with its round-robin cursor, plus a single median-elimination layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerState {
    player_id: usize,
    k_n: Vec<usize>,
    cursor: usize,
    me: MeState,
}

impl PlayerState {
    /// `player_id` is 1-based. `eta` is the per-player failure budget (the
    /// protocol passes `delta^(2/N_gamma)`, the local baseline passes
    /// `delta`).
    pub fn new(player_id: usize, k_total: usize, eps: f64, eta: f64) -> Result<Self> {
        Ok(Self {
            player_id,
            k_n: (0..k_total).collect(),
            cursor: 0,
            me: MeState::new(k_total, eps, eta)?,
        })
    }

    pub fn player_id(&self) -> usize {
        self.player_id
    }

    /// Remaining playable arms, ascending.
    pub fn playable(&self) -> &[usize] {
        &self.k_n
    }

    pub fn wish_set(&self) -> &[usize] {
        self.me.wish_set()
    }

    pub fn me(&self) -> &MeState {
        &self.me
    }

    /// Round-robin over the playable set; eliminated arms are skipped
    /// because removal keeps the cursor on the arm that followed them.
    pub fn next_action(&mut self) -> usize {
        debug_assert!(!self.k_n.is_empty());
        if self.cursor >= self.k_n.len() {
            self.cursor = 0;
        }
        let arm = self.k_n[self.cursor];
        self.cursor = (self.cursor + 1) % self.k_n.len();
        arm
    }

    pub fn update_estimate(&mut self, k: usize, y: f64) {
        debug_assert!(self.k_n.contains(&k));
        self.me.update_estimate(k, y);
    }

    pub fn epoch_ready(&self) -> bool {
        self.me.epoch_ready(&self.k_n)
    }

    pub fn close_epoch(&mut self) -> Vec<usize> {
        self.me.close_epoch()
    }

    /// Applies a server broadcast eliminating arm `k`. A player down to its
    /// last playable arm keeps it regardless; otherwise the arm leaves both
    /// sets, and an emptied wish set refills with the empirically best
    /// playable arm.
    pub fn apply_downward(&mut self, k: usize) {
        if self.k_n.len() <= 1 {
            return;
        }
        self.remove_playable(k);
        self.me.remove_from_wish_set(k);
        if self.me.wish_set().is_empty() {
            self.me.refill_from(&self.k_n);
        }
    }

    /// The committed arm once the wish set is a singleton.
    pub fn exploit_action(&self) -> Result<usize> {
        match self.me.wish_set() {
            [arm] => Ok(*arm),
            _ => Err(Error::Phase("exploit_action before the wish set is a singleton")),
        }
    }

    pub fn output_arm(&self) -> usize {
        self.me.output_arm()
    }

    pub(crate) fn remove_playable(&mut self, k: usize) {
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

// ---------------------------------------------------------------------------
// Baseline: local median elimination
// ---------------------------------------------------------------------------

/// Standard median elimination run by a single learner: epochs eliminate
/// arms locally, and the learner commits once one arm survives.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMe {
    state: PlayerState,
    wish_log: Vec<(u32, usize)>,
}

impl LocalMe {
    pub fn new(k_total: usize, eps: f64, eta: f64) -> Result<Self> {
        Ok(Self {
            state: PlayerState::new(1, k_total, eps, eta)?,
            wish_log: Vec::new(),
        })
    }

    pub fn done(&self) -> bool {
        self.state.wish_set().len() == 1
    }

    pub fn survivor(&self) -> Option<usize> {
        match self.state.wish_set() {
            [arm] => Some(*arm),
            _ => None,
        }
    }

    /// (epoch, arm) pairs in the order the eliminations happened.
    pub fn wish_log(&self) -> &[(u32, usize)] {
        &self.wish_log
    }

    pub fn output_arm(&self) -> usize {
        self.state.output_arm()
    }

    pub fn me(&self) -> &MeState {
        self.state.me()
    }

    pub fn next_action(&mut self) -> usize {
        match self.survivor() {
            Some(arm) => arm,
            None => self.state.next_action(),
        }
    }

    /// Records a reward and, when the epoch closes, eliminates the wished
    /// arms locally.
    pub fn observe(&mut self, k: usize, y: f64) {
        if self.done() {
            return;
        }
        self.state.update_estimate(k, y);
        if self.state.epoch_ready() {
            let epoch = self.state.me().schedule().epoch;
            let wished = self.state.close_epoch();
            for &arm in &wished {
                self.wish_log.push((epoch, arm));
                self.state.remove_playable(arm);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Baseline: UCB1
// ---------------------------------------------------------------------------

/// UCB1 with exploration constant 2 under the square root. Ties break
/// toward the lowest arm index; each arm is pulled once before the index
/// comparison kicks in.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbState {
    counts: Vec<u64>,
    means: Vec<f64>,
    total: u64,
}

impl UcbState {
    pub fn new(k_total: usize) -> Self {
        Self {
            counts: vec![0; k_total],
            means: vec![0.0; k_total],
            total: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn select(&self) -> usize {
        if let Some(k) = self.counts.iter().position(|&c| c == 0) {
            return k;
        }
        let ln_t = (self.total as f64).ln();
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for k in 0..self.counts.len() {
            let index = self.means[k] + (2.0 * ln_t / self.counts[k] as f64).sqrt();
            if index > best_index {
                best = k;
                best_index = index;
            }
        }
        best
    }

    pub fn update(&mut self, k: usize, y: f64) {
        self.counts[k] += 1;
        self.total += 1;
        let t = self.counts[k] as f64;
        self.means[k] = y / t + (t - 1.0) / t * self.means[k];
    }

    /// Empirically best arm, lowest index on ties.
    pub fn best_arm(&self) -> usize {
        let mut best = 0;
        for k in 0..self.means.len() {
            if self.means[k] > self.means[best] {
                best = k;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::RandomSource;
    use proptest::prelude::*;

    #[test]
    fn pull_threshold_examples() {
        // 64 * ln(24) = 203.395..., frozen from high-precision evaluation.
        assert_eq!(pull_threshold(0.25, 0.5, 4).unwrap(), 204);
        // 1 * ln(3) = 1.0986...
        assert_eq!(pull_threshold(2.0, 1.0, 1).unwrap(), 2);
    }

    #[test]
    fn pull_threshold_rejects_bad_budgets() {
        assert!(pull_threshold(0.0, 0.5, 4).is_err());
        assert!(pull_threshold(-1.0, 0.5, 4).is_err());
        assert!(pull_threshold(0.5, 0.0, 4).is_err());
        assert!(pull_threshold(0.5, -0.5, 4).is_err());
        assert!(pull_threshold(0.5, 12.0, 4).is_err());
    }

    proptest! {
        // Quadratic scaling: halving eps at least quadruples the pulls,
        // up to the ceiling slack.
        #[test]
        fn pull_threshold_quadratic_scaling(eps in 0.01f64..1.0, eta in 0.001f64..0.9, k in 1usize..32) {
            let base = pull_threshold(eps, eta, k).unwrap();
            let halved = pull_threshold(eps / 2.0, eta, k).unwrap();
            prop_assert!(halved >= 4 * base - 4);
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(elimination_median(&[0.4]), 0.4);
        assert_eq!(elimination_median(&[0.1, 0.5, 0.3]), 0.3);
        assert_eq!(elimination_median(&[0.7, 0.5, 0.3, 0.1]), 0.5);
    }

    #[test]
    fn schedule_follows_closed_form() {
        let (eps, eta) = (0.5, 0.3);
        let mut sched = Schedule::start(eps, eta);
        let mut expected_eps = eps / 4.0;
        for l in 1..=50u32 {
            assert_eq!(sched.epoch, l);
            assert_eq!(sched.eps_l, expected_eps);
            assert_eq!(sched.eta_l, eta / 2f64.powi(l as i32));
            expected_eps *= 0.75;
            sched.advance();
        }
    }

    #[test]
    fn schedule_sums_stay_below_budgets() {
        let (eps, eta) = (0.5, 0.3);
        let mut sched = Schedule::start(eps, eta);
        let (mut eps_sum, mut eta_sum) = (0.0, 0.0);
        for _ in 0..50 {
            eps_sum += sched.eps_l;
            eta_sum += sched.eta_l;
            sched.advance();
        }
        assert!(eps_sum < eps && eta_sum < eta);
        // Geometric residuals: eps * (3/4)^50 and eta * 2^-50.
        assert!(((eps - eps_sum) - eps * 0.75f64.powi(50)).abs() < 1e-12);
        assert!(((eta - eta_sum) - eta * 0.5f64.powi(50)).abs() < 1e-12);
    }

    #[test]
    fn update_estimate_examples() {
        let mut me = MeState::new(2, 0.5, 0.5).unwrap();
        // Count-zero reset: a stale mean is discarded by the update itself.
        me.update_estimate(0, 0.9);
        me.reset_count(0);
        me.update_estimate(0, 0.5);
        assert_eq!(me.count(0), 1);
        assert_eq!(me.mean(0), 0.5);

        me.update_estimate(0, 1.0);
        assert_eq!(me.count(0), 2);
        assert!((me.mean(0) - 0.75).abs() < 1e-15);

        let mut other = MeState::new(2, 0.5, 0.5).unwrap();
        other.update_estimate(1, 1.0);
        other.update_estimate(1, 0.0);
        other.update_estimate(1, 0.0);
        assert!((other.mean(1) - 1.0 / 3.0).abs() < 1e-15);
        other.update_estimate(1, 0.0);
        assert_eq!(other.count(1), 4);
        assert!((other.mean(1) - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn incremental_mean_matches_arithmetic_mean(ys in proptest::collection::vec(0.0f64..=1.0, 1..200)) {
            let mut me = MeState::new(1, 0.5, 0.5).unwrap();
            me.update_estimate(0, 0.77);
            me.reset_count(0);
            for &y in &ys {
                me.update_estimate(0, y);
            }
            let direct = ys.iter().sum::<f64>() / ys.len() as f64;
            prop_assert!((me.mean(0) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn round_robin_visits_every_arm() {
        let mut player = PlayerState::new(1, 3, 0.5, 0.5).unwrap();
        let seq: Vec<usize> = (0..7).map(|_| player.next_action()).collect();
        assert_eq!(seq, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn round_robin_skips_eliminated_arm() {
        // Playable {0, 2, 5} with the cursor just past arm 0; removing arm 2
        // mid-cycle makes the next pull arm 5.
        let mut player = PlayerState::new(1, 6, 0.5, 0.5).unwrap();
        for k in [1, 3, 4] {
            player.apply_downward(k);
        }
        assert_eq!(player.playable(), &[0, 2, 5]);
        assert_eq!(player.next_action(), 0);
        player.apply_downward(2);
        assert_eq!(player.next_action(), 5);
        assert_eq!(player.next_action(), 0);
    }

    #[test]
    fn singleton_round_robin() {
        let mut player = PlayerState::new(1, 5, 0.5, 0.5).unwrap();
        for k in [0, 1, 2, 3] {
            player.apply_downward(k);
        }
        assert_eq!(player.playable(), &[4]);
        assert_eq!(player.next_action(), 4);
        assert_eq!(player.next_action(), 4);
    }

    #[test]
    fn epoch_ready_quantifies_over_playable_set() {
        let mut player = PlayerState::new(1, 3, 0.5, 0.5).unwrap();
        let thr = player.me().threshold();
        for _ in 0..thr {
            player.update_estimate(0, 1.0);
            player.update_estimate(1, 0.5);
            player.update_estimate(2, 0.0);
        }
        assert!(player.epoch_ready());
        let wished = player.close_epoch();
        assert_eq!(wished, vec![2]);
        assert_eq!(player.wish_set(), &[0, 1]);
        assert_eq!(player.playable(), &[0, 1, 2], "no local elimination");

        // Arm 2 left the wish set but still gates readiness: its count was
        // reset with the epoch and must climb back first.
        let thr2 = player.me().threshold();
        for _ in 0..thr2 {
            player.update_estimate(0, 1.0);
            player.update_estimate(1, 0.5);
        }
        assert!(!player.epoch_ready());
        for _ in 0..thr2 {
            player.update_estimate(2, 0.0);
        }
        assert!(player.epoch_ready());
    }

    #[test]
    fn close_epoch_examples() {
        // Estimates 0.7 / 0.5 / 0.3 / 0.1: the upper median is 0.5, so the
        // two strictly-below arms are wished away.
        let mut me = MeState::new(4, 0.5, 0.5).unwrap();
        for (k, y) in [(0, 0.7), (1, 0.5), (2, 0.3), (3, 0.1)] {
            me.update_estimate(k, y);
        }
        let epoch_before = me.schedule().epoch;
        let wished = me.close_epoch();
        assert_eq!(wished, vec![2, 3]);
        assert_eq!(me.wish_set(), &[0, 1]);
        assert_eq!(me.schedule().epoch, epoch_before + 1);
        assert!(me.wish_set().iter().all(|&k| me.count(k) == 0));

        // All estimates equal: ties survive, the schedule still advances.
        let mut me = MeState::new(3, 0.5, 0.5).unwrap();
        for k in 0..3 {
            me.update_estimate(k, 0.4);
        }
        let wished = me.close_epoch();
        assert!(wished.is_empty());
        assert_eq!(me.wish_set(), &[0, 1, 2]);
        assert_eq!(me.schedule().epoch, 2);

        // A singleton wish set wishes nothing.
        let mut me = MeState::new(2, 0.5, 0.5).unwrap();
        me.update_estimate(0, 0.2);
        me.update_estimate(1, 0.9);
        me.remove_from_wish_set(0);
        assert!(me.close_epoch().is_empty());
        assert_eq!(me.wish_set(), &[1]);
    }

    #[test]
    fn close_epoch_resets_only_the_wish_set_snapshot() {
        let mut me = MeState::new(3, 0.5, 0.5).unwrap();
        for k in 0..3 {
            me.update_estimate(k, [0.9, 0.5, 0.1][k]);
        }
        let wished = me.close_epoch();
        assert_eq!(wished, vec![2]);
        // Second epoch: arm 2 is outside the wish set now, so its count
        // keeps accumulating across the next close.
        for _ in 0..5 {
            me.update_estimate(2, 0.0);
        }
        me.update_estimate(0, 0.9);
        me.update_estimate(1, 0.5);
        me.close_epoch();
        assert_eq!(me.count(2), 5, "non-wish-set counts survive the reset");
        assert_eq!(me.count(0), 0);
        assert_eq!(me.count(1), 0);
    }

    proptest! {
        // Strictly-below-the-upper-median removal wishes away at most half
        // of the wish set and keeps at least half.
        #[test]
        fn close_epoch_halving(values in proptest::collection::vec(0.0f64..=1.0, 1..24)) {
            let m = values.len();
            let mut me = MeState::new(m, 0.5, 0.5).unwrap();
            for (k, &y) in values.iter().enumerate() {
                me.update_estimate(k, y);
            }
            let wished = me.close_epoch();
            prop_assert!(wished.len() <= m / 2);
            prop_assert!(me.wish_set().len() >= m.div_ceil(2));
            prop_assert_eq!(wished.len() + me.wish_set().len(), m);
        }
    }

    #[test]
    fn apply_downward_examples() {
        // Arm absent from the wish set: removed from the playable set only.
        let mut p = PlayerState::new(1, 4, 0.5, 0.5).unwrap();
        for (k, y) in [(0, 0.1), (1, 0.9), (2, 0.5), (3, 0.8)] {
            p.update_estimate(k, y);
        }
        p.apply_downward(0); // playable {1,2,3}
        p.me.remove_from_wish_set(2); // wish set {1,3}
        p.apply_downward(2);
        assert_eq!(p.playable(), &[1, 3]);
        assert_eq!(p.wish_set(), &[1, 3]);

        // Wish set emptied by the broadcast: refilled with the empirically
        // best playable arm.
        let mut p = PlayerState::new(1, 3, 0.5, 0.5).unwrap();
        for (k, y) in [(0, 0.2), (1, 0.9), (2, 0.6)] {
            p.update_estimate(k, y);
        }
        p.apply_downward(0); // playable {1,2}
        p.me.remove_from_wish_set(1); // wish set {2}
        p.apply_downward(2);
        assert_eq!(p.playable(), &[1]);
        assert_eq!(p.wish_set(), &[1]);

        // Last playable arm is protected.
        let mut p = PlayerState::new(1, 2, 0.5, 0.5).unwrap();
        p.apply_downward(0);
        assert_eq!(p.playable(), &[1]);
        p.apply_downward(1);
        assert_eq!(p.playable(), &[1]);
        assert_eq!(p.wish_set(), &[1]);
    }

    #[test]
    fn exploit_action_requires_singleton() {
        let mut p = PlayerState::new(1, 3, 0.5, 0.5).unwrap();
        assert!(p.exploit_action().is_err());
        p.apply_downward(0);
        p.apply_downward(2);
        assert_eq!(p.exploit_action().unwrap(), 1);
        assert_eq!(p.exploit_action().unwrap(), 1);
    }

    #[test]
    fn local_me_two_arms_deterministic() {
        let mut me = LocalMe::new(2, 0.5, 0.5).unwrap();
        let mut steps = 0u64;
        while !me.done() {
            let arm = me.next_action();
            let y = if arm == 0 { 1.0 } else { 0.0 };
            me.observe(arm, y);
            steps += 1;
            assert!(steps < 100_000, "local ME failed to terminate");
        }
        assert_eq!(me.survivor(), Some(0));
        assert_eq!(me.wish_log(), &[(1, 1)]);
        assert_eq!(steps, 2 * pull_threshold(0.5 / 4.0, 0.5 / 2.0, 2).unwrap());
        // Committed: plays the survivor forever.
        assert_eq!(me.next_action(), 0);
        assert_eq!(me.next_action(), 0);
    }

    #[test]
    fn local_me_single_arm_terminates_immediately() {
        let me = LocalMe::new(1, 0.5, 0.5).unwrap();
        assert!(me.done());
        assert_eq!(me.survivor(), Some(0));
    }

    #[test]
    fn local_me_pac_on_problem1() {
        // 500 seeded runs with eps = 0.5, delta = 0.1: survivors must land
        // in the eps-optimal set at least (1 - delta) - 3 sigma of the time.
        let arms = crate::env::make_problem(crate::env::ProblemId::Problem1);
        let good = crate::env::epsilon_optimal_set(&arms, 0.5);
        let runs = 500u32;
        let mut hits = 0u32;
        for trial in 0..runs {
            let mut rng = RandomSource::for_trial(2024, trial as u64);
            let mut me = LocalMe::new(arms.len(), 0.5, 0.1).unwrap();
            while !me.done() {
                let arm = me.next_action();
                let y = arms.sample_reward(arm, rng.next_unit());
                me.observe(arm, y);
            }
            if good.contains(&me.survivor().unwrap()) {
                hits += 1;
            }
        }
        let sigma = (0.1f64 * 0.9 / runs as f64).sqrt();
        let required = (0.9 - 3.0 * sigma) * runs as f64;
        assert!(
            hits as f64 >= required,
            "{hits}/{runs} survivors eps-optimal, needed {required:.1}"
        );
    }

    #[test]
    fn ucb_initialization_and_exploitation() {
        let mut ucb = UcbState::new(4);
        for k in 0..4 {
            let pick = ucb.select();
            assert_eq!(pick, k, "initialization visits arms in order");
            ucb.update(pick, 0.5);
        }
        let mut ucb = UcbState::new(2);
        ucb.update(0, 0.9);
        ucb.update(1, 0.1);
        assert_eq!(ucb.select(), 0, "equal exploration bonuses cancel");
    }

    proptest! {
        #[test]
        fn ucb_equal_counts_reduce_to_argmax(grid in proptest::collection::vec(0u8..=10, 2..8), pulls in 1u64..5) {
            let means: Vec<f64> = grid.iter().map(|&g| g as f64 / 10.0).collect();
            let mut ucb = UcbState::new(means.len());
            for _ in 0..pulls {
                for (k, &m) in means.iter().enumerate() {
                    ucb.update(k, m);
                }
            }
            let expected = ucb.best_arm();
            prop_assert_eq!(ucb.select(), expected);
        }
    }
}
