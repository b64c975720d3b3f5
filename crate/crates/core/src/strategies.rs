//! Heuristic per-step strategies for both players, the candidate target
//! sets they draw from, and discounted payoff accumulation over a game
//! history.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{GameConfig, TieBreak};
use crate::state::{AttackAction, DefendAction, Observation, SystemState, VmId};

/// Candidate attack targets: every healthy VM, with the subset that can also
/// serve as a pivot origin (some positive pivot probability onto another VM)
/// marked separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialAttackTargets {
    pub targets: BTreeSet<VmId>,
    pub pivot_origins: BTreeSet<VmId>,
}

impl PotentialAttackTargets {
    pub fn contains(&self, v: VmId) -> bool {
        self.targets.contains(&v)
    }

    pub fn is_pivot_origin(&self, v: VmId) -> bool {
        self.pivot_origins.contains(&v)
    }
}

/// Healthy VMs are attackable; those with a positive pivot probability onto
/// some other VM are additionally marked as pivot origins.
pub fn potential_attack_targets(
    state: &SystemState,
    config: &GameConfig,
) -> PotentialAttackTargets {
    let mut targets = BTreeSet::new();
    let mut pivot_origins = BTreeSet::new();
    for v in 0..config.vm_count {
        if state.0[v] {
            continue;
        }
        targets.insert(VmId(v));
        let has_pivot = (0..config.vm_count)
            .any(|dst| dst != v && config.pivot_success[v][dst] > 0.0);
        if has_pivot {
            pivot_origins.insert(VmId(v));
        }
    }
    PotentialAttackTargets {
        targets,
        pivot_origins,
    }
}

/// Candidate defend targets: flagged VMs plus unflagged VMs not shuffled in
/// the previous step.
pub fn potential_defend_targets(
    observation: &Observation,
    previous: &DefendAction,
) -> BTreeSet<VmId> {
    let mut out = BTreeSet::new();
    for v in 0..observation.len() {
        let id = VmId(v);
        if observation.0[v] || !previous.contains(id) {
            out.insert(id);
        }
    }
    out
}

/// Running maximum with tie collection. Scores compare with exact float
/// equality; candidates must be scored with the same expression on every
/// route for ties to be meaningful.
struct ArgMax {
    best: f64,
    winners: BTreeSet<VmId>,
}

impl ArgMax {
    fn new() -> Self {
        Self {
            best: f64::NEG_INFINITY,
            winners: BTreeSet::new(),
        }
    }

    fn offer(&mut self, v: VmId, score: f64) {
        if score > self.best {
            self.best = score;
            self.winners.clear();
            self.winners.insert(v);
        } else if score == self.best {
            self.winners.insert(v);
        }
    }

    /// Final action set: empty when no candidate scored above zero.
    fn into_action(self, tie_break: TieBreak) -> BTreeSet<VmId> {
        if self.winners.is_empty() || self.best <= 0.0 {
            return BTreeSet::new();
        }
        match tie_break {
            TieBreak::KeepAll => self.winners,
            TieBreak::LowestId => {
                let first = *self.winners.iter().next().expect("non-empty winners");
                BTreeSet::from([first])
            }
        }
    }
}

/// Attacker action for the next step.
///
/// Every healthy VM is scored for a direct attack,
/// `gamma^t * (p(v) * Ra(v) - Ca(v))`, and every ordered pair of healthy VMs
/// (v, v') for a pivot, `gamma^t * (p(v', v) * Ra(v') - Ca(v'))`, credited to
/// the pivot origin v'. The action is the set of VMs achieving the maximal
/// score, or empty when no score is positive.
pub fn attack_strategy(state: &SystemState, t: usize, config: &GameConfig) -> AttackAction {
    let discount = config.gamma.powi(t as i32);
    let mut arg = ArgMax::new();
    for v in 0..config.vm_count {
        if state.0[v] {
            continue;
        }
        let direct =
            discount * (config.direct_success[v] * config.attacker_reward[v] - config.attack_cost[v]);
        arg.offer(VmId(v), direct);
        for origin in 0..config.vm_count {
            if origin == v || state.0[origin] {
                continue;
            }
            let pivot = discount
                * (config.pivot_success[origin][v] * config.attacker_reward[origin]
                    - config.attack_cost[origin]);
            arg.offer(VmId(origin), pivot);
        }
    }
    AttackAction {
        targets: arg.into_action(config.tie_break),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("defend strategy needs at least 2 VMs to score an unflagged candidate")]
    SingleVmUnflaggedCandidate,
    #[error("defend cost vector must have length {expected}, got {actual}")]
    CostLength { expected: usize, actual: usize },
}

/// Defender action for the next step.
///
/// Flagged VMs score `gamma^t * (pi(v) * Rd(v) - Cd(v))`; unflagged VMs not in
/// the previous defend action score `gamma^t * (pi(v) * Rd(v) / (n - 1) -
/// Cd(v))`. `defend_costs[v]` is the estimated cost of the cheapest admissible
/// shuffle of `v` under the current assignment. The action is the maximal-
/// score set, or empty when no score is positive.
#[allow(clippy::needless_range_loop)]
pub fn defend_strategy(
    observation: &Observation,
    previous: &DefendAction,
    t: usize,
    config: &GameConfig,
    defend_costs: &[f64],
) -> Result<DefendAction, StrategyError> {
    let n = config.vm_count;
    if defend_costs.len() != n {
        return Err(StrategyError::CostLength {
            expected: n,
            actual: defend_costs.len(),
        });
    }
    let discount = config.gamma.powi(t as i32);
    let mut arg = ArgMax::new();
    for v in 0..n {
        let id = VmId(v);
        if observation.0[v] {
            let score =
                discount * (config.confidence[v] * config.defender_reward[v] - defend_costs[v]);
            arg.offer(id, score);
        } else if !previous.contains(id) {
            if n == 1 {
                return Err(StrategyError::SingleVmUnflaggedCandidate);
            }
            let score = discount
                * (config.confidence[v] * config.defender_reward[v] / (n as f64 - 1.0)
                    - defend_costs[v]);
            arg.offer(id, score);
        }
    }
    Ok(DefendAction {
        shuffled: arg.into_action(config.tie_break),
    })
}

/// Realized one-step rewards: the defender earns per VM restored (1 -> 0),
/// the attacker per VM newly crashed (0 -> 1).
pub fn step_rewards(
    before: &SystemState,
    after: &SystemState,
    config: &GameConfig,
) -> (f64, f64) {
    debug_assert_eq!(before.len(), after.len());
    let mut defender = 0.0;
    let mut attacker = 0.0;
    for v in 0..before.len() {
        if before.0[v] && !after.0[v] {
            defender += config.defender_reward[v];
        }
        if !before.0[v] && after.0[v] {
            attacker += config.attacker_reward[v];
        }
    }
    (defender, attacker)
}

/// Realized one-step attacker cost: the shuffle weight for every defended VM
/// plus scan/probe weight for every VM neither defended nor attacked.
pub fn attacker_step_cost(
    defend: &DefendAction,
    attack: &AttackAction,
    config: &GameConfig,
) -> f64 {
    let w = config.weights;
    let mut cost = defend.len() as f64 * w.migration;
    for v in 0..config.vm_count {
        let id = VmId(v);
        if !defend.contains(id) && !attack.contains(id) {
            cost += w.ip_hop + w.port_hop;
        }
    }
    cost
}

/// One executed step of a game: the tuple the history stores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    /// Step label, 1-based.
    pub t: usize,
    pub state_before: SystemState,
    pub observation: Observation,
    pub attack: AttackAction,
    pub defend: DefendAction,
    pub state_after: SystemState,
    pub defender_reward: f64,
    pub defender_cost: f64,
    pub attacker_reward: f64,
    pub attacker_cost: f64,
}

/// Ordered step records, contiguous from t = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameHistory {
    records: Vec<StepRecord>,
    pub config: GameConfig,
}

impl GameHistory {
    pub fn new(config: GameConfig) -> Self {
        Self {
            records: Vec::new(),
            config,
        }
    }

    /// Append the next step; its label must continue the sequence.
    pub fn push(&mut self, record: StepRecord) {
        assert_eq!(
            record.t,
            self.records.len() + 1,
            "step records must be contiguous from 1"
        );
        self.records.push(record);
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Discounted payoff totals for both players.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PayoffLedger {
    pub defender: f64,
    pub attacker: f64,
}

/// Discounted sums of per-step net payoffs. The step labeled `t` carries
/// discount exponent `t - 1`: the first step is undiscounted.
pub fn cumulative_payoffs(history: &GameHistory, gamma: f64) -> PayoffLedger {
    let mut ledger = PayoffLedger::default();
    for record in &history.records {
        let discount = gamma.powi(record.t as i32 - 1);
        ledger.defender += discount * (record.defender_reward - record.defender_cost);
        ledger.attacker += discount * (record.attacker_reward - record.attacker_cost);
    }
    ledger
}
