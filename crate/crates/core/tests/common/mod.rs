//! Independent oracles for the strategy, transition, and shuffle-decision
//! operations. Each oracle recomputes results from first principles (full
//! score tables, exact probability algebra, materialized candidate
//! assignments) rather than reusing the streaming implementations.

use std::collections::BTreeSet;

use mtd_shuffle::config::{GameConfig, PivotCombine, TieBreak};
use mtd_shuffle::shuffle::{shuffle_cost, vm_capacity, Assignment, OnlineCounts};
use mtd_shuffle::state::{AttackAction, DefendAction, Observation, SystemState, VmId};

/// Score table entry: candidate VM and its score.
type Scored = (VmId, f64);

fn argmax_set(table: &[Scored], tie_break: TieBreak) -> BTreeSet<VmId> {
    let best = table
        .iter()
        .map(|&(_, s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if table.is_empty() || best <= 0.0 {
        return BTreeSet::new();
    }
    let winners: BTreeSet<VmId> = table
        .iter()
        .filter(|&&(_, s)| s == best)
        .map(|&(v, _)| v)
        .collect();
    match tie_break {
        TieBreak::KeepAll => winners,
        TieBreak::LowestId => BTreeSet::from([*winners.iter().next().unwrap()]),
    }
}

/// Exhaustive attack-strategy oracle: scores every healthy VM directly and
/// every ordered healthy pivot pair, then filters the maximizers from the
/// full table.
pub fn brute_force_attack(state: &SystemState, t: usize, config: &GameConfig) -> AttackAction {
    let discount = config.gamma.powi(t as i32);
    let mut table: Vec<Scored> = Vec::new();
    for v in 0..config.vm_count {
        if state.0[v] {
            continue;
        }
        table.push((
            VmId(v),
            discount
                * (config.direct_success[v] * config.attacker_reward[v] - config.attack_cost[v]),
        ));
        for origin in 0..config.vm_count {
            if origin == v || state.0[origin] {
                continue;
            }
            table.push((
                VmId(origin),
                discount
                    * (config.pivot_success[origin][v] * config.attacker_reward[origin]
                        - config.attack_cost[origin]),
            ));
        }
    }
    AttackAction {
        targets: argmax_set(&table, config.tie_break),
    }
}

/// Exhaustive defend-strategy oracle over the full candidate score table.
#[allow(clippy::needless_range_loop)]
pub fn brute_force_defend(
    observation: &Observation,
    previous: &DefendAction,
    t: usize,
    config: &GameConfig,
    defend_costs: &[f64],
) -> DefendAction {
    let n = config.vm_count;
    let discount = config.gamma.powi(t as i32);
    let mut table: Vec<Scored> = Vec::new();
    for v in 0..n {
        if observation.0[v] {
            table.push((
                VmId(v),
                discount * (config.confidence[v] * config.defender_reward[v] - defend_costs[v]),
            ));
        } else if !previous.contains(VmId(v)) {
            table.push((
                VmId(v),
                discount
                    * (config.confidence[v] * config.defender_reward[v] / (n as f64 - 1.0)
                        - defend_costs[v]),
            ));
        }
    }
    DefendAction {
        shuffled: argmax_set(&table, config.tie_break),
    }
}

/// Exact per-VM probability that the next state bit is 1, derived from the
/// transition semantics by probability algebra.
pub fn exact_bit_probability(
    state: &SystemState,
    observation: &Observation,
    defend: &DefendAction,
    attack: &AttackAction,
    config: &GameConfig,
    v: usize,
) -> f64 {
    if defend.contains(VmId(v)) {
        return 0.0;
    }
    if attack.contains(VmId(v)) {
        return if state.0[v] {
            1.0
        } else {
            config.direct_success[v]
        };
    }
    if observation.0[v] && !state.0[v] {
        let sources: Vec<usize> = (0..config.vm_count)
            .filter(|&s| s != v && state.0[s])
            .collect();
        if sources.is_empty() {
            return 0.0;
        }
        return match config.pivot_combine {
            PivotCombine::Max => sources
                .iter()
                .map(|&s| config.pivot_success[s][v])
                .fold(0.0, f64::max),
            PivotCombine::IndependentOr => {
                1.0 - sources
                    .iter()
                    .map(|&s| 1.0 - config.pivot_success[s][v])
                    .product::<f64>()
            }
        };
    }
    if state.0[v] {
        1.0
    } else {
        0.0
    }
}

/// Exact next-state distribution over all 2^n patterns.
pub fn exact_transition_distribution(
    state: &SystemState,
    observation: &Observation,
    defend: &DefendAction,
    attack: &AttackAction,
    config: &GameConfig,
) -> Vec<f64> {
    let n = config.vm_count;
    let bit_p: Vec<f64> = (0..n)
        .map(|v| exact_bit_probability(state, observation, defend, attack, config, v))
        .collect();
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|v| {
                    if mask & (1 << v) != 0 {
                        bit_p[v]
                    } else {
                        1.0 - bit_p[v]
                    }
                })
                .product()
        })
        .collect()
}

/// Total variation distance between two distributions over the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// One candidate in the exhaustive shuffle-decision search.
#[derive(Debug, Clone, Copy)]
pub struct OracleCandidate {
    pub segment: usize,
    pub port: usize,
    pub migrate_to: Option<usize>,
}

/// Candidate space for one flagged VM, mirrored from the documented rules:
/// segments that keep the current segment covered, every port, and at most
/// one migration option (all online users to the least-loaded unflagged VM
/// with room), admitted only while online users do not exceed half the
/// nominal capacity. No-migration candidates come first, then segments and
/// ports in ascending order.
pub fn oracle_candidates(
    assignment: &Assignment,
    flags: &Observation,
    v: usize,
    online: usize,
    config: &GameConfig,
) -> Vec<OracleCandidate> {
    let current_segment = assignment.segment_of(v).unwrap();
    let segments: Vec<usize> = if assignment.segment_population(current_segment) >= 2 {
        (0..config.segment_count).collect()
    } else {
        vec![current_segment]
    };
    let cap = vm_capacity(config);
    let target = if online >= 1 && online <= config.users_per_vm / 2 {
        (0..config.vm_count)
            .filter(|&w| w != v && !flags.0[w] && assignment.load(w) + online <= cap)
            .min_by_key(|&w| (assignment.load(w), w))
    } else {
        None
    };
    let mut migrate_options = vec![None];
    if target.is_some() {
        migrate_options.push(target);
    }
    let mut out = Vec::new();
    for migrate_to in migrate_options {
        for &segment in &segments {
            for port in 0..config.port_count {
                out.push(OracleCandidate {
                    segment,
                    port,
                    migrate_to,
                });
            }
        }
    }
    out
}

/// Materialize a candidate on a copy of the assignment; returns the new
/// assignment and the set of rows that changed.
pub fn materialize(
    assignment: &Assignment,
    v: usize,
    cand: &OracleCandidate,
    online: usize,
) -> (Assignment, BTreeSet<VmId>) {
    let mut next = assignment.clone();
    let mut touched = BTreeSet::new();
    let seg = next.segment_of(v).unwrap();
    if seg != cand.segment {
        next.segments.set(v, seg, false);
        next.segments.set(v, cand.segment, true);
        touched.insert(VmId(v));
    }
    let port = next.port_of(v).unwrap();
    if port != cand.port {
        next.ports.set(v, port, false);
        next.ports.set(v, cand.port, true);
        touched.insert(VmId(v));
    }
    if let Some(target) = cand.migrate_to {
        if online > 0 {
            for user in next.users_of(v).into_iter().take(online) {
                next.users.set(v, user, false);
                next.users.set(target, user, true);
            }
            touched.insert(VmId(v));
            touched.insert(VmId(target));
        }
    }
    (next, touched)
}

/// Score a materialized candidate from first principles: the realized
/// shuffle cost over the touched rows, the confidence-weighted restoration
/// reward, and the attacker's expected value from re-targeting the shuffled
/// VM net of the per-shuffled-VM attack cost. An untouched assignment scores
/// the attacker's scan cost for an unengaged VM.
pub fn oracle_score(
    before: &Assignment,
    after: &Assignment,
    touched: &BTreeSet<VmId>,
    v: usize,
    t: usize,
    config: &GameConfig,
) -> f64 {
    let w = config.weights;
    let discount = config.gamma.powi(t as i32);
    if touched.is_empty() {
        return discount * (w.ip_hop + w.port_hop);
    }
    let shuffled = DefendAction {
        shuffled: touched.clone(),
    };
    let cost = shuffle_cost(before, after, &shuffled, &w);
    let defender = config.confidence[v] * config.defender_reward[v] - cost;
    let attacker = config.direct_success[v] * config.attacker_reward[v]
        - w.migration * touched.len() as f64;
    discount * (defender - attacker)
}

/// Exhaustive shuffle-decision oracle: replays flagged VMs in ascending id
/// order, scoring every materialized candidate and committing the first
/// maximizer. Returns the per-VM best scores and the final assignment.
pub fn brute_force_shuffle(
    observation: &Observation,
    assignment: &Assignment,
    eta: &OnlineCounts,
    t: usize,
    config: &GameConfig,
) -> (Vec<(VmId, f64)>, Assignment) {
    let mut working = assignment.clone();
    let mut best_scores = Vec::new();
    for v in 0..config.vm_count {
        if !observation.0[v] {
            continue;
        }
        let online = eta.online(v, &working);
        if online == 0 {
            continue;
        }
        let mut best_score = f64::NEG_INFINITY;
        let mut best: Option<(Assignment, BTreeSet<VmId>)> = None;
        for cand in oracle_candidates(&working, observation, v, online, config) {
            let (next, touched) = materialize(&working, v, &cand, online);
            let score = oracle_score(&working, &next, &touched, v, t, config);
            if score > best_score {
                best_score = score;
                best = Some((next, touched));
            }
        }
        if let Some((next, _)) = best {
            working = next;
        }
        best_scores.push((VmId(v), best_score));
    }
    (best_scores, working)
}
