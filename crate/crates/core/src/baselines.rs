//! Reference shuffling policies: no shuffling, uniform random moves, a
//! renewal-style full shuffle that ignores occupancy, and a random
//! half-user migration. All baselines act directly on the defender's flags
//! and share the decision interface of the cost-effective policy.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::rng::RandomSource;
use crate::shuffle::{ces_decide, vm_capacity, Assignment, OnlineCounts, ShuffleDecision};
use crate::state::{DefendAction, Observation, VmId};

/// Selectable shuffling policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    None,
    Random,
    Rrt,
    Csa,
    Ces,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::None,
        PolicyKind::Random,
        PolicyKind::Rrt,
        PolicyKind::Csa,
        PolicyKind::Ces,
    ];
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PolicyKind::None => "none",
            PolicyKind::Random => "random",
            PolicyKind::Rrt => "rrt",
            PolicyKind::Csa => "csa",
            PolicyKind::Ces => "ces",
        };
        f.write_str(name)
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(PolicyKind::None),
            "random" => Ok(PolicyKind::Random),
            "rrt" => Ok(PolicyKind::Rrt),
            "csa" => Ok(PolicyKind::Csa),
            "ces" => Ok(PolicyKind::Ces),
            other => Err(format!(
                "unknown policy '{other}', expected one of none|random|rrt|csa|ces"
            )),
        }
    }
}

/// Dispatch a policy by kind.
pub fn apply_policy(
    kind: PolicyKind,
    observation: &Observation,
    assignment: &Assignment,
    eta: &OnlineCounts,
    t: usize,
    config: &GameConfig,
    rng: &mut RandomSource,
) -> ShuffleDecision {
    match kind {
        PolicyKind::None => no_shuffle_policy(observation, assignment, eta, t, config, rng),
        PolicyKind::Random => random_shuffle_policy(observation, assignment, eta, t, config, rng),
        PolicyKind::Rrt => rrt_policy(observation, assignment, eta, t, config, rng),
        PolicyKind::Csa => csa_policy(observation, assignment, eta, t, config, rng),
        PolicyKind::Ces => ces_decide(observation, assignment, eta, t, config, rng),
    }
}

/// Never shuffles anything.
pub fn no_shuffle_policy(
    _observation: &Observation,
    assignment: &Assignment,
    _eta: &OnlineCounts,
    _t: usize,
    _config: &GameConfig,
    _rng: &mut RandomSource,
) -> ShuffleDecision {
    ShuffleDecision::unchanged(assignment)
}

/// For each flagged VM, one uniformly chosen move: an IP hop to a random
/// segment, a port hop to a random port, or a migration of all online users
/// to a random VM with room. Infeasible migrations degrade to a port hop.
/// Random choices may coincide with the current value; such a move is a
/// no-op and the VM is not counted as shuffled.
pub fn random_shuffle_policy(
    observation: &Observation,
    assignment: &Assignment,
    eta: &OnlineCounts,
    _t: usize,
    config: &GameConfig,
    rng: &mut RandomSource,
) -> ShuffleDecision {
    let mut next = assignment.clone();
    let mut loads = next.loads();
    let mut shuffled = BTreeSet::new();
    let cap = vm_capacity(config);
    for v in 0..config.vm_count {
        if !observation.0[v] {
            continue;
        }
        match rng.pick(3) {
            0 => {
                // IP hop; restricted to the current segment when the VM is
                // its segment's only occupant.
                let current = next.segment_of(v).unwrap_or(0);
                let segment = if next.segment_population(current) >= 2 {
                    rng.pick(config.segment_count)
                } else {
                    current
                };
                if segment != current {
                    next.segments.set(v, current, false);
                    next.segments.set(v, segment, true);
                    shuffled.insert(VmId(v));
                }
            }
            1 => {
                if random_port_hop(&mut next, v, config, rng) {
                    shuffled.insert(VmId(v));
                }
            }
            _ => {
                let online = (eta.0[v] as usize).min(loads[v]);
                let eligible: Vec<usize> = (0..config.vm_count)
                    .filter(|&w| {
                        w != v && !observation.0[w] && online > 0 && loads[w] + online <= cap
                    })
                    .collect();
                if online == 0 || eligible.is_empty() {
                    if random_port_hop(&mut next, v, config, rng) {
                        shuffled.insert(VmId(v));
                    }
                } else {
                    let target = eligible[rng.pick(eligible.len())];
                    for user in next.users_of(v).into_iter().take(online) {
                        next.users.set(v, user, false);
                        next.users.set(target, user, true);
                    }
                    loads[v] -= online;
                    loads[target] += online;
                    shuffled.insert(VmId(v));
                    shuffled.insert(VmId(target));
                }
            }
        }
    }
    ShuffleDecision {
        next,
        shuffled: DefendAction { shuffled },
        degraded: BTreeSet::new(),
        parked: BTreeSet::new(),
    }
}

fn random_port_hop(
    assignment: &mut Assignment,
    v: usize,
    config: &GameConfig,
    rng: &mut RandomSource,
) -> bool {
    let current = assignment.port_of(v).unwrap_or(0);
    let port = rng.pick(config.port_count);
    if port != current {
        assignment.ports.set(v, current, false);
        assignment.ports.set(v, port, true);
        true
    } else {
        false
    }
}

/// Renewal-style full shuffle, indifferent to online users: every flagged VM
/// is IP-hopped and all of its assigned users are redistributed to unflagged
/// VMs, least-loaded first, every step. Users that fit nowhere stay put.
pub fn rrt_policy(
    observation: &Observation,
    assignment: &Assignment,
    _eta: &OnlineCounts,
    _t: usize,
    config: &GameConfig,
    rng: &mut RandomSource,
) -> ShuffleDecision {
    let mut next = assignment.clone();
    let mut loads = next.loads();
    let mut shuffled = BTreeSet::new();
    for v in 0..config.vm_count {
        if !observation.0[v] {
            continue;
        }
        // IP hop to a random different segment when one is reachable.
        let current = next.segment_of(v).unwrap_or(0);
        if config.segment_count >= 2 && next.segment_population(current) >= 2 {
            let mut segment = rng.pick(config.segment_count - 1);
            if segment >= current {
                segment += 1;
            }
            next.segments.set(v, current, false);
            next.segments.set(v, segment, true);
            shuffled.insert(VmId(v));
        }
        // Move every assigned user off the VM.
        let users = next.users_of(v);
        let moved_any = spread_users(
            &mut next,
            &mut loads,
            observation,
            v,
            &users,
            config,
            &mut shuffled,
        );
        if moved_any {
            shuffled.insert(VmId(v));
        }
    }
    ShuffleDecision {
        next,
        shuffled: DefendAction { shuffled },
        degraded: BTreeSet::new(),
        parked: BTreeSet::new(),
    }
}

/// Migrate a uniformly random half (rounded down) of each flagged VM's
/// assigned users to unflagged VMs, least-loaded first. Network segment and
/// port stay put. When capacity runs short, as many users as fit are moved.
pub fn csa_policy(
    observation: &Observation,
    assignment: &Assignment,
    _eta: &OnlineCounts,
    _t: usize,
    config: &GameConfig,
    rng: &mut RandomSource,
) -> ShuffleDecision {
    let mut next = assignment.clone();
    let mut loads = next.loads();
    let mut shuffled = BTreeSet::new();
    for v in 0..config.vm_count {
        if !observation.0[v] {
            continue;
        }
        let mut users = next.users_of(v);
        let half = users.len() / 2;
        if half == 0 {
            continue;
        }
        rng.shuffle(&mut users);
        let mut chosen = users[..half].to_vec();
        chosen.sort_unstable();
        let moved_any = spread_users(
            &mut next,
            &mut loads,
            observation,
            v,
            &chosen,
            config,
            &mut shuffled,
        );
        if moved_any {
            shuffled.insert(VmId(v));
        }
    }
    ShuffleDecision {
        next,
        shuffled: DefendAction { shuffled },
        degraded: BTreeSet::new(),
        parked: BTreeSet::new(),
    }
}

/// Move `users` off `source` onto unflagged VMs with room, least-loaded
/// first, lowest id on ties. Returns whether any user moved; targets that
/// received users are added to `shuffled` and `loads` is kept in sync.
fn spread_users(
    assignment: &mut Assignment,
    loads: &mut [usize],
    flags: &Observation,
    source: usize,
    users: &[usize],
    config: &GameConfig,
    shuffled: &mut BTreeSet<VmId>,
) -> bool {
    let cap = vm_capacity(config);
    let mut moved_any = false;
    for &user in users {
        let target = (0..config.vm_count)
            .filter(|&w| w != source && !flags.0[w] && loads[w] < cap)
            .min_by_key(|&w| (loads[w], w));
        let Some(target) = target else { break };
        assignment.users.set(source, user, false);
        assignment.users.set(target, user, true);
        loads[source] -= 1;
        loads[target] += 1;
        shuffled.insert(VmId(target));
        moved_any = true;
    }
    moved_any
}
