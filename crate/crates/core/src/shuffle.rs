//! Assignment matrices for the shuffling scenario, their constraint
//! validator, shuffle costing, and the cost-effective shuffling decision
//! procedure.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::GameConfig;
use crate::rng::RandomSource;
use crate::state::{DefendAction, Observation, VmId};

/// Dense binary matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.cols + col] = value;
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.bits[row * self.cols..(row + 1) * self.cols]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    pub fn col_sum(&self, col: usize) -> usize {
        (0..self.rows).filter(|&r| self.get(r, col)).count()
    }

    /// Positions of set bits in a row, ascending.
    pub fn row_ones(&self, row: usize) -> Vec<usize> {
        (0..self.cols).filter(|&c| self.get(row, c)).collect()
    }

    /// Number of differing bits between the same row of two matrices.
    pub fn row_diff(&self, other: &Self, row: usize) -> usize {
        let a = &self.bits[row * self.cols..(row + 1) * self.cols];
        let b = &other.bits[row * other.cols..(row + 1) * other.cols];
        a.iter().zip(b).filter(|(x, y)| x != y).count()
    }
}

/// The three assignment matrices: VM-to-segment, VM-to-port, user placement.
/// All are VM-major: row `i` describes VM `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// n x r: VM i sits in segment j.
    pub segments: BinMatrix,
    /// n x u: VM i serves on port j.
    pub ports: BinMatrix,
    /// n x q: user j is served by VM i.
    pub users: BinMatrix,
}

impl Assignment {
    /// Segment of a VM (first set bit of its row).
    pub fn segment_of(&self, v: usize) -> Option<usize> {
        (0..self.segments.cols()).find(|&j| self.segments.get(v, j))
    }

    /// Service port of a VM.
    pub fn port_of(&self, v: usize) -> Option<usize> {
        (0..self.ports.cols()).find(|&j| self.ports.get(v, j))
    }

    /// Number of users assigned to a VM.
    pub fn load(&self, v: usize) -> usize {
        self.users.row_sum(v)
    }

    /// User ids assigned to a VM, ascending.
    pub fn users_of(&self, v: usize) -> Vec<usize> {
        self.users.row_ones(v)
    }

    /// VMs hosted in a segment.
    pub fn segment_population(&self, segment: usize) -> usize {
        self.segments.col_sum(segment)
    }

    /// Per-VM user loads in one pass.
    pub fn loads(&self) -> Vec<usize> {
        (0..self.users.rows()).map(|v| self.users.row_sum(v)).collect()
    }

    /// Plain-text dump: one `name rows cols` header per matrix followed by
    /// 0/1 rows. Stable format for external tooling.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (name, m) in [
            ("segments", &self.segments),
            ("ports", &self.ports),
            ("users", &self.users),
        ] {
            out.push_str(&format!("{} {} {}\n", name, m.rows(), m.cols()));
            for r in 0..m.rows() {
                for c in 0..m.cols() {
                    out.push(if m.get(r, c) { '1' } else { '0' });
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Per-VM user load ceiling after shuffling. Initial assignments fill every
/// VM to `users_per_vm` exactly; migrations may stack a VM up to double that.
pub fn vm_capacity(config: &GameConfig) -> usize {
    2 * config.users_per_vm
}

/// Count of online users per VM. An exogenous input series; values are
/// clamped to the VM's assigned user count where consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnlineCounts(pub Vec<u32>);

impl OnlineCounts {
    pub fn uniform(vm_count: usize, eta: u32) -> Self {
        Self(vec![eta; vm_count])
    }

    /// Online users of `v`, clamped to its assigned load.
    pub fn online(&self, v: usize, assignment: &Assignment) -> usize {
        (self.0[v] as usize).min(assignment.load(v))
    }
}

/// A constraint violation found by [`validate_assignment`], tagged with the
/// constraint identifier it breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// 4a: a segment hosts no VM.
    SegmentUncovered { segment: usize, sum: usize },
    /// 4b: a VM is not in exactly one segment.
    VmSegmentCount { vm: usize, sum: usize },
    /// 4c: a port is shared by more than n VMs (vacuous, checked anyway).
    PortOvershared { port: usize, sum: usize },
    /// 4c companion: a VM does not expose exactly one service port.
    VmPortCount { vm: usize, sum: usize },
    /// 4d: a user is not assigned to exactly one VM.
    UserAssignment { user: usize, sum: usize },
    /// 4e (relaxed): a VM exceeds its post-shuffle capacity.
    VmOverCapacity { vm: usize, sum: usize, cap: usize },
    /// A matrix does not match the configured dimensions.
    DimensionMismatch {
        matrix: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },
}

impl Violation {
    /// Constraint identifier: "4a" through "4e", or "dim".
    pub fn equation(&self) -> &'static str {
        match self {
            Violation::SegmentUncovered { .. } => "4a",
            Violation::VmSegmentCount { .. } => "4b",
            Violation::PortOvershared { .. } | Violation::VmPortCount { .. } => "4c",
            Violation::UserAssignment { .. } => "4d",
            Violation::VmOverCapacity { .. } => "4e",
            Violation::DimensionMismatch { .. } => "dim",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SegmentUncovered { segment, sum } => {
                write!(f, "4a: segment {segment} hosts {sum} VMs, needs at least 1")
            }
            Violation::VmSegmentCount { vm, sum } => {
                write!(f, "4b: vm{vm} is in {sum} segments, needs exactly 1")
            }
            Violation::PortOvershared { port, sum } => {
                write!(f, "4c: port {port} shared by {sum} VMs")
            }
            Violation::VmPortCount { vm, sum } => {
                write!(f, "4c: vm{vm} exposes {sum} ports, needs exactly 1")
            }
            Violation::UserAssignment { user, sum } => {
                write!(f, "4d: user {user} assigned to {sum} VMs, needs exactly 1")
            }
            Violation::VmOverCapacity { vm, sum, cap } => {
                write!(f, "4e: vm{vm} serves {sum} users, capacity {cap}")
            }
            Violation::DimensionMismatch {
                matrix,
                expected,
                actual,
            } => write!(
                f,
                "dim: {matrix} matrix is {}x{}, expected {}x{}",
                actual.0, actual.1, expected.0, expected.1
            ),
        }
    }
}

/// A policy's shuffle decision for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffleDecision {
    /// Assignment after the shuffle.
    pub next: Assignment,
    /// VMs whose rows changed, including migration targets.
    pub shuffled: DefendAction,
    /// Flagged VMs whose user migration was admissible but infeasible and
    /// degraded to a segment/port-only move.
    pub degraded: BTreeSet<VmId>,
    /// Flagged VMs skipped because they had no online users.
    pub parked: BTreeSet<VmId>,
}

impl ShuffleDecision {
    pub fn unchanged(assignment: &Assignment) -> Self {
        Self {
            next: assignment.clone(),
            shuffled: DefendAction::empty(),
            degraded: BTreeSet::new(),
            parked: BTreeSet::new(),
        }
    }
}

/// Random assignment satisfying every constraint, with each VM serving
/// exactly `users_per_vm` users.
///
/// Segments are covered round-robin and then randomly permuted across VMs;
/// each VM draws one uniform port; users are dealt in shuffled order,
/// `users_per_vm` to each VM. Draw order: segment permutation, then ports in
/// VM order, then the user permutation.
pub fn random_initial_assignment(config: &GameConfig, rng: &mut RandomSource) -> Assignment {
    let n = config.vm_count;
    let r = config.segment_count;
    let u = config.port_count;
    let q = config.user_count;
    let m = config.users_per_vm;

    let mut segment_slots: Vec<usize> = (0..n).map(|i| i % r).collect();
    rng.shuffle(&mut segment_slots);
    let mut segments = BinMatrix::zeros(n, r);
    for (vm, &seg) in segment_slots.iter().enumerate() {
        segments.set(vm, seg, true);
    }

    let mut ports = BinMatrix::zeros(n, u);
    for vm in 0..n {
        ports.set(vm, rng.pick(u), true);
    }

    let mut user_order: Vec<usize> = (0..q).collect();
    rng.shuffle(&mut user_order);
    let mut users = BinMatrix::zeros(n, q);
    for (slot, &user) in user_order.iter().enumerate() {
        users.set(slot / m, user, true);
    }

    Assignment {
        segments,
        ports,
        users,
    }
}

/// Check every scenario constraint; an empty list means the assignment is
/// valid. Dimension mismatches short-circuit the structural checks for the
/// offending matrix.
pub fn validate_assignment(assignment: &Assignment, config: &GameConfig) -> Vec<Violation> {
    let n = config.vm_count;
    let mut out = Vec::new();

    let dims = [
        ("segments", &assignment.segments, n, config.segment_count),
        ("ports", &assignment.ports, n, config.port_count),
        ("users", &assignment.users, n, config.user_count),
    ];
    let mut dim_ok = [true; 3];
    for (i, (name, m, rows, cols)) in dims.iter().enumerate() {
        if m.rows() != *rows || m.cols() != *cols {
            dim_ok[i] = false;
            out.push(Violation::DimensionMismatch {
                matrix: name,
                expected: (*rows, *cols),
                actual: (m.rows(), m.cols()),
            });
        }
    }

    if dim_ok[0] {
        for j in 0..config.segment_count {
            let sum = assignment.segments.col_sum(j);
            if sum < 1 {
                out.push(Violation::SegmentUncovered { segment: j, sum });
            }
        }
        for vm in 0..n {
            let sum = assignment.segments.row_sum(vm);
            if sum != 1 {
                out.push(Violation::VmSegmentCount { vm, sum });
            }
        }
    }
    if dim_ok[1] {
        for j in 0..config.port_count {
            let sum = assignment.ports.col_sum(j);
            if sum > n {
                out.push(Violation::PortOvershared { port: j, sum });
            }
        }
        for vm in 0..n {
            let sum = assignment.ports.row_sum(vm);
            if sum != 1 {
                out.push(Violation::VmPortCount { vm, sum });
            }
        }
    }
    if dim_ok[2] {
        for user in 0..config.user_count {
            let sum = assignment.users.col_sum(user);
            if sum != 1 {
                out.push(Violation::UserAssignment { user, sum });
            }
        }
        let cap = vm_capacity(config);
        for vm in 0..n {
            let sum = assignment.users.row_sum(vm);
            if sum > cap {
                out.push(Violation::VmOverCapacity { vm, sum, cap });
            }
        }
    }
    out
}

/// Weighted count of row bits changed between two assignments, summed over
/// the shuffled VMs.
pub fn shuffle_cost(
    before: &Assignment,
    after: &Assignment,
    shuffled: &DefendAction,
    weights: &crate::config::Weights,
) -> f64 {
    let mut cost = 0.0;
    for v in &shuffled.shuffled {
        let v = v.0;
        cost += weights.ip_hop * before.segments.row_diff(&after.segments, v) as f64;
        cost += weights.port_hop * before.ports.row_diff(&after.ports, v) as f64;
        cost += weights.migration * before.users.row_diff(&after.users, v) as f64;
    }
    cost
}

/// Cheapest admissible single-VM shuffle cost per VM under the current
/// assignment: the best of a port hop, a segment hop that keeps the old
/// segment covered, and a migration of the VM's online users to some VM with
/// room. Infinity when the VM cannot be shuffled at all.
pub fn min_shuffle_cost(
    assignment: &Assignment,
    eta: &OnlineCounts,
    config: &GameConfig,
) -> Vec<f64> {
    let n = config.vm_count;
    let w = config.weights;
    let cap = vm_capacity(config);
    let loads = assignment.loads();
    (0..n)
        .map(|v| {
            let mut best = f64::INFINITY;
            if config.port_count >= 2 {
                best = best.min(2.0 * w.port_hop);
            }
            if config.segment_count >= 2 {
                let seg = assignment.segment_of(v).unwrap_or(0);
                if assignment.segment_population(seg) >= 2 {
                    best = best.min(2.0 * w.ip_hop);
                }
            }
            let online = (eta.0[v] as usize).min(loads[v]);
            if online >= 1 {
                let target_exists = (0..n).any(|t| t != v && loads[t] + online <= cap);
                if target_exists {
                    best = best.min(2.0 * w.migration * online as f64);
                }
            }
            best
        })
        .collect()
}

/// One candidate move for a flagged VM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateMove {
    pub segment: usize,
    pub port: usize,
    /// Migration target for the VM's online users, if any.
    pub migrate_to: Option<usize>,
}

/// Segments VM `v` may move to without uncovering its current segment.
fn eligible_segments(assignment: &Assignment, v: usize, config: &GameConfig) -> Vec<usize> {
    let current = assignment.segment_of(v).unwrap_or(0);
    if assignment.segment_population(current) >= 2 {
        (0..config.segment_count).collect()
    } else {
        vec![current]
    }
}

/// Least-loaded VM able to absorb `count` users, skipping flagged VMs and the
/// source. Ties break on lowest id.
fn migration_target(
    loads: &[usize],
    flags: &Observation,
    source: usize,
    count: usize,
    config: &GameConfig,
) -> Option<usize> {
    let cap = vm_capacity(config);
    (0..config.vm_count)
        .filter(|&w| w != source && !flags.0[w] && loads[w] + count <= cap)
        .min_by_key(|&w| (loads[w], w))
}

/// One-step payoff-difference estimate for applying `cand` to flagged VM `v`.
///
/// A move that changes nothing scores the scan cost the attacker would pay
/// for an unengaged VM. A real shuffle scores the expected restoration reward
/// net of its cost, minus the attacker's expected value from re-targeting the
/// shuffled VM net of the attack cost charged per shuffled VM.
pub fn candidate_score(
    assignment: &Assignment,
    v: usize,
    cand: &CandidateMove,
    online: usize,
    t: usize,
    config: &GameConfig,
) -> f64 {
    let w = config.weights;
    let discount = config.gamma.powi(t as i32);
    let seg_changed = Some(cand.segment) != assignment.segment_of(v);
    let port_changed = Some(cand.port) != assignment.port_of(v);
    let migrates = cand.migrate_to.is_some() && online > 0;
    if !seg_changed && !port_changed && !migrates {
        return discount * (w.ip_hop + w.port_hop);
    }
    let mut cost = 0.0;
    if seg_changed {
        cost += 2.0 * w.ip_hop;
    }
    if port_changed {
        cost += 2.0 * w.port_hop;
    }
    let mut shuffled_vms = 1.0;
    if migrates {
        cost += 2.0 * w.migration * online as f64;
        shuffled_vms += 1.0;
    }
    let defender = config.confidence[v] * config.defender_reward[v] - cost;
    let attacker =
        config.direct_success[v] * config.attacker_reward[v] - w.migration * shuffled_vms;
    discount * (defender - attacker)
}

/// Apply a candidate to the working assignment; returns the VMs whose rows
/// changed.
fn apply_candidate(
    assignment: &mut Assignment,
    v: usize,
    cand: &CandidateMove,
    online: usize,
) -> BTreeSet<VmId> {
    let mut touched = BTreeSet::new();
    if let Some(current) = assignment.segment_of(v) {
        if current != cand.segment {
            assignment.segments.set(v, current, false);
            assignment.segments.set(v, cand.segment, true);
            touched.insert(VmId(v));
        }
    }
    if let Some(current) = assignment.port_of(v) {
        if current != cand.port {
            assignment.ports.set(v, current, false);
            assignment.ports.set(v, cand.port, true);
            touched.insert(VmId(v));
        }
    }
    if let Some(target) = cand.migrate_to {
        if online > 0 {
            let moving: Vec<usize> = assignment.users_of(v).into_iter().take(online).collect();
            for user in moving {
                assignment.users.set(v, user, false);
                assignment.users.set(target, user, true);
            }
            touched.insert(VmId(v));
            touched.insert(VmId(target));
        }
    }
    touched
}

/// Cost-effective shuffling decision.
///
/// Flagged VMs are handled in ascending id order against the working
/// assignment. A flagged VM with no online users is parked. Otherwise every
/// candidate `(segment, port, migrate?)` is scored with [`candidate_score`]
/// and the first maximizer in scan order (no-migration before migration,
/// segments ascending, ports ascending) is committed. Migration candidates
/// move all online users to the single least-loaded unflagged VM with room
/// and are only admitted while online users do not exceed half the VM's
/// nominal capacity. Unflagged VMs are never modified.
pub fn ces_decide(
    observation: &Observation,
    assignment: &Assignment,
    eta: &OnlineCounts,
    t: usize,
    config: &GameConfig,
    _rng: &mut RandomSource,
) -> ShuffleDecision {
    let mut next = assignment.clone();
    let mut loads = next.loads();
    let mut shuffled = BTreeSet::new();
    let mut degraded = BTreeSet::new();
    let mut parked = BTreeSet::new();

    for v in 0..config.vm_count {
        if !observation.0[v] {
            continue;
        }
        let online = (eta.0[v] as usize).min(loads[v]);
        if online == 0 {
            parked.insert(VmId(v));
            continue;
        }
        let migration_admissible = online <= config.users_per_vm / 2;
        let target = if migration_admissible {
            let found = migration_target(&loads, observation, v, online, config);
            if found.is_none() {
                degraded.insert(VmId(v));
            }
            found
        } else {
            None
        };

        let mut best_score = f64::NEG_INFINITY;
        let mut best: Option<CandidateMove> = None;
        let migrate_options: &[Option<usize>] = match target {
            Some(w) => &[None, Some(w)],
            None => &[None],
        };
        for &migrate_to in migrate_options {
            for segment in eligible_segments(&next, v, config) {
                for port in 0..config.port_count {
                    let cand = CandidateMove {
                        segment,
                        port,
                        migrate_to,
                    };
                    let score = candidate_score(&next, v, &cand, online, t, config);
                    if score > best_score {
                        best_score = score;
                        best = Some(cand);
                    }
                }
            }
        }
        if let Some(cand) = best {
            shuffled.extend(apply_candidate(&mut next, v, &cand, online));
            if let Some(target) = cand.migrate_to {
                loads[v] -= online;
                loads[target] += online;
            }
        }
    }

    ShuffleDecision {
        next,
        shuffled: DefendAction {
            shuffled: shuffled.clone(),
        },
        degraded,
        parked,
    }
}
