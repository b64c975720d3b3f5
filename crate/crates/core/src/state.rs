//! System state, observation model, action sets, and the per-step state
//! transition function.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, GameConfig, PivotCombine};
use crate::rng::RandomSource;

/// Identifier of a VM; valid when below the configured VM count.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct VmId(pub usize);

impl fmt::Display for VmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vm{}", self.0)
    }
}

/// Per-VM compromised bit vector. `true` means crashed/compromised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemState(pub Vec<bool>);

impl SystemState {
    pub fn healthy(vm_count: usize) -> Self {
        Self(vec![false; vm_count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_compromised(&self, v: VmId) -> bool {
        self.0[v.0]
    }

    pub fn compromised_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Bit pattern string, lowest VM id first, e.g. "010".
    pub fn pattern(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Per-VM defender observation. `true` means the defender believes the VM is
/// compromised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation(pub Vec<bool>);

impl Observation {
    pub fn silent(vm_count: usize) -> Self {
        Self(vec![false; vm_count])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_flagged(&self, v: VmId) -> bool {
        self.0[v.0]
    }

    pub fn flagged_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Set of VMs the attacker targets this step. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttackAction {
    pub targets: BTreeSet<VmId>,
}

impl AttackAction {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(v: VmId) -> Self {
        Self {
            targets: BTreeSet::from([v]),
        }
    }

    pub fn contains(&self, v: VmId) -> bool {
        self.targets.contains(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl FromIterator<VmId> for AttackAction {
    fn from_iter<I: IntoIterator<Item = VmId>>(iter: I) -> Self {
        Self {
            targets: iter.into_iter().collect(),
        }
    }
}

/// Set of VMs the defender shuffles this step. May be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DefendAction {
    pub shuffled: BTreeSet<VmId>,
}

impl DefendAction {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn contains(&self, v: VmId) -> bool {
        self.shuffled.contains(&v)
    }

    pub fn is_empty(&self) -> bool {
        self.shuffled.is_empty()
    }

    pub fn len(&self) -> usize {
        self.shuffled.len()
    }
}

impl FromIterator<VmId> for DefendAction {
    fn from_iter<I: IntoIterator<Item = VmId>>(iter: I) -> Self {
        Self {
            shuffled: iter.into_iter().collect(),
        }
    }
}

/// Initial game tuple: all VMs healthy, no observation, empty actions.
pub fn init_game(
    config: &GameConfig,
) -> Result<(SystemState, Observation, AttackAction, DefendAction), ConfigError> {
    config.validate()?;
    Ok((
        SystemState::healthy(config.vm_count),
        Observation::silent(config.vm_count),
        AttackAction::empty(),
        DefendAction::empty(),
    ))
}

/// One-step state transition.
///
/// Per VM, independently and in ascending id order:
/// - a shuffled VM (`v` in `defend`) is always restored to healthy;
/// - an attacked, unshuffled VM is compromised with its direct success
///   probability (a VM already compromised stays compromised);
/// - a VM flagged by the defender while actually healthy (false positive)
///   that is neither attacked nor shuffled is exposed to pivot attacks from
///   currently compromised VMs, combined per `config.pivot_combine`;
/// - any other VM keeps its state.
///
/// Randomness discipline: VMs are visited in ascending id order and each
/// stochastic branch consumes exactly one uniform draw, so a fixed seed fixes
/// the outcome bit-for-bit.
pub fn transit_state(
    state: &SystemState,
    observation: &Observation,
    defend: &DefendAction,
    attack: &AttackAction,
    config: &GameConfig,
    rng: &mut RandomSource,
) -> SystemState {
    let mut next = SystemState(Vec::new());
    transit_state_into(state, observation, defend, attack, config, rng, &mut next);
    next
}

/// Allocation-free form of [`transit_state`]: writes the next state into a
/// caller-provided buffer. Identical semantics and draw order.
pub fn transit_state_into(
    state: &SystemState,
    observation: &Observation,
    defend: &DefendAction,
    attack: &AttackAction,
    config: &GameConfig,
    rng: &mut RandomSource,
    out: &mut SystemState,
) {
    let n = config.vm_count;
    debug_assert_eq!(state.len(), n);
    debug_assert_eq!(observation.len(), n);

    let any_compromised = state.0.iter().any(|&b| b);
    let next = &mut out.0;
    next.clear();
    next.reserve(n);

    // Bit masks keep the per-VM loop allocation-free for up to 64 VMs, the
    // hot case in the transition probe.
    if n <= 64 {
        let mut defended = 0u64;
        for v in &defend.shuffled {
            defended |= 1 << v.0;
        }
        let mut attacked = 0u64;
        for v in &attack.targets {
            attacked |= 1 << v.0;
        }
        for v in 0..n {
            next.push(next_bit(
                state,
                observation,
                defended & (1 << v) != 0,
                attacked & (1 << v) != 0,
                any_compromised,
                config,
                v,
                rng,
            ));
        }
    } else {
        let mut defended = vec![false; n];
        for v in &defend.shuffled {
            defended[v.0] = true;
        }
        let mut attacked = vec![false; n];
        for v in &attack.targets {
            attacked[v.0] = true;
        }
        for v in 0..n {
            next.push(next_bit(
                state,
                observation,
                defended[v],
                attacked[v],
                any_compromised,
                config,
                v,
                rng,
            ));
        }
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn next_bit(
    state: &SystemState,
    observation: &Observation,
    defended: bool,
    attacked: bool,
    any_compromised: bool,
    config: &GameConfig,
    v: usize,
    rng: &mut RandomSource,
) -> bool {
    if defended {
        // A shuffle restores the VM no matter what else happens.
        false
    } else if attacked {
        rng.chance(config.direct_success[v]) || state.0[v]
    } else if observation.0[v] && !state.0[v] {
        // False positive, unattacked, unshuffled: pivot exposure.
        if any_compromised {
            let p = combined_pivot(state, v, config);
            rng.chance(p)
        } else {
            state.0[v]
        }
    } else {
        state.0[v]
    }
}

/// Pivot success onto `target` combined over all compromised sources.
fn combined_pivot(state: &SystemState, target: usize, config: &GameConfig) -> f64 {
    match config.pivot_combine {
        PivotCombine::Max => {
            let mut best = 0.0f64;
            for (src, &compromised) in state.0.iter().enumerate() {
                if compromised && src != target {
                    best = best.max(config.pivot_success[src][target]);
                }
            }
            best
        }
        PivotCombine::IndependentOr => {
            let mut miss = 1.0f64;
            for (src, &compromised) in state.0.iter().enumerate() {
                if compromised && src != target {
                    miss *= 1.0 - config.pivot_success[src][target];
                }
            }
            1.0 - miss
        }
    }
}

/// Defender observation of the current state.
///
/// Per VM, the true status is reported with probability `confidence[v]` and
/// inverted otherwise; one draw per VM in ascending id order.
pub fn observe(state: &SystemState, config: &GameConfig, rng: &mut RandomSource) -> Observation {
    let n = config.vm_count;
    debug_assert_eq!(state.len(), n);
    let mut flags = Vec::with_capacity(n);
    for v in 0..n {
        let faithful = rng.chance(config.confidence[v]);
        flags.push(if faithful { state.0[v] } else { !state.0[v] });
    }
    Observation(flags)
}
