//! Experiment harness: seeded game trials over a horizon, Monte Carlo
//! aggregation, the empirical transition-distribution probe, and the
//! sequential-DDoS scenario.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{apply_policy, PolicyKind};
use crate::config::{ConfigError, GameConfig};
use crate::rng::{derive_seed, RandomSource};
use crate::shuffle::{
    min_shuffle_cost, random_initial_assignment, shuffle_cost, OnlineCounts,
};
use crate::state::{
    init_game, observe, transit_state, transit_state_into, AttackAction, DefendAction,
    Observation, SystemState, VmId,
};
use crate::strategies::{
    attack_strategy, attacker_step_cost, defend_strategy, step_rewards, GameHistory, StepRecord,
};

/// How the per-VM online-user count evolves over a trial. The same value
/// applies to every VM, clamped to each VM's assigned load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMode {
    /// Constant for the whole horizon.
    Fixed(u32),
    /// One experiment per value in `lo..=hi`; see [`sweep_eta`].
    Sweep { lo: u32, hi: u32 },
    /// Per-step values; the last entry repeats past the end.
    Trace(Vec<u32>),
}

/// Who the attacker is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackerMode {
    /// Payoff-maximizing target selection each step.
    Strategic,
    /// DDoS on the protected VMs one by one: the lowest-id healthy VM,
    /// moving on once the current target stays down.
    SequentialDdos,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub config: GameConfig,
    pub policy: PolicyKind,
    pub trials: usize,
    pub seed: u64,
    pub eta_mode: EtaMode,
    pub attacker_mode: AttackerMode,
    /// Gate the flags handed to the shuffle policy through the defender
    /// strategy. Off by default; policies act directly on flags.
    pub use_defend_gate: bool,
    /// Time step at which sweep experiments are read out.
    pub eval_step: usize,
}

impl ExperimentSpec {
    pub fn new(config: GameConfig, policy: PolicyKind) -> Self {
        let eval_step = config.horizon.min(10);
        Self {
            config,
            policy,
            trials: 1,
            seed: 0,
            eta_mode: EtaMode::Fixed(0),
            attacker_mode: AttackerMode::Strategic,
            use_defend_gate: false,
            eval_step,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_eta(mut self, eta_mode: EtaMode) -> Self {
        self.eta_mode = eta_mode;
        self
    }

    pub fn with_attacker(mut self, attacker_mode: AttackerMode) -> Self {
        self.attacker_mode = attacker_mode;
        self
    }

    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        self.config.validate()?;
        if self.trials == 0 {
            return Err(SpecError::NoTrials);
        }
        let m = self.config.users_per_vm as u32;
        let check = |eta: u32| -> Result<(), SpecError> {
            if eta > m {
                Err(SpecError::EtaRange { eta, max: m })
            } else {
                Ok(())
            }
        };
        match &self.eta_mode {
            EtaMode::Fixed(eta) => check(*eta)?,
            EtaMode::Sweep { lo, hi } => {
                if lo > hi {
                    return Err(SpecError::SweepOrder { lo: *lo, hi: *hi });
                }
                check(*hi)?;
            }
            EtaMode::Trace(values) => {
                if values.is_empty() {
                    return Err(SpecError::EmptyTrace);
                }
                for &eta in values {
                    check(eta)?;
                }
            }
        }
        if matches!(self.eta_mode, EtaMode::Sweep { .. })
            && (self.eval_step == 0 || self.eval_step > self.config.horizon)
        {
            return Err(SpecError::EvalStep {
                eval_step: self.eval_step,
                horizon: self.config.horizon,
            });
        }
        Ok(())
    }

    fn eta_at(&self, step: usize) -> u32 {
        match &self.eta_mode {
            EtaMode::Fixed(eta) => *eta,
            // A sweep experiment is executed per fixed value; reaching a
            // trial with sweep mode still selected is a driver bug.
            EtaMode::Sweep { lo, .. } => *lo,
            EtaMode::Trace(values) => *values
                .get(step - 1)
                .unwrap_or_else(|| values.last().expect("non-empty trace")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("eta must not exceed users_per_vm ({eta} > {max})")]
    EtaRange { eta: u32, max: u32 },
    #[error("eta sweep bounds out of order ({lo} > {hi})")]
    SweepOrder { lo: u32, hi: u32 },
    #[error("eta trace must not be empty")]
    EmptyTrace,
    #[error("eval_step must lie in [1, horizon] ({eval_step} vs horizon {horizon})")]
    EvalStep { eval_step: usize, horizon: usize },
}

/// Run one seeded trial and return its full history.
///
/// Each step runs the five-event loop: the defender observes, both players
/// pick actions, the state transitions, rewards and costs are recorded, time
/// advances. Per-step randomness is consumed in a fixed order: observation
/// draws, policy draws, transition draws.
pub fn run_trial(spec: &ExperimentSpec, trial_seed: u64) -> GameHistory {
    let config = &spec.config;
    let mut rng = RandomSource::from_seed(trial_seed);
    let mut assignment = random_initial_assignment(config, &mut rng);
    let (mut state, mut observation, _, mut previous_defend) =
        init_game(config).expect("spec validated before running trials");
    let mut history = GameHistory::new(config.clone());

    for step in 1..=config.horizon {
        let t = step - 1;
        if step > 1 {
            observation = observe(&state, config, &mut rng);
        }

        let attack = match spec.attacker_mode {
            AttackerMode::Strategic => attack_strategy(&state, t, config),
            AttackerMode::SequentialDdos => sequential_ddos_attack(&state),
        };

        let eta = OnlineCounts::uniform(config.vm_count, spec.eta_at(step));
        let policy_flags = if spec.use_defend_gate {
            gate_flags(&observation, &previous_defend, t, config, &assignment, &eta)
        } else {
            observation.clone()
        };

        let decision = apply_policy(
            spec.policy,
            &policy_flags,
            &assignment,
            &eta,
            t,
            config,
            &mut rng,
        );
        let defend = decision.shuffled.clone();
        let defender_cost = shuffle_cost(&assignment, &decision.next, &defend, &config.weights);

        let next_state = transit_state(&state, &observation, &defend, &attack, config, &mut rng);
        let (defender_reward, attacker_reward) = step_rewards(&state, &next_state, config);
        let attacker_cost = attacker_step_cost(&defend, &attack, config);

        history.push(StepRecord {
            t: step,
            state_before: state.clone(),
            observation: observation.clone(),
            attack,
            defend: defend.clone(),
            state_after: next_state.clone(),
            defender_reward,
            defender_cost,
            attacker_reward,
            attacker_cost,
        });

        state = next_state;
        assignment = decision.next;
        previous_defend = defend;
    }
    history
}

/// Restrict flags to the VMs selected by the defender strategy. Degenerate
/// strategy inputs (single-VM games with unflagged candidates) gate to
/// nothing.
fn gate_flags(
    observation: &Observation,
    previous_defend: &DefendAction,
    t: usize,
    config: &GameConfig,
    assignment: &crate::shuffle::Assignment,
    eta: &OnlineCounts,
) -> Observation {
    let costs = min_shuffle_cost(assignment, eta, config);
    let gate = defend_strategy(observation, previous_defend, t, config, &costs)
        .unwrap_or_else(|_| DefendAction::empty());
    Observation(
        (0..config.vm_count)
            .map(|v| observation.0[v] && gate.contains(VmId(v)))
            .collect(),
    )
}

/// Lowest-id healthy VM, or nothing when every VM is down.
fn sequential_ddos_attack(state: &SystemState) -> AttackAction {
    match state.0.iter().position(|&b| !b) {
        Some(v) => AttackAction::single(VmId(v)),
        None => AttackAction::empty(),
    }
}

/// Sample mean and standard deviation (zero for fewer than two samples).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self::default();
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, std: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

/// Cross-trial statistics for one time step.
///
/// `effectiveness` is the cumulative count of restored VMs weighted by their
/// reward magnitudes; `step_effectiveness` is its one-step increment. `cost`
/// is the discounted one-step shuffle cost, `gamma^(t-1) * C_t`. The payoff
/// columns are discounted sums up to and including the step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub t: usize,
    pub effectiveness: MeanStd,
    pub step_effectiveness: MeanStd,
    pub cost: MeanStd,
    pub defender_payoff: MeanStd,
    pub attacker_payoff: MeanStd,
    pub crashed: MeanStd,
}

/// Per-step aggregates over all trials of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSeries {
    pub policy: PolicyKind,
    pub trials: usize,
    pub steps: Vec<StepStats>,
}

#[derive(Debug, Clone, Copy, Default)]
struct StepSample {
    effectiveness: f64,
    step_effectiveness: f64,
    cost: f64,
    defender_payoff: f64,
    attacker_payoff: f64,
    crashed: f64,
}

fn trial_samples(history: &GameHistory, gamma: f64) -> Vec<StepSample> {
    let mut cumulative_effect = 0.0;
    let mut defender_payoff = 0.0;
    let mut attacker_payoff = 0.0;
    history
        .records()
        .iter()
        .map(|rec| {
            let discount = gamma.powi(rec.t as i32 - 1);
            cumulative_effect += rec.defender_reward;
            defender_payoff += discount * (rec.defender_reward - rec.defender_cost);
            attacker_payoff += discount * (rec.attacker_reward - rec.attacker_cost);
            StepSample {
                effectiveness: cumulative_effect,
                step_effectiveness: rec.defender_reward,
                cost: discount * rec.defender_cost,
                defender_payoff,
                attacker_payoff,
                crashed: rec.state_after.compromised_count() as f64,
            }
        })
        .collect()
}

/// Run all trials of an experiment and aggregate per-step statistics.
/// Trial seeds derive deterministically from the experiment seed, so the
/// result is a pure function of the spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<AggregateSeries, SpecError> {
    spec.validate()?;
    let per_trial = run_all_trials(spec);
    let horizon = spec.config.horizon;
    let gamma = spec.config.gamma;
    let samples: Vec<Vec<StepSample>> = per_trial
        .iter()
        .map(|h| trial_samples(h, gamma))
        .collect();

    let steps = (0..horizon)
        .map(|i| {
            let column = |f: fn(&StepSample) -> f64| -> MeanStd {
                let values: Vec<f64> = samples.iter().map(|s| f(&s[i])).collect();
                MeanStd::from_samples(&values)
            };
            StepStats {
                t: i + 1,
                effectiveness: column(|s| s.effectiveness),
                step_effectiveness: column(|s| s.step_effectiveness),
                cost: column(|s| s.cost),
                defender_payoff: column(|s| s.defender_payoff),
                attacker_payoff: column(|s| s.attacker_payoff),
                crashed: column(|s| s.crashed),
            }
        })
        .collect();

    Ok(AggregateSeries {
        policy: spec.policy,
        trials: spec.trials,
        steps,
    })
}

#[cfg(feature = "parallel")]
fn run_all_trials(spec: &ExperimentSpec) -> Vec<GameHistory> {
    use rayon::prelude::*;
    (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, derive_seed(spec.seed, i as u64)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all_trials(spec: &ExperimentSpec) -> Vec<GameHistory> {
    (0..spec.trials)
        .map(|i| run_trial(spec, derive_seed(spec.seed, i as u64)))
        .collect()
}

/// One row of an eta sweep, read out at the spec's `eval_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaPoint {
    pub eta: u32,
    pub effectiveness: MeanStd,
    pub cost: MeanStd,
    pub payoff: MeanStd,
}

/// Sweep result for one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaSweep {
    pub policy: PolicyKind,
    pub points: Vec<EtaPoint>,
}

/// Run one experiment per eta value in the spec's sweep range. Trial seeds
/// repeat across eta values, pairing the comparisons.
pub fn sweep_eta(spec: &ExperimentSpec) -> Result<EtaSweep, SpecError> {
    spec.validate()?;
    let EtaMode::Sweep { lo, hi } = spec.eta_mode else {
        return Err(SpecError::SweepOrder { lo: 1, hi: 0 });
    };
    let mut points = Vec::new();
    for eta in lo..=hi {
        let fixed = spec.clone().with_eta(EtaMode::Fixed(eta));
        let series = run_experiment(&fixed)?;
        let stats = &series.steps[spec.eval_step - 1];
        points.push(EtaPoint {
            eta,
            effectiveness: stats.effectiveness,
            cost: stats.cost,
            payoff: stats.defender_payoff,
        });
    }
    Ok(EtaSweep {
        policy: spec.policy,
        points,
    })
}

/// Fixed starting tuple for the transition probe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionProbe {
    pub state: SystemState,
    pub observation: Observation,
    pub defend: DefendAction,
    pub attack: AttackAction,
}

/// Empirical distribution over next states from repeated applications of the
/// transition function to one fixed tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionDistribution {
    pub runs: u64,
    /// Next-state bit pattern (lowest VM id first) to occurrence count.
    pub counts: BTreeMap<String, u64>,
}

impl TransitionDistribution {
    /// Relative frequency of each observed pattern.
    pub fn frequencies(&self) -> BTreeMap<String, f64> {
        self.counts
            .iter()
            .map(|(k, &v)| (k.clone(), v as f64 / self.runs as f64))
            .collect()
    }
}

/// Apply the transition `runs` times from `probe` and histogram the
/// outcomes. Each run draws from a fresh stream derived from `seed`.
pub fn estimate_transition_distribution(
    config: &GameConfig,
    probe: &TransitionProbe,
    runs: u64,
    seed: u64,
) -> TransitionDistribution {
    assert!(runs >= 1);
    let n = config.vm_count;
    assert!(n <= 64, "transition probe supports up to 64 VMs");
    let mut rng = RandomSource::from_seed(seed);
    let mut scratch = SystemState(Vec::with_capacity(n));
    let mut sample = || {
        transit_state_into(
            &probe.state,
            &probe.observation,
            &probe.defend,
            &probe.attack,
            config,
            &mut rng,
            &mut scratch,
        );
        let mut mask = 0u64;
        for (v, &bit) in scratch.0.iter().enumerate() {
            if bit {
                mask |= 1 << v;
            }
        }
        mask
    };
    // Dense counting for small state spaces, sparse otherwise.
    let counts: BTreeMap<u64, u64> = if n <= 16 {
        let mut dense = vec![0u64; 1 << n];
        for _ in 0..runs {
            dense[sample() as usize] += 1;
        }
        dense
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(mask, c)| (mask as u64, c))
            .collect()
    } else {
        let mut sparse: BTreeMap<u64, u64> = BTreeMap::new();
        for _ in 0..runs {
            *sparse.entry(sample()).or_insert(0) += 1;
        }
        sparse
    };
    let counts = counts
        .into_iter()
        .map(|(mask, count)| {
            let pattern: String = (0..n)
                .map(|v| if mask & (1 << v) != 0 { '1' } else { '0' })
                .collect();
            (pattern, count)
        })
        .collect();
    TransitionDistribution { runs, counts }
}

/// Crashed-VM series per policy for the sequential-DDoS scenario.
pub fn ddos_scenario(
    spec: &ExperimentSpec,
) -> Result<Vec<(PolicyKind, AggregateSeries)>, SpecError> {
    if spec.attacker_mode != AttackerMode::SequentialDdos {
        // The scenario is defined for the one-by-one attacker only.
        let mut fixed = spec.clone();
        fixed.attacker_mode = AttackerMode::SequentialDdos;
        return ddos_scenario(&fixed);
    }
    [PolicyKind::None, PolicyKind::Random, PolicyKind::Ces]
        .into_iter()
        .map(|kind| {
            run_experiment(&spec.clone().with_policy(kind)).map(|series| (kind, series))
        })
        .collect()
}
