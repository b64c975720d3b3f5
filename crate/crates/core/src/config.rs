//! Scenario configuration: population sizes, horizon, discount, success and
//! observation probabilities, and per-VM reward/cost magnitudes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Cost weights for the three shuffle mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// Weight of an IP hop (segment reassignment).
    pub ip_hop: f64,
    /// Weight of a port hop.
    pub port_hop: f64,
    /// Weight of moving one user between VMs.
    pub migration: f64,
}

impl Default for Weights {
    fn default() -> Self {
        // Operator preset: weights sum to 1.
        Self {
            ip_hop: 0.2,
            port_hop: 0.1,
            migration: 0.7,
        }
    }
}

/// How pivot probabilities from several compromised sources combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotCombine {
    /// Single best pivot: max over compromised sources.
    #[default]
    Max,
    /// Independent attempts: 1 - prod(1 - p).
    IndependentOr,
}

/// Tie handling when a strategy has several maximizing VMs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Keep only the lowest-id maximizer.
    #[default]
    LowestId,
    /// Keep every maximizer.
    KeepAll,
}

/// Full scenario configuration.
///
/// All per-VM vectors have length `vm_count`; `pivot_success[src][dst]` is the
/// probability that a pivot from compromised `src` onto `dst` succeeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Number of VMs.
    pub vm_count: usize,
    /// Users served per VM at initial assignment.
    pub users_per_vm: usize,
    /// Total users; must equal `vm_count * users_per_vm`.
    pub user_count: usize,
    /// Number of network segments; at most `vm_count`.
    pub segment_count: usize,
    /// Number of service ports.
    pub port_count: usize,
    /// Horizon in time steps; at least 1.
    pub horizon: usize,
    /// Discount factor in (0, 1].
    pub gamma: f64,
    pub weights: Weights,
    /// Direct attack success probability per VM.
    pub direct_success: Vec<f64>,
    /// Pivot success probability per ordered (source, target) pair.
    pub pivot_success: Vec<Vec<f64>>,
    /// Observation confidence per VM: probability the defender sees the true
    /// status of the VM.
    pub confidence: Vec<f64>,
    /// Reward magnitude per VM recovered.
    pub defender_reward: Vec<f64>,
    /// Reward magnitude per VM crashed.
    pub attacker_reward: Vec<f64>,
    /// Attack cost magnitude used by the attacker's strategy scoring.
    pub attack_cost: Vec<f64>,
    pub pivot_combine: PivotCombine,
    pub tie_break: TieBreak,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("users_per_vm * vm_count must equal user_count ({m} * {n} != {q})")]
    UserProduct { m: usize, n: usize, q: usize },
    #[error("segment_count must not exceed vm_count ({r} > {n})")]
    SegmentCount { r: usize, n: usize },
    #[error("vm_count must be at least 1")]
    NoVms,
    #[error("port_count must be at least 1")]
    NoPorts,
    #[error("horizon must be at least 1")]
    HorizonZero,
    #[error("segment_count must be at least 1")]
    NoSegments,
    #[error("gamma must lie in (0, 1], got {value}")]
    GammaRange { value: f64 },
    #[error("{field} must be a probability in [0, 1], got {value} at index {index}")]
    ProbabilityRange {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{field} must be non-negative, got {value}")]
    NegativeWeight { field: &'static str, value: f64 },
    #[error("{field} must have length {expected}, got {actual}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        actual: usize,
    },
}

impl GameConfig {
    /// Uniform configuration: every VM shares the same probabilities and
    /// magnitudes. `user_count` is derived as `vm_count * users_per_vm`.
    pub fn uniform(
        vm_count: usize,
        users_per_vm: usize,
        segment_count: usize,
        port_count: usize,
        horizon: usize,
    ) -> Self {
        Self {
            vm_count,
            users_per_vm,
            user_count: vm_count * users_per_vm,
            segment_count,
            port_count,
            horizon,
            gamma: 0.9,
            weights: Weights::default(),
            direct_success: vec![0.5; vm_count],
            pivot_success: vec![vec![0.2; vm_count]; vm_count],
            confidence: vec![0.9; vm_count],
            defender_reward: vec![1.0; vm_count],
            attacker_reward: vec![1.0; vm_count],
            attack_cost: vec![1.0; vm_count],
            pivot_combine: PivotCombine::Max,
            tie_break: TieBreak::LowestId,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = weights;
        self
    }

    /// Set a uniform direct attack success probability.
    pub fn with_direct_success(mut self, p: f64) -> Self {
        self.direct_success = vec![p; self.vm_count];
        self
    }

    /// Set a uniform pivot success probability.
    pub fn with_pivot_success(mut self, p: f64) -> Self {
        self.pivot_success = vec![vec![p; self.vm_count]; self.vm_count];
        self
    }

    /// Set a uniform observation confidence.
    pub fn with_confidence(mut self, p: f64) -> Self {
        self.confidence = vec![p; self.vm_count];
        self
    }

    pub fn with_defender_reward(mut self, r: f64) -> Self {
        self.defender_reward = vec![r; self.vm_count];
        self
    }

    pub fn with_attacker_reward(mut self, r: f64) -> Self {
        self.attacker_reward = vec![r; self.vm_count];
        self
    }

    pub fn with_attack_cost(mut self, c: f64) -> Self {
        self.attack_cost = vec![c; self.vm_count];
        self
    }

    pub fn with_tie_break(mut self, tie_break: TieBreak) -> Self {
        self.tie_break = tie_break;
        self
    }

    pub fn with_pivot_combine(mut self, pivot_combine: PivotCombine) -> Self {
        self.pivot_combine = pivot_combine;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.vm_count == 0 {
            return Err(ConfigError::NoVms);
        }
        if self.segment_count == 0 {
            return Err(ConfigError::NoSegments);
        }
        if self.port_count == 0 {
            return Err(ConfigError::NoPorts);
        }
        if self.users_per_vm * self.vm_count != self.user_count {
            return Err(ConfigError::UserProduct {
                m: self.users_per_vm,
                n: self.vm_count,
                q: self.user_count,
            });
        }
        if self.segment_count > self.vm_count {
            return Err(ConfigError::SegmentCount {
                r: self.segment_count,
                n: self.vm_count,
            });
        }
        if self.horizon == 0 {
            return Err(ConfigError::HorizonZero);
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ConfigError::GammaRange { value: self.gamma });
        }
        for (field, value) in [
            ("weights.ip_hop", self.weights.ip_hop),
            ("weights.port_hop", self.weights.port_hop),
            ("weights.migration", self.weights.migration),
        ] {
            if value < 0.0 || value.is_nan() {
                return Err(ConfigError::NegativeWeight { field, value });
            }
        }
        self.check_probs("direct_success", &self.direct_success)?;
        self.check_probs("confidence", &self.confidence)?;
        if self.pivot_success.len() != self.vm_count {
            return Err(ConfigError::LengthMismatch {
                field: "pivot_success",
                expected: self.vm_count,
                actual: self.pivot_success.len(),
            });
        }
        for row in &self.pivot_success {
            self.check_probs("pivot_success", row)?;
        }
        for (field, v) in [
            ("defender_reward", &self.defender_reward),
            ("attacker_reward", &self.attacker_reward),
            ("attack_cost", &self.attack_cost),
        ] {
            if v.len() != self.vm_count {
                return Err(ConfigError::LengthMismatch {
                    field,
                    expected: self.vm_count,
                    actual: v.len(),
                });
            }
        }
        Ok(())
    }

    fn check_probs(&self, field: &'static str, values: &[f64]) -> Result<(), ConfigError> {
        if values.len() != self.vm_count {
            return Err(ConfigError::LengthMismatch {
                field,
                expected: self.vm_count,
                actual: values.len(),
            });
        }
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::ProbabilityRange {
                    field,
                    index,
                    value,
                });
            }
        }
        Ok(())
    }
}
