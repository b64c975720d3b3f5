//! Discrete-time attacker/defender game simulator for shuffling-based
//! moving target defense against DDoS attacks.
//!
//! The crate models a set of VMs whose attack surface (network segment,
//! service port, user placement) the defender can shuffle while an attacker
//! probes and floods them. It provides:
//!
//! - the per-step state transition and observation model ([`state`]),
//! - payoff-driven strategy generation for both players ([`strategies`]),
//! - the assignment matrices, their constraint validator, shuffle costing,
//!   and the cost-effective shuffling decision procedure ([`shuffle`]),
//! - baseline policies for comparison ([`baselines`]),
//! - a seeded Monte Carlo experiment harness ([`sim`]).
//!
//! Everything is deterministic under a fixed seed.

pub mod baselines;
pub mod config;
pub mod rng;
pub mod shuffle;
pub mod sim;
pub mod state;
pub mod strategies;

pub use baselines::PolicyKind;
pub use config::{GameConfig, PivotCombine, TieBreak, Weights};
pub use rng::RandomSource;
pub use shuffle::{Assignment, OnlineCounts, ShuffleDecision};
pub use sim::{AggregateSeries, AttackerMode, EtaMode, ExperimentSpec};
pub use state::{AttackAction, DefendAction, Observation, SystemState, VmId};
pub use strategies::{GameHistory, PayoffLedger, StepRecord};
