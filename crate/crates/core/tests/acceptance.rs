//! Acceptance suite: every release criterion runs at its stated tolerance
//! and prints one pass/fail line. Criteria execute sequentially inside a
//! single test so the runtime budgets are measured without contention.
//!
//! Run with `cargo test -p mtd-shuffle --test acceptance -- --nocapture`.

mod common;

use std::time::{Duration, Instant};

use rayon::prelude::*;

use common::{
    brute_force_attack, brute_force_defend, brute_force_shuffle, exact_transition_distribution,
    total_variation,
};
use mtd_shuffle::baselines::{apply_policy, PolicyKind};
use mtd_shuffle::config::{GameConfig, TieBreak, Weights};
use mtd_shuffle::rng::{derive_seed, RandomSource};
use mtd_shuffle::shuffle::{ces_decide, random_initial_assignment, validate_assignment, OnlineCounts};
use mtd_shuffle::sim::{
    ddos_scenario, estimate_transition_distribution, run_experiment, sweep_eta, AttackerMode,
    EtaMode, ExperimentSpec, MeanStd, TransitionProbe,
};
use mtd_shuffle::state::{
    observe, transit_state, AttackAction, DefendAction, Observation, SystemState, VmId,
};
use mtd_shuffle::strategies::{
    attack_strategy, cumulative_payoffs, defend_strategy, GameHistory, StepRecord,
};

/// Scenario parameters shared by the trend criteria: 50 VMs, 20 users each,
/// 20 segments, 100 ports, horizon 10, discount 0.9, weights 0.2/0.1/0.7.
fn scenario_config() -> GameConfig {
    GameConfig::uniform(50, 20, 20, 100, 10).with_attack_cost(0.2)
}

fn pooled_std(a: MeanStd, b: MeanStd) -> f64 {
    ((a.std * a.std + b.std * b.std) / 2.0).sqrt()
}

struct Criterion {
    name: &'static str,
    failures: Vec<String>,
    started: Instant,
    budget: Duration,
}

impl Criterion {
    fn start(name: &'static str, budget: Duration) -> Self {
        Self {
            name,
            failures: Vec::new(),
            started: Instant::now(),
            budget,
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn finish(mut self, out: &mut Vec<String>) {
        let elapsed = self.started.elapsed();
        if elapsed > self.budget {
            self.failures.push(format!(
                "runtime {elapsed:.1?} exceeded budget {:?}",
                self.budget
            ));
        }
        if self.failures.is_empty() {
            println!("acceptance {}: PASS ({elapsed:.1?})", self.name);
        } else {
            println!(
                "acceptance {}: FAIL ({elapsed:.1?}) - {}",
                self.name,
                self.failures.join("; ")
            );
            out.push(format!("{}: {}", self.name, self.failures.join("; ")));
        }
    }
}

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    criterion_1_constraint_closure(&mut failed);
    criterion_2_transition_oracle(&mut failed);
    criterion_3_strategy_oracle(&mut failed);
    criterion_4_ces_oracle(&mut failed);
    criterion_5_time_series_trends(&mut failed);
    criterion_6_eta_sweep_trends(&mut failed);
    criterion_7_ddos_ordering(&mut failed);
    criterion_8_payoff_arithmetic(&mut failed);
    assert!(
        failed.is_empty(),
        "{} criterion(s) failed:\n{}",
        failed.len(),
        failed.join("\n")
    );
}

// 1. Every assignment produced by every policy over 1000 randomized trials
// at n = 8..16 passes the constraint validator.
fn criterion_1_constraint_closure(failed: &mut Vec<String>) {
    let mut c = Criterion::start("1 (constraint closure)", Duration::from_secs(30));
    let mut violations_seen = 0usize;
    let mut assignments_checked = 0usize;
    for trial in 0..1000u64 {
        let mut pick = RandomSource::from_seed(derive_seed(0xA11CE, trial));
        let n = 8 + pick.pick(9);
        let m = 2 + pick.pick(3);
        let r = 2 + pick.pick(3.min(n - 1));
        let u = 2 + pick.pick(3);
        let config = GameConfig::uniform(n, m, r, u, 4)
            .with_direct_success(0.3 + 0.5 * pick.uniform())
            .with_confidence(0.7 + 0.3 * pick.uniform())
            .with_attack_cost(0.2)
            .with_tie_break(TieBreak::KeepAll);
        let policy = PolicyKind::ALL[trial as usize % PolicyKind::ALL.len()];
        let eta = OnlineCounts::uniform(n, pick.pick(m + 1) as u32);

        let mut rng = RandomSource::from_seed(derive_seed(0xB0B, trial));
        let mut assignment = random_initial_assignment(&config, &mut rng);
        let mut state = SystemState::healthy(n);
        let mut observation = Observation::silent(n);
        for step in 1..=config.horizon {
            if step > 1 {
                observation = observe(&state, &config, &mut rng);
            }
            let attack = attack_strategy(&state, step - 1, &config);
            let decision =
                apply_policy(policy, &observation, &assignment, &eta, step - 1, &config, &mut rng);
            assignments_checked += 1;
            let violations = validate_assignment(&decision.next, &config);
            if !violations.is_empty() {
                violations_seen += 1;
                if violations_seen == 1 {
                    c.check(false, || {
                        format!("trial {trial} policy {policy}: {:?}", violations)
                    });
                }
            }
            state = transit_state(
                &state,
                &observation,
                &decision.shuffled,
                &attack,
                &config,
                &mut rng,
            );
            assignment = decision.next;
        }
    }
    c.check(violations_seen == 0, || {
        format!("{violations_seen} of {assignments_checked} assignments invalid")
    });
    c.finish(failed);
}

// 2. On every 3-VM (state, observation, attack, defend) tuple over the
// success-probability grid {0, 0.3, 0.7, 1}, the empirical distribution of
// 1e5 seeded transitions is within total-variation 0.02 of exhaustive
// enumeration.
fn criterion_2_transition_oracle(failed: &mut Vec<String>) {
    let mut c = Criterion::start("2 (transition oracle)", Duration::from_secs(60));
    let grid = [0.0, 0.3, 0.7, 1.0];
    let cells: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..4096usize).map(move |cell| (p, cell)))
        .collect();
    let worst = cells
        .par_iter()
        .map(|&(p_idx, cell)| {
            let p = grid[p_idx];
            let config = GameConfig::uniform(3, 1, 1, 1, 1)
                .with_direct_success(p)
                .with_pivot_success(p);
            let bits = |mask: usize| (0..3).map(|v| mask >> v & 1 == 1).collect::<Vec<bool>>();
            let set = |mask: usize| (0..3).filter(move |v| mask >> v & 1 == 1).map(VmId);
            let state = SystemState(bits(cell & 7));
            let observation = Observation(bits(cell >> 3 & 7));
            let attack: AttackAction = set(cell >> 6 & 7).collect();
            let defend: DefendAction = set(cell >> 9 & 7).collect();
            let probe = TransitionProbe {
                state: state.clone(),
                observation: observation.clone(),
                defend: defend.clone(),
                attack: attack.clone(),
            };
            let runs = 100_000u64;
            let seed = derive_seed(0x7A61E, (p_idx * 4096 + cell) as u64);
            let dist = estimate_transition_distribution(&config, &probe, runs, seed);
            let mut empirical = vec![0.0f64; 8];
            for (pattern, count) in &dist.counts {
                let mask = pattern
                    .chars()
                    .enumerate()
                    .filter(|&(_, ch)| ch == '1')
                    .fold(0usize, |m, (i, _)| m | 1 << i);
                empirical[mask] = *count as f64 / runs as f64;
            }
            let exact =
                exact_transition_distribution(&state, &observation, &defend, &attack, &config);
            (total_variation(&empirical, &exact), p, cell)
        })
        .reduce(|| (0.0, 0.0, 0), |a, b| if a.0 >= b.0 { a } else { b });
    c.check(worst.0 < 0.02, || {
        format!(
            "worst TV {:.4} at p={} cell {:#05x} (budget 0.02)",
            worst.0, worst.1, worst.2
        )
    });
    println!(
        "  criterion 2: {} cells x 1e5 draws, worst TV {:.4}",
        cells.len(),
        worst.0
    );
    c.finish(failed);
}

// 3. On 500 random instances with n <= 5, both strategies equal brute-force
// argmax enumeration exactly under keep-all-maximizers ties.
fn criterion_3_strategy_oracle(failed: &mut Vec<String>) {
    let mut c = Criterion::start("3 (strategy oracle)", Duration::from_secs(30));
    let mut mismatches = 0usize;
    for instance in 0..500u64 {
        let mut pick = RandomSource::from_seed(derive_seed(0x57A7, instance));
        let n = 2 + pick.pick(4);
        let mut config = GameConfig::uniform(n, 2, 1 + pick.pick(n), 2, 6)
            .with_tie_break(TieBreak::KeepAll);
        for v in 0..n {
            config.direct_success[v] = pick.uniform();
            config.confidence[v] = pick.uniform();
            config.defender_reward[v] = 2.0 * pick.uniform();
            config.attacker_reward[v] = 2.0 * pick.uniform();
            config.attack_cost[v] = 1.5 * pick.uniform();
            for w in 0..n {
                config.pivot_success[v][w] = if v == w { 0.0 } else { pick.uniform() };
            }
        }
        let state = SystemState((0..n).map(|_| pick.chance(0.4)).collect());
        let obs = Observation((0..n).map(|_| pick.chance(0.4)).collect());
        let prev: DefendAction = (0..n).filter(|_| pick.chance(0.3)).map(VmId).collect();
        let costs: Vec<f64> = (0..n).map(|_| 2.0 * pick.uniform()).collect();
        let t = pick.pick(5);

        let fast_a = attack_strategy(&state, t, &config);
        let slow_a = brute_force_attack(&state, t, &config);
        let fast_d = defend_strategy(&obs, &prev, t, &config, &costs).unwrap();
        let slow_d = brute_force_defend(&obs, &prev, t, &config, &costs);
        if fast_a != slow_a || fast_d != slow_d {
            mismatches += 1;
            if mismatches == 1 {
                c.check(false, || {
                    format!(
                        "instance {instance}: attack {:?} vs {:?}, defend {:?} vs {:?}",
                        fast_a, slow_a, fast_d, slow_d
                    )
                });
            }
        }
    }
    c.check(mismatches == 0, || format!("{mismatches}/500 mismatches"));
    c.finish(failed);
}

// 4. On 200 random small instances (n <= 4, r <= 2, u <= 2, m <= 4), the
// shuffling decision achieves the same maximal payoff difference as
// exhaustive candidate enumeration.
fn criterion_4_ces_oracle(failed: &mut Vec<String>) {
    let mut c = Criterion::start("4 (shuffle decision oracle)", Duration::from_secs(60));
    let mut mismatches = 0usize;
    for instance in 0..200u64 {
        let mut pick = RandomSource::from_seed(derive_seed(0xCE5, instance));
        let n = 2 + pick.pick(3);
        let m = 1 + pick.pick(4);
        let r = 1 + pick.pick(2.min(n));
        let u = 1 + pick.pick(2);
        let mut config = GameConfig::uniform(n, m, r, u, 4);
        config.weights = Weights {
            ip_hop: pick.uniform(),
            port_hop: pick.uniform(),
            migration: pick.uniform(),
        };
        config = config
            .with_direct_success(pick.uniform())
            .with_confidence(pick.uniform())
            .with_defender_reward(3.0 * pick.uniform())
            .with_attacker_reward(2.0 * pick.uniform());
        let mut rng = RandomSource::from_seed(derive_seed(0xFACE, instance));
        let assignment = random_initial_assignment(&config, &mut rng);
        let flags = Observation((0..n).map(|_| pick.chance(0.5)).collect());
        let eta = OnlineCounts((0..n).map(|_| pick.pick(m + 1) as u32).collect());
        let t = pick.pick(4);

        let decision = ces_decide(&flags, &assignment, &eta, t, &config, &mut rng);
        let (_, oracle_final) = brute_force_shuffle(&flags, &assignment, &eta, t, &config);
        if decision.next != oracle_final {
            mismatches += 1;
            if mismatches == 1 {
                c.check(false, || format!("instance {instance}: decision diverged"));
            }
        }
    }
    c.check(mismatches == 0, || format!("{mismatches}/200 mismatches"));
    c.finish(failed);
}

// 5. Time-series trends at scenario scale, 200 trials: cumulative
// effectiveness strictly increasing; discounted per-step cost non-increasing
// for t >= 3 within one pooled std; cost-effective policy's payoff at least
// the baselines' at every t >= 3.
fn criterion_5_time_series_trends(failed: &mut Vec<String>) {
    let mut c = Criterion::start("5 (time-series trends)", Duration::from_secs(300));
    let spec = |kind| {
        ExperimentSpec::new(scenario_config(), kind)
            .with_eta(EtaMode::Fixed(10))
            .with_trials(200)
            .with_seed(42)
    };
    let ces = run_experiment(&spec(PolicyKind::Ces)).unwrap();
    let rrt = run_experiment(&spec(PolicyKind::Rrt)).unwrap();
    let csa = run_experiment(&spec(PolicyKind::Csa)).unwrap();

    for pair in ces.steps.windows(2) {
        c.check(
            pair[1].effectiveness.mean > pair[0].effectiveness.mean,
            || {
                format!(
                    "(a) effectiveness not strictly increasing at t={} ({} -> {})",
                    pair[1].t, pair[0].effectiveness.mean, pair[1].effectiveness.mean
                )
            },
        );
    }
    for pair in ces.steps.windows(2) {
        if pair[0].t < 3 {
            continue;
        }
        let band = pooled_std(pair[0].cost, pair[1].cost);
        c.check(pair[1].cost.mean <= pair[0].cost.mean + band, || {
            format!(
                "(b) cost increased beyond one pooled std at t={} ({} -> {}, band {})",
                pair[1].t, pair[0].cost.mean, pair[1].cost.mean, band
            )
        });
    }
    for i in 0..ces.steps.len() {
        let t = ces.steps[i].t;
        if t < 3 {
            continue;
        }
        let p = ces.steps[i].defender_payoff.mean;
        for (name, other) in [("rrt", &rrt), ("csa", &csa)] {
            c.check(p >= other.steps[i].defender_payoff.mean, || {
                format!(
                    "(c) payoff below {name} at t={t} ({p} vs {})",
                    other.steps[i].defender_payoff.mean
                )
            });
        }
    }
    c.finish(failed);
}

// 6. Eta sweep 0..20 read out at t = 10, 200 trials: effectiveness and
// payoff non-increasing in eta within one pooled std; payoff at least both
// baselines' at every eta.
fn criterion_6_eta_sweep_trends(failed: &mut Vec<String>) {
    let mut c = Criterion::start("6 (eta sweep trends)", Duration::from_secs(300));
    let spec = |kind| {
        let mut s = ExperimentSpec::new(scenario_config(), kind)
            .with_eta(EtaMode::Sweep { lo: 0, hi: 20 })
            .with_trials(200)
            .with_seed(42);
        s.eval_step = 10;
        s
    };
    let ces = sweep_eta(&spec(PolicyKind::Ces)).unwrap();
    let rrt = sweep_eta(&spec(PolicyKind::Rrt)).unwrap();
    let csa = sweep_eta(&spec(PolicyKind::Csa)).unwrap();

    for pair in ces.points.windows(2) {
        let band = pooled_std(pair[0].effectiveness, pair[1].effectiveness);
        c.check(
            pair[1].effectiveness.mean <= pair[0].effectiveness.mean + band,
            || {
                format!(
                    "effectiveness increased beyond one pooled std at eta {} -> {} ({} -> {}, band {:.3})",
                    pair[0].eta,
                    pair[1].eta,
                    pair[0].effectiveness.mean,
                    pair[1].effectiveness.mean,
                    band
                )
            },
        );
        let band = pooled_std(pair[0].payoff, pair[1].payoff);
        c.check(pair[1].payoff.mean <= pair[0].payoff.mean + band, || {
            format!(
                "payoff increased beyond one pooled std at eta {} -> {} ({} -> {}, band {:.3})",
                pair[0].eta, pair[1].eta, pair[0].payoff.mean, pair[1].payoff.mean, band
            )
        });
    }
    for (i, point) in ces.points.iter().enumerate() {
        for (name, other) in [("rrt", &rrt), ("csa", &csa)] {
            c.check(point.payoff.mean >= other.points[i].payoff.mean, || {
                format!(
                    "payoff below {name} at eta {} ({} vs {})",
                    point.eta, point.payoff.mean, other.points[i].payoff.mean
                )
            });
        }
    }
    c.finish(failed);
}

// 7. Sequential-DDoS ordering, 200 trials: steady-state crashed-VM count
// (final step) satisfies ces < random < none, with ces at least two pooled
// stds below none.
fn criterion_7_ddos_ordering(failed: &mut Vec<String>) {
    let mut c = Criterion::start("7 (sequential DDoS ordering)", Duration::from_secs(180));
    let config = GameConfig::uniform(12, 4, 2, 2, 25)
        .with_direct_success(0.8)
        .with_confidence(0.95)
        .with_attack_cost(0.2);
    let spec = ExperimentSpec::new(config, PolicyKind::Ces)
        .with_attacker(AttackerMode::SequentialDdos)
        .with_eta(EtaMode::Fixed(1))
        .with_trials(200)
        .with_seed(7);
    let results = ddos_scenario(&spec).unwrap();
    let steady = |kind: PolicyKind| -> MeanStd {
        results
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, s)| s.steps.last().unwrap().crashed)
            .unwrap()
    };
    let ces = steady(PolicyKind::Ces);
    let random = steady(PolicyKind::Random);
    let none = steady(PolicyKind::None);
    println!(
        "  criterion 7: steady crashed ces {:.3} random {:.3} none {:.3}",
        ces.mean, random.mean, none.mean
    );
    c.check(ces.mean < random.mean, || {
        format!("ces {} !< random {}", ces.mean, random.mean)
    });
    c.check(random.mean < none.mean, || {
        format!("random {} !< none {}", random.mean, none.mean)
    });
    let band = pooled_std(ces, none);
    c.check(none.mean - ces.mean >= 2.0 * band, || {
        format!(
            "separation {} below two pooled stds ({})",
            none.mean - ces.mean,
            2.0 * band
        )
    });
    c.finish(failed);
}

// 8. Hand-computed two-step discounted ledgers match the payoff
// accumulator to 1e-12.
fn criterion_8_payoff_arithmetic(failed: &mut Vec<String>) {
    let mut c = Criterion::start("8 (payoff arithmetic)", Duration::from_secs(10));
    let config = GameConfig::uniform(1, 1, 1, 1, 2);
    let record = |t, dr, dc, ar, ac| StepRecord {
        t,
        state_before: SystemState::healthy(1),
        observation: Observation::silent(1),
        attack: AttackAction::empty(),
        defend: DefendAction::empty(),
        state_after: SystemState::healthy(1),
        defender_reward: dr,
        defender_cost: dc,
        attacker_reward: ar,
        attacker_cost: ac,
    };

    let mut first = GameHistory::new(config.clone());
    first.push(record(1, 2.0, 0.5, 1.0, 0.3));
    first.push(record(2, 1.0, 0.25, 0.5, 0.1));
    let ledger = cumulative_payoffs(&first, 0.9);
    // (2 - 0.5) + 0.9 * (1 - 0.25) = 2.175; (1 - 0.3) + 0.9 * (0.5 - 0.1) = 1.06.
    c.check((ledger.defender - 2.175).abs() < 1e-12, || {
        format!("defender {} != 2.175", ledger.defender)
    });
    c.check((ledger.attacker - 1.06).abs() < 1e-12, || {
        format!("attacker {} != 1.06", ledger.attacker)
    });

    let mut second = GameHistory::new(config);
    second.push(record(1, 0.0, 1.4, 3.0, 0.0));
    second.push(record(2, 5.0, 0.2, 0.0, 2.5));
    let ledger = cumulative_payoffs(&second, 0.9);
    // (0 - 1.4) + 0.9 * (5 - 0.2) = 2.92; (3 - 0) + 0.9 * (0 - 2.5) = 0.75.
    c.check((ledger.defender - 2.92).abs() < 1e-12, || {
        format!("defender {} != 2.92", ledger.defender)
    });
    c.check((ledger.attacker - 0.75).abs() < 1e-12, || {
        format!("attacker {} != 0.75", ledger.attacker)
    });
    c.finish(failed);
}
