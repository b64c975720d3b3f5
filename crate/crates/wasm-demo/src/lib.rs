//! Browser demo bindings: three interactive entry points over the simulator
//! core, exchanging JSON strings so the page needs no generated glue beyond
//! wasm-bindgen's.
//!
//! Build for the web with `wasm-pack build --target web crates/wasm-demo`
//! and open `crates/wasm-demo/www/index.html` from a static file server.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use mtd_shuffle::baselines::PolicyKind;
use mtd_shuffle::config::GameConfig;
use mtd_shuffle::sim::{
    ddos_scenario, run_experiment, sweep_eta, AggregateSeries, AttackerMode, EtaMode,
    ExperimentSpec,
};

/// Scenario knobs exposed to the page. Everything has a browser-friendly
/// default so the page can send only what the user moved.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub vm_count: usize,
    pub users_per_vm: usize,
    pub segment_count: usize,
    pub port_count: usize,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub eta: u32,
    pub gamma: f64,
    pub direct_success: f64,
    pub pivot_success: f64,
    pub confidence: f64,
    pub attack_cost: f64,
}

impl Default for DemoParams {
    fn default() -> Self {
        Self {
            vm_count: 20,
            users_per_vm: 10,
            segment_count: 5,
            port_count: 10,
            horizon: 10,
            trials: 40,
            seed: 42,
            eta: 5,
            gamma: 0.9,
            direct_success: 0.5,
            pivot_success: 0.2,
            confidence: 0.9,
            attack_cost: 0.2,
        }
    }
}

impl DemoParams {
    fn config(&self) -> Result<GameConfig, String> {
        let config = GameConfig::uniform(
            self.vm_count,
            self.users_per_vm,
            self.segment_count,
            self.port_count,
            self.horizon,
        )
        .with_gamma(self.gamma)
        .with_direct_success(self.direct_success)
        .with_pivot_success(self.pivot_success)
        .with_confidence(self.confidence)
        .with_attack_cost(self.attack_cost);
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    fn spec(&self, policy: PolicyKind) -> Result<ExperimentSpec, String> {
        // Sliders move independently; keep eta inside the per-VM user count.
        let eta = self.eta.min(self.users_per_vm as u32);
        Ok(ExperimentSpec::new(self.config()?, policy)
            .with_trials(self.trials.max(1))
            .with_seed(self.seed)
            .with_eta(EtaMode::Fixed(eta)))
    }
}

#[derive(Debug, Serialize)]
struct SeriesOut {
    policy: String,
    t: Vec<usize>,
    effectiveness: Vec<f64>,
    cost: Vec<f64>,
    payoff: Vec<f64>,
    crashed: Vec<f64>,
}

impl SeriesOut {
    fn from_series(series: &AggregateSeries) -> Self {
        Self {
            policy: series.policy.to_string(),
            t: series.steps.iter().map(|s| s.t).collect(),
            effectiveness: series.steps.iter().map(|s| s.effectiveness.mean).collect(),
            cost: series.steps.iter().map(|s| s.cost.mean).collect(),
            payoff: series.steps.iter().map(|s| s.defender_payoff.mean).collect(),
            crashed: series.steps.iter().map(|s| s.crashed.mean).collect(),
        }
    }
}

fn parse_params(json: &str) -> Result<DemoParams, String> {
    if json.trim().is_empty() {
        return Ok(DemoParams::default());
    }
    serde_json::from_str(json).map_err(|e| format!("bad parameters: {e}"))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

/// Per-step effectiveness, cost, payoff, and crashed-VM curves for the
/// cost-effective policy and the reference policies.
#[wasm_bindgen]
pub fn run_timeseries(params_json: &str) -> Result<String, JsValue> {
    timeseries_impl(params_json).map_err(|e| JsValue::from_str(&e))
}

fn timeseries_impl(params_json: &str) -> Result<String, String> {
    let params = parse_params(params_json)?;
    let mut out = Vec::new();
    for kind in [PolicyKind::Ces, PolicyKind::Rrt, PolicyKind::Csa] {
        let series = run_experiment(&params.spec(kind)?).map_err(|e| e.to_string())?;
        out.push(SeriesOut::from_series(&series));
    }
    to_json(&out)
}

#[derive(Debug, Serialize)]
struct SweepOut {
    policy: String,
    eta: Vec<u32>,
    effectiveness: Vec<f64>,
    cost: Vec<f64>,
    payoff: Vec<f64>,
}

/// Sweep the per-VM online-user count from 0 to `users_per_vm`, read out at
/// the final step.
#[wasm_bindgen]
pub fn run_eta_sweep(params_json: &str) -> Result<String, JsValue> {
    eta_sweep_impl(params_json).map_err(|e| JsValue::from_str(&e))
}

fn eta_sweep_impl(params_json: &str) -> Result<String, String> {
    let params = parse_params(params_json)?;
    let mut out = Vec::new();
    for kind in [PolicyKind::Ces, PolicyKind::Rrt, PolicyKind::Csa] {
        let mut spec = params.spec(kind)?.with_eta(EtaMode::Sweep {
            lo: 0,
            hi: params.users_per_vm as u32,
        });
        spec.eval_step = params.horizon.min(10);
        let sweep = sweep_eta(&spec).map_err(|e| e.to_string())?;
        out.push(SweepOut {
            policy: kind.to_string(),
            eta: sweep.points.iter().map(|p| p.eta).collect(),
            effectiveness: sweep.points.iter().map(|p| p.effectiveness.mean).collect(),
            cost: sweep.points.iter().map(|p| p.cost.mean).collect(),
            payoff: sweep.points.iter().map(|p| p.payoff.mean).collect(),
        });
    }
    to_json(&out)
}

/// Crashed-VM count per step while the attacker floods VMs one by one,
/// for the no-shuffle, random, and cost-effective policies.
#[wasm_bindgen]
pub fn run_ddos(params_json: &str) -> Result<String, JsValue> {
    ddos_impl(params_json).map_err(|e| JsValue::from_str(&e))
}

fn ddos_impl(params_json: &str) -> Result<String, String> {
    let params = parse_params(params_json)?;
    let spec = params
        .spec(PolicyKind::Ces)?
        .with_attacker(AttackerMode::SequentialDdos);
    let results = ddos_scenario(&spec).map_err(|e| e.to_string())?;
    let out: Vec<SeriesOut> = results
        .iter()
        .map(|(_, series)| SeriesOut::from_series(series))
        .collect();
    to_json(&out)
}
