//! Experiment spec documents: INI-style key/value text with `[game]`,
//! `[weights]`, `[probabilities]`, `[experiment]`, and optional `[probe]`
//! sections. Unknown keys and sections are rejected; every value is range
//! checked before an experiment runs.

use std::collections::BTreeMap;
use std::fmt;

use mtd_shuffle::baselines::PolicyKind;
use mtd_shuffle::config::{GameConfig, PivotCombine, TieBreak, Weights};
use mtd_shuffle::sim::{AttackerMode, EtaMode, ExperimentSpec};
use mtd_shuffle::state::{AttackAction, DefendAction, Observation, SystemState, VmId};

#[derive(Debug)]
pub struct SpecDocError(pub String);

impl fmt::Display for SpecDocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecDocError {}

fn err<T>(msg: impl Into<String>) -> Result<T, SpecDocError> {
    Err(SpecDocError(msg.into()))
}

/// Parsed and validated experiment document.
#[derive(Debug, Clone)]
pub struct SpecDocument {
    pub config: GameConfig,
    pub policies: Vec<PolicyKind>,
    pub trials: usize,
    pub seed: u64,
    pub eta_mode: EtaMode,
    pub attacker_mode: AttackerMode,
    pub use_defend_gate: bool,
    pub eval_step: usize,
    pub probe: ProbeSection,
}

/// Starting tuple for the transition probe. Defaults to a clean state under
/// a full-front attack.
#[derive(Debug, Clone)]
pub struct ProbeSection {
    pub state: Option<Vec<bool>>,
    pub observation: Option<Vec<bool>>,
    pub attack: Option<Vec<usize>>,
    pub defend: Option<Vec<usize>>,
}

impl SpecDocument {
    pub fn parse(text: &str) -> Result<Self, SpecDocError> {
        let mut sections = parse_sections(text)?;
        let known = ["game", "weights", "probabilities", "experiment", "probe"];
        for name in sections.keys() {
            if !known.contains(&name.as_str()) {
                return err(format!("unknown section [{name}]"));
            }
        }

        let mut game = Section::take(&mut sections, "game");
        let vm_count = game.require_usize("vm_count")?;
        let users_per_vm = game.require_usize("users_per_vm")?;
        let segment_count = game.require_usize("segment_count")?;
        let port_count = game.require_usize("port_count")?;
        let horizon = game.require_usize("horizon")?;
        let mut config = GameConfig::uniform(
            vm_count,
            users_per_vm,
            segment_count,
            port_count,
            horizon,
        );
        if let Some(q) = game.optional_usize("user_count")? {
            config.user_count = q;
        }
        if let Some(g) = game.optional_f64("gamma")? {
            config.gamma = g;
        }
        if let Some(r) = game.optional_f64("defender_reward")? {
            config = config.with_defender_reward(r);
        }
        if let Some(r) = game.optional_f64("attacker_reward")? {
            config = config.with_attacker_reward(r);
        }
        if let Some(cost) = game.optional_f64("attack_cost")? {
            config = config.with_attack_cost(cost);
        }
        if let Some(mode) = game.optional_str("tie_break")? {
            config.tie_break = match mode.as_str() {
                "lowest_id" => TieBreak::LowestId,
                "keep_all" => TieBreak::KeepAll,
                other => return err(format!("tie_break: unknown mode '{other}'")),
            };
        }
        if let Some(mode) = game.optional_str("pivot_combine")? {
            config.pivot_combine = match mode.as_str() {
                "max" => PivotCombine::Max,
                "independent_or" => PivotCombine::IndependentOr,
                other => return err(format!("pivot_combine: unknown mode '{other}'")),
            };
        }
        game.finish()?;

        let mut weights = Section::take(&mut sections, "weights");
        let defaults = Weights::default();
        config.weights = Weights {
            ip_hop: weights.optional_f64("ip_hop")?.unwrap_or(defaults.ip_hop),
            port_hop: weights
                .optional_f64("port_hop")?
                .unwrap_or(defaults.port_hop),
            migration: weights
                .optional_f64("migration")?
                .unwrap_or(defaults.migration),
        };
        weights.finish()?;

        let mut probs = Section::take(&mut sections, "probabilities");
        if let Some(p) = probs.optional_f64("direct_success")? {
            config = config.with_direct_success(p);
        }
        if let Some(p) = probs.optional_f64("pivot_success")? {
            config = config.with_pivot_success(p);
        }
        if let Some(p) = probs.optional_f64("confidence")? {
            config = config.with_confidence(p);
        }
        probs.finish()?;

        let mut experiment = Section::take(&mut sections, "experiment");
        let policies_raw = experiment.require_str("policies")?;
        let mut policies = Vec::new();
        for name in policies_raw.split(',') {
            let kind: PolicyKind = name
                .trim()
                .parse()
                .map_err(|e: String| SpecDocError(format!("policies: {e}")))?;
            if !policies.contains(&kind) {
                policies.push(kind);
            }
        }
        if policies.is_empty() {
            return err("policies: at least one policy required");
        }
        let trials = experiment.optional_usize("trials")?.unwrap_or(1);
        let seed = experiment.optional_u64("seed")?.unwrap_or(0);
        let eval_step = experiment
            .optional_usize("eval_step")?
            .unwrap_or(horizon.min(10));

        let eta_fixed = experiment.optional_u32("eta")?;
        let eta_sweep = experiment.optional_str("eta_sweep")?;
        let eta_trace = experiment.optional_str("eta_trace")?;
        let eta_mode = match (eta_fixed, eta_sweep, eta_trace) {
            (Some(v), None, None) => EtaMode::Fixed(v),
            (None, Some(range), None) => {
                let Some((lo, hi)) = range.split_once("..") else {
                    return err(format!("eta_sweep: expected 'lo..hi', got '{range}'"));
                };
                let lo = parse_u32("eta_sweep", lo.trim())?;
                let hi = parse_u32("eta_sweep", hi.trim())?;
                EtaMode::Sweep { lo, hi }
            }
            (None, None, Some(series)) => {
                let mut values = Vec::new();
                for item in series.split(',') {
                    values.push(parse_u32("eta_trace", item.trim())?);
                }
                EtaMode::Trace(values)
            }
            (None, None, None) => return err("experiment: one of eta, eta_sweep, eta_trace required"),
            _ => return err("experiment: eta, eta_sweep, eta_trace are mutually exclusive"),
        };

        let attacker_mode = match experiment
            .optional_str("attacker")?
            .unwrap_or_else(|| "strategic".into())
            .as_str()
        {
            "strategic" => AttackerMode::Strategic,
            "sequential" => AttackerMode::SequentialDdos,
            other => return err(format!("attacker: unknown mode '{other}'")),
        };
        let use_defend_gate = experiment.optional_bool("use_defend_gate")?.unwrap_or(false);
        experiment.finish()?;

        let mut probe_section = Section::take(&mut sections, "probe");
        let probe = ProbeSection {
            state: probe_section.optional_bits("state", vm_count)?,
            observation: probe_section.optional_bits("observation", vm_count)?,
            attack: probe_section.optional_ids("attack", vm_count)?,
            defend: probe_section.optional_ids("defend", vm_count)?,
        };
        probe_section.finish()?;

        // Field-level range checks happen in the core validator; its errors
        // name the offending field.
        config
            .validate()
            .map_err(|e| SpecDocError(e.to_string()))?;

        let doc = Self {
            config,
            policies,
            trials,
            seed,
            eta_mode,
            attacker_mode,
            use_defend_gate,
            eval_step,
            probe,
        };
        // Validate the rest through the experiment spec of the first policy.
        doc.experiment_for(doc.policies[0])
            .validate()
            .map_err(|e| SpecDocError(e.to_string()))?;
        Ok(doc)
    }

    /// Experiment spec for one of the document's policies.
    pub fn experiment_for(&self, policy: PolicyKind) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(self.config.clone(), policy)
            .with_trials(self.trials)
            .with_seed(self.seed)
            .with_eta(self.eta_mode.clone())
            .with_attacker(self.attacker_mode);
        spec.use_defend_gate = self.use_defend_gate;
        spec.eval_step = self.eval_step;
        spec
    }

    /// The probe tuple, with defaults: clean state, silent observation,
    /// attack on every VM, no defense.
    pub fn probe_tuple(&self) -> (SystemState, Observation, DefendAction, AttackAction) {
        let n = self.config.vm_count;
        let state = SystemState(self.probe.state.clone().unwrap_or_else(|| vec![false; n]));
        let observation =
            Observation(self.probe.observation.clone().unwrap_or_else(|| vec![false; n]));
        let attack: AttackAction = match &self.probe.attack {
            Some(ids) => ids.iter().map(|&v| VmId(v)).collect(),
            None => (0..n).map(VmId).collect(),
        };
        let defend: DefendAction = match &self.probe.defend {
            Some(ids) => ids.iter().map(|&v| VmId(v)).collect(),
            None => DefendAction::empty(),
        };
        (state, observation, defend, attack)
    }
}

fn parse_u32(field: &str, text: &str) -> Result<u32, SpecDocError> {
    text.parse()
        .map_err(|_| SpecDocError(format!("{field}: expected integer, got '{text}'")))
}

type RawSections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<RawSections, SpecDocError> {
    let mut sections: RawSections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            sections.entry(name.trim().to_string()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return err(format!("line {}: expected 'key = value', got '{line}'", idx + 1));
        };
        let Some(section) = &current else {
            return err(format!("line {}: key outside any [section]", idx + 1));
        };
        let key = key.trim().to_string();
        let entry = sections.get_mut(section).expect("section inserted above");
        if entry.insert(key.clone(), value.trim().to_string()).is_some() {
            return err(format!("duplicate key '{key}' in [{section}]"));
        }
    }
    Ok(sections)
}

/// One section's keys; getters consume keys so leftovers can be rejected.
struct Section {
    name: &'static str,
    entries: BTreeMap<String, String>,
}

impl Section {
    fn take(sections: &mut RawSections, name: &'static str) -> Self {
        Self {
            name,
            entries: sections.remove(name).unwrap_or_default(),
        }
    }

    fn finish(self) -> Result<(), SpecDocError> {
        match self.entries.keys().next() {
            Some(key) => err(format!("unknown key '{key}' in [{}]", self.name)),
            None => Ok(()),
        }
    }

    fn optional_str(&mut self, key: &str) -> Result<Option<String>, SpecDocError> {
        Ok(self.entries.remove(key))
    }

    fn require_str(&mut self, key: &str) -> Result<String, SpecDocError> {
        self.entries
            .remove(key)
            .ok_or_else(|| SpecDocError(format!("missing key '{key}' in [{}]", self.name)))
    }

    fn optional_f64(&mut self, key: &str) -> Result<Option<f64>, SpecDocError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| SpecDocError(format!("{key}: expected number, got '{v}'")))
            })
            .transpose()
    }

    fn optional_usize(&mut self, key: &str) -> Result<Option<usize>, SpecDocError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| SpecDocError(format!("{key}: expected integer, got '{v}'")))
            })
            .transpose()
    }

    fn require_usize(&mut self, key: &str) -> Result<usize, SpecDocError> {
        match self.optional_usize(key)? {
            Some(v) => Ok(v),
            None => err(format!("missing key '{key}' in [{}]", self.name)),
        }
    }

    fn optional_u64(&mut self, key: &str) -> Result<Option<u64>, SpecDocError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| SpecDocError(format!("{key}: expected integer, got '{v}'")))
            })
            .transpose()
    }

    fn optional_u32(&mut self, key: &str) -> Result<Option<u32>, SpecDocError> {
        self.entries
            .remove(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| SpecDocError(format!("{key}: expected integer, got '{v}'")))
            })
            .transpose()
    }

    fn optional_bool(&mut self, key: &str) -> Result<Option<bool>, SpecDocError> {
        self.entries
            .remove(key)
            .map(|v| match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => err(format!("{key}: expected boolean, got '{other}'")),
            })
            .transpose()
    }

    /// Bit string such as "0101", one character per VM.
    fn optional_bits(&mut self, key: &str, n: usize) -> Result<Option<Vec<bool>>, SpecDocError> {
        let Some(v) = self.entries.remove(key) else {
            return Ok(None);
        };
        if v.len() != n {
            return err(format!("{key}: expected {n} bits, got {}", v.len()));
        }
        let mut bits = Vec::with_capacity(n);
        for ch in v.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return err(format!("{key}: expected 0/1, got '{other}'")),
            }
        }
        Ok(Some(bits))
    }

    /// Comma-separated VM ids; the empty string is the empty set.
    fn optional_ids(&mut self, key: &str, n: usize) -> Result<Option<Vec<usize>>, SpecDocError> {
        let Some(v) = self.entries.remove(key) else {
            return Ok(None);
        };
        let mut ids = Vec::new();
        for item in v.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let id: usize = item
                .parse()
                .map_err(|_| SpecDocError(format!("{key}: expected VM id, got '{item}'")))?;
            if id >= n {
                return err(format!("{key}: VM id {id} out of range (n = {n})"));
            }
            ids.push(id);
        }
        Ok(Some(ids))
    }
}
