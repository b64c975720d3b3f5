//! Command-line front end: loads experiment spec documents, runs
//! simulations, and writes plot-ready CSV.
//!
//! Exit codes: 0 on success, 2 on spec validation failure (the message names
//! the offending field), 3 on unwritable output.

mod specdoc;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mtd_shuffle::baselines::PolicyKind;
use mtd_shuffle::rng::{derive_seed, RandomSource};
use mtd_shuffle::shuffle::random_initial_assignment;
use mtd_shuffle::sim::{
    estimate_transition_distribution, run_experiment, sweep_eta, EtaMode, TransitionProbe,
};
use specdoc::SpecDocument;

#[derive(Parser)]
#[command(
    name = "mtd-shuffle",
    about = "Shuffling-based moving target defense simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run per-time-step experiments for every policy in the spec and write
    /// a time-series CSV.
    Simulate {
        /// Experiment spec document.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the spec's trial count.
        #[arg(long)]
        trials: Option<usize>,
        /// Run only this policy.
        #[arg(long)]
        policy: Option<PolicyKind>,
        /// Also write the seeded initial assignment matrices of trial 0.
        #[arg(long)]
        dump_assignment: Option<PathBuf>,
    },
    /// Sweep the online-user count and write one row per (eta, policy).
    SweepEta {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        policy: Option<PolicyKind>,
    },
    /// Sample the transition function from the spec's probe tuple and write
    /// the next-state histogram.
    TransitionProbe {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of sampled transitions.
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

enum CliError {
    /// Spec could not be read, parsed, or validated.
    Spec(String),
    /// Output could not be written.
    Output(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 2,
            CliError::Output(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Spec(m) | CliError::Output(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            spec,
            out,
            seed,
            trials,
            policy,
            dump_assignment,
        } => {
            let doc = load_spec(&spec, seed, trials, policy)?;
            cmd_simulate(&doc, &out, dump_assignment.as_deref())
        }
        Command::SweepEta {
            spec,
            out,
            seed,
            trials,
            policy,
        } => {
            let doc = load_spec(&spec, seed, trials, policy)?;
            cmd_sweep_eta(&doc, &out)
        }
        Command::TransitionProbe {
            spec,
            out,
            runs,
            seed,
        } => {
            let doc = load_spec(&spec, seed, None, None)?;
            cmd_transition_probe(&doc, &out, runs)
        }
    }
}

fn load_spec(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    policy: Option<PolicyKind>,
) -> Result<SpecDocument, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Spec(format!("cannot read spec {}: {e}", path.display())))?;
    let mut doc = SpecDocument::parse(&text)
        .map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed {
        doc.seed = seed;
    }
    if let Some(trials) = trials {
        if trials == 0 {
            return Err(CliError::Spec("trials must be at least 1".into()));
        }
        doc.trials = trials;
    }
    if let Some(policy) = policy {
        doc.policies = vec![policy];
    }
    Ok(doc)
}

fn write_output(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))
}

/// Render a float with full round-trip precision.
fn num(x: f64) -> String {
    format!("{x}")
}

fn cmd_simulate(
    doc: &SpecDocument,
    out: &Path,
    dump_assignment: Option<&Path>,
) -> Result<(), CliError> {
    if matches!(doc.eta_mode, EtaMode::Sweep { .. }) {
        return Err(CliError::Spec(
            "eta_sweep documents run via sweep-eta; simulate needs eta or eta_trace".into(),
        ));
    }
    let mut csv = String::from(
        "t,policy,effectiveness,cost,defender_payoff,attacker_payoff,crashed_vms,trials\n",
    );
    for &policy in &doc.policies {
        let spec = doc.experiment_for(policy);
        let series = run_experiment(&spec).map_err(|e| CliError::Spec(e.to_string()))?;
        for step in &series.steps {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                step.t,
                policy,
                num(step.effectiveness.mean),
                num(step.cost.mean),
                num(step.defender_payoff.mean),
                num(step.attacker_payoff.mean),
                num(step.crashed.mean),
                series.trials,
            ));
        }
    }
    write_output(out, &csv)?;
    if let Some(path) = dump_assignment {
        let mut rng = RandomSource::from_seed(derive_seed(doc.seed, 0));
        let assignment = random_initial_assignment(&doc.config, &mut rng);
        write_output(path, &assignment.dump())?;
    }
    Ok(())
}

fn cmd_sweep_eta(doc: &SpecDocument, out: &Path) -> Result<(), CliError> {
    if !matches!(doc.eta_mode, EtaMode::Sweep { .. }) {
        return Err(CliError::Spec(
            "sweep-eta needs an eta_sweep = lo..hi entry in [experiment]".into(),
        ));
    }
    let mut csv = String::from("eta,policy,effectiveness,cost,payoff\n");
    for &policy in &doc.policies {
        let spec = doc.experiment_for(policy);
        let sweep = sweep_eta(&spec).map_err(|e| CliError::Spec(e.to_string()))?;
        for point in &sweep.points {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                point.eta,
                policy,
                num(point.effectiveness.mean),
                num(point.cost.mean),
                num(point.payoff.mean),
            ));
        }
    }
    write_output(out, &csv)
}

fn cmd_transition_probe(doc: &SpecDocument, out: &Path, runs: u64) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Spec("runs must be at least 1".into()));
    }
    let (state, observation, defend, attack) = doc.probe_tuple();
    let probe = TransitionProbe {
        state,
        observation,
        defend,
        attack,
    };
    let dist = estimate_transition_distribution(&doc.config, &probe, runs, doc.seed);
    let mut csv = String::from("state_pattern,count,frequency\n");
    for (pattern, count) in &dist.counts {
        csv.push_str(&format!(
            "{},{},{}\n",
            pattern,
            count,
            num(*count as f64 / runs as f64)
        ));
    }
    write_output(out, &csv)
}
