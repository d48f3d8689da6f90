use urllc_core::Policy;

use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};

/// A named bundle of overrides and run lists.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub overrides: Vec<String>,
    pub policies: Vec<Policy>,
    /// Pair counts; each becomes a separate run.
    pub pairs: Vec<usize>,
    pub seeds: Vec<u64>,
}

pub const PRESET_NAMES: [&str; 4] = [
    "policies-u20",
    "policies-u60",
    "policies-u100",
    "comms-sweep",
];

const DESK_HORIZON: u64 = 50_000;

/// Bursty load used by the policy comparisons: on average two 1 kb packets
/// per slot, so exceedances are frequent enough to feed the tail model.
fn bursty_load() -> Vec<String> {
    vec![
        "sim.arrival_process=packets".into(),
        "sim.arrival_mean_bits=2000".into(),
        "sim.packet_bits=1000".into(),
    ]
}

pub fn preset(name: &str) -> CliResult<ExperimentPreset> {
    let policies = |name: &'static str, u: usize| ExperimentPreset {
        name,
        overrides: [
            vec![format!("sim.horizon_slots={DESK_HORIZON}")],
            bursty_load(),
        ]
        .concat(),
        policies: Policy::ALL.to_vec(),
        pairs: vec![u],
        seeds: (0..5).collect(),
    };
    let p = match name {
        "policies-u20" => policies("policies-u20", 20),
        "policies-u60" => policies("policies-u60", 60),
        "policies-u100" => policies("policies-u100", 100),
        "comms-sweep" => ExperimentPreset {
            name: "comms-sweep",
            overrides: vec![format!("sim.horizon_slots={DESK_HORIZON}")],
            policies: vec![Policy::Proposed],
            pairs: vec![20, 40, 60, 80, 100],
            seeds: vec![0],
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; valid presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(p)
}

/// One simulation to execute.
#[derive(Debug, Clone, PartialEq)]
pub struct Job {
    pub pairs: usize,
    pub policy: Policy,
    pub seed: u64,
}

impl Job {
    pub fn stem(&self) -> String {
        format!("u{}-{}-seed{}", self.pairs, self.policy.name(), self.seed)
    }

    pub fn apply(&self, base: &ConfigFile) -> ConfigFile {
        let mut cfg = base.clone();
        cfg.sim.pairs = self.pairs;
        cfg.sim.control.policy = self.policy;
        cfg.sim.seed = self.seed;
        cfg
    }
}

/// Resolved run list. Command-line lists win over the preset, which wins
/// over the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub config: ConfigFile,
    pub jobs: Vec<Job>,
}

pub fn plan(
    base: &ConfigFile,
    preset_name: Option<&str>,
    overrides: &[String],
    cli_policies: &[Policy],
    cli_seeds: &[u64],
) -> CliResult<Plan> {
    let preset = preset_name.map(preset).transpose()?;
    let mut all_overrides: Vec<String> = Vec::new();
    if let Some(p) = &preset {
        all_overrides.extend(p.overrides.iter().cloned());
    }
    all_overrides.extend(overrides.iter().cloned());
    let config = base.with_overrides(&all_overrides)?;
    config.validate()?;

    let pick = |cli: &[Policy], pre: Option<&Vec<Policy>>, file: &[Policy]| -> Vec<Policy> {
        if !cli.is_empty() {
            cli.to_vec()
        } else if let Some(p) = pre {
            p.clone()
        } else if !file.is_empty() {
            file.to_vec()
        } else {
            vec![config.sim.control.policy]
        }
    };
    let policies = pick(
        cli_policies,
        preset.as_ref().map(|p| &p.policies),
        &config.experiment.policies,
    );
    let seeds: Vec<u64> = if !cli_seeds.is_empty() {
        cli_seeds.to_vec()
    } else if let Some(p) = &preset {
        p.seeds.clone()
    } else if !config.experiment.seeds.is_empty() {
        config.experiment.seeds.clone()
    } else {
        vec![config.sim.seed]
    };
    let pairs = preset
        .as_ref()
        .map(|p| p.pairs.clone())
        .unwrap_or_else(|| vec![config.sim.pairs]);

    let mut jobs = Vec::new();
    for &u in &pairs {
        for &policy in &policies {
            for &seed in &seeds {
                let job = Job {
                    pairs: u,
                    policy,
                    seed,
                };
                if !jobs.contains(&job) {
                    jobs.push(job);
                }
            }
        }
    }
    Ok(Plan { config, jobs })
}
