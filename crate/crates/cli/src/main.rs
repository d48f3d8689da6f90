use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use urllc_core::Policy;
use v2v_urllc::commands::{self, SampleSource, Selection};
use v2v_urllc::{exit, CliResult, ConfigFile};

#[derive(Parser)]
#[command(
    name = "v2v-urllc",
    version,
    about = "V2V URLLC simulator with federated tail estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted `key=value` assignment, e.g. `control.v=1e10`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Vec<u64>,
    #[arg(long, value_parser = parse_policy)]
    policy: Vec<Policy>,
    #[arg(long)]
    preset: Option<String>,
}

impl Common {
    fn load(&self) -> CliResult<(ConfigFile, Selection)> {
        let base = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let sel = Selection {
            preset: self.preset.clone(),
            overrides: self.overrides.clone(),
            policies: self.policy.clone(),
            seeds: self.seed.clone(),
        };
        Ok((base, sel))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every (pairs, policy, seed) job and write JSON reports.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-slot CSV traces.
        #[arg(long)]
        traces: bool,
    },
    /// Fit the tail model with federated and centralized SVRG on the same samples.
    CompareFl {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Draw samples from `experiment.synthetic` instead of simulating.
        #[arg(long)]
        synthetic: bool,
    },
    /// One run per (value, seed) of a single parameter; long-format CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Parse, apply overrides, validate, and print the resolved config.
    ValidateConfig {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Policy::ALL.iter().map(|p| p.name()).collect();
        format!("unknown policy `{s}`; expected one of {}", names.join(", "))
    })
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run {
            common,
            out,
            traces,
        } => {
            let (mut base, sel) = common.load()?;
            base.sim.record_traces |= traces;
            let results = commands::cmd_run(&base, &sel, &out)?;
            print!("{}", commands::summary_table(&results));
            for r in &results {
                println!("wrote {}", r.json_path.display());
                if let Some(t) = &r.trace_path {
                    println!("wrote {}", t.display());
                }
            }
        }
        Command::CompareFl {
            common,
            out,
            synthetic,
        } => {
            let (base, sel) = common.load()?;
            let source = if synthetic {
                SampleSource::Synthetic
            } else {
                SampleSource::Simulation
            };
            let reports = commands::cmd_compare_fl(&base, &sel, source, &out)?;
            for (r, path) in &reports {
                if let (Some(f), Some(c)) = (&r.federated, &r.centralized) {
                    println!(
                        "federated sigma={:.4} xi={:.4} bytes={} | centralized sigma={:.4} xi={:.4} bytes={}",
                        f.sigma, f.xi, f.comms.total_bytes, c.sigma, c.xi, c.comms.total_bytes
                    );
                }
                println!("wrote {}", path.display());
            }
        }
        Command::Sweep {
            common,
            param,
            values,
            out,
        } => {
            let (base, sel) = common.load()?;
            let rows = commands::cmd_sweep(&base, &sel, &param, &values, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::ValidateConfig { config, overrides } => {
            let base = match &config {
                Some(path) => ConfigFile::load(path)?,
                None => ConfigFile::default(),
            };
            let cfg = base.with_overrides(&overrides)?;
            cfg.validate()?;
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
