use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use urllc_core::fed::{run_centralized, run_federated, synthetic_samples, FitOutcome};
use urllc_core::rng::derive_seed;
use urllc_core::sim::{run as simulate, SimOutcome};
use urllc_core::{ExcessSample, GlobalModel, GpdParams, Policy};

use crate::config::{canonical_key, ConfigFile};
use crate::error::{CliError, CliResult};
use crate::preset::{plan, Job};
use crate::report::{
    metric_rows, write_json, write_sweep_csv, write_trace_csv, CommsSummary, RunReport, SweepMeta,
    SweepRow, Version, SWEEP_COLUMNS,
};

#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub preset: Option<String>,
    pub overrides: Vec<String>,
    pub policies: Vec<Policy>,
    pub seeds: Vec<u64>,
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

pub struct RunResult {
    pub job: Job,
    pub report: RunReport,
    pub json_path: PathBuf,
    pub trace_path: Option<PathBuf>,
}

/// Runs every job of the resolved plan and writes one JSON report per job,
/// plus a trace CSV when `sim.record_traces` is set.
pub fn cmd_run(base: &ConfigFile, sel: &Selection, out: &Path) -> CliResult<Vec<RunResult>> {
    let plan = plan(
        base,
        sel.preset.as_deref(),
        &sel.overrides,
        &sel.policies,
        &sel.seeds,
    )?;
    ensure_dir(out)?;
    let outcomes: Vec<CliResult<(Job, ConfigFile, SimOutcome)>> = plan
        .jobs
        .par_iter()
        .map(|job| {
            let cfg = job.apply(&plan.config);
            let outcome = simulate(&cfg.sim)?;
            Ok((job.clone(), cfg, outcome))
        })
        .collect();

    let mut results = Vec::with_capacity(outcomes.len());
    for item in outcomes {
        let (job, cfg, outcome) = item?;
        let stem = format!("run-{}", job.stem());
        let json_path = out.join(format!("{stem}.json"));
        let trace_path = if cfg.sim.record_traces {
            let path = out.join(format!("{stem}.csv"));
            let file = File::create(&path)
                .map_err(|e| CliError::io(format!("creating {}", path.display()), e))?;
            write_trace_csv(BufWriter::new(file), &outcome.rows)?;
            Some(path)
        } else {
            None
        };
        let report = RunReport::new(cfg, &outcome)?;
        write_json(&json_path, &report)?;
        results.push(RunResult {
            job,
            report,
            json_path,
            trace_path,
        });
    }
    Ok(results)
}

pub fn summary_table(results: &[RunResult]) -> String {
    let mut s = format!(
        "{:>5} {:<12} {:>6} {:>11} {:>10} {:>12} {:>10} {:>8}\n",
        "U", "policy", "seed", "outage", "power_W", "latency_ms", "excess_kb", "samples"
    );
    for r in results {
        let m = &r.report.metrics;
        let excess = m
            .avg_excess_kb
            .map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        s.push_str(&format!(
            "{:>5} {:<12} {:>6} {:>11.3e} {:>10.5} {:>12.4} {:>10} {:>8}\n",
            r.job.pairs,
            r.job.policy.name(),
            r.job.seed,
            m.outage_prob,
            m.avg_power_w,
            m.avg_latency_ms,
            excess,
            r.report.gpd.samples,
        ));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Simulation,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub sigma: f64,
    pub xi: f64,
    pub pooled_nll: Option<f64>,
    pub comms: CommsSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfPoint {
    pub excess: f64,
    pub empirical: f64,
    pub federated: f64,
    pub centralized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub config: ConfigFile,
    pub status: String,
    pub source: SampleSource,
    pub samples_per_learner: Vec<u64>,
    pub federated: Option<FitSummary>,
    pub centralized: Option<FitSummary>,
    pub ccdf: Vec<CcdfPoint>,
    pub version: Version,
}

/// Learner buffers for `compare-fl`: either the block maxima of one
/// simulation or i.i.d. draws from the configured GPD split evenly.
pub fn collect_buffers(
    cfg: &ConfigFile,
    source: SampleSource,
) -> CliResult<Vec<Vec<ExcessSample>>> {
    match source {
        SampleSource::Simulation => Ok(simulate(&cfg.sim)?.samples),
        SampleSource::Synthetic => {
            let syn = &cfg.experiment.synthetic;
            let truth = GpdParams::new(syn.sigma, syn.xi)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.sim.seed, &[0x5e]));
            let all = synthetic_samples(&truth, syn.samples, &mut rng);
            let per = syn.samples.div_ceil(syn.learners);
            Ok(all.chunks(per).map(<[ExcessSample]>::to_vec).collect())
        }
    }
}

fn fit_summary(fit: &FitOutcome, pooled: &[ExcessSample]) -> FitSummary {
    FitSummary {
        sigma: fit.params.sigma(),
        xi: fit.params.xi(),
        pooled_nll: fit.params.nll(pooled).ok(),
        comms: fit.ledger.into(),
    }
}

fn ccdf_points(
    pooled: &[ExcessSample],
    fed: &GpdParams,
    cen: &GpdParams,
    points: usize,
) -> Vec<CcdfPoint> {
    let mut v: Vec<f64> = pooled.iter().map(|s| s.value()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 || points == 0 {
        return Vec::new();
    }
    let sf = |p: &GpdParams, x: f64| p.sf(x).unwrap_or(0.0);
    (0..points)
        .map(|i| {
            let idx = ((i as f64 + 0.5) / points as f64 * n as f64) as usize;
            let x = v[idx.min(n - 1)];
            let above = n - v.partition_point(|&y| y <= x);
            CcdfPoint {
                excess: x,
                empirical: above as f64 / n as f64,
                federated: sf(fed, x),
                centralized: sf(cen, x),
            }
        })
        .collect()
}

pub fn compare_on_buffers(
    cfg: &ConfigFile,
    source: SampleSource,
    buffers: &[Vec<ExcessSample>],
) -> CliResult<CompareReport> {
    let samples_per_learner: Vec<u64> = buffers.iter().map(|b| b.len() as u64).collect();
    let pooled: Vec<ExcessSample> = buffers.iter().flatten().copied().collect();
    let mut report = CompareReport {
        config: cfg.clone(),
        status: "no_tail_data".into(),
        source,
        samples_per_learner,
        federated: None,
        centralized: None,
        ccdf: Vec::new(),
        version: Version::default(),
    };
    if pooled.is_empty() {
        return Ok(report);
    }
    let fl = &cfg.sim.fl;
    let init = GlobalModel::new(
        GpdParams::new(fl.init_params.sigma, fl.init_params.xi)?,
        fl.init_grad,
    );
    let rounds = cfg.experiment.compare_rounds;
    let seed = cfg.sim.seed;
    let fed = run_federated(buffers, rounds, fl.step, &init, seed)?;
    let cen = run_centralized(buffers, rounds, fl.step, &init, seed)?;
    report.ccdf = ccdf_points(
        &pooled,
        &fed.params,
        &cen.params,
        cfg.experiment.ccdf_points,
    );
    report.federated = Some(fit_summary(&fed, &pooled));
    report.centralized = Some(fit_summary(&cen, &pooled));
    report.status = "ok".into();
    Ok(report)
}

/// Fits both estimators on the same buffers and writes
/// `compare-fl-<source>-seed<seed>.json`. Returns `NoTailData` after
/// writing the report when no learner has a sample.
pub fn cmd_compare_fl(
    base: &ConfigFile,
    sel: &Selection,
    source: SampleSource,
    out: &Path,
) -> CliResult<Vec<(CompareReport, PathBuf)>> {
    let plan = plan(
        base,
        sel.preset.as_deref(),
        &sel.overrides,
        &sel.policies,
        &sel.seeds,
    )?;
    ensure_dir(out)?;
    let reports: Vec<CliResult<CompareReport>> = plan
        .jobs
        .par_iter()
        .map(|job| {
            let cfg = job.apply(&plan.config);
            let buffers = collect_buffers(&cfg, source)?;
            compare_on_buffers(&cfg, source, &buffers)
        })
        .collect();
    let tag = match source {
        SampleSource::Simulation => "sim",
        SampleSource::Synthetic => "synthetic",
    };
    let mut written = Vec::new();
    let mut empty = false;
    for (job, report) in plan.jobs.iter().zip(reports) {
        let report = report?;
        let path = out.join(format!("compare-fl-{tag}-{}.json", job.stem()));
        write_json(&path, &report)?;
        empty |= report.federated.is_none();
        written.push((report, path));
    }
    if empty {
        return Err(CliError::NoTailData(
            "no pair exceeded the queue threshold; both estimators skipped".into(),
        ));
    }
    Ok(written)
}

/// One run per (value, seed); long-format rows in job order.
pub fn cmd_sweep(
    base: &ConfigFile,
    sel: &Selection,
    param: &str,
    values: &[String],
    out: &Path,
) -> CliResult<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let key = canonical_key(param)?;
    let plan = plan(
        base,
        sel.preset.as_deref(),
        &sel.overrides,
        &sel.policies,
        &sel.seeds,
    )?;
    let policies: Vec<Policy> = {
        let mut p: Vec<Policy> = plan.jobs.iter().map(|j| j.policy).collect();
        p.dedup();
        p
    };
    if policies.len() != 1 {
        return Err(CliError::Config(
            "sweep runs a single policy; pass one --policy or sweep control.policy".into(),
        ));
    }
    let mut seeds: Vec<u64> = plan.jobs.iter().map(|j| j.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();

    let mut configs = Vec::new();
    for value in values {
        let assignment = format!("{key}={value}");
        let mut with_value = plan.config.with_overrides(&[assignment])?;
        with_value.sim.control.policy = policies[0];
        for &seed in &seeds {
            let mut cfg = with_value.clone();
            cfg.sim.seed = seed;
            cfg.validate()?;
            configs.push((value.clone(), seed, cfg));
        }
    }
    let outcomes: Vec<CliResult<SimOutcome>> = configs
        .par_iter()
        .map(|(_, _, cfg)| simulate(&cfg.sim).map_err(CliError::from))
        .collect();

    let mut rows = Vec::new();
    for ((value, seed, _), outcome) in configs.iter().zip(outcomes) {
        for (metric, metric_value) in metric_rows(&outcome?) {
            rows.push(SweepRow {
                param: key.clone(),
                value: value.clone(),
                seed: *seed,
                metric,
                metric_value,
            });
        }
    }

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let file =
        File::create(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    write_sweep_csv(BufWriter::new(file), &rows)?;
    let mut meta_config = plan.config.clone();
    meta_config.sim.control.policy = policies[0];
    let meta = SweepMeta {
        config: meta_config,
        param: key,
        values: values.to_vec(),
        seeds,
        columns: SWEEP_COLUMNS.iter().map(|c| c.to_string()).collect(),
        version: Version::default(),
    };
    write_json(&meta_path(out), &meta)?;
    Ok(rows)
}

pub fn meta_path(csv: &Path) -> PathBuf {
    let mut name = csv
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".meta.json");
    csv.with_file_name(name)
}
