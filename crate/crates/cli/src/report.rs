use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use urllc_core::fed::comms_comparison;
use urllc_core::sim::{SimOutcome, SlotRow};
use urllc_core::{CommsLedger, GpdParams, MessageLayout, MetricsReport};

use crate::config::ConfigFile;
use crate::error::{CliError, CliResult};

pub const REPORT_SCHEMA: u32 = 1;
pub const TRACE_SCHEMA: &str = "trace-v1";
pub const SWEEP_SCHEMA: &str = "sweep-v1";

pub const TRACE_COLUMNS: [&str; 8] = [
    "slot",
    "pair",
    "q_bits",
    "power_w",
    "rate_bits",
    "x_m",
    "y_m",
    "zone",
];
pub const SWEEP_COLUMNS: [&str; 5] = ["param", "value", "seed", "metric", "metric_value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Version {
    pub tool: String,
    pub report_schema: u32,
    pub trace_schema: String,
    pub sweep_schema: String,
}

impl Default for Version {
    fn default() -> Self {
        Version {
            tool: env!("CARGO_PKG_VERSION").to_string(),
            report_schema: REPORT_SCHEMA,
            trace_schema: TRACE_SCHEMA.to_string(),
            sweep_schema: SWEEP_SCHEMA.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpdSummary {
    pub sigma: f64,
    pub xi: f64,
    /// In the fitting unit (`sim.fl.excess_unit_bits`).
    pub mean_excess: Option<f64>,
    pub fl_rounds: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommsSummary {
    pub ledger: CommsLedger,
    pub total_bytes: u64,
}

impl From<CommsLedger> for CommsSummary {
    fn from(ledger: CommsLedger) -> Self {
        CommsSummary {
            total_bytes: ledger.total_bytes(),
            ledger,
        }
    }
}

/// What the run's tail fitting cost against uploading every sample once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ByteComparison {
    pub rounds: u64,
    pub samples: u64,
    pub federated_bytes: u64,
    pub centralized_bytes: u64,
    /// `1 - federated/centralized`; negative when federated costs more.
    pub federated_savings: f64,
}

impl ByteComparison {
    pub fn new(per_pair_samples: &[u64], rounds: u64) -> CliResult<Self> {
        let layout = MessageLayout::default();
        let (fl, cen) =
            comms_comparison(per_pair_samples.len(), per_pair_samples, rounds, &layout)?;
        Ok(ByteComparison {
            rounds,
            samples: per_pair_samples.iter().sum(),
            federated_bytes: fl,
            centralized_bytes: cen,
            federated_savings: 1.0 - fl as f64 / cen as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunComms {
    pub ledger: CommsLedger,
    pub total_bytes: u64,
    pub comparison: ByteComparison,
}

/// Output of one `run` job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ConfigFile,
    pub metrics: MetricsReport,
    pub gpd: GpdSummary,
    pub comms: RunComms,
    pub version: Version,
}

impl RunReport {
    pub fn new(config: ConfigFile, outcome: &SimOutcome) -> CliResult<Self> {
        let m = &outcome.metrics;
        Ok(RunReport {
            gpd: gpd_summary(&outcome.gpd, outcome.fl_rounds, m),
            comms: RunComms {
                ledger: m.comms,
                total_bytes: m.comms.total_bytes(),
                comparison: ByteComparison::new(&m.samples_per_pair, m.comms.rounds)?,
            },
            metrics: m.clone(),
            config,
            version: Version::default(),
        })
    }
}

fn gpd_summary(p: &GpdParams, rounds: u64, m: &MetricsReport) -> GpdSummary {
    GpdSummary {
        sigma: p.sigma(),
        xi: p.xi(),
        mean_excess: p.mean_excess().ok(),
        fl_rounds: rounds,
        samples: m.samples_per_pair.iter().sum(),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Other(anyhow::anyhow!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn write_trace_csv<W: Write>(out: W, rows: &[SlotRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Other(anyhow::anyhow!("writing trace: {e}"));
    w.write_record(TRACE_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record(&[
            r.slot.to_string(),
            r.pair.to_string(),
            r.q_bits.to_string(),
            r.power_w.to_string(),
            r.rate_bits.to_string(),
            r.x_m.to_string(),
            r.y_m.to_string(),
            r.zone.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io("flushing trace", e))
}

/// One long-format sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub metric: &'static str,
    pub metric_value: f64,
}

/// Flattens a run into named scalar metrics. Absent values are omitted.
pub fn metric_rows(outcome: &SimOutcome) -> Vec<(&'static str, f64)> {
    let m = &outcome.metrics;
    let mut rows = vec![
        ("avg_power_w", m.avg_power_w),
        ("avg_latency_ms", m.avg_latency_ms),
        ("outage_prob", m.outage_prob),
    ];
    if let Some(x) = m.avg_excess_kb {
        rows.push(("avg_excess_kb", x));
    }
    rows.extend([
        ("mean_queue_bits", m.mean_queue_bits),
        ("vues_exceeding_q0", m.vues_exceeding_q0 as f64),
        (
            "samples_total",
            m.samples_per_pair.iter().sum::<u64>() as f64,
        ),
        ("uplink_bytes", m.comms.uplink_bytes as f64),
        ("downlink_bytes", m.comms.downlink_bytes as f64),
        ("total_bytes", m.comms.total_bytes() as f64),
        ("raw_sample_messages", m.raw_sample_messages as f64),
        ("gpd_sigma", outcome.gpd.sigma()),
        ("gpd_xi", outcome.gpd.xi()),
    ]);
    rows
}

pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::Other(anyhow::anyhow!("writing sweep: {e}"));
    w.write_record(SWEEP_COLUMNS).map_err(err)?;
    for r in rows {
        w.write_record(&[
            r.param.clone(),
            r.value.clone(),
            r.seed.to_string(),
            r.metric.to_string(),
            r.metric_value.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io("flushing sweep", e))
}

/// Sidecar written next to a sweep CSV so the table carries its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub config: ConfigFile,
    pub param: String,
    pub values: Vec<String>,
    pub seeds: Vec<u64>,
    pub columns: Vec<String>,
    pub version: Version,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> SlotRow {
        SlotRow {
            slot: 3,
            pair: 1,
            q_bits: 1500.0,
            power_w: 0.01,
            rate_bits: 900.5,
            x_m: 10.0,
            y_m: 20.0,
            zone: 2,
        }
    }

    #[test]
    fn trace_header_is_versioned_schema() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRACE_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "3,1,1500,0.01,900.5,10,20,2");
        assert_eq!(TRACE_SCHEMA, "trace-v1");
    }

    #[test]
    fn sweep_header_is_versioned_schema() {
        let mut buf = Vec::new();
        let r = SweepRow {
            param: "sim.pairs".into(),
            value: "20".into(),
            seed: 0,
            metric: "outage_prob",
            metric_value: 0.5,
        };
        write_sweep_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "param,value,seed,metric,metric_value\nsim.pairs,20,0,outage_prob,0.5\n"
        );
        assert_eq!(SWEEP_SCHEMA, "sweep-v1");
    }
}
