//! Slot-driven simulation: mobility, radio, control, block-maxima sampling
//! and periodic tail estimation, reduced to network metrics.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::control::{decide, update_queue, update_virtual_queues, ControlParams, QueueState};
use crate::error::{Error, Result};
use crate::fed::{CommsLedger, Federation, GlobalModel, MessageLayout};
use crate::gpd::{ExcessSample, GpdParams, GpdVector};
use crate::mobility::{
    assign_zones, place_pairs, GridSpec, MobilityConfig, Point, VuePair, ZoneLayout,
};
use crate::radio::{
    channel_gain, los_class, path_loss_clamped, rate, update_interference_estimate, Endpoint,
    RadioConfig,
};
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Poisson bit count per slot.
    Poisson,
    /// Exactly the mean every slot.
    Deterministic,
    /// Poisson number of fixed-size packets per slot.
    Packets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Federated,
    Centralized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlConfig {
    pub period_slots: u64,
    pub step: GpdVector,
    pub init_params: GpdVector,
    pub init_grad: GpdVector,
    pub estimator: Estimator,
    /// Bits per unit of the fitted excess.
    pub excess_unit_bits: f64,
}

impl Default for FlConfig {
    fn default() -> Self {
        FlConfig {
            period_slots: 500,
            step: GpdVector::new(50.0, 0.1),
            init_params: GpdVector::new(50.0, 0.0),
            init_grad: GpdVector::ZERO,
            estimator: Estimator::Federated,
            excess_unit_bits: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub pairs: usize,
    pub horizon_slots: u64,
    pub warmup_fraction: f64,
    pub arrival_mean_bits: f64,
    pub arrival_process: ArrivalProcess,
    /// Packet size for [`ArrivalProcess::Packets`].
    pub packet_bits: f64,
    pub block_len_w: u64,
    pub seed: u64,
    /// Keep one row per (slot, pair).
    pub record_traces: bool,
    pub fl: FlConfig,
    pub grid: GridSpec,
    pub mobility: MobilityConfig,
    pub zones: ZoneLayout,
    pub radio: RadioConfig,
    pub control: ControlParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            pairs: 20,
            horizon_slots: 200_000,
            warmup_fraction: 0.1,
            arrival_mean_bits: 1000.0,
            arrival_process: ArrivalProcess::Poisson,
            packet_bits: 1000.0,
            block_len_w: 10,
            seed: 0,
            record_traces: false,
            fl: FlConfig::default(),
            grid: GridSpec::default(),
            mobility: MobilityConfig::default(),
            zones: ZoneLayout::default(),
            radio: RadioConfig::default(),
            control: ControlParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::config("pairs", "must be at least 1"));
        }
        if self.block_len_w == 0 {
            return Err(Error::config("block_len_w", "must be at least 1"));
        }
        if self.horizon_slots < self.block_len_w {
            return Err(Error::config(
                "horizon_slots",
                "must be at least block_len_w",
            ));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::config("warmup_fraction", "must lie in [0, 1)"));
        }
        if !(self.arrival_mean_bits >= 0.0) || !self.arrival_mean_bits.is_finite() {
            return Err(Error::config("arrival_mean_bits", "must be non-negative"));
        }
        if self.arrival_process == ArrivalProcess::Packets && !(self.packet_bits > 0.0) {
            return Err(Error::config("packet_bits", "must be positive"));
        }
        if self.fl.period_slots == 0 {
            return Err(Error::config("fl.period_slots", "must be at least 1"));
        }
        if !(self.fl.excess_unit_bits > 0.0) {
            return Err(Error::config("fl.excess_unit_bits", "must be positive"));
        }
        if !self.fl.step.is_finite() || self.fl.step.sigma < 0.0 || self.fl.step.xi < 0.0 {
            return Err(Error::config("fl.step", "must be finite and non-negative"));
        }
        if !self.fl.init_grad.is_finite() {
            return Err(Error::config("fl.init_grad", "must be finite"));
        }
        GpdParams::try_from(self.fl.init_params)
            .map_err(|_| Error::config("fl.init_params", "needs sigma > 0"))?;
        self.grid.validate()?;
        self.mobility.validate(&self.grid)?;
        self.zones.validate()?;
        self.radio.validate()?;
        self.control.validate()?;
        Ok(())
    }

    pub fn warmup_slots(&self) -> u64 {
        (self.horizon_slots as f64 * self.warmup_fraction).floor() as u64
    }
}

/// Block maxima of `(q - q0) 1(q > q0)` over consecutive windows of `w`
/// slots. Windows that never exceed `q0` yield no sample; a trailing
/// partial window is dropped.
pub fn sample_block_maxima(trace: &[f64], w: usize, q0: f64) -> Vec<f64> {
    if w == 0 {
        return Vec::new();
    }
    trace
        .chunks_exact(w)
        .filter_map(|block| {
            let m = block
                .iter()
                .map(|&q| if q > q0 { q - q0 } else { 0.0 })
                .fold(0.0, f64::max);
            (m > 0.0).then_some(m)
        })
        .collect()
}

/// One (slot, pair) observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRow {
    pub slot: u64,
    pub pair: usize,
    pub q_bits: f64,
    pub power_w: f64,
    pub rate_bits: f64,
    pub x_m: f64,
    pub y_m: f64,
    pub zone: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub avg_power_w: f64,
    pub avg_latency_ms: f64,
    pub outage_prob: f64,
    /// Absent when no observation exceeded the threshold.
    pub avg_excess_kb: Option<f64>,
    pub mean_queue_bits: f64,
    /// Pairs whose queue exceeded the threshold at least once.
    pub vues_exceeding_q0: usize,
    pub slots_measured: u64,
    /// Block-maxima samples per pair at the end of the run.
    pub samples_per_pair: Vec<u64>,
    pub comms: CommsLedger,
    /// Messages that carried raw samples off a pair.
    pub raw_sample_messages: u64,
}

/// Streaming reduction shared by [`run`] and [`compute_metrics`].
#[derive(Debug, Clone)]
struct Accumulator {
    q0: f64,
    count: u64,
    power: f64,
    queue: f64,
    outages: u64,
    excess: f64,
    exceeded: Vec<bool>,
}

impl Accumulator {
    fn new(pairs: usize, q0: f64) -> Self {
        Accumulator {
            q0,
            count: 0,
            power: 0.0,
            queue: 0.0,
            outages: 0,
            excess: 0.0,
            exceeded: vec![false; pairs],
        }
    }

    fn push(&mut self, pair: usize, q: f64, power: f64) {
        self.count += 1;
        self.power += power;
        self.queue += q;
        if q > self.q0 {
            self.outages += 1;
            self.excess += q - self.q0;
            self.exceeded[pair] = true;
        }
    }

    fn finish(&self, cfg: &SimConfig) -> Result<MetricsReport> {
        if self.count == 0 {
            return Err(Error::EmptySamples);
        }
        let n = self.count as f64;
        let mean_queue = self.queue / n;
        let slot_ms = cfg.radio.slot_s * 1e3;
        let latency = if cfg.arrival_mean_bits > 0.0 {
            mean_queue / cfg.arrival_mean_bits * slot_ms
        } else {
            0.0
        };
        Ok(MetricsReport {
            avg_power_w: self.power / n,
            avg_latency_ms: latency,
            outage_prob: self.outages as f64 / n,
            avg_excess_kb: (self.outages > 0).then(|| self.excess / self.outages as f64 / 1e3),
            mean_queue_bits: mean_queue,
            vues_exceeding_q0: self.exceeded.iter().filter(|&&e| e).count(),
            slots_measured: self.count / self.exceeded.len().max(1) as u64,
            ..MetricsReport::default()
        })
    }
}

/// Metrics over the post-warmup rows of a recorded trace.
pub fn compute_metrics(rows: &[SlotRow], cfg: &SimConfig) -> Result<MetricsReport> {
    let warmup = cfg.warmup_slots();
    let mut acc = Accumulator::new(cfg.pairs, cfg.control.q0_bits);
    for r in rows.iter().filter(|r| r.slot >= warmup) {
        if r.pair >= cfg.pairs {
            return Err(Error::LengthMismatch {
                expected: cfg.pairs,
                actual: r.pair + 1,
            });
        }
        acc.push(r.pair, r.q_bits, r.power_w);
    }
    acc.finish(cfg)
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub metrics: MetricsReport,
    /// Final tail model used by the controllers.
    pub gpd: GpdParams,
    pub fl_rounds: u64,
    /// Network-mean queue per slot, whole horizon.
    pub mean_queue_per_slot: Vec<f64>,
    /// Block-maxima buffers per pair, in fitted units.
    pub samples: Vec<Vec<ExcessSample>>,
    /// Per-(slot, pair) rows when requested.
    pub rows: Vec<SlotRow>,
    /// Estimate after every FL refresh that had data.
    pub gpd_trace: Vec<GpdRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdRecord {
    pub slot: u64,
    pub sigma: f64,
    pub xi: f64,
    pub samples: u64,
}

struct PairState {
    kin: VuePair,
    queue: QueueState,
    interference_est: Vec<f64>,
    mobility_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
    interference_rng: ChaCha8Rng,
    arrivals_rng: ChaCha8Rng,
    block_max: f64,
    samples: Vec<ExcessSample>,
    /// Samples already uploaded in centralized mode.
    uploaded: usize,
}

enum TailEstimator {
    Federated(Federation),
    Centralized {
        fed: Federation,
        pooled: Vec<ExcessSample>,
        ledger: CommsLedger,
    },
}

impl TailEstimator {
    fn new(cfg: &SimConfig) -> Result<Self> {
        let init = GlobalModel::new(GpdParams::try_from(cfg.fl.init_params)?, cfg.fl.init_grad);
        let fed = Federation::new(init, cfg.fl.step, cfg.seed, MessageLayout::default());
        Ok(match cfg.fl.estimator {
            Estimator::Federated => TailEstimator::Federated(fed),
            Estimator::Centralized => TailEstimator::Centralized {
                fed,
                pooled: Vec::new(),
                ledger: CommsLedger::default(),
            },
        })
    }

    /// One refresh. Returns the new estimate, or `None` when there is
    /// still no data anywhere.
    fn refresh(&mut self, pairs: &mut [PairState]) -> Result<Option<GpdParams>> {
        if pairs.iter().all(|p| p.samples.is_empty()) {
            return Ok(None);
        }
        let layout = MessageLayout::default();
        match self {
            TailEstimator::Federated(fed) => {
                let buffers: Vec<&[ExcessSample]> =
                    pairs.iter().map(|p| p.samples.as_slice()).collect();
                Ok(Some(fed.round(&buffers)?.params))
            }
            TailEstimator::Centralized {
                fed,
                pooled,
                ledger,
            } => {
                for p in pairs.iter_mut() {
                    let fresh = &p.samples[p.uploaded..];
                    if !fresh.is_empty() {
                        ledger.uplink_bytes += fresh.len() as u64 * layout.raw_sample();
                        ledger.raw_sample_messages += 1;
                        pooled.extend_from_slice(fresh);
                        p.uploaded = p.samples.len();
                    }
                }
                let est = fed.round(core::slice::from_ref(pooled))?;
                ledger.downlink_bytes += pairs.len() as u64 * layout.params_downlink();
                ledger.rounds += 1;
                Ok(Some(est.params))
            }
        }
    }

    fn ledger(&self) -> CommsLedger {
        match self {
            TailEstimator::Federated(fed) => *fed.ledger(),
            TailEstimator::Centralized { ledger, .. } => *ledger,
        }
    }

    fn rounds(&self) -> u64 {
        match self {
            TailEstimator::Federated(fed) => fed.rounds_done(),
            TailEstimator::Centralized { fed, .. } => fed.rounds_done(),
        }
    }
}

fn draw_arrivals(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> f64 {
    let mean = cfg.arrival_mean_bits;
    if mean <= 0.0 {
        return 0.0;
    }
    match cfg.arrival_process {
        ArrivalProcess::Deterministic => mean,
        ArrivalProcess::Poisson => Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean),
        ArrivalProcess::Packets => {
            let rate = mean / cfg.packet_bits;
            let n = Poisson::new(rate).map(|d| d.sample(rng)).unwrap_or(rate);
            n * cfg.packet_bits
        }
    }
}

fn mean_excess_bits(params: &GpdParams, unit: f64) -> f64 {
    // xi is kept below 1 by projection, so the mean exists
    params.mean_excess().map(|m| m * unit).unwrap_or(f64::MAX)
}

/// Runs the configured experiment.
pub fn run(cfg: &SimConfig) -> Result<SimOutcome> {
    cfg.validate()?;
    let u_count = cfg.pairs;
    let seed = cfg.seed;
    let total_rbs = cfg.zones.total_rbs;
    let q0 = cfg.control.q0_bits;
    let dt = cfg.radio.slot_s;
    let warmup = cfg.warmup_slots();
    let w = cfg.block_len_w;
    let unit = cfg.fl.excess_unit_bits;

    let mut placement_rng = stream(seed, &[domain::PLACEMENT]);
    let kinematics = place_pairs(&cfg.grid, &cfg.mobility, u_count, &mut placement_rng);
    let mut pairs: Vec<PairState> = kinematics
        .into_iter()
        .enumerate()
        .map(|(u, kin)| {
            let id = u as u64;
            PairState {
                kin,
                queue: QueueState::default(),
                interference_est: vec![0.0; total_rbs],
                mobility_rng: stream(seed, &[domain::MOBILITY, id]),
                fading_rng: stream(seed, &[domain::FADING, id, 0]),
                interference_rng: stream(seed, &[domain::FADING, id, 1]),
                arrivals_rng: stream(seed, &[domain::ARRIVALS, id]),
                block_max: 0.0,
                samples: Vec::new(),
                uploaded: 0,
            }
        })
        .collect();

    let mut estimator = TailEstimator::new(cfg)?;
    let mut gpd = GpdParams::try_from(cfg.fl.init_params)?;
    let mut gpd_mean = mean_excess_bits(&gpd, unit);
    let mut gpd_trace = Vec::new();

    let mut acc = Accumulator::new(u_count, q0);
    let mut mean_queue_per_slot = Vec::with_capacity(cfg.horizon_slots as usize);
    let mut rows = Vec::new();

    let gap = cfg.mobility.pair_gap_m;
    let mut tx_pos = vec![Point::default(); u_count];
    let mut rx_pos = vec![Point::default(); u_count];
    let mut powers: Vec<Vec<f64>> = vec![Vec::new(); u_count];
    let mut est_buf = Vec::with_capacity(total_rbs);
    let mut measured = Vec::with_capacity(total_rbs);

    for slot in 0..cfg.horizon_slots {
        // mobility and zones
        for p in pairs.iter_mut() {
            p.kin
                .advance(&cfg.grid, &cfg.mobility, dt, &mut p.mobility_rng);
        }
        for (u, p) in pairs.iter().enumerate() {
            tx_pos[u] = p.kin.tx_pos(&cfg.grid);
            rx_pos[u] = p.kin.rx_pos(&cfg.grid, gap);
        }
        let zones = assign_zones(&tx_pos, &cfg.grid, &cfg.zones)?;
        let colors: Vec<usize> = (0..u_count)
            .map(|u| zones.color(zones.zone_of[u]))
            .collect();

        // decisions on own gains and estimated interference
        let mut own_gains = Vec::with_capacity(u_count);
        for (u, p) in pairs.iter_mut().enumerate() {
            let rbs = zones.pair_rbs(u);
            let own = Endpoint {
                pos: tx_pos[u],
                lane: p.kin.lane,
            };
            let dst = Endpoint {
                pos: rx_pos[u],
                lane: p.kin.lane,
            };
            let class = los_class(&own, &dst, &cfg.grid, cfg.radio.d0_m);
            let (dx, dy) = cfg.grid.delta(tx_pos[u], rx_pos[u]);
            let pl = path_loss_clamped(dx, dy, class, &cfg.radio);
            let gain = channel_gain(pl, rbs.len(), &cfg.radio, &mut p.fading_rng);
            est_buf.clear();
            est_buf.extend(rbs.iter().map(|&rb| p.interference_est[rb]));
            let d = decide(
                &p.queue,
                &cfg.control,
                &gain,
                &est_buf,
                gpd_mean,
                &cfg.radio,
            )?;
            powers[u] = d.powers;
            own_gains.push(gain);
        }

        // true interference, realized service, queues
        let mut slot_queue = 0.0;
        for u in 0..u_count {
            let rbs = zones.pair_rbs(u);
            measured.clear();
            measured.resize(rbs.len(), 0.0);
            let rx = Endpoint {
                pos: rx_pos[u],
                lane: pairs[u].kin.lane,
            };
            for v in 0..u_count {
                if v == u || colors[v] != colors[u] || powers[v].iter().all(|&x| x == 0.0) {
                    continue;
                }
                let tx = Endpoint {
                    pos: tx_pos[v],
                    lane: pairs[v].kin.lane,
                };
                let class = los_class(&tx, &rx, &cfg.grid, cfg.radio.d0_m);
                let (dx, dy) = cfg.grid.delta(tx_pos[v], rx_pos[u]);
                let pl = path_loss_clamped(dx, dy, class, &cfg.radio);
                let rng = &mut pairs[u].interference_rng;
                for (k, &pw) in powers[v].iter().enumerate() {
                    if pw > 0.0 {
                        let fade: f64 = if cfg.radio.fading {
                            Exp1.sample(rng)
                        } else {
                            1.0
                        };
                        measured[k] += pl * fade * pw;
                    }
                }
            }

            let offered = rate(&own_gains[u], &powers[u], &measured, &cfg.radio)?;
            let p = &mut pairs[u];
            let arrivals = draw_arrivals(cfg, &mut p.arrivals_rng);
            let (q_next, _served) = update_queue(p.queue.q, arrivals, offered);
            p.queue = update_virtual_queues(&p.queue, q_next, &cfg.control, gpd_mean);

            est_buf.clear();
            est_buf.extend(rbs.iter().map(|&rb| p.interference_est[rb]));
            let updated = update_interference_estimate(
                &est_buf,
                &measured,
                cfg.radio.interference_ewma_beta,
            )?;
            for (&rb, v) in rbs.iter().zip(updated) {
                p.interference_est[rb] = v;
            }

            let excess = if q_next > q0 { q_next - q0 } else { 0.0 };
            p.block_max = p.block_max.max(excess);
            if (slot + 1) % w == 0 {
                if p.block_max > 0.0 {
                    p.samples.push(ExcessSample::new(p.block_max / unit)?);
                }
                p.block_max = 0.0;
            }

            let power: f64 = powers[u].iter().sum();
            if slot >= warmup {
                acc.push(u, q_next, power);
            }
            if cfg.record_traces {
                rows.push(SlotRow {
                    slot,
                    pair: u,
                    q_bits: q_next,
                    power_w: power,
                    rate_bits: offered,
                    x_m: tx_pos[u].x,
                    y_m: tx_pos[u].y,
                    zone: zones.zone_of[u],
                });
            }
            slot_queue += q_next;
        }
        mean_queue_per_slot.push(slot_queue / u_count as f64);

        if (slot + 1) % cfg.fl.period_slots == 0 {
            if let Some(params) = estimator.refresh(&mut pairs)? {
                gpd = params;
                gpd_mean = mean_excess_bits(&gpd, unit);
                gpd_trace.push(GpdRecord {
                    slot: slot + 1,
                    sigma: gpd.sigma(),
                    xi: gpd.xi(),
                    samples: pairs.iter().map(|p| p.samples.len() as u64).sum(),
                });
            }
        }
    }

    let mut metrics = acc.finish(cfg)?;
    metrics.samples_per_pair = pairs.iter().map(|p| p.samples.len() as u64).collect();
    metrics.comms = estimator.ledger();
    metrics.raw_sample_messages = metrics.comms.raw_sample_messages;
    Ok(SimOutcome {
        metrics,
        gpd,
        fl_rounds: estimator.rounds(),
        mean_queue_per_slot,
        samples: pairs.into_iter().map(|p| p.samples).collect(),
        rows,
        gpd_trace,
    })
}
