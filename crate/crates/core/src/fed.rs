//! Federated and centralized maximum-likelihood fitting of the GPD tail.
//!
//! Learners (vehicle pairs) run one SVRG epoch over their own block-maxima
//! samples per round and upload `(gradient, parameters, sample count)`.
//! The roadside unit averages the parameters weighted by sample count and
//! broadcasts the result. The centralized reference runs the same SVRG
//! dynamics on the pooled samples at the roadside unit, so with a single
//! learner both paths produce bit-identical estimates.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpd::{project, ExcessSample, GpdParams, GpdVector};
use crate::rng::{domain, stream};

/// Byte sizes of the wire messages used for communication accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLayout {
    /// One IEEE-754 binary64 scalar.
    pub scalar_bytes: u64,
    /// One unsigned sample count.
    pub count_bytes: u64,
}

impl Default for MessageLayout {
    fn default() -> Self {
        MessageLayout {
            scalar_bytes: 8,
            count_bytes: 8,
        }
    }
}

impl MessageLayout {
    /// Gradient (2) + parameters (2) + count.
    pub fn fl_uplink(&self) -> u64 {
        4 * self.scalar_bytes + self.count_bytes
    }

    /// Global gradient (2) + parameters (2) + total count.
    pub fn fl_downlink(&self) -> u64 {
        4 * self.scalar_bytes + self.count_bytes
    }

    /// One raw excess sample.
    pub fn raw_sample(&self) -> u64 {
        self.scalar_bytes
    }

    /// Parameters only.
    pub fn params_downlink(&self) -> u64 {
        2 * self.scalar_bytes
    }
}

/// Counters for everything exchanged between learners and the aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommsLedger {
    pub uplink_bytes: u64,
    pub downlink_bytes: u64,
    pub rounds: u64,
    /// Messages that carried raw queue samples. Stays zero in federated mode.
    pub raw_sample_messages: u64,
}

impl CommsLedger {
    pub fn total_bytes(&self) -> u64 {
        self.uplink_bytes + self.downlink_bytes
    }

    pub fn absorb(&mut self, other: &CommsLedger) {
        self.uplink_bytes += other.uplink_bytes;
        self.downlink_bytes += other.downlink_bytes;
        self.rounds += other.rounds;
        self.raw_sample_messages += other.raw_sample_messages;
    }
}

/// What a learner uploads after its local epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalModel {
    /// Sum of per-sample NLL gradients over the local samples, at `params`.
    pub grad: GpdVector,
    pub params: GpdParams,
    pub sample_count: u64,
}

/// What the aggregator broadcasts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalModel {
    /// Pooled mean gradient, used as the SVRG anchor.
    pub grad: GpdVector,
    pub params: GpdParams,
    pub total_samples: u64,
}

impl GlobalModel {
    pub fn new(params: GpdParams, grad: GpdVector) -> Self {
        GlobalModel {
            grad,
            params,
            total_samples: 0,
        }
    }
}

/// Weighted model averaging.
///
/// `params = prev + Σ κ_u (d_u - prev)` with `κ_u = K_u / ΣK`, the gradient
/// is `ΣK`-normalized, and the result is projected onto `σ > 0, ξ < 1`.
pub fn aggregate(previous: &GlobalModel, locals: &[LocalModel]) -> Result<GlobalModel> {
    let total: u64 = locals.iter().map(|m| m.sample_count).sum();
    if total == 0 {
        return Err(Error::NoData);
    }
    let total_f = total as f64;
    let prev = GpdVector::from(previous.params);
    let mut shift = GpdVector::ZERO;
    let mut grad = GpdVector::ZERO;
    for m in locals {
        let kappa = m.sample_count as f64 / total_f;
        shift = shift + (GpdVector::from(m.params) - prev) * kappa;
        grad = grad + m.grad;
    }
    Ok(GlobalModel {
        grad: grad * (1.0 / total_f),
        params: project(prev + shift, &[]),
        total_samples: total,
    })
}

/// Largest single update of σ, relative to σ.
pub const MAX_SIGMA_STEP: f64 = 0.5;
/// Largest single update of ξ.
pub const MAX_XI_STEP: f64 = 0.5;

/// Shrinks an update (keeping its direction) so that neither component
/// exceeds its trust region. Near the support edge the per-sample gradient
/// of the largest sample is singular and a raw step would leave the basin.
fn limit_step(step: GpdVector, at: GpdParams) -> GpdVector {
    let mut scale: f64 = 1.0;
    let max_sigma = MAX_SIGMA_STEP * at.sigma();
    if step.sigma.abs() > max_sigma {
        scale = scale.min(max_sigma / step.sigma.abs());
    }
    if step.xi.abs() > MAX_XI_STEP {
        scale = scale.min(MAX_XI_STEP / step.xi.abs());
    }
    step * scale
}

/// One local SVRG pass over `samples`, starting from the broadcast model.
///
/// `global.grad` must be the network gradient evaluated at `grad_point`,
/// which serves as the variance-reduction anchor. The uploaded gradient is
/// taken at the broadcast point so the next round can use it as its anchor.
/// Returns `None` when the learner has nothing to contribute.
pub fn local_svrg_epoch<R: Rng + ?Sized>(
    samples: &[ExcessSample],
    global: &GlobalModel,
    grad_point: GpdParams,
    step: GpdVector,
    rng: &mut R,
) -> Result<Option<LocalModel>> {
    if samples.is_empty() {
        return Ok(None);
    }
    let k = samples.len();
    let local_step = step * (1.0 / k as f64);
    // the broadcast point may lie outside this learner's support
    let start = project(global.params.into(), samples);
    let anchor = project(grad_point.into(), samples);
    let mut current = start;

    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(rng);
    for &i in &order {
        let s = samples[i];
        let direction = current.nll_grad(s)? - anchor.nll_grad(s)? + global.grad;
        let candidate =
            GpdVector::from(current) - limit_step(direction.scale_by(local_step), current);
        current = project(candidate, samples);
    }
    // a near-singular anchor gradient is constant over the epoch, so the
    // per-step limit alone would let K steps compound
    let moved = limit_step(GpdVector::from(current) - GpdVector::from(start), start);
    current = project(GpdVector::from(start) + moved, samples);

    Ok(Some(LocalModel {
        grad: start.nll_grad_sum(samples)?,
        params: current,
        sample_count: k as u64,
    }))
}

/// Estimate after one round together with the pooled NLL there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u64,
    pub params: GpdParams,
    /// `None` when the parameters exclude some pooled sample from the support.
    pub pooled_nll: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub params: GpdParams,
    pub global: GlobalModel,
    pub ledger: CommsLedger,
    pub trace: Vec<RoundRecord>,
}

/// Persistent federated state, advanced one round at a time.
///
/// The simulator keeps one of these alive across FL periods; the batch
/// entry points below construct one and loop.
#[derive(Debug, Clone)]
pub struct Federation {
    global: GlobalModel,
    /// Where `global.grad` was evaluated: the broadcast before `global`.
    grad_point: GpdParams,
    locals: Vec<LocalModel>,
    step: GpdVector,
    seed: u64,
    layout: MessageLayout,
    round: u64,
    ledger: CommsLedger,
}

impl Federation {
    pub fn new(init: GlobalModel, step: GpdVector, seed: u64, layout: MessageLayout) -> Self {
        Federation {
            global: init,
            grad_point: init.params,
            locals: Vec::new(),
            step,
            seed,
            layout,
            round: 0,
            ledger: CommsLedger::default(),
        }
    }

    pub fn ledger(&self) -> &CommsLedger {
        &self.ledger
    }

    pub fn rounds_done(&self) -> u64 {
        self.round
    }

    /// The aggregator's current estimate: the broadcast model averaged with
    /// the most recent uploads.
    pub fn estimate(&self) -> Result<GlobalModel> {
        if self.locals.is_empty() {
            Ok(self.global)
        } else {
            aggregate(&self.global, &self.locals)
        }
    }

    /// Aggregate → broadcast → local epochs → collect.
    ///
    /// A round in which every learner abstains leaves the estimate unchanged.
    pub fn round<S: AsRef<[ExcessSample]>>(&mut self, learners: &[S]) -> Result<GlobalModel> {
        if !self.locals.is_empty() {
            // uploads carry gradients at the broadcast they started from
            let next = aggregate(&self.global, &self.locals)?;
            self.grad_point = self.global.params;
            self.global = next;
        }
        self.ledger.downlink_bytes += learners.len() as u64 * self.layout.fl_downlink();

        let mut uploads = Vec::with_capacity(learners.len());
        for (u, samples) in learners.iter().enumerate() {
            let mut rng = stream(self.seed, &[domain::LEARNER, u as u64, self.round]);
            if let Some(local) = local_svrg_epoch(
                samples.as_ref(),
                &self.global,
                self.grad_point,
                self.step,
                &mut rng,
            )? {
                self.ledger.uplink_bytes += self.layout.fl_uplink();
                uploads.push(local);
            }
        }
        self.locals = uploads;
        self.round += 1;
        self.ledger.rounds += 1;
        self.estimate()
    }
}

fn pooled_nll(params: &GpdParams, pooled: &[ExcessSample]) -> Option<f64> {
    if pooled.is_empty() {
        return None;
    }
    params.nll(pooled).ok()
}

fn fit_rounds<S: AsRef<[ExcessSample]>>(
    learners: &[S],
    pooled: &[ExcessSample],
    rounds: usize,
    step: GpdVector,
    init: &GlobalModel,
    seed: u64,
    layout: MessageLayout,
) -> Result<(GlobalModel, CommsLedger, Vec<RoundRecord>)> {
    let mut fed = Federation::new(*init, step, seed, layout);
    let mut trace = Vec::with_capacity(rounds);
    let mut current = *init;
    for _ in 0..rounds {
        current = fed.round(learners)?;
        trace.push(RoundRecord {
            round: fed.rounds_done(),
            params: current.params,
            pooled_nll: pooled_nll(&current.params, pooled),
        });
    }
    Ok((current, fed.ledger, trace))
}

fn pool<S: AsRef<[ExcessSample]>>(learners: &[S]) -> Vec<ExcessSample> {
    learners
        .iter()
        .flat_map(|s| s.as_ref().iter().copied())
        .collect()
}

/// Federated MLE: each learner keeps its samples.
pub fn run_federated<S: AsRef<[ExcessSample]>>(
    learner_samples: &[S],
    rounds: usize,
    step: GpdVector,
    init: &GlobalModel,
    seed: u64,
) -> Result<FitOutcome> {
    let pooled = pool(learner_samples);
    let (global, ledger, trace) = fit_rounds(
        learner_samples,
        &pooled,
        rounds,
        step,
        init,
        seed,
        MessageLayout::default(),
    )?;
    Ok(FitOutcome {
        params: global.params,
        global,
        ledger,
        trace,
    })
}

/// Centralized MLE: every learner uploads its raw samples once and the
/// aggregator runs SVRG on the pooled set, then broadcasts the parameters.
pub fn run_centralized<S: AsRef<[ExcessSample]>>(
    learner_samples: &[S],
    rounds: usize,
    step: GpdVector,
    init: &GlobalModel,
    seed: u64,
) -> Result<FitOutcome> {
    let layout = MessageLayout::default();
    let pooled = pool(learner_samples);
    let (global, _, trace) = fit_rounds(
        core::slice::from_ref(&pooled),
        &pooled,
        rounds,
        step,
        init,
        seed,
        layout,
    )?;
    let mut ledger = CommsLedger {
        rounds: rounds as u64,
        ..CommsLedger::default()
    };
    for samples in learner_samples {
        let k = samples.as_ref().len() as u64;
        if k > 0 {
            ledger.uplink_bytes += k * layout.raw_sample();
            ledger.raw_sample_messages += 1;
        }
        ledger.downlink_bytes += layout.params_downlink();
    }
    Ok(FitOutcome {
        params: global.params,
        global,
        ledger,
        trace,
    })
}

/// Closed-form byte totals `(federated, centralized)` for `rounds` FL
/// rounds versus a one-shot upload of every sample plus one parameter
/// broadcast. Learners with no samples abstain from the FL uplink.
pub fn comms_comparison(
    num_learners: usize,
    per_learner_samples: &[u64],
    rounds: u64,
    layout: &MessageLayout,
) -> Result<(u64, u64)> {
    if per_learner_samples.len() != num_learners {
        return Err(Error::LengthMismatch {
            expected: num_learners,
            actual: per_learner_samples.len(),
        });
    }
    let contributors = per_learner_samples.iter().filter(|&&k| k > 0).count() as u64;
    let u = num_learners as u64;
    let fl = rounds * (u * layout.fl_downlink() + contributors * layout.fl_uplink());
    let total_k: u64 = per_learner_samples.iter().sum();
    let centralized = total_k * layout.raw_sample() + u * layout.params_downlink();
    Ok((fl, centralized))
}

/// Draws `count` i.i.d. GPD samples by inversion.
pub fn synthetic_samples<R: Rng + ?Sized>(
    params: &GpdParams,
    count: usize,
    rng: &mut R,
) -> Vec<ExcessSample> {
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            ExcessSample::new(params.quantile(u)).expect("quantile of u in [0,1) is finite")
        })
        .collect()
}
