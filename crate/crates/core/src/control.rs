//! Per-pair queue dynamics, the drift-plus-penalty weight and the
//! water-filling power allocation, with the three baseline policies.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{LinkGain, RadioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Proposed,
    Baseline1,
    Baseline2,
    FixedPower,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::FixedPower,
        Policy::Baseline1,
        Policy::Baseline2,
        Policy::Proposed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::Baseline1 => "baseline1",
            Policy::Baseline2 => "baseline2",
            Policy::FixedPower => "fixed_power",
        }
    }

    pub fn parse(s: &str) -> Option<Policy> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "proposed" => Some(Policy::Proposed),
            "baseline1" | "b1" => Some(Policy::Baseline1),
            "baseline2" | "b2" => Some(Policy::Baseline2),
            "fixed_power" | "fixed" | "fixedpower" => Some(Policy::FixedPower),
            _ => None,
        }
    }
}

/// Physical queue `q` and the two virtual queues, all in bits.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueState {
    pub q: f64,
    pub upsilon: f64,
    pub a_vq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlParams {
    /// Drift-plus-penalty tradeoff weight.
    pub v: f64,
    pub epsilon: f64,
    /// Queue threshold, bits.
    pub q0_bits: f64,
    pub policy: Policy,
    pub fixed_power_w: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            v: DEFAULT_V,
            epsilon: 0.001,
            q0_bits: 34_720.0,
            policy: Policy::Proposed,
            fixed_power_w: 0.1,
        }
    }
}

/// Default tradeoff weight, in bit-weighted units per watt.
pub const DEFAULT_V: f64 = 1e11;

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.v >= 0.0) || !self.v.is_finite() {
            return Err(Error::config("control.v", "must be non-negative"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("control.epsilon", "must lie in (0, 1)"));
        }
        if !(self.q0_bits > 0.0) || !self.q0_bits.is_finite() {
            return Err(Error::config("control.q0_bits", "must be positive"));
        }
        if !(self.fixed_power_w >= 0.0) || !self.fixed_power_w.is_finite() {
            return Err(Error::config(
                "control.fixed_power_w",
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Returns `(q', served)` with `q' = [q + a - r]⁺` and `served = min(r, q + a)`.
pub fn update_queue(q: f64, arrivals: f64, offered: f64) -> (f64, f64) {
    let avail = q + arrivals;
    let served = offered.min(avail).max(0.0);
    ((avail - served).max(0.0), served)
}

fn indicator(q: f64, q0: f64) -> f64 {
    if q > q0 {
        1.0
    } else {
        0.0
    }
}

/// Virtual-queue update. The indicator is evaluated at the pre-update
/// backlog `state.q`; `q_next` carries the post-update backlog.
pub fn update_virtual_queues(
    state: &QueueState,
    q_next: f64,
    params: &ControlParams,
    gpd_mean: f64,
) -> QueueState {
    let ind = indicator(state.q, params.q0_bits);
    let (upsilon, a_vq) = match params.policy {
        Policy::Proposed => (
            (state.upsilon + (ind - params.epsilon) * q_next).max(0.0),
            (state.a_vq + (q_next - params.q0_bits - gpd_mean) * ind).max(0.0),
        ),
        Policy::Baseline2 => (
            (state.upsilon + (ind - params.epsilon) * q_next).max(0.0),
            0.0,
        ),
        Policy::Baseline1 | Policy::FixedPower => (0.0, 0.0),
    };
    QueueState {
        q: q_next,
        upsilon,
        a_vq,
    }
}

/// Weight of the log-rate term in the per-slot program.
pub fn alpha_coeff(state: &QueueState, params: &ControlParams, gpd_mean: f64, w_hz: f64) -> f64 {
    let scale = w_hz / core::f64::consts::LN_2;
    let eps = params.epsilon;
    let q = state.q;
    let ind = indicator(q, params.q0_bits);
    match params.policy {
        Policy::Proposed => {
            scale
                * ((1.0 + eps * eps) * q - eps * state.upsilon
                    + (2.0 * (1.0 - eps) * q + state.upsilon + state.a_vq
                        - params.q0_bits
                        - gpd_mean)
                        * ind)
        }
        Policy::Baseline2 => {
            scale
                * ((1.0 + eps * eps) * q - eps * state.upsilon
                    + (2.0 * (1.0 - eps) * q + state.upsilon - params.q0_bits) * ind)
        }
        Policy::Baseline1 | Policy::FixedPower => scale * q,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    /// Watts per RB.
    pub powers: Vec<f64>,
    /// Multiplier of the power budget.
    pub lambda: f64,
    /// Planned bits for the slot under the estimated SINR.
    pub rate_bits: f64,
}

/// Solves `min V Σp - α Σ ln(1 + γ_n p_n)` over `p ≥ 0, Σp ≤ P0`.
///
/// The active set is found exactly by sorting the inverse gains, so the
/// water level and λ need no iteration. `rate_bits` is left at zero.
pub fn water_filling(alpha: f64, gammas: &[f64], v: f64, p0: f64) -> Result<SlotDecision> {
    if !(p0 > 0.0) || !p0.is_finite() {
        return Err(Error::config("power_budget_w", "must be positive"));
    }
    if !(v >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "v",
            reason: "must be non-negative",
        });
    }
    if gammas.iter().any(|g| !(*g >= 0.0)) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: "must be non-negative",
        });
    }
    let mut powers = vec![0.0; gammas.len()];
    if !(alpha > 0.0) {
        return Ok(SlotDecision {
            powers,
            lambda: 0.0,
            rate_bits: 0.0,
        });
    }
    // RBs ordered by inverse gain, best first
    let mut order: Vec<usize> = (0..gammas.len()).filter(|&n| gammas[n] > 0.0).collect();
    if order.is_empty() {
        return Ok(SlotDecision {
            powers,
            lambda: 0.0,
            rate_bits: 0.0,
        });
    }
    order.sort_by(|&a, &b| gammas[b].total_cmp(&gammas[a]).then(a.cmp(&b)));
    let inv: Vec<f64> = order.iter().map(|&n| 1.0 / gammas[n]).collect();

    let fill = |level: f64, powers: &mut [f64]| {
        for (k, &n) in order.iter().enumerate() {
            powers[n] = (level - inv[k]).max(0.0);
        }
    };

    // unconstrained level α/V
    if v > 0.0 {
        let level = alpha / v;
        let total: f64 = inv.iter().map(|&i| (level - i).max(0.0)).sum();
        if total <= p0 {
            fill(level, &mut powers);
            return Ok(SlotDecision {
                powers,
                lambda: 0.0,
                rate_bits: 0.0,
            });
        }
    }

    // budget binds: level L with Σ_k (L - inv_k)⁺ = P0
    let mut prefix = 0.0;
    let mut level = 0.0;
    for k in 0..inv.len() {
        prefix += inv[k];
        let cand = (p0 + prefix) / (k + 1) as f64;
        let next_ok = k + 1 == inv.len() || cand <= inv[k + 1];
        if cand > inv[k] && next_ok {
            level = cand;
            break;
        }
    }
    fill(level, &mut powers);
    let lambda = (alpha / level - v).max(0.0);
    Ok(SlotDecision {
        powers,
        lambda,
        rate_bits: 0.0,
    })
}

/// Per-RB SINR coefficient `γ_n = h_n / (Ĩ_n + W N0)`.
pub fn sinr_coeffs(gain: &LinkGain, interference_est: &[f64], cfg: &RadioConfig) -> Vec<f64> {
    let wn0 = cfg.noise_power_w();
    gain.per_rb
        .iter()
        .zip(interference_est)
        .map(|(&h, &i)| h / (i + wn0))
        .collect()
}

/// One slot's power allocation for one pair.
pub fn decide(
    state: &QueueState,
    params: &ControlParams,
    gain: &LinkGain,
    interference_est: &[f64],
    gpd_mean: f64,
    cfg: &RadioConfig,
) -> Result<SlotDecision> {
    let n = gain.per_rb.len();
    if interference_est.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: interference_est.len(),
        });
    }
    let gammas = sinr_coeffs(gain, interference_est, cfg);
    let mut decision = match params.policy {
        Policy::FixedPower => {
            let each = if n == 0 {
                0.0
            } else {
                params.fixed_power_w / n as f64
            };
            SlotDecision {
                powers: vec![each; n],
                lambda: 0.0,
                rate_bits: 0.0,
            }
        }
        _ => {
            let alpha = alpha_coeff(state, params, gpd_mean, cfg.rb_bandwidth_hz);
            water_filling(alpha, &gammas, params.v, cfg.power_budget_w)?
        }
    };
    let nats: f64 = gammas
        .iter()
        .zip(&decision.powers)
        .map(|(&g, &p)| (g * p).ln_1p())
        .sum();
    decision.rate_bits = cfg.slot_s * cfg.rb_bandwidth_hz * nats / core::f64::consts::LN_2;
    Ok(decision)
}
