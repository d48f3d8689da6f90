//! Path loss, fading, per-slot rate and the receiver interference estimate.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::{Axis, GridSpec, Lane, Point};

/// Distances below this are clamped before evaluating `d^{-c}`.
pub const NEAR_FIELD_M: f64 = 1.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// LOS/WLOS coefficient, dB.
    pub ell_db: f64,
    /// NLOS coefficient, dB.
    pub ell_prime_db: f64,
    /// Path-loss exponent.
    pub c: f64,
    /// WLOS distance to the intersection, m.
    pub d0_m: f64,
    pub rb_bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Per-transmitter power budget, W.
    pub power_budget_w: f64,
    pub slot_s: f64,
    pub fading: bool,
    pub interference_ewma_beta: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            ell_db: -68.5,
            ell_prime_db: -54.5,
            c: 1.61,
            d0_m: 15.0,
            rb_bandwidth_hz: 180e3,
            noise_psd_dbm_hz: -174.0,
            power_budget_w: 10.0,
            slot_s: 1e-3,
            fading: true,
            interference_ewma_beta: 0.05,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.ell_db,
            self.ell_prime_db,
            self.c,
            self.d0_m,
            self.rb_bandwidth_hz,
            self.noise_psd_dbm_hz,
            self.power_budget_w,
            self.slot_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("radio", "all constants must be finite"));
        }
        if !(self.c > 0.0) {
            return Err(Error::config("radio.c", "must be positive"));
        }
        if !(self.d0_m > 0.0) {
            return Err(Error::config("radio.d0_m", "must be positive"));
        }
        if !(self.rb_bandwidth_hz > 0.0) {
            return Err(Error::config("radio.rb_bandwidth_hz", "must be positive"));
        }
        if !(self.power_budget_w > 0.0) {
            return Err(Error::config("radio.power_budget_w", "must be positive"));
        }
        if !(self.slot_s > 0.0) {
            return Err(Error::config("radio.slot_s", "must be positive"));
        }
        if !(self.interference_ewma_beta > 0.0 && self.interference_ewma_beta <= 1.0) {
            return Err(Error::config(
                "radio.interference_ewma_beta",
                "must lie in (0, 1]",
            ));
        }
        // l' < l (d0/2)^c, compared in dB
        let bound = self.ell_db + 10.0 * self.c * (self.d0_m / 2.0).log10();
        if !(self.ell_prime_db < bound) {
            return Err(Error::config(
                "radio.ell_prime_db",
                "must satisfy l' < l (d0/2)^c",
            ));
        }
        Ok(())
    }

    pub fn ell(&self) -> f64 {
        db_to_linear(self.ell_db)
    }

    pub fn ell_prime(&self) -> f64 {
        db_to_linear(self.ell_prime_db)
    }

    /// Noise power over one RB, W.
    pub fn noise_power_w(&self) -> f64 {
        db_to_linear(self.noise_psd_dbm_hz - 30.0) * self.rb_bandwidth_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkClass {
    Los,
    Wlos,
    Nlos,
}

/// An endpoint: where it is and which lane it drives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub pos: Point,
    pub lane: Lane,
}

pub fn los_class(tx: &Endpoint, rx: &Endpoint, grid: &GridSpec, d0: f64) -> LinkClass {
    if tx.lane.axis == rx.lane.axis {
        return if tx.lane.road == rx.lane.road {
            LinkClass::Los
        } else {
            LinkClass::Nlos
        };
    }
    let (h, v) = match tx.lane.axis {
        Axis::Horizontal => (tx.lane.road, rx.lane.road),
        Axis::Vertical => (rx.lane.road, tx.lane.road),
    };
    let cross = grid.intersection(h, v);
    let near = grid
        .distance(tx.pos, cross)
        .min(grid.distance(rx.pos, cross));
    if near <= d0 {
        LinkClass::Wlos
    } else {
        LinkClass::Nlos
    }
}

/// Linear large-scale gain. Coordinate differences use the minimal image
/// on the torus.
pub fn path_loss(
    tx: Point,
    rx: Point,
    class: LinkClass,
    grid: &GridSpec,
    cfg: &RadioConfig,
) -> Result<f64> {
    let (dx, dy) = grid.delta(tx, rx);
    if class == LinkClass::Nlos && (dx == 0.0 || dy == 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    Ok(path_loss_clamped(dx, dy, class, cfg))
}

/// Same as [`path_loss`] but with every distance term clamped to the near
/// field, so aligned NLOS geometry is accepted.
pub fn path_loss_clamped(dx: f64, dy: f64, class: LinkClass, cfg: &RadioConfig) -> f64 {
    let (ax, ay) = (dx.abs(), dy.abs());
    match class {
        LinkClass::Los => cfg.ell() * (ax.hypot(ay)).max(NEAR_FIELD_M).powf(-cfg.c),
        LinkClass::Wlos => cfg.ell() * (ax + ay).max(NEAR_FIELD_M).powf(-cfg.c),
        LinkClass::Nlos => {
            cfg.ell_prime() * (ax.max(NEAR_FIELD_M) * ay.max(NEAR_FIELD_M)).powf(-cfg.c)
        }
    }
}

/// Per-RB linear gains of one link in one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkGain {
    pub per_rb: Vec<f64>,
}

/// Large-scale gain times unit-mean exponential fading per RB.
pub fn channel_gain<R: Rng + ?Sized>(
    path_loss: f64,
    n_rb: usize,
    cfg: &RadioConfig,
    rng: &mut R,
) -> LinkGain {
    let per_rb = (0..n_rb)
        .map(|_| {
            if cfg.fading {
                let f: f64 = Exp1.sample(rng);
                path_loss * f
            } else {
                path_loss
            }
        })
        .collect();
    LinkGain { per_rb }
}

/// Bits delivered in one slot.
pub fn rate(
    gain: &LinkGain,
    powers: &[f64],
    interference: &[f64],
    cfg: &RadioConfig,
) -> Result<f64> {
    let n = gain.per_rb.len();
    if powers.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: powers.len(),
        });
    }
    if interference.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: interference.len(),
        });
    }
    let wn0 = cfg.noise_power_w();
    let mut bits = 0.0;
    for ((&h, &p), &i) in gain.per_rb.iter().zip(powers).zip(interference) {
        if !(p >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "power",
                reason: "must be non-negative",
            });
        }
        if p > 0.0 {
            bits += (h * p / (i + wn0)).ln_1p();
        }
    }
    Ok(cfg.slot_s * cfg.rb_bandwidth_hz * bits / core::f64::consts::LN_2)
}

/// EWMA update `(1-beta) prev + beta measured`, per RB.
pub fn update_interference_estimate(prev: &[f64], measured: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: "must lie in (0, 1]",
        });
    }
    if prev.len() != measured.len() {
        return Err(Error::LengthMismatch {
            expected: prev.len(),
            actual: measured.len(),
        });
    }
    Ok(prev
        .iter()
        .zip(measured)
        .map(|(&p, &m)| (1.0 - beta) * p + beta * m)
        .collect())
}
