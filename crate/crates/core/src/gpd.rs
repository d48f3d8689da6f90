//! Generalized Pareto model of queue excesses over a threshold.
//!
//! Density `G(m) = (1/σ)(1 + ξm/σ)^(-1-1/ξ)` with the exponential limit
//! `(1/σ)e^(-m/σ)` at `ξ = 0`. Everything here is a pure function of its
//! arguments.

use core::ops::{Add, Mul, Sub};

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |ξ| the exponential-limit formulas are used.
pub const XI_SWITCH: f64 = 1e-8;
/// Lower clamp for σ in [`project`].
pub const SIGMA_MIN: f64 = 1e-6;
/// Upper clamp for ξ in [`project`]; keeps the mean excess finite.
pub const XI_MAX: f64 = 1.0 - 1e-6;
/// Lower clamp for ξ in [`project`]; below -1 the likelihood is unbounded.
pub const XI_MIN: f64 = -1.0 + 1e-6;
/// Smallest value of `1 + ξ max(Q)/σ` kept by [`project`]. Gradients scale
/// like the inverse of this term, so points hugging the edge are avoided.
pub const SUPPORT_MARGIN: f64 = 1e-2;

/// A two-component vector in (σ, ξ) coordinates: gradients, step sizes and
/// unconstrained candidates all use it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GpdVector {
    pub sigma: f64,
    pub xi: f64,
}

impl GpdVector {
    pub const ZERO: GpdVector = GpdVector {
        sigma: 0.0,
        xi: 0.0,
    };

    pub const fn new(sigma: f64, xi: f64) -> Self {
        GpdVector { sigma, xi }
    }

    /// Component-wise product.
    pub fn scale_by(self, other: GpdVector) -> Self {
        GpdVector::new(self.sigma * other.sigma, self.xi * other.xi)
    }

    pub fn is_finite(self) -> bool {
        self.sigma.is_finite() && self.xi.is_finite()
    }
}

impl Add for GpdVector {
    type Output = GpdVector;
    fn add(self, rhs: GpdVector) -> GpdVector {
        GpdVector::new(self.sigma + rhs.sigma, self.xi + rhs.xi)
    }
}

impl Sub for GpdVector {
    type Output = GpdVector;
    fn sub(self, rhs: GpdVector) -> GpdVector {
        GpdVector::new(self.sigma - rhs.sigma, self.xi - rhs.xi)
    }
}

impl Mul<f64> for GpdVector {
    type Output = GpdVector;
    fn mul(self, rhs: f64) -> GpdVector {
        GpdVector::new(self.sigma * rhs, self.xi * rhs)
    }
}

/// Scale σ (bits) and shape ξ of the excess-queue distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GpdVector", into = "GpdVector")]
pub struct GpdParams {
    sigma: f64,
    xi: f64,
}

impl TryFrom<GpdVector> for GpdParams {
    type Error = Error;
    fn try_from(v: GpdVector) -> Result<Self> {
        GpdParams::new(v.sigma, v.xi)
    }
}

impl From<GpdParams> for GpdVector {
    fn from(p: GpdParams) -> GpdVector {
        GpdVector::new(p.sigma, p.xi)
    }
}

/// An excess `M = q - Q0 >= 0` of a queue over its threshold, in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ExcessSample(f64);

impl ExcessSample {
    pub fn new(value: f64) -> Result<Self> {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "excess",
                reason: "must be finite and non-negative",
            });
        }
        Ok(ExcessSample(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Wraps a slice of raw values, rejecting negatives and non-finite entries.
    pub fn from_values(values: &[f64]) -> Result<alloc::vec::Vec<ExcessSample>> {
        values.iter().map(|&v| ExcessSample::new(v)).collect()
    }
}

impl TryFrom<f64> for ExcessSample {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        ExcessSample::new(v)
    }
}

impl From<ExcessSample> for f64 {
    fn from(s: ExcessSample) -> f64 {
        s.0
    }
}

impl GpdParams {
    pub fn new(sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: "must be finite and positive",
            });
        }
        if !xi.is_finite() {
            return Err(Error::InvalidParameter {
                name: "xi",
                reason: "must be finite",
            });
        }
        Ok(GpdParams { sigma, xi })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    fn in_limit(&self) -> bool {
        self.xi.abs() < XI_SWITCH
    }

    /// Upper end of the support, `-σ/ξ` for ξ < 0, infinite otherwise.
    pub fn support_end(&self) -> f64 {
        if self.xi < 0.0 && !self.in_limit() {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    /// `1 + ξm/σ`, or an error if `m` is negative or beyond the support.
    fn support_term(&self, m: f64) -> Result<f64> {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::OutOfSupport { value: m });
        }
        let t = 1.0 + self.xi * m / self.sigma;
        if t < 0.0 {
            return Err(Error::OutOfSupport { value: m });
        }
        Ok(t)
    }

    /// `(1/ξ) ln(1 + ξy)` with `y = m/σ`, computed without forming `1/ξ` twice.
    fn scaled_log_term(&self, y: f64) -> f64 {
        (self.xi * y).ln_1p() / self.xi
    }

    /// Density at `m`.
    pub fn pdf(&self, m: f64) -> Result<f64> {
        let t = self.support_term(m)?;
        let y = m / self.sigma;
        if self.in_limit() {
            return Ok((-y).exp() / self.sigma);
        }
        if t == 0.0 {
            // boundary of a bounded support
            return Ok(if self.xi == -1.0 {
                1.0 / self.sigma
            } else if self.xi > -1.0 {
                0.0
            } else {
                f64::INFINITY
            });
        }
        Ok((-(1.0 + self.xi) * self.scaled_log_term(y)).exp() / self.sigma)
    }

    /// Single-sample negative log-likelihood `ln σ + (1 + 1/ξ) ln(1 + ξQ/σ)`.
    pub fn nll_one(&self, sample: ExcessSample) -> Result<f64> {
        let q = sample.value();
        self.support_term(q)?;
        let y = q / self.sigma;
        let tail = if self.in_limit() {
            y
        } else {
            (1.0 + self.xi) * self.scaled_log_term(y)
        };
        Ok(self.sigma.ln() + tail)
    }

    /// Mean negative log-likelihood over `samples`.
    pub fn nll(&self, samples: &[ExcessSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut total = 0.0;
        for &s in samples {
            total += self.nll_one(s)?;
        }
        Ok(total / samples.len() as f64)
    }

    /// Gradient of [`GpdParams::nll_one`] with respect to (σ, ξ).
    ///
    /// With `y = Q/σ` and `z = ξy` the derivatives are
    /// `∂σ = (1 - y) / (σ(1 + z))` and `∂ξ = y/(1 + z) + y² φ(z)` where
    /// `φ(z) = (z/(1+z) - ln(1+z)) / z²`. The second form has no `1/ξ`
    /// factor, so it stays accurate as ξ approaches zero.
    pub fn nll_grad(&self, sample: ExcessSample) -> Result<GpdVector> {
        let q = sample.value();
        let t = self.support_term(q)?;
        let y = q / self.sigma;
        if self.in_limit() {
            return Ok(GpdVector::new((1.0 - y) / self.sigma, y - 0.5 * y * y));
        }
        if t == 0.0 {
            return Err(Error::SingularGradient { value: q });
        }
        let z = self.xi * y;
        let d_sigma = (1.0 - y) / (self.sigma * t);
        let d_xi = y / t + y * y * excess_log_ratio(z);
        Ok(GpdVector::new(d_sigma, d_xi))
    }

    /// Sum of per-sample gradients over `samples`.
    pub fn nll_grad_sum(&self, samples: &[ExcessSample]) -> Result<GpdVector> {
        samples
            .iter()
            .try_fold(GpdVector::ZERO, |acc, &s| Ok(acc + self.nll_grad(s)?))
    }

    /// Mean excess `σ/(1 - ξ)`.
    pub fn mean_excess(&self) -> Result<f64> {
        if self.xi >= 1.0 {
            return Err(Error::UnboundedMean { xi: self.xi });
        }
        Ok(self.sigma / (1.0 - self.xi))
    }

    /// Survival function `P(M > m)`.
    pub fn sf(&self, m: f64) -> Result<f64> {
        let t = self.support_term(m)?;
        let y = m / self.sigma;
        if self.in_limit() {
            return Ok((-y).exp());
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok((-self.scaled_log_term(y)).exp())
    }

    /// Quantile function, `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let tail = (-u).ln_1p();
        if self.in_limit() {
            -self.sigma * tail
        } else {
            self.sigma * ((-self.xi * tail).exp_m1()) / self.xi
        }
    }

    /// True if every sample lies in the support.
    pub fn supports(&self, samples: &[ExcessSample]) -> bool {
        samples.iter().all(|s| self.support_term(s.value()).is_ok())
    }
}

/// `φ(z) = (z/(1+z) - ln(1+z)) / z²`, with a power series near zero.
fn excess_log_ratio(z: f64) -> f64 {
    if z.abs() < 1e-2 {
        // Σ_{j>=0} (-1)^{j+1} (j+1)/(j+2) z^j
        let mut acc = 0.0;
        for j in (0..12).rev() {
            let coeff = (j as f64 + 1.0) / (j as f64 + 2.0);
            let signed = if j % 2 == 0 { -coeff } else { coeff };
            acc = acc * z + signed;
        }
        acc
    } else {
        (z / (1.0 + z) - z.ln_1p()) / (z * z)
    }
}

/// Projects a candidate onto the feasible set
/// `{σ >= σ_min, ξ_min <= ξ <= ξ_max, 1 + ξQ/σ >= 0 for every sample}`.
///
/// σ and ξ are clamped first; if the largest sample then sits outside the
/// support or too close to its edge, ξ is raised until
/// `1 + ξ max(Q)/σ = SUPPORT_MARGIN`.
pub fn project(candidate: GpdVector, samples: &[ExcessSample]) -> GpdParams {
    let sigma = if candidate.sigma.is_nan() {
        SIGMA_MIN
    } else {
        candidate.sigma.clamp(SIGMA_MIN, f64::MAX)
    };
    let mut xi = if candidate.xi.is_nan() {
        0.0
    } else {
        candidate.xi.clamp(XI_MIN, XI_MAX)
    };
    let q_max = samples.iter().map(|s| s.value()).fold(0.0, f64::max);
    if q_max > 0.0 && 1.0 + xi * q_max / sigma < SUPPORT_MARGIN {
        xi = -sigma / q_max * (1.0 - SUPPORT_MARGIN);
    }
    GpdParams { sigma, xi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn p(sigma: f64, xi: f64) -> GpdParams {
        GpdParams::new(sigma, xi).unwrap()
    }

    fn samples(values: &[f64]) -> Vec<ExcessSample> {
        ExcessSample::from_values(values).unwrap()
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(p(1.0, 0.0).pdf(0.0).unwrap(), 1.0);
        assert!((p(2.0, 0.5).pdf(0.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((p(1.0, 0.5).pdf(2.0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn pdf_rejects_out_of_support() {
        assert!(matches!(
            p(1.0, -0.5).pdf(2.5),
            Err(Error::OutOfSupport { .. })
        ));
        assert!(matches!(
            p(1.0, 0.2).pdf(-1.0),
            Err(Error::OutOfSupport { .. })
        ));
        // right on the boundary is inside
        assert_eq!(p(1.0, -0.5).pdf(2.0).unwrap(), 0.0);
        assert_eq!(p(1.0, -1.0).pdf(1.0).unwrap(), 1.0);
    }

    #[test]
    fn invalid_sigma_is_rejected() {
        assert!(GpdParams::new(0.0, 0.1).is_err());
        assert!(GpdParams::new(-3.0, 0.1).is_err());
        assert!(GpdParams::new(f64::NAN, 0.1).is_err());
        assert!(GpdParams::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn nll_examples() {
        assert_eq!(p(1.0, 0.0).nll(&samples(&[0.0])).unwrap(), 0.0);
        assert_eq!(p(1.0, 0.0).nll(&samples(&[1.0, 3.0])).unwrap(), 2.0);
        let v = p(1.0, 0.5).nll(&samples(&[2.0])).unwrap();
        assert!((v - 3.0 * core::f64::consts::LN_2).abs() < 1e-14);
    }

    #[test]
    fn nll_errors() {
        assert_eq!(p(1.0, 0.0).nll(&[]), Err(Error::EmptySamples));
        assert!(matches!(
            p(1.0, -0.5).nll(&samples(&[1.0, 3.0])),
            Err(Error::OutOfSupport { .. })
        ));
    }

    #[test]
    fn grad_sigma_component_at_origin() {
        for xi in [0.0, 0.3, -0.2, 0.9] {
            let g = p(1.0, xi)
                .nll_grad(ExcessSample::new(0.0).unwrap())
                .unwrap();
            assert!((g.sigma - 1.0).abs() < 1e-15);
            assert_eq!(g.xi, 0.0);
        }
    }

    #[test]
    fn grad_sigma_matches_closed_form() {
        // (1/σ)[(1 + 1/ξ)/(1 + ξQ/σ) - 1/ξ]
        let (sigma, xi, q) = (2.0, 0.5, 1.0);
        let expected = ((1.0 + 1.0 / xi) / (1.0 + xi * q / sigma) - 1.0 / xi) / sigma;
        let g = p(sigma, xi)
            .nll_grad(ExcessSample::new(q).unwrap())
            .unwrap();
        assert!((g.sigma - expected).abs() < 1e-14);
    }

    #[test]
    fn grad_on_boundary_is_singular() {
        let params = p(1.0, -0.5);
        assert!(matches!(
            params.nll_grad(ExcessSample::new(2.0).unwrap()),
            Err(Error::SingularGradient { .. })
        ));
    }

    #[test]
    fn series_branch_agrees_with_direct_formula() {
        for z in [-9e-3, -1e-3, 1e-4, 5e-3, 9.9e-3] {
            let direct = (z / (1.0 + z) - z.ln_1p()) / (z * z);
            assert!((excess_log_ratio(z) - direct).abs() < 1e-9, "z = {z}");
        }
        assert_eq!(excess_log_ratio(0.0), -0.5);
    }

    #[test]
    fn mean_excess_examples() {
        assert_eq!(p(1.0, 0.0).mean_excess().unwrap(), 1.0);
        assert_eq!(p(2.0, 0.5).mean_excess().unwrap(), 4.0);
        assert_eq!(
            p(50.0, 1.0).mean_excess(),
            Err(Error::UnboundedMean { xi: 1.0 })
        );
    }

    #[test]
    fn project_examples() {
        let none: [ExcessSample; 0] = [];
        assert_eq!(project(GpdVector::new(50.0, 0.0), &none), p(50.0, 0.0));
        assert_eq!(project(GpdVector::new(-1.0, 0.0), &none), p(SIGMA_MIN, 0.0));
        let projected = project(GpdVector::new(1.0, -2.0), &samples(&[1.0]));
        assert_eq!(projected.sigma(), 1.0);
        assert!((projected.xi() - (-1.0 + SUPPORT_MARGIN)).abs() < 1e-15);
        assert!(projected.supports(&samples(&[1.0])));
        assert_eq!(project(GpdVector::new(3.0, 4.0), &none).xi(), XI_MAX);
    }

    #[test]
    fn quantile_inverts_survival() {
        let params = p(50.0, 0.3);
        for u in [0.0, 0.1, 0.5, 0.9, 0.999] {
            let m = params.quantile(u);
            assert!((params.sf(m).unwrap() - (1.0 - u)).abs() < 1e-12);
        }
        let exp = p(2.0, 0.0);
        assert!((exp.quantile(0.5) - 2.0 * core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn serde_rejects_invalid_params() {
        // exercised through the TryFrom path used by serde
        assert!(GpdParams::try_from(GpdVector::new(-1.0, 0.0)).is_err());
        assert!(ExcessSample::try_from(-0.5).is_err());
        let v = vec![1.0, 2.0];
        assert_eq!(ExcessSample::from_values(&v).unwrap().len(), 2);
    }
}
