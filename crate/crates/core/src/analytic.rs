//! Closed-form uplink coverage of a typical node in a ring-structured PPP field.
//!
//! Coverage is the product of the noise-limited connection probability
//! `H₁ = exp(−γ_i σ² / (P_tx g₁))` and the capture probability `Q₁`, itself the
//! product over SF rings of `P_SIRj`, the probability that the SIR against
//! the interferers of ring `j` clears `δ_ij`. Under Rayleigh fading every
//! `P_SIRj` is the Laplace transform of the ring's aggregate interference,
//! which integrates to the ₂F₁ expression in [`capture_probability_ring`].
//!
//! All inputs arrive in linear scale from the validated [`Scenario`].

use std::f64::consts::PI;

use thiserror::Error;

use crate::scenario::{RadioConfig, RingTopology, Scenario, ThresholdSet};
use crate::specfun::{self, SpecFunError};
use crate::units::SpreadingFactor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("distance must be positive, got {0}")]
    Distance(f64),
    #[error(transparent)]
    SpecialFunction(#[from] SpecFunError),
}

/// The node whose uplink is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypicalNode {
    pub distance: f64,
    pub sf: SpreadingFactor,
}

impl TypicalNode {
    pub fn new(distance: f64, sf: SpreadingFactor) -> Result<Self, AnalyticError> {
        if distance > 0.0 && distance.is_finite() {
            Ok(Self { distance, sf })
        } else {
            Err(AnalyticError::Distance(distance))
        }
    }

    /// Node at `distance` using the SF of the ring it falls in.
    pub fn in_ring(distance: f64, topology: &RingTopology) -> Result<Self, AnalyticError> {
        let ring = topology
            .ring_of(distance)
            .filter(|_| distance > 0.0)
            .ok_or(AnalyticError::Distance(distance))?;
        Self::new(distance, topology.ring_sf(ring))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureBreakdown {
    /// `P_SIRj` for every ring of the topology.
    pub per_ring: Vec<f64>,
    pub q1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageBreakdown {
    pub h1: f64,
    pub per_ring: Vec<f64>,
    pub q1: f64,
    pub c1: f64,
}

/// Free-space-style path gain `(λ / 4πd)^η`, linear.
pub fn path_gain(distance: f64, radio: &RadioConfig) -> Result<f64, AnalyticError> {
    if !(distance > 0.0) {
        return Err(AnalyticError::Distance(distance));
    }
    Ok((radio.wavelength() / (4.0 * PI * distance)).powf(radio.path_loss_exponent))
}

/// AWGN power in dBm.
pub fn noise_power(radio: &RadioConfig) -> f64 {
    radio.noise_power_dbm()
}

/// `H₁ = P(SNR > γ_i)` under Rayleigh fading.
pub fn connection_probability(
    typical: &TypicalNode,
    radio: &RadioConfig,
    thresholds: &ThresholdSet,
) -> Result<f64, AnalyticError> {
    let gain = path_gain(typical.distance, radio)?;
    let gamma = thresholds.snr_floor(typical.sf);
    Ok((-gamma * radio.noise_power_mw() / (radio.tx_power_mw() * gain)).exp())
}

/// `P_SIRj = P(SIR_j > δ_ij)` for the interferers of ring `ring`.
pub fn capture_probability_ring(
    typical: &TypicalNode,
    ring: usize,
    topology: &RingTopology,
    thresholds: &ThresholdSet,
    radio: &RadioConfig,
) -> Result<f64, AnalyticError> {
    Ok((-ring_exponent(typical, ring, topology, thresholds, radio)?).exp())
}

/// `πα_j [l_j² F(−l_j^η/(d^η δ)) − l_{j−1}² F(−l_{j−1}^η/(d^η δ))]`, i.e. `−ln P_SIRj`.
fn ring_exponent(
    typical: &TypicalNode,
    ring: usize,
    topology: &RingTopology,
    thresholds: &ThresholdSet,
    radio: &RadioConfig,
) -> Result<f64, AnalyticError> {
    if !(typical.distance > 0.0) {
        return Err(AnalyticError::Distance(typical.distance));
    }
    let alpha = topology.intensity(ring);
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let eta = radio.path_loss_exponent;
    let b = 2.0 / eta;
    let delta = thresholds.sir(typical.sf, topology.ring_sf(ring));
    let (inner, outer) = topology.ring_bounds(ring);
    let disk = |l: f64| -> Result<f64, AnalyticError> {
        if l == 0.0 {
            return Ok(0.0);
        }
        let x = -(l / typical.distance).powf(eta) / delta;
        Ok(l * l * specfun::hyp2f1(1.0, b, 1.0 + b, x)?)
    };
    Ok(PI * alpha * (disk(outer)? - disk(inner)?))
}

/// `Q₁ = Π_j P_SIRj` with the per-ring factors.
pub fn capture_probability(
    typical: &TypicalNode,
    topology: &RingTopology,
    thresholds: &ThresholdSet,
    radio: &RadioConfig,
) -> Result<CaptureBreakdown, AnalyticError> {
    let per_ring = (0..topology.num_rings())
        .map(|j| capture_probability_ring(typical, j, topology, thresholds, radio))
        .collect::<Result<Vec<_>, _>>()?;
    let q1 = per_ring.iter().product();
    Ok(CaptureBreakdown { per_ring, q1 })
}

/// `Q₁` evaluated as `exp(−Σ_j exponent_j)`.
pub fn capture_probability_log_domain(
    typical: &TypicalNode,
    topology: &RingTopology,
    thresholds: &ThresholdSet,
    radio: &RadioConfig,
) -> Result<f64, AnalyticError> {
    let mut total = 0.0;
    for j in 0..topology.num_rings() {
        total += ring_exponent(typical, j, topology, thresholds, radio)?;
    }
    Ok((-total).exp())
}

/// `H₁`, every `P_SIRj`, `Q₁` and `C₁ = H₁·Q₁` for the scenario's analytic topology.
pub fn coverage_probability(
    typical: &TypicalNode,
    scenario: &Scenario,
) -> Result<CoverageBreakdown, AnalyticError> {
    coverage_with(typical, &scenario.topology, &scenario.thresholds, &scenario.radio)
}

pub fn coverage_with(
    typical: &TypicalNode,
    topology: &RingTopology,
    thresholds: &ThresholdSet,
    radio: &RadioConfig,
) -> Result<CoverageBreakdown, AnalyticError> {
    let h1 = connection_probability(typical, radio, thresholds)?;
    let CaptureBreakdown { per_ring, q1 } = capture_probability(typical, topology, thresholds, radio)?;
    Ok(CoverageBreakdown {
        h1,
        per_ring,
        q1,
        c1: h1 * q1,
    })
}
