//! LoRa time-on-air and the pure-ALOHA reference curve.

use thiserror::Error;

use crate::units::SpreadingFactor;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AirtimeError {
    #[error("unsupported bandwidth {0} Hz (expected 125, 250 or 500 kHz)")]
    Bandwidth(f64),
    #[error("coding rate index {0} outside 1..=4")]
    CodingRate(u32),
    #[error("PHY payload must be 1..=255 bytes, got {0}")]
    Payload(u32),
    #[error("per-node utilization {utilization:.5} exceeds duty-cycle limit {limit}")]
    DutyCycle { utilization: f64, limit: f64 },
    #[error("{0} must be positive")]
    NonPositive(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirtimeParams {
    pub sf: SpreadingFactor,
    pub bandwidth_hz: f64,
    /// `CR` index: 4/5 ⇒ 1 … 4/8 ⇒ 4.
    pub coding_rate: u32,
    pub preamble_symbols: u32,
    pub explicit_header: bool,
    /// `None` selects automatically: on when the symbol time reaches 16 ms
    /// (SF11 and SF12 at 125 kHz).
    pub low_data_rate_optimization: Option<bool>,
    pub phy_payload: u32,
}

impl AirtimeParams {
    /// EU868 uplink defaults: 125 kHz, CR 4/5, 8-symbol preamble, explicit header, CRC on.
    pub fn eu868(sf: SpreadingFactor, phy_payload: u32) -> Self {
        Self {
            sf,
            bandwidth_hz: 125e3,
            coding_rate: 1,
            preamble_symbols: 8,
            explicit_header: true,
            low_data_rate_optimization: None,
            phy_payload,
        }
    }

    pub fn symbol_time(&self) -> f64 {
        f64::from(1u32 << self.sf.value()) / self.bandwidth_hz
    }

    pub fn low_data_rate(&self) -> bool {
        self.low_data_rate_optimization
            .unwrap_or_else(|| self.symbol_time() >= 16e-3 - 1e-12)
    }
}

/// Packet duration in seconds (preamble + header + payload symbols, CRC on).
pub fn time_on_air(params: &AirtimeParams) -> Result<f64, AirtimeError> {
    if ![125e3, 250e3, 500e3].contains(&params.bandwidth_hz) {
        return Err(AirtimeError::Bandwidth(params.bandwidth_hz));
    }
    if !(1..=4).contains(&params.coding_rate) {
        return Err(AirtimeError::CodingRate(params.coding_rate));
    }
    if !(1..=255).contains(&params.phy_payload) {
        return Err(AirtimeError::Payload(params.phy_payload));
    }
    let sf = i64::from(params.sf.value());
    let pl = i64::from(params.phy_payload);
    let h = if params.explicit_header { 0 } else { 1 };
    let de = i64::from(params.low_data_rate());
    let numerator = 8 * pl - 4 * sf + 28 + 16 - 20 * h;
    let denominator = 4 * (sf - 2 * de);
    // ceil for integers, sign-safe
    let blocks = (numerator + denominator - 1).div_euclid(denominator).max(0);
    let payload_symbols = 8 + blocks * (i64::from(params.coding_rate) + 4);
    let symbols = f64::from(params.preamble_symbols) + 4.25 + payload_symbols as f64;
    Ok(symbols * params.symbol_time())
}

/// Pure-ALOHA throughput `S = G·e^{−2G}`.
pub fn pure_aloha_throughput(offered: f64) -> f64 {
    offered * (-2.0 * offered).exp()
}

/// Per-node Poisson packet rate giving aggregate load `offered` (erlang).
///
/// Rejects loads whose mean per-node utilization would exceed the duty-cycle limit.
pub fn per_node_rate(
    offered: f64,
    node_count: usize,
    mean_toa: f64,
    duty_cycle_limit: f64,
) -> Result<f64, AirtimeError> {
    if !(offered > 0.0) {
        return Err(AirtimeError::NonPositive("offered load"));
    }
    if node_count == 0 {
        return Err(AirtimeError::NonPositive("node count"));
    }
    if !(mean_toa > 0.0) {
        return Err(AirtimeError::NonPositive("mean time on air"));
    }
    let rate = offered / (node_count as f64 * mean_toa);
    let utilization = rate * mean_toa;
    if utilization > duty_cycle_limit {
        return Err(AirtimeError::DutyCycle {
            utilization,
            limit: duty_cycle_limit,
        });
    }
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sf(v: u8) -> SpreadingFactor {
        SpreadingFactor::new(v).unwrap()
    }

    #[test]
    fn sf7_fourteen_bytes() {
        let t = time_on_air(&AirtimeParams::eu868(sf(7), 14)).unwrap();
        assert_relative_eq!(t, 0.046_336, max_relative = 1e-12);
    }

    #[test]
    fn sf12_hand_count() {
        // ceil((112 − 48 + 44) / 40) = 3 blocks → 8 + 15 = 23 payload symbols;
        // 8 + 4.25 + 23 = 35.25 symbols × 32.768 ms.
        let t = time_on_air(&AirtimeParams::eu868(sf(12), 14)).unwrap();
        assert_relative_eq!(t, 35.25 * 0.032_768, max_relative = 1e-12);
        assert_relative_eq!(t, 1.155_072, max_relative = 1e-12);
    }

    #[test]
    fn mean_over_sfs() {
        let mean: f64 = SpreadingFactor::ALL
            .iter()
            .map(|&s| time_on_air(&AirtimeParams::eu868(s, 14)).unwrap())
            .sum::<f64>()
            / 6.0;
        assert!((mean - 0.3995).abs() < 0.005, "{mean}");
    }

    #[test]
    fn low_data_rate_auto() {
        assert!(!AirtimeParams::eu868(sf(10), 14).low_data_rate());
        assert!(AirtimeParams::eu868(sf(11), 14).low_data_rate());
        assert!(AirtimeParams::eu868(sf(12), 14).low_data_rate());
        let mut p = AirtimeParams::eu868(sf(11), 14);
        p.bandwidth_hz = 250e3;
        assert!(!p.low_data_rate());
        p.sf = sf(12);
        assert!(p.low_data_rate());
    }

    #[test]
    fn eight_byte_reading_is_longer() {
        // 8-byte application payload (PL = 21) is inconsistent with 46.3 ms.
        let t = time_on_air(&AirtimeParams::eu868(sf(7), 21)).unwrap();
        assert_relative_eq!(t, 0.056_576, max_relative = 1e-12);
    }

    #[test]
    fn invalid_params() {
        let mut p = AirtimeParams::eu868(sf(7), 14);
        p.bandwidth_hz = 200e3;
        assert_eq!(time_on_air(&p), Err(AirtimeError::Bandwidth(200e3)));
        let mut p = AirtimeParams::eu868(sf(7), 14);
        p.coding_rate = 5;
        assert!(time_on_air(&p).is_err());
        assert!(time_on_air(&AirtimeParams::eu868(sf(7), 0)).is_err());
    }

    #[test]
    fn aloha_points() {
        assert_eq!(pure_aloha_throughput(0.0), 0.0);
        assert_relative_eq!(pure_aloha_throughput(0.5), 0.5 * (-1f64).exp(), max_relative = 1e-15);
        assert!((pure_aloha_throughput(0.5) - 0.18394).abs() < 1e-5);
        assert!((pure_aloha_throughput(1.0) - 0.13534).abs() < 1e-5);
    }

    #[test]
    fn aloha_unique_maximum() {
        let grid: Vec<f64> = (1..=2000).map(|k| k as f64 / 1000.0).collect();
        let (argmax, max) = grid
            .iter()
            .map(|&g| (g, pure_aloha_throughput(g)))
            .fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
        assert_eq!(argmax, 0.5);
        assert_relative_eq!(max, 1.0 / (2.0 * std::f64::consts::E), max_relative = 1e-15);
        // dS/dG = e^{−2G}(1 − 2G) changes sign exactly once, at 0.5.
        let h = 1e-6;
        let deriv = |g: f64| (pure_aloha_throughput(g + h) - pure_aloha_throughput(g - h)) / (2.0 * h);
        assert!(deriv(0.499) > 0.0 && deriv(0.501) < 0.0);
    }

    #[test]
    fn per_node_rates() {
        let r1 = per_node_rate(1.0, 300, 0.0463, 0.01).unwrap();
        assert!((r1 - 0.07199).abs() < 1e-5);
        assert!((r1 * 0.0463 - 1.0 / 300.0).abs() < 1e-15);
        let r2 = per_node_rate(1.0, 300, 0.3995, 0.01).unwrap();
        assert!((r2 - 0.00834).abs() < 1e-5);
        let r01 = per_node_rate(0.1, 300, 0.0463, 0.01).unwrap();
        assert_relative_eq!(r01, r1 / 10.0, max_relative = 1e-14);
        assert!(matches!(
            per_node_rate(1.0, 50, 0.0463, 0.01),
            Err(AirtimeError::DutyCycle { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_sf_and_payload(pl in 1u32..200, k in 0usize..5) {
                let a = time_on_air(&AirtimeParams::eu868(SpreadingFactor::ALL[k], pl)).unwrap();
                let b = time_on_air(&AirtimeParams::eu868(SpreadingFactor::ALL[k + 1], pl)).unwrap();
                prop_assert!(b > a);
                let next = time_on_air(&AirtimeParams::eu868(SpreadingFactor::ALL[k], pl + 1)).unwrap();
                prop_assert!(next >= a);
                let longer = time_on_air(&AirtimeParams::eu868(SpreadingFactor::ALL[k], pl + 55)).unwrap();
                prop_assert!(longer > a);
            }

            #[test]
            fn rate_recovers_load(g in 0.01f64..1.0, n in 100usize..1000, t in 0.01f64..1.0) {
                let r = per_node_rate(g, n, t, 1.0).unwrap();
                prop_assert!((r * n as f64 * t - g).abs() <= 1e-12);
            }
        }
    }
}
