//! Okumura–Hata path loss, open (rural) area variant.

use crate::scenario::RadioConfig;

use super::SimError;

/// Below this distance the formula is evaluated at 1 km.
pub const HATA_MIN_DISTANCE_M: f64 = 1000.0;

/// Median path loss in dB for a link of `distance_m` metres.
///
/// `L_open = L_urban − 4.78(log f)² + 18.33 log f − 40.94`, with the
/// small/medium-city mobile antenna correction in `L_urban`.
pub fn hata_rural_loss(distance_m: f64, radio: &RadioConfig) -> Result<f64, SimError> {
    let f = radio.carrier_frequency_hz / 1e6;
    if !(150.0..=1500.0).contains(&f) {
        return Err(SimError::Config(format!(
            "carrier frequency {f} MHz outside the Okumura-Hata range 150-1500 MHz"
        )));
    }
    if !(distance_m > 0.0) {
        return Err(SimError::Config(format!("distance must be positive, got {distance_m}")));
    }
    let d_km = distance_m.max(HATA_MIN_DISTANCE_M) / 1000.0;
    let log_f = f.log10();
    let log_hb = radio.gateway_height_m.log10();
    let a_hm = (1.1 * log_f - 0.7) * radio.device_height_m - (1.56 * log_f - 0.8);
    let urban = 69.55 + 26.16 * log_f - 13.82 * log_hb - a_hm + (44.9 - 6.55 * log_hb) * d_km.log10();
    Ok(urban - 4.78 * log_f * log_f + 18.33 * log_f - 40.94)
}

/// Received power in dBm at the gateway for a device at `distance_m`.
pub fn received_power_dbm(distance_m: f64, radio: &RadioConfig) -> Result<f64, SimError> {
    Ok(radio.tx_power_dbm + radio.tx_antenna_gain_dbi + radio.rx_antenna_gain_dbi
        - hata_rural_loss(distance_m, radio)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::test_support::default_scenario;
    use crate::units::SpreadingFactor;
    use approx::assert_relative_eq;

    #[test]
    fn increasing_in_distance() {
        let r = default_scenario().radio;
        assert!(hata_rural_loss(2000.0, &r).unwrap() < hata_rural_loss(10_000.0, &r).unwrap());
    }

    #[test]
    fn five_km_value() {
        // 40-digit evaluation of the open-area formula at 868.1 MHz, 24 m / 3 m.
        let r = default_scenario().radio;
        assert_relative_eq!(
            hata_rural_loss(5000.0, &r).unwrap(),
            120.247_915_151_171_86,
            max_relative = 1e-12
        );
    }

    #[test]
    fn clamped_below_one_km() {
        let r = default_scenario().radio;
        let one_km = hata_rural_loss(1000.0, &r).unwrap();
        assert_relative_eq!(one_km, 95.183_118_943_789_4, max_relative = 1e-12);
        assert_eq!(hata_rural_loss(10.0, &r).unwrap(), one_km);
    }

    #[test]
    fn cell_edge_closes_for_every_sf() {
        let s = default_scenario();
        let rx = received_power_dbm(13_000.0, &s.radio).unwrap();
        for sf in SpreadingFactor::ALL {
            let sensitivity = s.radio.noise_power_dbm() + s.thresholds.snr_floor_db(sf);
            assert!(rx > sensitivity, "{sf}: {rx} vs {sensitivity}");
        }
    }

    #[test]
    fn out_of_range_frequency() {
        let mut r = default_scenario().radio;
        r.carrier_frequency_hz = 2.4e9;
        assert!(matches!(hata_rural_loss(5000.0, &r), Err(SimError::Config(_))));
    }
}
