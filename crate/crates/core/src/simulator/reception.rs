//! Gateway reception decisions under the three collision models.
//!
//! A packet's interference is the sum of the linear received powers of all
//! packets that overlap it at any instant on the same channel, held
//! constant over its whole duration. Same-SF packets chained by overlap on
//! one channel form an episode, and at most one packet per episode is
//! received: the one with the highest SINR, provided it clears `δ_ii`.
//! The SINR denominator is noise plus same-SF interference under IC, and
//! noise plus interference from every SF under IIC, which also checks
//! `δ_ij` against the aggregate of each other SF `j`. Under BP any overlap
//! is fatal.

use crate::scenario::{CollisionModel, ThresholdSet};
use crate::units::{dbm_to_mw, SpreadingFactor};

/// Interference seen by one packet over its lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OverlapSummary {
    /// Sum of overlapping received powers per interfering SF, mW.
    pub interference_mw: [f64; 6],
    /// Strongest overlapping packet of the same SF, mW.
    pub strongest_same_sf_mw: f64,
    /// Number of overlapping packets, any SF.
    pub overlaps: u32,
}

impl OverlapSummary {
    pub fn add(&mut self, own_sf: SpreadingFactor, other_sf: SpreadingFactor, other_power_mw: f64) {
        self.interference_mw[other_sf.index()] += other_power_mw;
        if other_sf == own_sf {
            self.strongest_same_sf_mw = self.strongest_same_sf_mw.max(other_power_mw);
        }
        self.overlaps += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Received,
    BelowSensitivity,
    Collision,
}

/// A decoded-or-not packet together with the interference it saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contender {
    pub sf: SpreadingFactor,
    pub power_mw: f64,
    pub overlap: OverlapSummary,
}

/// Everything the gateway needs to decide an episode.
#[derive(Debug, Clone)]
pub struct ReceptionRules {
    pub model: CollisionModel,
    pub thresholds: ThresholdSet,
    /// Per SF, SF7 first.
    pub sensitivity_mw: [f64; 6],
    /// Added to the same-SF interference when checking capture.
    pub noise_mw: f64,
}

impl ReceptionRules {
    /// Sensitivity is `noise + γ_i` for each SF.
    pub fn new(model: CollisionModel, thresholds: &ThresholdSet, noise_dbm: f64) -> Self {
        Self {
            model,
            thresholds: thresholds.clone(),
            sensitivity_mw: SpreadingFactor::ALL.map(|sf| dbm_to_mw(noise_dbm + thresholds.snr_floor_db(sf))),
            noise_mw: dbm_to_mw(noise_dbm),
        }
    }

    /// Same-SF interference only for IC, every SF for IIC.
    fn sinr(&self, c: &Contender) -> f64 {
        let interference = match self.model {
            CollisionModel::Iic => c.overlap.interference_mw.iter().sum(),
            _ => c.overlap.interference_mw[c.sf.index()],
        };
        c.power_mw / (interference + self.noise_mw)
    }

    /// Decision for a packet considered on its own.
    pub fn judge(&self, c: &Contender) -> Verdict {
        let sf = c.sf;
        if c.power_mw < self.sensitivity_mw[sf.index()] {
            return Verdict::BelowSensitivity;
        }
        let captured_same_sf = || {
            c.overlap.interference_mw[sf.index()] == 0.0
                || (c.power_mw > c.overlap.strongest_same_sf_mw && self.sinr(c) >= self.thresholds.sir(sf, sf))
        };
        let clears_other_sfs = || {
            SpreadingFactor::ALL.iter().filter(|&&j| j != sf).all(|&j| {
                let i_j = c.overlap.interference_mw[j.index()];
                i_j == 0.0 || c.power_mw / i_j >= self.thresholds.sir(sf, j)
            })
        };
        let ok = match self.model {
            CollisionModel::Bp => c.overlap.overlaps == 0,
            CollisionModel::Ic => captured_same_sf(),
            CollisionModel::Iic => captured_same_sf() && clears_other_sfs(),
        };
        if ok {
            Verdict::Received
        } else {
            Verdict::Collision
        }
    }

    /// Verdicts for one episode: same-SF packets on one channel chained by overlap.
    pub fn decide_episode(&self, members: &[Contender]) -> Vec<Verdict> {
        let lost = |c: &Contender| {
            if c.power_mw < self.sensitivity_mw[c.sf.index()] {
                Verdict::BelowSensitivity
            } else {
                Verdict::Collision
            }
        };
        if self.model == CollisionModel::Bp || members.len() == 1 {
            return members.iter().map(|c| self.judge(c)).collect();
        }
        let sinr: Vec<f64> = members.iter().map(|c| self.sinr(c)).collect();
        let best = (0..members.len())
            .max_by(|&a, &b| sinr[a].total_cmp(&sinr[b]))
            .expect("episode is non-empty");
        let tied = sinr.iter().filter(|&&v| v == sinr[best]).count() > 1;
        members
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == best && !tied {
                    self.judge(c)
                } else {
                    lost(c)
                }
            })
            .collect()
    }
}

/// One uplink transmission as seen by the gateway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketEvent {
    pub node: usize,
    pub sf: SpreadingFactor,
    pub channel: usize,
    pub start: f64,
    pub duration: f64,
    pub rx_power_dbm: f64,
}

impl PacketEvent {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn overlaps(&self, other: &PacketEvent) -> bool {
        self.channel == other.channel && self.start < other.end() && other.start < self.end()
    }

    pub fn rx_power_mw(&self) -> f64 {
        dbm_to_mw(self.rx_power_dbm)
    }
}

/// Verdict for every packet of a set of transmissions.
pub fn resolve_reception(packets: &[PacketEvent], rules: &ReceptionRules) -> Vec<Verdict> {
    let n = packets.len();
    let mut contenders: Vec<Contender> = packets
        .iter()
        .map(|p| Contender {
            sf: p.sf,
            power_mw: p.rx_power_mw(),
            overlap: OverlapSummary::default(),
        })
        .collect();
    // Union-find over same-SF overlaps gives the episodes.
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut k: usize) -> usize {
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && packets[a].overlaps(&packets[b]) {
                contenders[a].overlap.add(packets[a].sf, packets[b].sf, packets[b].rx_power_mw());
                if a < b && packets[a].sf == packets[b].sf {
                    let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut verdicts = vec![Verdict::Collision; n];
    let mut done = vec![false; n];
    for k in 0..n {
        if done[k] {
            continue;
        }
        let r = root(&mut parent, k);
        let ids: Vec<usize> = (k..n).filter(|&m| root(&mut parent, m) == r).collect();
        let members: Vec<Contender> = ids.iter().map(|&m| contenders[m]).collect();
        for (&m, v) in ids.iter().zip(rules.decide_episode(&members)) {
            verdicts[m] = v;
            done[m] = true;
        }
    }
    verdicts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::test_support::default_scenario;

    fn sf(v: u8) -> SpreadingFactor {
        SpreadingFactor::new(v).unwrap()
    }

    fn packet(sfv: u8, start: f64, power_dbm: f64) -> PacketEvent {
        PacketEvent {
            node: 0,
            sf: sf(sfv),
            channel: 0,
            start,
            duration: 0.1,
            rx_power_dbm: power_dbm,
        }
    }

    fn rules(model: CollisionModel) -> ReceptionRules {
        let s = default_scenario();
        ReceptionRules::new(model, &s.thresholds, s.radio.noise_power_dbm())
    }

    #[test]
    fn isolated_packet_received_everywhere() {
        for model in CollisionModel::ALL {
            let v = resolve_reception(&[packet(7, 0.0, -100.0)], &rules(model));
            assert_eq!(v, vec![Verdict::Received]);
        }
    }

    #[test]
    fn weak_isolated_packet_lost() {
        for model in CollisionModel::ALL {
            let v = resolve_reception(&[packet(7, 0.0, -130.0)], &rules(model));
            assert_eq!(v, vec![Verdict::BelowSensitivity]);
        }
    }

    #[test]
    fn equal_power_tie_loses_both() {
        let pair = [packet(8, 0.0, -100.0), packet(8, 0.05, -100.0)];
        for model in [CollisionModel::Ic, CollisionModel::Iic] {
            assert_eq!(resolve_reception(&pair, &rules(model)), vec![Verdict::Collision; 2]);
        }
    }

    #[test]
    fn different_sfs_transparent_under_ic() {
        let pair = [packet(7, 0.0, -100.0), packet(9, 0.0, -100.0)];
        assert_eq!(
            resolve_reception(&pair, &rules(CollisionModel::Ic)),
            vec![Verdict::Received; 2]
        );
        assert_eq!(
            resolve_reception(&pair, &rules(CollisionModel::Bp)),
            vec![Verdict::Collision; 2]
        );
        // Equal powers clear every negative inter-SF threshold.
        assert_eq!(
            resolve_reception(&pair, &rules(CollisionModel::Iic)),
            vec![Verdict::Received; 2]
        );
    }

    #[test]
    fn capture_of_strong_packet() {
        let pair = [packet(7, 0.0, -90.0), packet(7, 0.02, -100.0)];
        let v = resolve_reception(&pair, &rules(CollisionModel::Ic));
        assert_eq!(v, vec![Verdict::Received, Verdict::Collision]);
        // 5 dB margin misses the 6 dB threshold.
        let pair = [packet(7, 0.0, -95.0), packet(7, 0.02, -100.0)];
        let v = resolve_reception(&pair, &rules(CollisionModel::Ic));
        assert_eq!(v, vec![Verdict::Collision; 2]);
    }

    #[test]
    fn capture_counts_noise() {
        // 7 dB over the interferer, but the interferer sits at the noise floor.
        let n = default_scenario().radio.noise_power_dbm();
        let pair = [packet(7, 0.0, n + 7.0), packet(7, 0.02, n)];
        let v = resolve_reception(&pair, &rules(CollisionModel::Ic));
        assert_eq!(v[0], Verdict::Collision);
    }

    #[test]
    fn interference_is_aggregated() {
        // 7 dB over each of two equal interferers is only 4 dB over their sum.
        let trio = [packet(7, 0.0, -93.0), packet(7, 0.01, -100.0), packet(7, 0.02, -100.0)];
        let v = resolve_reception(&trio, &rules(CollisionModel::Ic));
        assert_eq!(v[0], Verdict::Collision);
    }

    #[test]
    fn one_capture_per_episode() {
        // a and c never overlap but are chained through b.
        let chain = [packet(7, 0.0, -88.0), packet(7, 0.08, -100.0), packet(7, 0.16, -90.0)];
        let v = resolve_reception(&chain, &rules(CollisionModel::Ic));
        assert_eq!(v, vec![Verdict::Received, Verdict::Collision, Verdict::Collision]);
    }

    #[test]
    fn inter_sf_threshold_under_iic() {
        // SF7 desired needs SIR ≥ −16 dB against SF8; a 20 dB stronger SF8 packet breaks it.
        let pair = [packet(7, 0.0, -110.0), packet(8, 0.0, -90.0)];
        let v = resolve_reception(&pair, &rules(CollisionModel::Iic));
        assert_eq!(v, vec![Verdict::Collision, Verdict::Received]);
        let v = resolve_reception(&pair, &rules(CollisionModel::Ic));
        assert_eq!(v, vec![Verdict::Received; 2]);
    }

    #[test]
    fn iic_capture_counts_other_sfs() {
        // 7 dB over the SF7 interferer alone, 4 dB over it plus an equal SF8 packet.
        let trio = [packet(7, 0.0, -90.0), packet(7, 0.02, -97.0), packet(8, 0.0, -97.0)];
        assert_eq!(resolve_reception(&trio, &rules(CollisionModel::Ic))[0], Verdict::Received);
        assert_eq!(resolve_reception(&trio, &rules(CollisionModel::Iic))[0], Verdict::Collision);
    }

    #[test]
    fn non_overlapping_packets_ignored() {
        let pair = [packet(7, 0.0, -100.0), packet(7, 0.1, -100.0)];
        assert_eq!(
            resolve_reception(&pair, &rules(CollisionModel::Bp)),
            vec![Verdict::Received; 2]
        );
        let mut other_channel = pair;
        other_channel[1].start = 0.05;
        other_channel[1].channel = 1;
        assert_eq!(
            resolve_reception(&other_channel, &rules(CollisionModel::Bp)),
            vec![Verdict::Received; 2]
        );
    }
}
