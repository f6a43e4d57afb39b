//! Event loop for one replication.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1};

use crate::airtime::{per_node_rate, time_on_air, AirtimeParams};
use crate::scenario::{place_nodes, CollisionModel, Scenario};
use crate::units::{dbm_to_mw, SpreadingFactor};

use super::propagation::received_power_dbm;
use super::reception::{Contender, OverlapSummary, ReceptionRules, Verdict};
use super::{PacketRecord, ReplicationStats, SimError};

const PLACEMENT_STREAM_TAG: u64 = 0x706c_6163_656d_656e;
const TRAFFIC_STREAM_TAG: u64 = 0x7472_6166_6669_6321;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    /// Packet generation at a node.
    Arrival(usize),
    /// End of the transmission with this id.
    TxEnd(u64),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

struct Node {
    sf: SpreadingFactor,
    power_mw: f64,
    busy_until: f64,
    /// (start, duration) of transmissions inside the duty-cycle window.
    recent: VecDeque<(f64, f64)>,
    recent_airtime: f64,
    total_airtime: f64,
}

/// Same-SF packets on one channel chained by overlap, still growing while
/// any member is on air.
#[derive(Default)]
struct Episode {
    on_air: u32,
    finished: Vec<InFlight>,
}

struct InFlight {
    id: u64,
    node: usize,
    sf: SpreadingFactor,
    channel: usize,
    start: f64,
    end: f64,
    power_mw: f64,
    overlap: OverlapSummary,
}

/// Everything a replication needs that does not change with the offered load.
pub(super) struct CellSetup {
    pub nodes_sf: Vec<SpreadingFactor>,
    pub nodes_rx_dbm: Vec<f64>,
    pub toa: [f64; 6],
    pub mean_toa: f64,
}

impl CellSetup {
    pub fn new(scenario: &Scenario, replication: u64) -> Result<Self, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.simulation.seed ^ PLACEMENT_STREAM_TAG);
        rng.set_stream(replication);
        let placement = place_nodes(&scenario.traffic, &mut rng);
        let radio = &scenario.radio;
        let payload = scenario.traffic.phy_payload_bytes();
        let mut toa = [0.0; 6];
        for sf in SpreadingFactor::ALL {
            let mut params = AirtimeParams::eu868(sf, payload);
            params.bandwidth_hz = radio.bandwidth_hz;
            params.coding_rate = radio.coding_rate.index();
            toa[sf.index()] = time_on_air(&params)?;
        }
        let nodes_sf: Vec<SpreadingFactor> = placement.nodes.iter().map(|n| n.sf).collect();
        let nodes_rx_dbm = placement
            .nodes
            .iter()
            .map(|n| received_power_dbm(n.distance, radio))
            .collect::<Result<Vec<_>, _>>()?;
        let mean_toa = nodes_sf.iter().map(|sf| toa[sf.index()]).sum::<f64>() / nodes_sf.len() as f64;
        Ok(Self {
            nodes_sf,
            nodes_rx_dbm,
            toa,
            mean_toa,
        })
    }
}

/// Keyed by the load value, so a point does not depend on the rest of the sweep.
fn traffic_rng(scenario: &Scenario, offered: f64, replication: u64) -> ChaCha8Rng {
    let key = scenario.simulation.seed ^ TRAFFIC_STREAM_TAG ^ offered.to_bits().rotate_left(29);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replication);
    rng
}

/// Simulates `duration_s` of traffic at aggregate load `offered`.
///
/// Arrivals are Poisson per node; an arrival is dropped while the node is
/// transmitting or when the packet would push the node's airtime within the
/// sliding duty-cycle window past `duty_cycle_limit × window`.
pub(super) fn simulate(
    scenario: &Scenario,
    setup: &CellSetup,
    model: CollisionModel,
    offered: f64,
    replication: u64,
    trace: bool,
) -> Result<(ReplicationStats, Vec<PacketRecord>), SimError> {
    let traffic = &scenario.traffic;
    let duration = scenario.simulation.duration_s;
    let n = setup.nodes_sf.len();
    let rate = per_node_rate(offered, n, setup.mean_toa, traffic.duty_cycle_limit)?;
    let interarrival = Exp::new(rate).map_err(|e| SimError::Config(e.to_string()))?;
    let window = traffic.duty_cycle_window_s;
    let budget = traffic.duty_cycle_limit * window;
    let rules = ReceptionRules::new(model, &scenario.thresholds, scenario.radio.noise_power_dbm());
    let episode_key = |channel: usize, sf: SpreadingFactor| channel * SpreadingFactor::COUNT + sf.index();
    let mut episodes: Vec<Episode> = (0..traffic.channels * SpreadingFactor::COUNT)
        .map(|_| Episode::default())
        .collect();

    let mut rng = traffic_rng(scenario, offered, replication);
    let mut nodes: Vec<Node> = (0..n)
        .map(|k| Node {
            sf: setup.nodes_sf[k],
            power_mw: dbm_to_mw(setup.nodes_rx_dbm[k]),
            busy_until: f64::NEG_INFINITY,
            recent: VecDeque::new(),
            recent_airtime: 0.0,
            total_airtime: 0.0,
        })
        .collect();

    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |queue: &mut BinaryHeap<Reverse<Event>>, time: f64, kind: EventKind| {
        queue.push(Reverse(Event { time, seq, kind }));
        seq += 1;
    };
    for k in 0..n {
        let t = interarrival.sample(&mut rng);
        push(&mut queue, t, EventKind::Arrival(k));
    }

    let mut stats = ReplicationStats {
        duration,
        mean_toa: setup.mean_toa,
        ..ReplicationStats::default()
    };
    let mut records = Vec::new();
    let mut active: Vec<InFlight> = Vec::new();
    let mut next_id = 0u64;

    while let Some(Reverse(event)) = queue.pop() {
        let now = event.time;
        match event.kind {
            EventKind::Arrival(k) => {
                if now >= duration {
                    continue;
                }
                let next = now + interarrival.sample(&mut rng);
                push(&mut queue, next, EventKind::Arrival(k));
                stats.generated += 1;

                let node = &mut nodes[k];
                if now < node.busy_until {
                    stats.dropped_busy += 1;
                    continue;
                }
                while let Some(&(start, d)) = node.recent.front() {
                    if start > now - window {
                        break;
                    }
                    node.recent.pop_front();
                    node.recent_airtime -= d;
                }
                let toa = setup.toa[node.sf.index()];
                if node.recent_airtime + toa > budget + 1e-12 {
                    stats.dropped_duty_cycle += 1;
                    continue;
                }
                node.recent.push_back((now, toa));
                node.recent_airtime += toa;
                node.total_airtime += toa;
                node.busy_until = now + toa;

                let channel = if traffic.channels > 1 {
                    rng.random_range(0..traffic.channels)
                } else {
                    0
                };
                let power_mw = if traffic.rayleigh_fading {
                    let h: f64 = Exp1.sample(&mut rng);
                    node.power_mw * h
                } else {
                    node.power_mw
                };
                let mut fresh = InFlight {
                    id: next_id,
                    node: k,
                    sf: node.sf,
                    channel,
                    start: now,
                    end: now + toa,
                    power_mw,
                    overlap: OverlapSummary::default(),
                };
                next_id += 1;
                for other in active.iter_mut().filter(|o| o.channel == channel) {
                    other.overlap.add(other.sf, fresh.sf, fresh.power_mw);
                    fresh.overlap.add(fresh.sf, other.sf, other.power_mw);
                }
                stats.tx_count += 1;
                stats.per_sf_tx[fresh.sf.index()] += 1;
                stats.tx_airtime += toa;
                episodes[episode_key(channel, fresh.sf)].on_air += 1;
                push(&mut queue, fresh.end, EventKind::TxEnd(fresh.id));
                active.push(fresh);
            }
            EventKind::TxEnd(id) => {
                let pos = active
                    .iter()
                    .position(|a| a.id == id)
                    .expect("ending transmission is active");
                let done = active.swap_remove(pos);
                let episode = &mut episodes[episode_key(done.channel, done.sf)];
                episode.on_air -= 1;
                episode.finished.push(done);
                if episode.on_air > 0 {
                    continue;
                }
                let members = std::mem::take(&mut episode.finished);
                let contenders: Vec<Contender> = members
                    .iter()
                    .map(|m| Contender {
                        sf: m.sf,
                        power_mw: m.power_mw,
                        overlap: m.overlap,
                    })
                    .collect();
                for (m, verdict) in members.iter().zip(rules.decide_episode(&contenders)) {
                    match verdict {
                        Verdict::Received => {
                            stats.rx_count += 1;
                            stats.per_sf_rx[m.sf.index()] += 1;
                            stats.rx_airtime += setup.toa[m.sf.index()];
                        }
                        Verdict::Collision => stats.lost_collision += 1,
                        Verdict::BelowSensitivity => stats.lost_sensitivity += 1,
                    }
                    if trace {
                        records.push(PacketRecord {
                            node: m.node,
                            sf: m.sf,
                            channel: m.channel,
                            start: m.start,
                            end: m.end,
                            power_mw: m.power_mw,
                            verdict,
                        });
                    }
                }
            }
        }
    }
    stats.max_node_airtime_fraction = nodes
        .iter()
        .map(|n| n.total_airtime / duration)
        .fold(0.0, f64::max);
    Ok((stats, records))
}
