//! Discrete-event simulation of a single-gateway LoRaWAN cell.
//!
//! Nodes generate Poisson uplink traffic, transmit immediately when idle
//! and within their duty-cycle budget, and the gateway decides every
//! packet at its end time under one of the three collision models.
//!
//! Throughput is normalised by the mean time on air over nodes:
//! `S = rx_count · T̄ / duration`, so the x-axis load `G_tx` is measured the
//! same way from transmitted packets. The airtime-weighted throughput
//! (`rx_airtime / duration`) is reported alongside.

mod engine;
pub mod propagation;
pub mod reception;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::airtime::AirtimeError;
use crate::scenario::{CollisionModel, Scenario};
use crate::units::SpreadingFactor;

pub use propagation::{hata_rural_loss, received_power_dbm, HATA_MIN_DISTANCE_M};
pub use reception::{resolve_reception, Contender, OverlapSummary, PacketEvent, ReceptionRules, Verdict};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Airtime(#[from] AirtimeError),
}

/// Counters for one replication at one offered load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicationStats {
    pub duration: f64,
    pub mean_toa: f64,
    /// Arrivals generated before the end of the run.
    pub generated: u64,
    pub dropped_busy: u64,
    pub dropped_duty_cycle: u64,
    pub tx_count: u64,
    pub rx_count: u64,
    pub lost_collision: u64,
    pub lost_sensitivity: u64,
    pub tx_airtime: f64,
    pub rx_airtime: f64,
    pub per_sf_tx: [u64; 6],
    pub per_sf_rx: [u64; 6],
    pub max_node_airtime_fraction: f64,
}

impl ReplicationStats {
    pub fn throughput(&self) -> f64 {
        self.rx_count as f64 * self.mean_toa / self.duration
    }

    pub fn transmitted_load(&self) -> f64 {
        self.tx_count as f64 * self.mean_toa / self.duration
    }

    pub fn airtime_throughput(&self) -> f64 {
        self.rx_airtime / self.duration
    }

    /// Received over transmitted; 1 when nothing was sent.
    pub fn pdr(&self) -> f64 {
        if self.tx_count == 0 {
            1.0
        } else {
            self.rx_count as f64 / self.tx_count as f64
        }
    }

    pub fn lost_count(&self) -> u64 {
        self.lost_collision + self.lost_sensitivity
    }
}

/// One decided packet, kept when tracing is on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub node: usize,
    pub sf: SpreadingFactor,
    pub channel: usize,
    pub start: f64,
    pub end: f64,
    pub power_mw: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub stats: ReplicationStats,
    pub trace: Vec<PacketRecord>,
}

/// Sample mean with the half-width of its 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub ci95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, ci95: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Self {
            mean,
            ci95: t * (var / n as f64).sqrt(),
        }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self {
            mean: self.mean * k,
            ci95: self.ci95 * k,
        }
    }
}

/// Replication-averaged result at one offered load.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub model: CollisionModel,
    pub offered: f64,
    pub channels: usize,
    pub throughput: Summary,
    pub airtime_throughput: Summary,
    pub transmitted_load: Summary,
    pub pdr: Summary,
    pub tx_count: u64,
    pub rx_count: u64,
    pub lost_count: u64,
    pub dropped_count: u64,
    pub per_sf_tx: [u64; 6],
    pub per_sf_rx: [u64; 6],
    pub max_node_airtime_fraction: f64,
    pub replications: Vec<ReplicationStats>,
}

impl SimOutcome {
    fn aggregate(model: CollisionModel, offered: f64, channels: usize, reps: Vec<ReplicationStats>) -> Self {
        let col = |f: fn(&ReplicationStats) -> f64| Summary::of(&reps.iter().map(f).collect::<Vec<_>>());
        let mut per_sf_tx = [0; 6];
        let mut per_sf_rx = [0; 6];
        for r in &reps {
            for k in 0..6 {
                per_sf_tx[k] += r.per_sf_tx[k];
                per_sf_rx[k] += r.per_sf_rx[k];
            }
        }
        Self {
            model,
            offered,
            channels,
            throughput: col(ReplicationStats::throughput),
            airtime_throughput: col(ReplicationStats::airtime_throughput),
            transmitted_load: col(ReplicationStats::transmitted_load),
            pdr: col(ReplicationStats::pdr),
            tx_count: reps.iter().map(|r| r.tx_count).sum(),
            rx_count: reps.iter().map(|r| r.rx_count).sum(),
            lost_count: reps.iter().map(|r| r.lost_count()).sum(),
            dropped_count: reps.iter().map(|r| r.dropped_busy + r.dropped_duty_cycle).sum(),
            per_sf_tx,
            per_sf_rx,
            max_node_airtime_fraction: reps.iter().map(|r| r.max_node_airtime_fraction).fold(0.0, f64::max),
            replications: reps,
        }
    }
}

fn check(scenario: &Scenario, loads: &[f64]) -> Result<(), SimError> {
    let sim = &scenario.simulation;
    if !(sim.duration_s > 0.0) {
        return Err(SimError::Config("simulation.duration_s must be positive".into()));
    }
    if sim.replications == 0 {
        return Err(SimError::Config("simulation.replications must be at least 1".into()));
    }
    if scenario.traffic.node_count == 0 {
        return Err(SimError::Config("traffic.node_count must be at least 1".into()));
    }
    if loads.is_empty() {
        return Err(SimError::Config("offered load list is empty".into()));
    }
    if let Some(g) = loads.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(SimError::Config(format!("offered load must be positive, got {g}")));
    }
    Ok(())
}

fn replicate(
    scenario: &Scenario,
    offered: f64,
    replication: u64,
    trace: bool,
) -> Result<ReplicationReport, SimError> {
    let setup = engine::CellSetup::new(scenario, replication)?;
    let (stats, trace) = engine::simulate(
        scenario,
        &setup,
        scenario.simulation.collision_model,
        offered,
        replication,
        trace,
    )?;
    Ok(ReplicationReport { stats, trace })
}

/// A single replication at `offered`, optionally keeping the packet trace.
///
/// Node placement depends only on `replication`, so different collision
/// models see the same cell and the same traffic.
pub fn run_replication(
    scenario: &Scenario,
    offered: f64,
    replication: u64,
    trace: bool,
) -> Result<ReplicationReport, SimError> {
    check(scenario, &[offered])?;
    replicate(scenario, offered, replication, trace)
}

/// All replications at one offered load.
pub fn run(scenario: &Scenario, offered: f64) -> Result<SimOutcome, SimError> {
    check(scenario, &[offered])?;
    run_at(scenario, offered)
}

fn run_at(scenario: &Scenario, offered: f64) -> Result<SimOutcome, SimError> {
    let reps = (0..scenario.simulation.replications as u64)
        .into_par_iter()
        .map(|r| replicate(scenario, offered, r, false).map(|rep| rep.stats))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimOutcome::aggregate(
        scenario.simulation.collision_model,
        offered,
        1,
        reps,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SimOutcome>,
}

impl SweepResult {
    /// Point with the largest mean throughput.
    pub fn max_throughput(&self) -> &SimOutcome {
        self.points
            .iter()
            .max_by(|a, b| a.throughput.mean.total_cmp(&b.throughput.mean))
            .expect("sweep has at least one point")
    }

    /// Point whose offered load equals `offered` to 1e-9.
    pub fn at(&self, offered: f64) -> Option<&SimOutcome> {
        self.points.iter().find(|p| (p.offered - offered).abs() < 1e-9)
    }
}

/// One outcome per offered load. Each point equals `run` at that load.
pub fn sweep(scenario: &Scenario, loads: &[f64]) -> Result<SweepResult, SimError> {
    check(scenario, loads)?;
    let points = loads
        .iter()
        .map(|&g| run_at(scenario, g))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult { points })
}

/// Independent copies of the single-channel cell on `channels` channels:
/// throughput and counts scale linearly, PDR is unchanged.
pub fn multichannel_projection(outcome: &SimOutcome, channels: usize) -> Result<SimOutcome, SimError> {
    if channels == 0 {
        return Err(SimError::Config("channel count must be at least 1".into()));
    }
    let k = channels as f64;
    let c = channels as u64;
    let mut out = outcome.clone();
    out.channels = outcome.channels * channels;
    out.offered *= k;
    out.throughput = outcome.throughput.scaled(k);
    out.airtime_throughput = outcome.airtime_throughput.scaled(k);
    out.transmitted_load = outcome.transmitted_load.scaled(k);
    out.tx_count *= c;
    out.rx_count *= c;
    out.lost_count *= c;
    out.dropped_count *= c;
    out.per_sf_tx = outcome.per_sf_tx.map(|v| v * c);
    out.per_sf_rx = outcome.per_sf_rx.map(|v| v * c);
    Ok(out)
}
