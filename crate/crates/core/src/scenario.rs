//! Experiment configuration, ring topology and node placement.
//!
//! Scenario files are TOML. Every section except `[thresholds]` has defaults
//! matching the EU868 single-gateway setup (868.1 MHz, 125 kHz, 14 dBm,
//! 300 end devices, 1 % duty cycle); thresholds must always be supplied,
//! either inline or through `thresholds.file`. Unknown keys are rejected.
//!
//! [`Scenario::from_raw`] is the only place where dB quantities are turned
//! into linear ones; downstream code works on linear powers throughout.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{db_to_linear, dbm_to_mw, SpreadingFactor, SPEED_OF_LIGHT};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid configuration:\n{0}")]
    Invalid(ValidationReport),
}

/// One invariant violation, located by its dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub errors: Vec<FieldError>,
}

impl ValidationReport {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// True when some error is located at `path`.
    pub fn mentions(&self, path: &str) -> bool {
        self.errors.iter().any(|e| e.path == path)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "  {}: {}", e.path, e.message)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw (file) representation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawRadio {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub max_tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub path_loss_exponent: f64,
    pub coding_rate: String,
    pub gateway_height_m: f64,
    pub device_height_m: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
}

impl Default for RawRadio {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 868.1e6,
            bandwidth_hz: 125e3,
            tx_power_dbm: 14.0,
            max_tx_power_dbm: 14.0,
            noise_figure_db: 6.0,
            path_loss_exponent: 2.75,
            coding_rate: "4/5".into(),
            gateway_height_m: 24.0,
            device_height_m: 3.0,
            tx_antenna_gain_dbi: 0.0,
            rx_antenna_gain_dbi: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawTopology {
    pub cell_radius_m: f64,
    pub num_rings: usize,
    pub mean_nodes: f64,
    pub transmit_probability: f64,
}

impl Default for RawTopology {
    fn default() -> Self {
        Self {
            cell_radius_m: 3000.0,
            num_rings: 6,
            mean_nodes: 500.0,
            transmit_probability: 0.01,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThresholds {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_floor_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sir_matrix_db: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawTraffic {
    pub offered_loads: Vec<f64>,
    pub node_count: usize,
    pub sf_assignment: SfAssignmentKind,
    pub single_sf: u8,
    pub placement: RadialSampling,
    pub placement_radius_m: f64,
    pub duty_cycle_limit: f64,
    pub duty_cycle_window_s: f64,
    pub app_payload_bytes: u32,
    pub mac_overhead_bytes: u32,
    pub channels: usize,
    pub rayleigh_fading: bool,
}

impl Default for RawTraffic {
    fn default() -> Self {
        Self {
            offered_loads: (1..=10).map(|k| k as f64 / 10.0).collect(),
            node_count: 300,
            sf_assignment: SfAssignmentKind::Single,
            single_sf: 7,
            placement: RadialSampling::RadiusUniform,
            placement_radius_m: 13_000.0,
            duty_cycle_limit: 0.01,
            duty_cycle_window_s: 3600.0,
            app_payload_bytes: 1,
            mac_overhead_bytes: 13,
            channels: 1,
            rayleigh_fading: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawSimulation {
    pub collision_model: CollisionModel,
    pub seed: u64,
    pub replications: usize,
    pub duration_s: f64,
}

impl Default for RawSimulation {
    fn default() -> Self {
        Self {
            collision_model: CollisionModel::Bp,
            seed: 1,
            replications: 100,
            duration_s: 7200.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawMonteCarlo {
    pub trials: u64,
    pub fading: FadingCoupling,
}

impl Default for RawMonteCarlo {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            fading: FadingCoupling::Independent,
        }
    }
}

/// A scenario file as written on disk.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawScenario {
    pub radio: RawRadio,
    pub topology: RawTopology,
    pub thresholds: RawThresholds,
    pub traffic: RawTraffic,
    pub simulation: RawSimulation,
    pub montecarlo: RawMonteCarlo,
}

impl RawScenario {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })
    }

    /// Reads a scenario and inlines `thresholds.file` (resolved relative to
    /// the scenario's directory). Inline threshold keys take precedence.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let mut raw = Self::from_toml_str(&text, &path.display().to_string())?;
        if let Some(file) = raw.thresholds.file.take() {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let tpath = base.join(&file);
            let ttext = read(&tpath)?;
            let included: RawThresholds =
                toml::from_str(&ttext).map_err(|e| ConfigError::Parse {
                    origin: tpath.display().to_string(),
                    message: e.to_string(),
                })?;
            if raw.thresholds.snr_floor_db.is_none() {
                raw.thresholds.snr_floor_db = included.snr_floor_db;
            }
            if raw.thresholds.sir_matrix_db.is_none() {
                raw.thresholds.sir_matrix_db = included.sir_matrix_db;
            }
        }
        Ok(raw)
    }

    /// Canonical TOML text of the resolved configuration.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("raw scenario always serializes")
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Validated types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CollisionModel {
    /// Baseline pessimistic: any overlap destroys every packet involved.
    #[serde(rename = "BP")]
    Bp,
    /// Intra-SF collisions with capture; other SFs are transparent.
    #[serde(rename = "IC")]
    Ic,
    /// Intra- and inter-SF interference, capture within an SF.
    #[serde(rename = "IIC")]
    Iic,
}

impl CollisionModel {
    pub const ALL: [CollisionModel; 3] = [CollisionModel::Bp, CollisionModel::Ic, CollisionModel::Iic];

    pub fn label(self) -> &'static str {
        match self {
            CollisionModel::Bp => "BP",
            CollisionModel::Ic => "IC",
            CollisionModel::Iic => "IIC",
        }
    }
}

impl std::str::FromStr for CollisionModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BP" | "B(P)" => Ok(CollisionModel::Bp),
            "IC" => Ok(CollisionModel::Ic),
            "IIC" | "ICC" => Ok(CollisionModel::Iic),
            other => Err(format!("unknown collision model '{other}' (expected BP, IC or IIC)")),
        }
    }
}

impl fmt::Display for CollisionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfAssignmentKind {
    Single,
    UniformRandom,
    DistanceRings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfAssignment {
    /// Every node uses the same SF.
    Single(SpreadingFactor),
    /// Exact equal quotas per SF, shuffled over the nodes.
    UniformRandom,
    /// SF given by the equal-area ring containing the node.
    DistanceRings,
}

/// How node radii are drawn inside the placement disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialSampling {
    /// `r = R·u`: uniform radius, denser near the centre.
    RadiusUniform,
    /// `r = R·√u`: uniform over the disk area.
    AreaUniform,
}

/// Whether the Monte Carlo estimator shares the desired node's fading draw
/// between the SNR event and the per-ring SIR events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingCoupling {
    /// Fresh `|h₁|²` per event; the estimand is exactly `H₁·Π P_SIRj`.
    Independent,
    /// One `|h₁|²` per trial, as in a single received signal.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodingRate {
    Cr4_5,
    Cr4_6,
    Cr4_7,
    Cr4_8,
}

impl CodingRate {
    /// The `CR` index of the airtime formula (4/5 ⇒ 1).
    pub fn index(self) -> u32 {
        match self {
            CodingRate::Cr4_5 => 1,
            CodingRate::Cr4_6 => 2,
            CodingRate::Cr4_7 => 3,
            CodingRate::Cr4_8 => 4,
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "4/5" => Some(CodingRate::Cr4_5),
            "4/6" => Some(CodingRate::Cr4_6),
            "4/7" => Some(CodingRate::Cr4_7),
            "4/8" => Some(CodingRate::Cr4_8),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioConfig {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub path_loss_exponent: f64,
    pub coding_rate: CodingRate,
    pub gateway_height_m: f64,
    pub device_height_m: f64,
    pub tx_antenna_gain_dbi: f64,
    pub rx_antenna_gain_dbi: f64,
    tx_power_mw: f64,
    noise_power_mw: f64,
}

impl RadioConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    /// Thermal noise `−174 + F + 10·log₁₀(B)` in dBm.
    pub fn noise_power_dbm(&self) -> f64 {
        noise_power_dbm(self.noise_figure_db, self.bandwidth_hz)
    }

    pub fn noise_power_mw(&self) -> f64 {
        self.noise_power_mw
    }

    pub fn tx_power_mw(&self) -> f64 {
        self.tx_power_mw
    }
}

/// `σ_w² = −174 + F + 10·log₁₀(B)` dBm.
pub fn noise_power_dbm(noise_figure_db: f64, bandwidth_hz: f64) -> f64 {
    -174.0 + noise_figure_db + 10.0 * bandwidth_hz.log10()
}

/// Per-SF SNR floors and the SIR capture matrix, kept in both dB and linear form.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    snr_floor_db: [f64; 6],
    sir_db: [[f64; 6]; 6],
    snr_floor: [f64; 6],
    sir: [[f64; 6]; 6],
}

impl ThresholdSet {
    pub fn new(snr_floor_db: [f64; 6], sir_db: [[f64; 6]; 6]) -> Self {
        let snr_floor = snr_floor_db.map(db_to_linear);
        let sir = sir_db.map(|row| row.map(db_to_linear));
        Self {
            snr_floor_db,
            sir_db,
            snr_floor,
            sir,
        }
    }

    /// SNR floor γ for `sf`, linear.
    pub fn snr_floor(&self, sf: SpreadingFactor) -> f64 {
        self.snr_floor[sf.index()]
    }

    pub fn snr_floor_db(&self, sf: SpreadingFactor) -> f64 {
        self.snr_floor_db[sf.index()]
    }

    /// SIR threshold δ for decoding `desired` under interference from `interferer`, linear.
    pub fn sir(&self, desired: SpreadingFactor, interferer: SpreadingFactor) -> f64 {
        self.sir[desired.index()][interferer.index()]
    }

    pub fn sir_db(&self, desired: SpreadingFactor, interferer: SpreadingFactor) -> f64 {
        self.sir_db[desired.index()][interferer.index()]
    }

    /// Copy with one SIR entry replaced (dB).
    pub fn with_sir_db(&self, desired: SpreadingFactor, interferer: SpreadingFactor, db: f64) -> Self {
        let mut sir_db = self.sir_db;
        sir_db[desired.index()][interferer.index()] = db;
        Self::new(self.snr_floor_db, sir_db)
    }

    /// Copy with every SNR floor replaced (dB).
    pub fn with_snr_floors_db(&self, floors: [f64; 6]) -> Self {
        Self::new(floors, self.sir_db)
    }
}

/// Concentric SF rings around the gateway; ring `j` (zero-based) carries SF `7 + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingTopology {
    cell_radius: f64,
    boundaries: Vec<f64>,
    areas: Vec<f64>,
    mean_nodes: Vec<f64>,
    transmit_probability: f64,
}

impl RingTopology {
    /// Equal-area rings with `mean_nodes_total` spread in proportion to area.
    pub fn equal_area(
        cell_radius: f64,
        num_rings: usize,
        mean_nodes_total: f64,
        transmit_probability: f64,
    ) -> Result<Self, ConfigError> {
        let outer = equal_area_rings(cell_radius, num_rings)?;
        let mut boundaries = Vec::with_capacity(num_rings + 1);
        boundaries.push(0.0);
        boundaries.extend(outer);
        let areas: Vec<f64> = boundaries
            .windows(2)
            .map(|w| PI * (w[1] * w[1] - w[0] * w[0]))
            .collect();
        let total_area = PI * cell_radius * cell_radius;
        let mean_nodes = areas
            .iter()
            .map(|a| mean_nodes_total * a / total_area)
            .collect();
        Ok(Self {
            cell_radius,
            boundaries,
            areas,
            mean_nodes,
            transmit_probability,
        })
    }

    /// Same geometry with a different mean node total.
    pub fn with_mean_nodes(&self, mean_nodes_total: f64) -> Self {
        let total_area: f64 = self.areas.iter().sum();
        let mut out = self.clone();
        out.mean_nodes = self
            .areas
            .iter()
            .map(|a| mean_nodes_total * a / total_area)
            .collect();
        out
    }

    /// Same geometry with one ring's mean node count replaced.
    pub fn with_ring_mean_nodes(&self, ring: usize, mean_nodes: f64) -> Self {
        let mut out = self.clone();
        out.mean_nodes[ring] = mean_nodes;
        out
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    pub fn num_rings(&self) -> usize {
        self.areas.len()
    }

    /// `l_0 = 0, l_1, …, l_n = R`.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Inner and outer radius of ring `j`.
    pub fn ring_bounds(&self, ring: usize) -> (f64, f64) {
        (self.boundaries[ring], self.boundaries[ring + 1])
    }

    pub fn area(&self, ring: usize) -> f64 {
        self.areas[ring]
    }

    pub fn mean_nodes(&self, ring: usize) -> f64 {
        self.mean_nodes[ring]
    }

    pub fn total_mean_nodes(&self) -> f64 {
        self.mean_nodes.iter().sum()
    }

    /// Node density ρ_j.
    pub fn density(&self, ring: usize) -> f64 {
        self.mean_nodes[ring] / self.areas[ring]
    }

    pub fn transmit_probability(&self) -> f64 {
        self.transmit_probability
    }

    /// Interferer intensity α_j = p·ρ_j.
    pub fn intensity(&self, ring: usize) -> f64 {
        self.transmit_probability * self.density(ring)
    }

    /// Ring containing distance `d`; `(l_{j−1}, l_j]`, with `d = 0` in ring 0.
    pub fn ring_of(&self, d: f64) -> Option<usize> {
        if !(0.0..=self.cell_radius).contains(&d) {
            return None;
        }
        let idx = self.boundaries[1..].partition_point(|&l| l < d);
        Some(idx.min(self.num_rings() - 1))
    }

    /// SF carried by ring `j`.
    pub fn ring_sf(&self, ring: usize) -> SpreadingFactor {
        SpreadingFactor::from_index(ring).expect("at most six rings")
    }
}

/// Outer radii `l_1..l_n` of `n` equal-area rings: `l_j = R·√(j/n)`.
pub fn equal_area_rings(cell_radius: f64, num_rings: usize) -> Result<Vec<f64>, ConfigError> {
    let mut report = ValidationReport::default();
    if !(cell_radius > 0.0 && cell_radius.is_finite()) {
        report.push("topology.cell_radius_m", "must be positive");
    }
    if num_rings == 0 {
        report.push("topology.num_rings", "must be at least 1");
    }
    if !report.is_empty() {
        return Err(ConfigError::Invalid(report));
    }
    let n = num_rings as f64;
    Ok((1..=num_rings)
        .map(|j| {
            if j == num_rings {
                cell_radius
            } else {
                cell_radius * (j as f64 / n).sqrt()
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficConfig {
    pub offered_loads: Vec<f64>,
    pub node_count: usize,
    pub sf_assignment: SfAssignment,
    pub placement: RadialSampling,
    pub placement_radius_m: f64,
    pub duty_cycle_limit: f64,
    pub duty_cycle_window_s: f64,
    pub app_payload_bytes: u32,
    pub mac_overhead_bytes: u32,
    pub channels: usize,
    pub rayleigh_fading: bool,
}

impl TrafficConfig {
    /// PHY payload: application payload plus LoRaWAN MAC overhead.
    pub fn phy_payload_bytes(&self) -> u32 {
        self.app_payload_bytes + self.mac_overhead_bytes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub collision_model: CollisionModel,
    pub seed: u64,
    pub replications: usize,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub trials: u64,
    pub fading: FadingCoupling,
}

/// A validated, immutable experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub radio: RadioConfig,
    pub topology: RingTopology,
    pub thresholds: ThresholdSet,
    pub traffic: TrafficConfig,
    pub simulation: SimulationConfig,
    pub montecarlo: MonteCarloConfig,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(&RawScenario::load(path)?)
    }

    /// Parse and validate TOML text. `thresholds.file` is not resolved here;
    /// use [`Scenario::load`] for files with includes.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_raw(&RawScenario::from_toml_str(text, "<string>")?)
    }

    /// Checks every invariant, reporting all violations at once.
    pub fn from_raw(raw: &RawScenario) -> Result<Self, ConfigError> {
        let mut report = ValidationReport::default();
        let radio = validate_radio(&raw.radio, &mut report);
        let thresholds = validate_thresholds(&raw.thresholds, &mut report);
        let topology = validate_topology(&raw.topology, &mut report);
        let traffic = validate_traffic(&raw.traffic, &mut report);
        let simulation = validate_simulation(&raw.simulation, &mut report);
        if raw.montecarlo.trials == 0 {
            report.push("montecarlo.trials", "must be at least 1");
        }
        match (radio, thresholds, topology, traffic, simulation) {
            (Some(radio), Some(thresholds), Some(topology), Some(traffic), Some(simulation))
                if report.is_empty() =>
            {
                Ok(Scenario {
                    radio,
                    topology,
                    thresholds,
                    traffic,
                    simulation,
                    montecarlo: MonteCarloConfig {
                        trials: raw.montecarlo.trials,
                        fading: raw.montecarlo.fading,
                    },
                })
            }
            _ => Err(ConfigError::Invalid(report)),
        }
    }
}

/// Validation entry point returning the full list of violations.
pub fn validate(raw: &RawScenario) -> Result<Scenario, ValidationReport> {
    match Scenario::from_raw(raw) {
        Ok(s) => Ok(s),
        Err(ConfigError::Invalid(r)) => Err(r),
        Err(other) => {
            let mut r = ValidationReport::default();
            r.push("", other.to_string());
            Err(r)
        }
    }
}

fn finite_positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn validate_radio(raw: &RawRadio, report: &mut ValidationReport) -> Option<RadioConfig> {
    let before = report.errors.len();
    let mhz = raw.carrier_frequency_hz / 1e6;
    if !finite_positive(raw.carrier_frequency_hz) {
        report.push("radio.carrier_frequency_hz", "must be positive");
    } else if !(150.0..=1500.0).contains(&mhz) {
        report.push(
            "radio.carrier_frequency_hz",
            "outside the Okumura-Hata range 150-1500 MHz",
        );
    }
    if !finite_positive(raw.bandwidth_hz) {
        report.push("radio.bandwidth_hz", "bandwidth must be positive");
    } else if ![125e3, 250e3, 500e3].contains(&raw.bandwidth_hz) {
        report.push("radio.bandwidth_hz", "must be 125000, 250000 or 500000");
    }
    if !raw.tx_power_dbm.is_finite() || raw.tx_power_dbm > raw.max_tx_power_dbm {
        report.push(
            "radio.tx_power_dbm",
            format!("must not exceed the regulatory bound {} dBm", raw.max_tx_power_dbm),
        );
    }
    if !raw.noise_figure_db.is_finite() || raw.noise_figure_db < 0.0 {
        report.push("radio.noise_figure_db", "must be non-negative");
    }
    if !(raw.path_loss_exponent.is_finite() && raw.path_loss_exponent > 2.0) {
        report.push("radio.path_loss_exponent", "path_loss_exponent must exceed 2");
    }
    let coding_rate = CodingRate::parse(&raw.coding_rate);
    if coding_rate.is_none() {
        report.push("radio.coding_rate", "must be one of 4/5, 4/6, 4/7, 4/8");
    }
    if !finite_positive(raw.gateway_height_m) {
        report.push("radio.gateway_height_m", "must be positive");
    }
    if !finite_positive(raw.device_height_m) {
        report.push("radio.device_height_m", "must be positive");
    }
    for (path, v) in [
        ("radio.tx_antenna_gain_dbi", raw.tx_antenna_gain_dbi),
        ("radio.rx_antenna_gain_dbi", raw.rx_antenna_gain_dbi),
    ] {
        if !v.is_finite() {
            report.push(path, "must be finite");
        }
    }
    if report.errors.len() != before {
        return None;
    }
    Some(RadioConfig {
        carrier_frequency_hz: raw.carrier_frequency_hz,
        bandwidth_hz: raw.bandwidth_hz,
        tx_power_dbm: raw.tx_power_dbm,
        noise_figure_db: raw.noise_figure_db,
        path_loss_exponent: raw.path_loss_exponent,
        coding_rate: coding_rate?,
        gateway_height_m: raw.gateway_height_m,
        device_height_m: raw.device_height_m,
        tx_antenna_gain_dbi: raw.tx_antenna_gain_dbi,
        rx_antenna_gain_dbi: raw.rx_antenna_gain_dbi,
        tx_power_mw: dbm_to_mw(raw.tx_power_dbm),
        noise_power_mw: dbm_to_mw(noise_power_dbm(raw.noise_figure_db, raw.bandwidth_hz)),
    })
}

fn validate_thresholds(raw: &RawThresholds, report: &mut ValidationReport) -> Option<ThresholdSet> {
    let before = report.errors.len();
    let mut snr = [0.0; 6];
    match &raw.snr_floor_db {
        None => report.push("thresholds.snr_floor_db", "required (one value per SF7..SF12)"),
        Some(v) if v.len() != 6 => report.push(
            "thresholds.snr_floor_db",
            format!("expected 6 entries (SF7..SF12), found {}", v.len()),
        ),
        Some(v) => {
            snr.copy_from_slice(v);
            if v.iter().any(|x| !x.is_finite()) {
                report.push("thresholds.snr_floor_db", "entries must be finite");
            } else if v.windows(2).any(|w| w[1] >= w[0]) {
                report.push(
                    "thresholds.snr_floor_db",
                    "must be strictly decreasing from SF7 to SF12",
                );
            }
        }
    }
    let mut sir = [[0.0; 6]; 6];
    match &raw.sir_matrix_db {
        None => report.push("thresholds.sir_matrix_db", "required (6x6, row = desired SF)"),
        Some(rows) => {
            if rows.len() > 6 {
                report.push(
                    "thresholds.sir_matrix_db",
                    format!("expected 6 rows, found {}", rows.len()),
                );
            }
            for i in 0..6 {
                let row = rows.get(i).map(Vec::as_slice).unwrap_or(&[]);
                if row.len() > 6 {
                    report.push(
                        format!("thresholds.sir_matrix_db[{i}]"),
                        format!("expected 6 entries, found {}", row.len()),
                    );
                }
                for j in 0..6 {
                    match row.get(j) {
                        Some(v) if v.is_finite() => sir[i][j] = *v,
                        Some(_) => report.push(
                            format!("thresholds.sir_matrix_db[{i}][{j}]"),
                            "must be finite",
                        ),
                        None => report.push(
                            format!("thresholds.sir_matrix_db[{i}][{j}]"),
                            format!(
                                "missing entry ({i},{j}): desired SF{}, interferer SF{}",
                                7 + i,
                                7 + j
                            ),
                        ),
                    }
                }
            }
        }
    }
    (report.errors.len() == before).then(|| ThresholdSet::new(snr, sir))
}

fn validate_topology(raw: &RawTopology, report: &mut ValidationReport) -> Option<RingTopology> {
    let before = report.errors.len();
    if !finite_positive(raw.cell_radius_m) {
        report.push("topology.cell_radius_m", "must be positive");
    }
    if !(1..=SpreadingFactor::COUNT).contains(&raw.num_rings) {
        report.push("topology.num_rings", "must be between 1 and 6");
    }
    if !(raw.mean_nodes.is_finite() && raw.mean_nodes >= 0.0) {
        report.push("topology.mean_nodes", "must be non-negative");
    }
    if !(0.0..=1.0).contains(&raw.transmit_probability) {
        report.push("topology.transmit_probability", "must lie in [0, 1]");
    }
    if report.errors.len() != before {
        return None;
    }
    RingTopology::equal_area(
        raw.cell_radius_m,
        raw.num_rings,
        raw.mean_nodes,
        raw.transmit_probability,
    )
    .ok()
}

fn validate_traffic(raw: &RawTraffic, report: &mut ValidationReport) -> Option<TrafficConfig> {
    let before = report.errors.len();
    if raw.offered_loads.is_empty() {
        report.push("traffic.offered_loads", "must not be empty");
    }
    for (k, g) in raw.offered_loads.iter().enumerate() {
        if !(*g > 0.0 && *g <= 1.0) {
            report.push(format!("traffic.offered_loads[{k}]"), "must lie in (0, 1]");
        }
    }
    if raw.node_count == 0 {
        report.push("traffic.node_count", "must be at least 1");
    }
    let single = SpreadingFactor::new(raw.single_sf);
    if single.is_none() {
        report.push("traffic.single_sf", "must be between 7 and 12");
    }
    if !finite_positive(raw.placement_radius_m) {
        report.push("traffic.placement_radius_m", "must be positive");
    }
    if !(raw.duty_cycle_limit > 0.0 && raw.duty_cycle_limit <= 1.0) {
        report.push("traffic.duty_cycle_limit", "must lie in (0, 1]");
    }
    if !finite_positive(raw.duty_cycle_window_s) {
        report.push("traffic.duty_cycle_window_s", "must be positive");
    }
    if raw.app_payload_bytes + raw.mac_overhead_bytes == 0 {
        report.push("traffic.app_payload_bytes", "PHY payload must be at least 1 byte");
    } else if raw.app_payload_bytes + raw.mac_overhead_bytes > 255 {
        report.push("traffic.app_payload_bytes", "PHY payload must not exceed 255 bytes");
    }
    if raw.channels == 0 {
        report.push("traffic.channels", "must be at least 1");
    }
    if report.errors.len() != before {
        return None;
    }
    let sf_assignment = match raw.sf_assignment {
        SfAssignmentKind::Single => SfAssignment::Single(single?),
        SfAssignmentKind::UniformRandom => SfAssignment::UniformRandom,
        SfAssignmentKind::DistanceRings => SfAssignment::DistanceRings,
    };
    Some(TrafficConfig {
        offered_loads: raw.offered_loads.clone(),
        node_count: raw.node_count,
        sf_assignment,
        placement: raw.placement,
        placement_radius_m: raw.placement_radius_m,
        duty_cycle_limit: raw.duty_cycle_limit,
        duty_cycle_window_s: raw.duty_cycle_window_s,
        app_payload_bytes: raw.app_payload_bytes,
        mac_overhead_bytes: raw.mac_overhead_bytes,
        channels: raw.channels,
        rayleigh_fading: raw.rayleigh_fading,
    })
}

fn validate_simulation(raw: &RawSimulation, report: &mut ValidationReport) -> Option<SimulationConfig> {
    let before = report.errors.len();
    if raw.replications == 0 {
        report.push("simulation.replications", "must be at least 1");
    }
    if !finite_positive(raw.duration_s) {
        report.push("simulation.duration_s", "simulation duration must be positive");
    }
    (report.errors.len() == before).then(|| SimulationConfig {
        collision_model: raw.collision_model,
        seed: raw.seed,
        replications: raw.replications,
        duration_s: raw.duration_s,
    })
}

// ---------------------------------------------------------------------------
// Placement
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedNode {
    pub distance: f64,
    pub angle: f64,
    pub sf: SpreadingFactor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodePlacement {
    pub nodes: Vec<PlacedNode>,
}

impl NodePlacement {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn count_per_sf(&self) -> [usize; 6] {
        let mut counts = [0; 6];
        for n in &self.nodes {
            counts[n.sf.index()] += 1;
        }
        counts
    }
}

/// Draws a radius in `(0, R]`.
pub fn sample_radius<R: Rng + ?Sized>(rng: &mut R, radius: f64, sampling: RadialSampling) -> f64 {
    // 1 − U keeps the draw strictly positive.
    let u = 1.0 - rng.random::<f64>();
    match sampling {
        RadialSampling::RadiusUniform => radius * u,
        RadialSampling::AreaUniform => radius * u.sqrt(),
    }
}

/// Places `traffic.node_count` nodes in the placement disk and assigns SFs.
pub fn sample_placement(scenario: &Scenario, seed: u64) -> NodePlacement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place_nodes(&scenario.traffic, &mut rng)
}

pub(crate) fn place_nodes<R: Rng + ?Sized>(traffic: &TrafficConfig, rng: &mut R) -> NodePlacement {
    let n = traffic.node_count;
    let radius = traffic.placement_radius_m;
    let positions: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let d = sample_radius(rng, radius, traffic.placement);
            let angle = rng.random::<f64>() * 2.0 * PI;
            (d, angle)
        })
        .collect();
    let sfs: Vec<SpreadingFactor> = match traffic.sf_assignment {
        SfAssignment::Single(sf) => vec![sf; n],
        SfAssignment::UniformRandom => {
            let mut sfs: Vec<SpreadingFactor> = (0..n)
                .map(|k| SpreadingFactor::ALL[k % SpreadingFactor::COUNT])
                .collect();
            sfs.shuffle(rng);
            sfs
        }
        SfAssignment::DistanceRings => {
            let rings = RingTopology::equal_area(radius, SpreadingFactor::COUNT, 0.0, 0.0)
                .expect("placement radius validated");
            positions
                .iter()
                .map(|&(d, _)| rings.ring_sf(rings.ring_of(d).expect("d within radius")))
                .collect()
        }
    };
    NodePlacement {
        nodes: positions
            .into_iter()
            .zip(sfs)
            .map(|((distance, angle), sf)| PlacedNode { distance, angle, sf })
            .collect(),
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub const THRESHOLDS_TOML: &str = include_str!("../../../configs/thresholds.toml");

    /// Defaults plus the shipped threshold table.
    pub fn default_raw() -> RawScenario {
        let mut raw = RawScenario::default();
        raw.thresholds = toml::from_str(THRESHOLDS_TOML).unwrap();
        raw
    }

    pub fn default_scenario() -> Scenario {
        Scenario::from_raw(&default_raw()).unwrap()
    }
}
