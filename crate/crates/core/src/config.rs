//! Run configuration. Every field has a default, so a configuration file only
//! needs the keys it changes.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::channel::ChannelParams;
use crate::metrics::{EstimatorParams, Strategy, DEFAULT_ETX_WORST};
use crate::routing::{Position, TrickleParams};
use crate::time::{Clock, SimTime};
use crate::traffic::{TrafficKind, TrafficProfile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serializing configuration: {0}")]
    Serialize(#[from] toml::ser::Error),
}

/// Energy cost of each radio activity, in millijoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyModel {
    pub e_tx_data: f64,
    pub e_rx_data: f64,
    pub e_tx_ctrl: f64,
    pub e_rx_ctrl: f64,
    /// Charged to the owner of a scheduled cell left unused.
    pub e_idle_slot: f64,
}

impl Default for EnergyModel {
    // CC2420-class radio at 3 V: 17.4 mA transmit, 18.8 mA receive, 250 kb/s.
    // 100 B data frames last 3.2 ms, 40 B control frames 1.28 ms.
    fn default() -> Self {
        EnergyModel { e_tx_data: 0.167, e_rx_data: 0.180, e_tx_ctrl: 0.067, e_rx_ctrl: 0.072, e_idle_slot: 0.01 }
    }
}

/// How transmit cells of a slotframe are handed to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Slots are dealt out in node-id order, cycling until the slotframe is
    /// full: every non-root node owns `slots / (n - 1)` cells, give or take one.
    RoundRobin,
    /// Each non-root node owns exactly one cell per slotframe.
    SingleCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    /// Node positions in meters, root first.
    pub positions: Vec<[f64; 2]>,
}

impl TopologySpec {
    pub fn to_positions(&self) -> Vec<Position> {
        self.positions.iter().map(|p| Position::new(p[0], p[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub node_count: usize,
    pub area_m: [f64; 2],
    pub tx_range_m: f64,
    pub data_rate_kbps: f64,
    pub packet_bytes: u32,
    pub slotframe_slots: u64,
    pub slot_ms: f64,
    pub queue_capacity: usize,
    pub i_min_s: f64,
    pub theta_th: f64,
    pub alpha: f64,
    pub delta_th: f64,
    pub eta: f64,
    pub k: usize,
    /// Largest history a node may keep.
    pub k_max: usize,
    pub etx_worst: f64,
    pub strategy: Strategy,
    pub seeds: Vec<u64>,
    pub duration_slotframes: u64,
    pub max_retries: u32,
    pub formation_timeout_s: f64,
    /// Quiet time after the last join before measurement starts.
    pub formation_settle_s: f64,
    /// How long an unjoined node waits for an in-range DIO before joining
    /// through an out-of-range sender.
    pub join_wait_s: f64,
    pub schedule: ScheduleMode,
    pub trickle: TrickleParams,
    pub channel: ChannelParams,
    pub traffic: TrafficProfile,
    pub energy: EnergyModel,
    pub topology: Option<TopologySpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            node_count: 20,
            area_m: [200.0, 200.0],
            tx_range_m: 30.0,
            data_rate_kbps: 250.0,
            packet_bytes: 100,
            slotframe_slots: 100,
            slot_ms: 10.0,
            queue_capacity: 10,
            i_min_s: 3.0,
            theta_th: 0.5,
            alpha: 0.5,
            delta_th: 0.5,
            eta: 0.25,
            k: 4,
            k_max: 32,
            etx_worst: DEFAULT_ETX_WORST,
            strategy: Strategy::Ewqof,
            seeds: (1..=10).collect(),
            duration_slotframes: 600,
            max_retries: 3,
            formation_timeout_s: 600.0,
            formation_settle_s: 20.0,
            join_wait_s: 9.0,
            schedule: ScheduleMode::RoundRobin,
            trickle: TrickleParams::default(),
            channel: ChannelParams::default(),
            traffic: TrafficProfile::default(),
            energy: EnergyModel::default(),
            topology: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationResult {
    pub errors: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationResult {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    fn reject(&mut self, field: &'static str, message: impl Into<String>) {
        self.errors.push(Violation { field, message: message.into() });
    }
}

impl fmt::Display for ValidationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<SimConfig, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_path(path: &Path) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        SimConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn clock(&self) -> Clock {
        Clock::new(self.slot_ms, self.slotframe_slots)
    }

    /// Slotframe duration in seconds.
    pub fn slotframe_s(&self) -> f64 {
        self.clock().slotframe().as_secs_f64()
    }

    pub fn i_min(&self) -> SimTime {
        SimTime::from_secs_f64(self.i_min_s)
    }

    pub fn estimator(&self) -> EstimatorParams {
        EstimatorParams {
            alpha: self.alpha,
            theta_th: self.theta_th,
            delta_th: self.delta_th,
            eta: self.eta,
            etx_worst: self.etx_worst,
        }
    }

    /// Copy pinned to one run of the grid.
    pub fn for_run(&self, node_count: usize, strategy: Strategy, seed: u64) -> SimConfig {
        SimConfig { node_count, strategy, seeds: vec![seed], ..self.clone() }
    }

    /// SHA-256 over the canonical JSON form.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn validate(&self) -> ValidationResult {
        validate_config(self)
    }
}

pub fn validate_config(c: &SimConfig) -> ValidationResult {
    let mut v = ValidationResult::default();
    let open_unit = |x: f64| x > 0.0 && x < 1.0;

    if c.node_count < 1 {
        v.reject("node_count", "at least one node (the root) is required");
    }
    if !(c.area_m[0] > 0.0 && c.area_m[1] > 0.0) {
        v.reject("area_m", "area dimensions must be positive");
    }
    if !(c.tx_range_m > 0.0) {
        v.reject("tx_range_m", "transmission range must be positive");
    }
    if c.packet_bytes == 0 {
        v.reject("packet_bytes", "packets must carry at least one byte");
    }
    if c.slotframe_slots == 0 {
        v.reject("slotframe_slots", "slotframe needs at least one slot");
    }
    if !(c.slot_ms > 0.0) {
        v.reject("slot_ms", "slot duration must be positive");
    }
    if c.queue_capacity == 0 {
        v.reject("queue_capacity", "queue must hold at least one packet");
    }
    if !(c.i_min_s > 0.0) {
        v.reject("i_min_s", "trickle minimum interval must be positive");
    }
    if !open_unit(c.alpha) {
        v.reject("alpha", format!("{} not in (0, 1)", c.alpha));
    }
    if !open_unit(c.theta_th) {
        v.reject("theta_th", format!("{} not in (0, 1)", c.theta_th));
    }
    if !(c.delta_th >= 0.0) {
        v.reject("delta_th", format!("{} is negative", c.delta_th));
    }
    if !(c.eta > 0.0) {
        v.reject("eta", format!("{} is not positive", c.eta));
    } else if c.eta <= 1.0 {
        v.warnings
            .push(format!("eta = {} <= 1: the queue term shifts a parent score by at most one rank step", c.eta));
    }
    if !(c.etx_worst >= 1.0) {
        v.reject("etx_worst", "worst-case ETX must be at least 1");
    }
    if c.k == 0 {
        v.reject("k", "history length must be positive");
    } else {
        let t = c.slotframe_s();
        if !(c.k as f64 * t > c.i_min_s) {
            v.reject("k", format!("k * T = {} * {t} s must exceed I_min = {} s", c.k, c.i_min_s));
        }
        if c.k > c.k_max {
            v.reject("k", format!("k = {} exceeds the node limit k_max = {}", c.k, c.k_max));
        }
    }
    if c.seeds.is_empty() {
        v.reject("seeds", "at least one seed is required");
    }
    if c.duration_slotframes == 0 {
        v.reject("duration_slotframes", "measured phase must last at least one slotframe");
    }
    if !(c.formation_timeout_s > 0.0) {
        v.reject("formation_timeout_s", "must be positive");
    }
    if !(c.join_wait_s >= 0.0) {
        v.reject("join_wait_s", "must not be negative");
    }
    if !(c.formation_settle_s >= 0.0) {
        v.reject("formation_settle_s", "must not be negative");
    }
    if c.trickle.redundancy == 0 {
        v.reject("trickle.redundancy", "redundancy constant must be positive");
    }
    if c.trickle.i_max_doublings > 16 {
        v.reject("trickle.i_max_doublings", "at most 16 doublings");
    }
    if !(c.channel.shadowing_sigma_db >= 0.0) {
        v.reject("channel.shadowing_sigma_db", "must not be negative");
    }
    if !(c.channel.path_loss_exponent > 0.0) {
        v.reject("channel.path_loss_exponent", "must be positive");
    }
    if c.channel.link_prr.iter().any(|o| !(0.0..=1.0).contains(&o.prr)) {
        v.reject("channel.link_prr", "override PRR must lie in [0, 1]");
    }
    let t = &c.traffic;
    if !(t.base_rate_pps >= 0.0) || !(t.burst_rate_pps >= 0.0) {
        v.reject("traffic", "rates must not be negative");
    }
    if t.kind == TrafficKind::Bursty && t.burst_rate_pps < t.base_rate_pps {
        v.reject("traffic.burst_rate_pps", "burst rate must be at least the base rate");
    }
    if t.kind == TrafficKind::Bursty && t.burst_period_slotframes == 0 {
        v.reject("traffic.burst_period_slotframes", "must be positive");
    }
    if t.script.iter().any(|e| e.node.index() >= c.node_count.max(1)) {
        v.reject("traffic.script", "script names a node outside the network");
    }
    let e = &c.energy;
    if [e.e_tx_data, e.e_rx_data, e.e_tx_ctrl, e.e_rx_ctrl, e.e_idle_slot].iter().any(|x| !(*x >= 0.0)) {
        v.reject("energy", "energy costs must not be negative");
    }
    if let Some(topo) = &c.topology {
        if topo.positions.len() != c.node_count {
            v.reject("topology.positions", format!("{} positions for {} nodes", topo.positions.len(), c.node_count));
        }
    }
    v
}
