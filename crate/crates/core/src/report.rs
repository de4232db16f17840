use serde::{Deserialize, Serialize};

use crate::metrics::{NodeId, Strategy};

/// Energy totals per activity, in millijoules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub tx_data: f64,
    pub rx_data: f64,
    pub tx_ctrl: f64,
    pub rx_ctrl: f64,
    pub idle: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.tx_data + self.rx_data + self.tx_ctrl + self.rx_ctrl + self.idle
    }
}

/// Control frames sent during the measured phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCounts {
    pub dis: u64,
    pub dio: u64,
    pub dao: u64,
    pub dao_ack: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub child: NodeId,
    pub parent: NodeId,
    pub tnop: u64,
    pub tnopss: u64,
    /// Transmissions on this link that reported `Delivered`.
    pub delivered_outcomes: u64,
}

/// Fate of the packets originated by one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketTally {
    pub generated: u64,
    pub delivered: u64,
    pub dropped_retry: u64,
    pub dropped_queue: u64,
    pub in_flight: u64,
}

impl PacketTally {
    pub fn is_conserved(&self) -> bool {
        self.generated == self.delivered + self.dropped_retry + self.dropped_queue + self.in_flight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotframeSample {
    pub slotframe: u64,
    /// Mean local QOF over non-root nodes after arrivals.
    pub mean_qof: f64,
    pub mean_beta: f64,
    pub max_queue: usize,
    pub swaps: u64,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub node_count: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub config_hash: String,
    pub generated: u64,
    pub delivered: u64,
    pub dropped_retry: u64,
    pub dropped_queue: u64,
    pub in_flight: u64,
    pub pdr: f64,
    pub throughput_bps: f64,
    pub total_swaps: u64,
    pub swaps_per_node: Vec<u64>,
    pub avg_energy_mj: f64,
    pub energy_per_node_mj: Vec<f64>,
    pub energy: EnergyBreakdown,
    pub control: ControlCounts,
    pub duration_s: f64,
    pub formation_time_s: f64,
    pub measured_start_s: f64,
    pub max_queue_len: usize,
    pub per_node: Vec<PacketTally>,
    pub links: Vec<LinkRecord>,
    pub series: Vec<SlotframeSample>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn totals(&self) -> PacketTally {
        PacketTally {
            generated: self.generated,
            delivered: self.delivered,
            dropped_retry: self.dropped_retry,
            dropped_queue: self.dropped_queue,
            in_flight: self.in_flight,
        }
    }
}
