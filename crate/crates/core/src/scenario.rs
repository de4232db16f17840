//! Built-in hand-checkable scenarios.

use std::fmt;
use std::str::FromStr;

use crate::channel::{ChannelParams, LinkPrrOverride};
use crate::config::{SimConfig, TopologySpec};
use crate::metrics::NodeId;
use crate::traffic::{ScriptEntry, TrafficProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Root, two equal-rank parents A and B, child C on a lossy link to A.
    /// A receives one burst that fills its queue for a single slotframe.
    Fig1a,
    /// Same layout, but A carries a constant load that keeps its queue
    /// below the threshold.
    Fig1b,
    /// Three-hop lossless line with steady low-rate traffic.
    Line3,
}

/// Measured slotframe in which A's burst arrives.
pub const FIG1A_BURST_SLOTFRAME: usize = 20;

const FIG1_DURATION: usize = 60;

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Fig1a, Scenario::Fig1b, Scenario::Line3];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1a => "fig1a",
            Scenario::Fig1b => "fig1b",
            Scenario::Line3 => "line3",
        }
    }

    pub fn config(self) -> SimConfig {
        match self {
            Scenario::Fig1a => fig1(fig1a_script(), 10),
            Scenario::Fig1b => fig1(fig1b_script(), 20),
            Scenario::Line3 => SimConfig {
                node_count: 4,
                topology: Some(TopologySpec { positions: vec![[0.0, 0.0], [25.0, 0.0], [50.0, 0.0], [75.0, 0.0]] }),
                channel: ChannelParams { lossless: true, ..ChannelParams::default() },
                traffic: TrafficProfile::steady(0.5),
                duration_slotframes: 120,
                seeds: vec![1],
                ..SimConfig::default()
            },
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Scenario, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scenario '{s}' (expected fig1a, fig1b or line3)"))
    }
}

const A: NodeId = NodeId(1);
const C: NodeId = NodeId(3);

fn fig1(script: Vec<ScriptEntry>, queue_capacity: usize) -> SimConfig {
    SimConfig {
        node_count: 4,
        topology: Some(TopologySpec { positions: vec![[0.0, 0.0], [20.0, 10.0], [20.0, -10.0], [40.0, 0.0]] }),
        channel: ChannelParams {
            lossless: true,
            link_prr: vec![LinkPrrOverride { a: C, b: A, prr: 0.4 }],
            ..ChannelParams::default()
        },
        traffic: TrafficProfile::scripted(script),
        queue_capacity,
        duration_slotframes: FIG1_DURATION as u64,
        seeds: vec![1],
        ..SimConfig::default()
    }
}

fn fig1a_script() -> Vec<ScriptEntry> {
    let mut burst = vec![0; FIG1_DURATION];
    burst[FIG1A_BURST_SLOTFRAME] = 10;
    vec![ScriptEntry { node: A, counts: burst }, ScriptEntry { node: C, counts: vec![1; FIG1_DURATION] }]
}

fn fig1b_script() -> Vec<ScriptEntry> {
    vec![
        ScriptEntry { node: A, counts: vec![9; FIG1_DURATION] },
        ScriptEntry { node: C, counts: vec![1; FIG1_DURATION] },
    ]
}
