//! Per-node data generation: steady Poisson, periodic bursts, or an explicit
//! per-slotframe script.

use rand::RngExt;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::metrics::NodeId;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficKind {
    Steady,
    Bursty,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficProfile {
    pub kind: TrafficKind,
    pub base_rate_pps: f64,
    pub burst_rate_pps: f64,
    pub burst_duration_slots: u64,
    pub burst_period_slotframes: u64,
    /// Exact packet counts per measured slotframe, used by `Scripted`.
    pub script: Vec<ScriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub node: NodeId,
    pub counts: Vec<u32>,
}

impl Default for TrafficProfile {
    fn default() -> Self {
        TrafficProfile {
            kind: TrafficKind::Bursty,
            base_rate_pps: 0.04,
            burst_rate_pps: 2.5,
            burst_duration_slots: 100,
            burst_period_slotframes: 60,
            script: Vec::new(),
        }
    }
}

impl TrafficProfile {
    pub fn steady(rate_pps: f64) -> TrafficProfile {
        TrafficProfile { kind: TrafficKind::Steady, base_rate_pps: rate_pps, ..TrafficProfile::default() }
    }

    pub fn scripted(script: Vec<ScriptEntry>) -> TrafficProfile {
        TrafficProfile {
            kind: TrafficKind::Scripted,
            base_rate_pps: 0.0,
            burst_rate_pps: 0.0,
            script,
            ..TrafficProfile::default()
        }
    }

    /// Slotframes covered by one burst window.
    pub fn burst_slotframes(&self, slots_per_frame: u64) -> u64 {
        self.burst_duration_slots.div_ceil(slots_per_frame.max(1)).max(1)
    }

    pub fn scripted_count(&self, node: NodeId, slotframe: u64) -> u32 {
        self.script.iter().find(|e| e.node == node).and_then(|e| e.counts.get(slotframe as usize).copied()).unwrap_or(0)
    }

    pub fn in_burst(&self, phase: u64, slotframe: u64, slots_per_frame: u64) -> bool {
        let period = self.burst_period_slotframes.max(1);
        (slotframe + phase) % period < self.burst_slotframes(slots_per_frame)
    }
}

/// Packets generated by one node in one slotframe of length `slotframe_s`
/// seconds. `phase` offsets the node's burst schedule.
pub fn packets_this_slotframe(
    profile: &TrafficProfile,
    node: NodeId,
    slotframe: u64,
    phase: u64,
    slotframe_s: f64,
    slots_per_frame: u64,
    rng: &mut SimRng,
) -> u32 {
    let rate = match profile.kind {
        TrafficKind::Scripted => return profile.scripted_count(node, slotframe),
        TrafficKind::Steady => profile.base_rate_pps,
        TrafficKind::Bursty if profile.in_burst(phase, slotframe, slots_per_frame) => profile.burst_rate_pps,
        TrafficKind::Bursty => profile.base_rate_pps,
    };
    poisson(rate * slotframe_s, rng)
}

fn poisson(mean: f64, rng: &mut SimRng) -> u32 {
    if !(mean > 0.0) {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    draw as u32
}

/// Owns the traffic stream and the per-node burst phases of one run.
#[derive(Debug, Clone)]
pub struct TrafficGenerator {
    profile: TrafficProfile,
    phases: Vec<u64>,
    slotframe_s: f64,
    slots_per_frame: u64,
    rng: SimRng,
}

impl TrafficGenerator {
    pub fn new(
        profile: TrafficProfile,
        node_count: usize,
        slotframe_s: f64,
        slots_per_frame: u64,
        mut rng: SimRng,
    ) -> Self {
        let period = profile.burst_period_slotframes.max(1);
        let phases = match profile.kind {
            TrafficKind::Bursty => (0..node_count).map(|_| rng.random_range(0..period)).collect(),
            _ => vec![0; node_count],
        };
        TrafficGenerator { profile, phases, slotframe_s, slots_per_frame, rng }
    }

    pub fn profile(&self) -> &TrafficProfile {
        &self.profile
    }

    pub fn packets_this_slotframe(&mut self, node: NodeId, slotframe: u64) -> u32 {
        let phase = self.phases.get(node.index()).copied().unwrap_or(0);
        packets_this_slotframe(
            &self.profile,
            node,
            slotframe,
            phase,
            self.slotframe_s,
            self.slots_per_frame,
            &mut self.rng,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn zero_rate_generates_nothing() {
        let mut g = TrafficGenerator::new(TrafficProfile::steady(0.0), 3, 1.0, 100, stream(1, Stream::Traffic));
        assert!((0..1000).all(|sf| g.packets_this_slotframe(NodeId(1), sf) == 0));
    }

    #[test]
    fn scripted_replay_is_exact() {
        let profile = TrafficProfile::scripted(vec![ScriptEntry { node: NodeId(2), counts: vec![0, 0, 10, 0] }]);
        let mut g = TrafficGenerator::new(profile, 3, 1.0, 100, stream(1, Stream::Traffic));
        let got: Vec<u32> = (0..6).map(|sf| g.packets_this_slotframe(NodeId(2), sf)).collect();
        assert_eq!(got, vec![0, 0, 10, 0, 0, 0]);
        assert_eq!(g.packets_this_slotframe(NodeId(1), 2), 0);
    }

    #[test]
    fn steady_mean_matches_rate() {
        let mut g = TrafficGenerator::new(TrafficProfile::steady(2.0), 2, 1.0, 100, stream(5, Stream::Traffic));
        let n = 10_000;
        let mean = (0..n).map(|sf| g.packets_this_slotframe(NodeId(1), sf) as f64).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn bursts_follow_period() {
        let profile = TrafficProfile {
            base_rate_pps: 0.0,
            burst_rate_pps: 50.0,
            burst_duration_slots: 100,
            burst_period_slotframes: 10,
            ..TrafficProfile::default()
        };
        let mut g = TrafficGenerator::new(profile, 2, 1.0, 100, stream(2, Stream::Traffic));
        let active: Vec<u64> = (0..40).filter(|&sf| g.packets_this_slotframe(NodeId(1), sf) > 0).collect();
        assert_eq!(active.len(), 4);
        assert!(active.windows(2).all(|w| w[1] - w[0] == 10));
    }

    #[test]
    fn burst_window_rounds_up_to_whole_slotframes() {
        let p = TrafficProfile { burst_duration_slots: 150, ..TrafficProfile::default() };
        assert_eq!(p.burst_slotframes(100), 2);
        let p = TrafficProfile { burst_duration_slots: 0, ..TrafficProfile::default() };
        assert_eq!(p.burst_slotframes(100), 1);
    }
}
