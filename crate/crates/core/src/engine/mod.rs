//! Discrete-event engine: slot clock, DODAG formation, data forwarding with
//! retransmissions, ETX and energy bookkeeping, and the per-slotframe parent
//! evaluation.
//!
//! A run has two phases. During formation only control traffic flows and
//! nothing is charged. Once every node has joined and the settle time has
//! passed, measurement starts on the next slotframe boundary and lasts
//! `duration_slotframes`.

pub mod event;
pub mod topology;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::channel::ChannelModel;
use crate::config::{ScheduleMode, SimConfig, ValidationResult};
use crate::metrics::{EstimatorParams, NodeId, SwapDecision};
use crate::packet::Packet;
use crate::report::{ControlCounts, EnergyBreakdown, LinkRecord, MetricsReport, PacketTally, SlotframeSample};
use crate::rng::{stream, SimRng, Stream};
use crate::routing::{ControlKind, ControlMessage, DioContext, NodeState, Position};
use crate::time::{Clock, SimTime};
use crate::traffic::TrafficGenerator;

pub use event::{Event, EventKind, EventQueue};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration:\n{0}")]
    InvalidConfig(ValidationResult),
    #[error("no connected placement of {node_count} nodes found")]
    Topology { node_count: usize },
    #[error("formation timed out after {timeout_s} s with {unjoined} node(s) unjoined")]
    FormationTimeout { timeout_s: f64, unjoined: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxOutcome {
    Delivered,
    /// Channel loss; `dropped` once the retry budget is spent.
    Lost {
        dropped: bool,
    },
    /// Received by a parent whose queue was full.
    Congested,
    QueueEmpty,
    Blackout,
}

#[derive(Debug, Clone, Copy)]
enum EnergyUse {
    TxData,
    RxData,
    TxCtrl,
    RxCtrl,
    Idle,
}

/// Runs one simulation to completion.
pub fn run(config: &SimConfig, seed: u64) -> Result<MetricsReport, SimError> {
    let mut sim = Simulation::new(config, seed)?;
    sim.form()?;
    Ok(sim.run_measured())
}

pub struct Simulation {
    config: SimConfig,
    seed: u64,
    clock: Clock,
    params: EstimatorParams,
    nodes: Vec<NodeState>,
    neighbors: Vec<Vec<usize>>,
    positions: Vec<Position>,
    schedule: Vec<Vec<NodeId>>,
    channel: ChannelModel,
    traffic: TrafficGenerator,
    protocol_rng: SimRng,
    queue: EventQueue,
    now: SimTime,
    joined: usize,
    formation_done_at: Option<SimTime>,
    start_sf: Option<u64>,
    measuring: bool,
    finished: bool,
    next_packet_id: u64,
    tallies: Vec<PacketTally>,
    link_delivered: BTreeMap<(NodeId, NodeId), u64>,
    energy: EnergyBreakdown,
    control: ControlCounts,
    swaps_this_sf: u64,
    series: Vec<SlotframeSample>,
    max_queue_len: usize,
}

impl Simulation {
    pub fn new(config: &SimConfig, seed: u64) -> Result<Simulation, SimError> {
        let validation = config.validate();
        if !validation.is_valid() {
            return Err(SimError::InvalidConfig(validation));
        }
        let n = config.node_count;
        let channel = ChannelModel::new(config.channel.clone(), config.tx_range_m, stream(seed, Stream::Channel));
        let reach = channel.reach_m();
        let positions = match &config.topology {
            Some(t) => t.to_positions(),
            None => {
                let mut rng = stream(seed, Stream::Topology);
                topology::random_connected(n, config.area_m, reach, &mut rng)
                    .ok_or(SimError::Topology { node_count: n })?
            }
        };
        let neighbors = topology::neighbors(&positions, reach);
        let clock = config.clock();
        let nodes = positions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                NodeState::new(NodeId(i as u32), *p, config.k, config.queue_capacity, config.i_min(), config.trickle)
            })
            .collect();
        let traffic = TrafficGenerator::new(
            config.traffic.clone(),
            n,
            clock.slotframe().as_secs_f64(),
            clock.slots_per_frame,
            stream(seed, Stream::Traffic),
        );
        let mut sim = Simulation {
            config: config.clone(),
            seed,
            clock,
            params: config.estimator(),
            nodes,
            neighbors,
            positions,
            schedule: build_schedule(n, config.slotframe_slots, config.schedule),
            channel,
            traffic,
            protocol_rng: stream(seed, Stream::Protocol),
            queue: EventQueue::new(),
            now: SimTime::ZERO,
            joined: 1,
            formation_done_at: None,
            start_sf: None,
            measuring: false,
            finished: false,
            next_packet_id: 0,
            tallies: vec![PacketTally::default(); n],
            link_delivered: BTreeMap::new(),
            energy: EnergyBreakdown::default(),
            control: ControlCounts::default(),
            swaps_this_sf: 0,
            series: Vec::new(),
            max_queue_len: 0,
        };
        sim.nodes[0].trickle.start(SimTime::ZERO, &mut sim.protocol_rng);
        sim.schedule_trickle(0);
        for i in 1..n {
            sim.queue.push(SimTime::ZERO, EventKind::DisTimer(NodeId(i as u32)));
        }
        Ok(sim)
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeState {
        &self.nodes[id.index()]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut NodeState {
        &mut self.nodes[id.index()]
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn schedule(&self) -> &[Vec<NodeId>] {
        &self.schedule
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn is_measuring(&self) -> bool {
        self.measuring
    }

    /// First measured slotframe (absolute index), known once formation ends.
    pub fn measured_start(&self) -> Option<u64> {
        self.start_sf
    }

    /// Runs control traffic until the DODAG is formed and settled, stopping
    /// right before the first measured slotframe.
    pub fn form(&mut self) -> Result<(), SimError> {
        let timeout = SimTime::from_secs_f64(self.config.formation_timeout_s);
        loop {
            if let Some(sf) = self.start_sf {
                if self.queue_head_time().is_none_or(|t| t >= self.clock.slotframe_start(sf)) {
                    return Ok(());
                }
            }
            let Some(ev) = self.queue.pop() else {
                return Err(self.formation_timeout());
            };
            if self.start_sf.is_none() && ev.time > timeout {
                return Err(self.formation_timeout());
            }
            self.dispatch(ev);
        }
    }

    /// Runs the measured phase to completion. Calls [`Self::form`] first if
    /// needed; a formation failure at this point is a logic error.
    pub fn run_measured(mut self) -> MetricsReport {
        if self.start_sf.is_none() {
            self.form().expect("formation");
        }
        while !self.finished {
            let ev = self.queue.pop().expect("measured phase always has a pending boundary");
            self.dispatch(ev);
        }
        self.finish()
    }

    /// Processes events up to and including the boundary of measured
    /// slotframe `m` (arrivals and ticks done, slots not yet run).
    pub fn advance_to_slotframe(&mut self, m: u64) {
        let start = self.start_sf.expect("formed");
        let target = self.clock.slotframe_start(start + m);
        while !self.finished {
            match self.queue_head_time() {
                Some(t) if t <= target => {
                    let ev = self.queue.pop().expect("peeked");
                    self.dispatch(ev);
                }
                _ => break,
            }
        }
    }

    fn queue_head_time(&self) -> Option<SimTime> {
        self.queue.peek_time()
    }

    fn formation_timeout(&self) -> SimError {
        SimError::FormationTimeout {
            timeout_s: self.config.formation_timeout_s,
            unjoined: self.nodes.iter().filter(|n| !n.is_joined()).count(),
        }
    }

    fn dispatch(&mut self, ev: Event) {
        self.now = ev.time;
        match ev.kind {
            EventKind::SlotframeBoundary(sf) => self.on_slotframe(sf),
            EventKind::SlotBoundary { slotframe, slot } => {
                for owner in self.schedule[slot as usize].clone() {
                    self.transmit_slot(owner, slotframe, slot);
                }
            }
            EventKind::ControlDelivery { msg, receiver } => self.on_control(msg, receiver),
            EventKind::TrickleFire { node, epoch } => {
                if let Some(dio) = self.nodes[node.index()].emit_dio_on_trickle(epoch) {
                    self.broadcast(node.index(), dio);
                }
            }
            EventKind::TrickleIntervalEnd { node, epoch } => {
                let i = node.index();
                self.nodes[i].trickle.on_interval_end(epoch, self.now, &mut self.protocol_rng);
                self.schedule_trickle(i);
            }
            EventKind::DisTimer(node) => {
                let i = node.index();
                let wait = SimTime::from_secs_f64(self.config.join_wait_s);
                if let Some(dao) = self.nodes[i].join_fallback(self.now, wait, &mut self.protocol_rng) {
                    self.joined += 1;
                    self.send_upward(i, dao);
                    self.schedule_trickle(i);
                } else if !self.nodes[i].is_joined() {
                    self.broadcast(i, ControlMessage::dis(node));
                    self.queue.push(self.now + self.config.i_min(), EventKind::DisTimer(node));
                }
            }
            EventKind::End => self.finished = true,
        }
        self.check_formation();
    }

    fn check_formation(&mut self) {
        if self.formation_done_at.is_some() || self.joined < self.nodes.len() {
            return;
        }
        self.formation_done_at = Some(self.now);
        let settle = SimTime::from_secs_f64(self.config.formation_settle_s);
        let sf = self.clock.next_slotframe_at_or_after(self.now + settle);
        self.start_sf = Some(sf);
        self.queue.push(self.clock.slotframe_start(sf), EventKind::SlotframeBoundary(sf));
    }

    fn on_control(&mut self, msg: ControlMessage, receiver: NodeId) {
        let r = receiver.index();
        self.charge(r, EnergyUse::RxCtrl);
        match msg.kind() {
            ControlKind::Dis => {
                let replies = self.nodes[r].handle_dis(&msg, self.now, &mut self.protocol_rng);
                for dio in replies {
                    self.broadcast(r, dio);
                }
            }
            ControlKind::Dio => {
                let was_joined = self.nodes[r].is_joined();
                let d = self.positions[r].distance(&self.positions[msg.sender.index()]);
                let ctx = DioContext {
                    now: self.now,
                    formation: !self.measuring,
                    usable: d <= self.config.tx_range_m,
                    distance_m: d,
                };
                if let Some(dao) = self.nodes[r].handle_dio(&msg, ctx, &mut self.protocol_rng) {
                    self.send_upward(r, dao);
                }
                if !was_joined && self.nodes[r].is_joined() {
                    self.joined += 1;
                }
            }
            ControlKind::Dao | ControlKind::DaoAck => {}
        }
        self.schedule_trickle(r);
    }

    /// DAOs travel to the root along the parent chain; the exchange is
    /// accounted for but not simulated hop by hop.
    fn send_upward(&mut self, sender: usize, msg: ControlMessage) {
        if self.measuring {
            match msg.kind() {
                ControlKind::Dao => self.control.dao += 1,
                ControlKind::DaoAck => self.control.dao_ack += 1,
                _ => {}
            }
        }
        self.charge(sender, EnergyUse::TxCtrl);
    }

    fn broadcast(&mut self, sender: usize, msg: ControlMessage) {
        self.charge(sender, EnergyUse::TxCtrl);
        if self.measuring {
            match msg.kind() {
                ControlKind::Dis => self.control.dis += 1,
                ControlKind::Dio => self.control.dio += 1,
                _ => {}
            }
        }
        for idx in 0..self.neighbors[sender].len() {
            let receiver = NodeId(self.neighbors[sender][idx] as u32);
            self.queue.push(self.now, EventKind::ControlDelivery { msg, receiver });
        }
    }

    fn schedule_trickle(&mut self, node: usize) {
        if let Some(s) = self.nodes[node].trickle.take_schedule() {
            let id = NodeId(node as u32);
            self.queue.push(s.fire_at, EventKind::TrickleFire { node: id, epoch: s.epoch });
            self.queue.push(s.interval_end, EventKind::TrickleIntervalEnd { node: id, epoch: s.epoch });
        }
    }

    fn on_slotframe(&mut self, sf: u64) {
        let start = self.start_sf.expect("boundaries only after formation");
        let m = sf - start;
        if m == 0 {
            self.measuring = true;
        }
        if m == self.config.duration_slotframes {
            self.queue.push(self.now, EventKind::End);
            return;
        }

        for i in 1..self.nodes.len() {
            let id = NodeId(i as u32);
            let count = self.traffic.packets_this_slotframe(id, m);
            for _ in 0..count {
                let packet = Packet::new(self.next_packet_id, id, self.now, self.config.packet_bytes);
                self.next_packet_id += 1;
                self.tallies[i].generated += 1;
                if self.nodes[i].enqueue(packet).is_err() {
                    self.tallies[i].dropped_queue += 1;
                }
            }
            self.max_queue_len = self.max_queue_len.max(self.nodes[i].tx_queue.len());
        }

        self.swaps_this_sf = 0;
        let strategy = self.config.strategy;
        for i in 0..self.nodes.len() {
            let decision = self.nodes[i].slotframe_tick(m, &self.params, strategy, self.now, &mut self.protocol_rng);
            if let SwapDecision::SwapTo(parent) = decision {
                self.swaps_this_sf += 1;
                self.send_upward(i, ControlMessage::dao(NodeId(i as u32)));
                self.send_upward(parent.index(), ControlMessage::dao_ack(parent));
            }
            self.schedule_trickle(i);
        }
        self.record_sample(m);

        for slot in 0..self.clock.slots_per_frame {
            if !self.schedule[slot as usize].is_empty() {
                self.queue.push(self.clock.slot_start(sf, slot), EventKind::SlotBoundary { slotframe: sf, slot });
            }
        }
        self.queue.push(self.clock.slotframe_start(sf + 1), EventKind::SlotframeBoundary(sf + 1));
    }

    fn record_sample(&mut self, m: u64) {
        let others = &self.nodes[1..];
        let count = others.len().max(1) as f64;
        self.series.push(SlotframeSample {
            slotframe: m,
            mean_qof: others.iter().map(|n| n.local_qof().value()).sum::<f64>() / count,
            mean_beta: others.iter().map(|n| n.beta).sum::<f64>() / count,
            max_queue: self.nodes.iter().map(|n| n.tx_queue.len()).max().unwrap_or(0),
            swaps: self.swaps_this_sf,
        });
    }

    /// Uses `node`'s cell at `slot` of absolute slotframe `sf`.
    pub fn transmit_slot(&mut self, node: NodeId, sf: u64, slot: u64) -> TxOutcome {
        let i = node.index();
        let m = sf.saturating_sub(self.start_sf.unwrap_or(0));
        let Some(parent) = self.nodes[i].current_parent else {
            return TxOutcome::QueueEmpty;
        };
        if self.nodes[i].in_blackout(m) {
            return TxOutcome::Blackout;
        }
        let Some(mut packet) = self.nodes[i].tx_queue.pop_front() else {
            self.charge(i, EnergyUse::Idle);
            return TxOutcome::QueueEmpty;
        };
        let p = parent.index();
        let distance = self.positions[i].distance(&self.positions[p]);
        let received = self.channel.transmit(node, parent, distance, sf * self.clock.slots_per_frame + slot);
        self.charge(i, EnergyUse::TxData);

        if !received {
            self.nodes[i].link_stats.entry(parent).or_default().record(false);
            packet.retransmissions += 1;
            if packet.retransmissions > self.config.max_retries {
                self.tallies[packet.origin.index()].dropped_retry += 1;
                return TxOutcome::Lost { dropped: true };
            }
            self.nodes[i].tx_queue.push_front(packet);
            return TxOutcome::Lost { dropped: false };
        }

        self.charge(p, EnergyUse::RxData);
        if p != 0 && self.nodes[p].tx_queue.len() >= self.nodes[p].queue_capacity {
            self.nodes[i].link_stats.entry(parent).or_default().record(false);
            self.tallies[packet.origin.index()].dropped_queue += 1;
            return TxOutcome::Congested;
        }
        self.nodes[i].link_stats.entry(parent).or_default().record(true);
        *self.link_delivered.entry((node, parent)).or_default() += 1;
        if p == 0 {
            self.tallies[packet.origin.index()].delivered += 1;
        } else {
            packet.hops_so_far += 1;
            packet.retransmissions = 0;
            self.nodes[p].enqueue(packet).expect("capacity checked");
            self.max_queue_len = self.max_queue_len.max(self.nodes[p].tx_queue.len());
        }
        TxOutcome::Delivered
    }

    fn charge(&mut self, node: usize, what: EnergyUse) {
        if !self.measuring {
            return;
        }
        let e = &self.config.energy;
        let (amount, bucket) = match what {
            EnergyUse::TxData => (e.e_tx_data, &mut self.energy.tx_data),
            EnergyUse::RxData => (e.e_rx_data, &mut self.energy.rx_data),
            EnergyUse::TxCtrl => (e.e_tx_ctrl, &mut self.energy.tx_ctrl),
            EnergyUse::RxCtrl => (e.e_rx_ctrl, &mut self.energy.rx_ctrl),
            EnergyUse::Idle => (e.e_idle_slot, &mut self.energy.idle),
        };
        *bucket += amount;
        self.nodes[node].energy_mj += amount;
    }

    fn finish(mut self) -> MetricsReport {
        for node in &self.nodes {
            for p in &node.tx_queue {
                self.tallies[p.origin.index()].in_flight += 1;
            }
        }
        let sum = |f: fn(&PacketTally) -> u64| self.tallies.iter().map(f).sum::<u64>();
        let generated = sum(|t| t.generated);
        let delivered = sum(|t| t.delivered);
        let duration_s = self.config.duration_slotframes as f64 * self.clock.slotframe().as_secs_f64();
        let pdr = if generated == 0 { 1.0 } else { delivered as f64 / generated as f64 };
        let energy_per_node_mj: Vec<f64> = self.nodes.iter().map(|n| n.energy_mj).collect();
        let links = self
            .nodes
            .iter()
            .flat_map(|n| {
                n.link_stats.iter().map(|(p, s)| LinkRecord {
                    child: n.id,
                    parent: *p,
                    tnop: s.tnop,
                    tnopss: s.tnopss,
                    delivered_outcomes: self.link_delivered.get(&(n.id, *p)).copied().unwrap_or(0),
                })
            })
            .collect();
        let start = self.start_sf.unwrap_or(0);
        MetricsReport {
            node_count: self.nodes.len(),
            strategy: self.config.strategy,
            seed: self.seed,
            config_hash: self.config.for_run(self.nodes.len(), self.config.strategy, self.seed).config_hash(),
            generated,
            delivered,
            dropped_retry: sum(|t| t.dropped_retry),
            dropped_queue: sum(|t| t.dropped_queue),
            in_flight: sum(|t| t.in_flight),
            pdr,
            throughput_bps: delivered as f64 * self.config.packet_bytes as f64 * 8.0 / duration_s,
            total_swaps: self.nodes.iter().map(|n| n.swap_count).sum(),
            swaps_per_node: self.nodes.iter().map(|n| n.swap_count).collect(),
            avg_energy_mj: energy_per_node_mj.iter().sum::<f64>() / self.nodes.len() as f64,
            energy_per_node_mj,
            energy: self.energy,
            control: self.control,
            duration_s,
            formation_time_s: self.formation_done_at.unwrap_or_default().as_secs_f64(),
            measured_start_s: self.clock.slotframe_start(start).as_secs_f64(),
            max_queue_len: self.max_queue_len,
            per_node: self.tallies,
            links,
            series: self.series,
        }
    }
}

/// Transmit cells per slot. Only non-root nodes own cells.
pub fn build_schedule(node_count: usize, slots: u64, mode: ScheduleMode) -> Vec<Vec<NodeId>> {
    let slots = slots as usize;
    let mut schedule = vec![Vec::new(); slots];
    let owners: Vec<NodeId> = (1..node_count as u32).map(NodeId).collect();
    if owners.is_empty() || slots == 0 {
        return schedule;
    }
    match mode {
        ScheduleMode::RoundRobin if owners.len() <= slots => {
            for (s, cell) in schedule.iter_mut().enumerate() {
                cell.push(owners[s % owners.len()]);
            }
        }
        _ => {
            for (i, id) in owners.iter().enumerate() {
                schedule[i % slots].push(*id);
            }
        }
    }
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_robin_fills_the_slotframe() {
        let s = build_schedule(4, 10, ScheduleMode::RoundRobin);
        let owners: Vec<u32> = s.iter().map(|c| c[0].0).collect();
        assert_eq!(owners, vec![1, 2, 3, 1, 2, 3, 1, 2, 3, 1]);
        let single = build_schedule(4, 10, ScheduleMode::SingleCell);
        assert_eq!(single.iter().filter(|c| !c.is_empty()).count(), 3);
        assert!(build_schedule(1, 10, ScheduleMode::RoundRobin).iter().all(Vec::is_empty));
        // more owners than slots: cells are shared
        let crowded = build_schedule(6, 3, ScheduleMode::RoundRobin);
        assert_eq!(crowded.iter().map(Vec::len).sum::<usize>(), 5);
    }
}
