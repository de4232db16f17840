use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::metrics::NodeId;
use crate::routing::ControlMessage;
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Start of absolute slotframe `0`.
    SlotframeBoundary(u64),
    SlotBoundary {
        slotframe: u64,
        slot: u64,
    },
    ControlDelivery {
        msg: ControlMessage,
        receiver: NodeId,
    },
    TrickleFire {
        node: NodeId,
        epoch: u64,
    },
    TrickleIntervalEnd {
        node: NodeId,
        epoch: u64,
    },
    /// Unjoined node solicits DIOs.
    DisTimer(NodeId),
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; earliest (time, seq) must come out first.
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Events ordered by `(time, seq)`; `seq` is assigned on insertion.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> EventQueue {
        EventQueue::default()
    }

    pub fn push(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, kind });
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
