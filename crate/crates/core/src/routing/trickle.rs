//! Trickle timer (RFC 6206) driving DIO emission.
//!
//! The timer does not own a clock. Whenever it starts a new interval it
//! records a [`TrickleSchedule`] that the event loop picks up with
//! [`TrickleState::take_schedule`]; events carry the interval epoch so that
//! timers belonging to an abandoned interval are ignored.

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrickleParams {
    pub i_max_doublings: u32,
    /// Redundancy constant: transmission is suppressed once this many
    /// consistent DIOs were heard in the interval.
    pub redundancy: u32,
}

impl Default for TrickleParams {
    fn default() -> Self {
        TrickleParams { i_max_doublings: 2, redundancy: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrickleSchedule {
    pub epoch: u64,
    pub fire_at: SimTime,
    pub interval_end: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrickleState {
    pub i_min: SimTime,
    pub i_max_doublings: u32,
    pub redundancy: u32,
    pub current_interval: SimTime,
    pub interval_start: SimTime,
    /// Absolute transmission time inside the current interval.
    pub t: SimTime,
    pub counter: u32,
    pub suppressed: bool,
    running: bool,
    epoch: u64,
    pending: Option<TrickleSchedule>,
}

impl TrickleState {
    pub fn new(i_min: SimTime, params: TrickleParams) -> TrickleState {
        TrickleState {
            i_min,
            i_max_doublings: params.i_max_doublings,
            redundancy: params.redundancy,
            current_interval: i_min,
            interval_start: SimTime::ZERO,
            t: SimTime::ZERO,
            counter: 0,
            suppressed: false,
            running: false,
            epoch: 0,
            pending: None,
        }
    }

    pub fn i_max(&self) -> SimTime {
        self.i_min.times(1u64 << self.i_max_doublings)
    }

    pub fn is_running(&self) -> bool {
        self.running
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Starts the timer at the minimum interval.
    pub fn start(&mut self, now: SimTime, rng: &mut SimRng) {
        self.running = true;
        self.current_interval = self.i_min;
        self.begin_interval(now, rng);
    }

    /// Inconsistency: restart at `i_min` unless already there.
    pub fn reset(&mut self, now: SimTime, rng: &mut SimRng) {
        if !self.running {
            self.start(now, rng);
        } else if self.current_interval > self.i_min {
            self.current_interval = self.i_min;
            self.begin_interval(now, rng);
        }
    }

    pub fn heard_consistent(&mut self) {
        self.counter = self.counter.saturating_add(1);
    }

    /// The transmission timer of `epoch` fired. Returns whether to transmit.
    pub fn on_fire(&mut self, epoch: u64) -> bool {
        if !self.running || epoch != self.epoch {
            return false;
        }
        let transmit = self.counter < self.redundancy;
        self.suppressed = !transmit;
        transmit
    }

    /// The interval of `epoch` expired: double it (up to the cap) and begin
    /// the next one.
    pub fn on_interval_end(&mut self, epoch: u64, now: SimTime, rng: &mut SimRng) {
        if !self.running || epoch != self.epoch {
            return;
        }
        self.current_interval = self.current_interval.times(2).min(self.i_max());
        self.begin_interval(now, rng);
    }

    pub fn take_schedule(&mut self) -> Option<TrickleSchedule> {
        self.pending.take()
    }

    fn begin_interval(&mut self, now: SimTime, rng: &mut SimRng) {
        let interval = self.current_interval.micros();
        let half = interval / 2;
        let offset = if interval > half { rng.random_range(half..interval) } else { half };
        self.epoch += 1;
        self.counter = 0;
        self.suppressed = false;
        self.interval_start = now;
        self.t = now + SimTime(offset);
        self.pending =
            Some(TrickleSchedule { epoch: self.epoch, fire_at: self.t, interval_end: now + self.current_interval });
    }
}
