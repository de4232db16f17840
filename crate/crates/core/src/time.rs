use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// Simulated time in whole microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_secs_f64(secs: f64) -> SimTime {
        SimTime((secs * 1e6).round().max(0.0) as u64)
    }

    pub fn from_millis_f64(ms: f64) -> SimTime {
        SimTime((ms * 1e3).round().max(0.0) as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn micros(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    pub fn times(self, n: u64) -> SimTime {
        SimTime(self.0 * n)
    }
}

impl Add for SimTime {
    type Output = SimTime;

    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;

    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

/// Slot and slotframe geometry of the TSCH schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub slot: SimTime,
    pub slots_per_frame: u64,
}

impl Clock {
    pub fn new(slot_ms: f64, slots_per_frame: u64) -> Clock {
        Clock { slot: SimTime::from_millis_f64(slot_ms), slots_per_frame }
    }

    pub fn slotframe(&self) -> SimTime {
        self.slot.times(self.slots_per_frame)
    }

    pub fn slotframe_start(&self, index: u64) -> SimTime {
        self.slotframe().times(index)
    }

    pub fn slot_start(&self, slotframe: u64, slot: u64) -> SimTime {
        self.slotframe_start(slotframe) + self.slot.times(slot)
    }

    /// Index of the first slotframe that starts at or after `t`.
    pub fn next_slotframe_at_or_after(&self, t: SimTime) -> u64 {
        t.0.div_ceil(self.slotframe().0)
    }
}
