//! Deterministic discrete-event simulator of RPL routing over a TSCH-style
//! slotted MAC, comparing exponentially weighted queue-occupancy (EWQOF)
//! parent swapping against the Max-QOF baseline.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod metrics;
pub mod packet;
pub mod report;
pub mod rng;
pub mod routing;
pub mod scenario;
pub mod time;
pub mod traffic;
