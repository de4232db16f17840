use serde::{Deserialize, Serialize};

use crate::metrics::NodeId;
use crate::time::SimTime;

/// A data packet travelling upward toward the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Packet {
    pub id: u64,
    pub origin: NodeId,
    pub created_at: SimTime,
    pub size_bytes: u32,
    pub hops_so_far: u32,
    /// Failed attempts on the current hop.
    pub retransmissions: u32,
}

impl Packet {
    pub fn new(id: u64, origin: NodeId, created_at: SimTime, size_bytes: u32) -> Packet {
        Packet { id, origin, created_at, size_bytes, hops_so_far: 0, retransmissions: 0 }
    }
}
