use serde::{Deserialize, Serialize};

use crate::metrics::{NodeId, Qof};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlKind {
    Dis,
    Dio,
    Dao,
    DaoAck,
}

/// DODAG information carried by a DIO, including the sender's congestion
/// state so children can evaluate it without probing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DioPayload {
    pub rank: u32,
    pub advertised_qof: Qof,
    pub advertised_beta: f64,
    pub dodag_version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlPayload {
    Dis,
    Dio(DioPayload),
    /// Destination advertisement for `target`, routed to the root.
    Dao {
        target: NodeId,
    },
    DaoAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlMessage {
    pub sender: NodeId,
    pub payload: ControlPayload,
}

impl ControlMessage {
    pub fn dis(sender: NodeId) -> ControlMessage {
        ControlMessage { sender, payload: ControlPayload::Dis }
    }

    pub fn dao(sender: NodeId) -> ControlMessage {
        ControlMessage { sender, payload: ControlPayload::Dao { target: sender } }
    }

    pub fn dao_ack(sender: NodeId) -> ControlMessage {
        ControlMessage { sender, payload: ControlPayload::DaoAck }
    }

    pub fn kind(&self) -> ControlKind {
        match self.payload {
            ControlPayload::Dis => ControlKind::Dis,
            ControlPayload::Dio(_) => ControlKind::Dio,
            ControlPayload::Dao { .. } => ControlKind::Dao,
            ControlPayload::DaoAck => ControlKind::DaoAck,
        }
    }

    pub fn dio(&self) -> Option<&DioPayload> {
        match &self.payload {
            ControlPayload::Dio(p) => Some(p),
            _ => None,
        }
    }
}
