//! RPL DODAG formation and maintenance: DIS/DIO/DAO handling, trickle-driven
//! DIO emission and per-slotframe parent evaluation.

pub mod message;
pub mod node;
pub mod trickle;

pub use message::{ControlKind, ControlMessage, ControlPayload, DioPayload};
pub use node::{DioContext, DioSnapshot, NodeState, Position};
pub use trickle::{TrickleParams, TrickleSchedule, TrickleState};
