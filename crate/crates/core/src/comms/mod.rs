//! Hybrid agent communication: directed FIFO message passing plus a
//! versioned shared blackboard.

mod blackboard;
mod bus;

pub use blackboard::{Blackboard, BlackboardEntry};
pub use bus::{Envelope, Message, MessageBus, MessageKind};

/// Default maximum payload size for messages and blackboard values (1 MiB).
pub const DEFAULT_PAYLOAD_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CommsError {
    #[error("unknown recipient {0}")]
    UnknownRecipient(String),
    #[error("unknown agent {0}")]
    UnknownAgent(String),
    #[error("payload of {size} bytes exceeds limit of {limit}")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("blackboard dump failed: {0}")]
    Dump(String),
}
