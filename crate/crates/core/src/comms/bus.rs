use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CommsError, DEFAULT_PAYLOAD_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Assign,
    Result,
    Error,
    Control,
}

/// A delivered message. `seq` counts from 1 per (sender, recipient) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub sender: String,
    pub recipient: String,
    pub kind: MessageKind,
    pub task_id: String,
    pub payload: String,
}

/// A message before the bus has stamped it with a sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub sender: String,
    pub recipient: String,
    pub kind: MessageKind,
    pub task_id: String,
    pub payload: String,
}

impl Envelope {
    pub fn new(
        sender: impl Into<String>,
        recipient: impl Into<String>,
        kind: MessageKind,
        task_id: impl Into<String>,
        payload: impl Into<String>,
    ) -> Envelope {
        Envelope {
            sender: sender.into(),
            recipient: recipient.into(),
            kind,
            task_id: task_id.into(),
            payload: payload.into(),
        }
    }
}

#[derive(Default)]
struct MailboxState {
    queue: VecDeque<Message>,
    next_seq: HashMap<String, u64>,
}

#[derive(Default)]
struct Mailbox {
    state: Mutex<MailboxState>,
    arrived: Condvar,
}

/// In-process message bus with one FIFO mailbox per registered agent.
///
/// Sequence assignment and enqueueing happen under the recipient's mailbox
/// lock, so delivery order per (sender, recipient) pair equals `seq` order.
pub struct MessageBus {
    mailboxes: RwLock<HashMap<String, Arc<Mailbox>>>,
    payload_limit: usize,
}

impl Default for MessageBus {
    fn default() -> Self {
        MessageBus::new()
    }
}

impl MessageBus {
    pub fn new() -> MessageBus {
        MessageBus::with_payload_limit(DEFAULT_PAYLOAD_LIMIT)
    }

    pub fn with_payload_limit(payload_limit: usize) -> MessageBus {
        MessageBus {
            mailboxes: RwLock::new(HashMap::new()),
            payload_limit,
        }
    }

    /// Registers a mailbox for `agent_id`. Registering twice is a no-op.
    pub fn register(&self, agent_id: &str) {
        let mut boxes = self.mailboxes.write().unwrap();
        boxes.entry(agent_id.to_string()).or_default();
    }

    pub fn is_registered(&self, agent_id: &str) -> bool {
        self.mailboxes.read().unwrap().contains_key(agent_id)
    }

    fn mailbox(&self, agent_id: &str) -> Option<Arc<Mailbox>> {
        self.mailboxes.read().unwrap().get(agent_id).cloned()
    }

    pub fn send(&self, envelope: Envelope) -> Result<u64, CommsError> {
        if envelope.payload.len() > self.payload_limit {
            return Err(CommsError::PayloadTooLarge {
                size: envelope.payload.len(),
                limit: self.payload_limit,
            });
        }
        let mailbox = self
            .mailbox(&envelope.recipient)
            .ok_or_else(|| CommsError::UnknownRecipient(envelope.recipient.clone()))?;
        let mut state = mailbox.state.lock().unwrap();
        let counter = state.next_seq.entry(envelope.sender.clone()).or_insert(0);
        *counter += 1;
        let seq = *counter;
        state.queue.push_back(Message {
            seq,
            sender: envelope.sender,
            recipient: envelope.recipient,
            kind: envelope.kind,
            task_id: envelope.task_id,
            payload: envelope.payload,
        });
        drop(state);
        mailbox.arrived.notify_one();
        Ok(seq)
    }

    /// Blocks until a message for `agent_id` arrives or `timeout` elapses.
    /// `Ok(None)` signals the timeout.
    pub fn receive(&self, agent_id: &str, timeout: Duration) -> Result<Option<Message>, CommsError> {
        let mailbox = self
            .mailbox(agent_id)
            .ok_or_else(|| CommsError::UnknownAgent(agent_id.to_string()))?;
        let deadline = Instant::now() + timeout;
        let mut state = mailbox.state.lock().unwrap();
        loop {
            if let Some(msg) = state.queue.pop_front() {
                return Ok(Some(msg));
            }
            let now = Instant::now();
            if now >= deadline {
                return Ok(None);
            }
            state = mailbox.arrived.wait_timeout(state, deadline - now).unwrap().0;
        }
    }

    /// Number of undelivered messages waiting for `agent_id`.
    pub fn pending(&self, agent_id: &str) -> usize {
        self.mailbox(agent_id)
            .map(|m| m.state.lock().unwrap().queue.len())
            .unwrap_or(0)
    }
}
