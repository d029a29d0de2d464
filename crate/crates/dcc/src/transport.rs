//! Message queues between the sampler, the LLM worker, the evaluator and the
//! database owner, in process or over AMQP.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::thread;
use std::time::{Duration, Instant};

use amiquip::{Channel, Connection, Delivery, Publish, QueueDeclareOptions};
use dcc_core::prompt::LlmParams;
use dcc_core::EvalResult;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueName {
    Prompts,
    Candidates,
    Results,
}

impl QueueName {
    pub const ALL: [QueueName; 3] = [QueueName::Prompts, QueueName::Candidates, QueueName::Results];

    pub fn as_str(self) -> &'static str {
        match self {
            QueueName::Prompts => "prompts",
            QueueName::Candidates => "candidates",
            QueueName::Results => "results",
        }
    }
}

impl fmt::Display for QueueName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptMsg {
    pub prompt_id: String,
    pub island_id: usize,
    pub text: String,
    pub llm_params: LlmParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateMsg {
    pub candidate_id: String,
    pub prompt_id: String,
    pub island_id: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMsg {
    pub candidate_id: String,
    pub island_id: usize,
    pub eval_result: EvalResult,
    pub source: String,
}

/// A fetched message; `tag` is passed back to [`Transport::ack`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub tag: u64,
    pub body: Vec<u8>,
}

impl Envelope {
    pub fn decode<T: for<'de> Deserialize<'de>>(&self) -> Result<T, TransportError> {
        serde_json::from_slice(&self.body).map_err(|e| TransportError::Decode(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("cannot reach broker at {url}: {reason}")]
    Connect { url: String, reason: String },
    #[error("broker error: {0}")]
    Broker(String),
    #[error("undecodable message: {0}")]
    Decode(String),
    #[error("unknown delivery tag {0}")]
    UnknownTag(u64),
}

pub trait Transport: Send {
    fn publish(&mut self, queue: QueueName, body: &[u8]) -> Result<(), TransportError>;

    /// Next message on `queue`, waiting up to `wait` for one to arrive.
    fn fetch(&mut self, queue: QueueName, wait: Duration) -> Result<Option<Envelope>, TransportError>;

    fn ack(&mut self, tag: u64) -> Result<(), TransportError>;
}

pub fn publish_json<T: Serialize>(t: &mut dyn Transport, queue: QueueName, msg: &T) -> Result<(), TransportError> {
    let body = serde_json::to_vec(msg).expect("messages serialize");
    t.publish(queue, &body)
}

/// FIFO queues in memory; every message is delivered exactly once.
#[derive(Debug, Default)]
pub struct InProcess {
    queues: HashMap<QueueName, VecDeque<Vec<u8>>>,
    unacked: HashMap<u64, QueueName>,
    next_tag: u64,
}

impl InProcess {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self, queue: QueueName) -> usize {
        self.queues.get(&queue).map_or(0, VecDeque::len)
    }

    pub fn unacked(&self) -> usize {
        self.unacked.len()
    }
}

impl Transport for InProcess {
    fn publish(&mut self, queue: QueueName, body: &[u8]) -> Result<(), TransportError> {
        self.queues.entry(queue).or_default().push_back(body.to_vec());
        Ok(())
    }

    fn fetch(&mut self, queue: QueueName, _wait: Duration) -> Result<Option<Envelope>, TransportError> {
        let Some(body) = self.queues.get_mut(&queue).and_then(VecDeque::pop_front) else {
            return Ok(None);
        };
        self.next_tag += 1;
        self.unacked.insert(self.next_tag, queue);
        Ok(Some(Envelope { tag: self.next_tag, body }))
    }

    fn ack(&mut self, tag: u64) -> Result<(), TransportError> {
        self.unacked.remove(&tag).map(drop).ok_or(TransportError::UnknownTag(tag))
    }
}

/// Durable queues on an AMQP 0-9-1 broker, named `{prefix}.{queue}`.
/// Delivery is at least once: unacknowledged messages are redelivered.
pub struct AmqpTransport {
    connection: Option<Connection>,
    channel: Option<Channel>,
    prefix: String,
    pending: HashMap<u64, Delivery>,
}

impl AmqpTransport {
    /// Connects and declares the three queues, emptying them when `purge` is set.
    pub fn connect(url: &str, prefix: &str, purge: bool) -> Result<Self, TransportError> {
        let connect_err = |e: amiquip::Error| TransportError::Connect { url: url.to_string(), reason: e.to_string() };
        let mut connection = Connection::insecure_open(url).map_err(connect_err)?;
        let channel = connection.open_channel(None).map_err(connect_err)?;
        let options = QueueDeclareOptions { durable: true, ..QueueDeclareOptions::default() };
        for q in QueueName::ALL {
            let name = format!("{prefix}.{q}");
            channel.queue_declare(name.as_str(), options.clone()).map_err(broker)?;
            if purge {
                channel.queue_purge(name).map_err(broker)?;
            }
        }
        Ok(Self { connection: Some(connection), channel: Some(channel), prefix: prefix.to_string(), pending: HashMap::new() })
    }

    fn name(&self, queue: QueueName) -> String {
        format!("{}.{queue}", self.prefix)
    }

    fn channel(&self) -> &Channel {
        self.channel.as_ref().expect("channel open until drop")
    }
}

fn broker(e: amiquip::Error) -> TransportError {
    TransportError::Broker(e.to_string())
}

impl Transport for AmqpTransport {
    fn publish(&mut self, queue: QueueName, body: &[u8]) -> Result<(), TransportError> {
        let routing_key = self.name(queue);
        self.channel().basic_publish("", Publish::new(body, routing_key)).map_err(broker)
    }

    fn fetch(&mut self, queue: QueueName, wait: Duration) -> Result<Option<Envelope>, TransportError> {
        let name = self.name(queue);
        let deadline = Instant::now() + wait;
        loop {
            if let Some(get) = self.channel().basic_get(name.as_str(), false).map_err(broker)? {
                let tag = get.delivery.delivery_tag();
                let body = get.delivery.body.clone();
                self.pending.insert(tag, get.delivery);
                return Ok(Some(Envelope { tag, body }));
            }
            if Instant::now() >= deadline {
                return Ok(None);
            }
            thread::sleep(Duration::from_millis(10));
        }
    }

    fn ack(&mut self, tag: u64) -> Result<(), TransportError> {
        let delivery = self.pending.remove(&tag).ok_or(TransportError::UnknownTag(tag))?;
        delivery.ack(self.channel()).map_err(broker)
    }
}

impl Drop for AmqpTransport {
    fn drop(&mut self) {
        if let Some(channel) = self.channel.take() {
            let _ = channel.close();
        }
        if let Some(connection) = self.connection.take() {
            let _ = connection.close();
        }
    }
}
