//! Layered publish-subscribe bus.
//!
//! Data flows one hop at a time: Sensor -> Processing -> Behavior -> Control.
//! A subscription is accepted only from the layer immediately after the
//! topic's producer. Safety alerts are the exception: they are broadcast to
//! every subscription and jump ahead of anything already queued.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use indexmap::IndexMap;

use crate::config::SafetyCheckSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Sensor,
    Processing,
    Behavior,
    Control,
}

impl Layer {
    pub const ALL: [Layer; 4] = [Layer::Sensor, Layer::Processing, Layer::Behavior, Layer::Control];

    pub fn next(self) -> Option<Layer> {
        match self {
            Layer::Sensor => Some(Layer::Processing),
            Layer::Processing => Some(Layer::Behavior),
            Layer::Behavior => Some(Layer::Control),
            Layer::Control => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Sensor => "sensor",
            Layer::Processing => "processing",
            Layer::Behavior => "behavior",
            Layer::Control => "control",
        }
    }

    pub fn parse(s: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.as_str() == s)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Topic carrying gated readings of one sensor.
pub fn sensor_topic(sensor: &str) -> String {
    format!("sensor/{sensor}")
}

/// Topic carrying processed values: an algorithm output, or a sensor name
/// for sensors forwarded unchanged.
pub fn processed_topic(name: &str) -> String {
    format!("processed/{name}")
}

/// Topic carrying commands for one actuator.
pub fn command_topic(actuator: &str) -> String {
    format!("command/{actuator}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub name: String,
    pub producer_layer: Layer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayloadValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Scalar(f64),
    Fields(BTreeMap<String, PayloadValue>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub topic: String,
    pub producer_layer: Layer,
    pub t_us: u64,
    pub seq: u64,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyDecision {
    Continue,
    AlertAndHalt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyAlert {
    pub check: String,
    pub t_us: u64,
    pub reading: f64,
    pub decision: SafetyDecision,
}

/// Compares a raw reading against a check's threshold. Only a reading
/// strictly above the threshold halts.
pub fn evaluate_safety(reading: f64, check: &SafetyCheckSpec, t_us: u64) -> SafetyAlert {
    let decision = if reading > check.threshold {
        SafetyDecision::AlertAndHalt
    } else {
        SafetyDecision::Continue
    };
    SafetyAlert {
        check: check.name.clone(),
        t_us,
        reading,
        decision,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Message(Message),
    Alert(SafetyAlert),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubscriptionId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("no topic named `{0}`")]
    UnknownTopic(String),
    #[error("topic `{0}` is already registered")]
    DuplicateTopic(String),
    #[error("a {subscriber} subscriber cannot listen to a {producer} topic")]
    Layering { producer: Layer, subscriber: Layer },
    #[error("topic `{topic}` is produced by the {owner} layer, not {publisher}")]
    ForeignPublisher {
        topic: String,
        owner: Layer,
        publisher: Layer,
    },
}

#[derive(Debug)]
struct Subscription {
    topic: String,
    layer: Layer,
    queue: VecDeque<Delivery>,
}

#[derive(Debug, Default)]
pub struct Bus {
    topics: IndexMap<String, Topic>,
    subscriptions: Vec<Subscription>,
    next_seq: AtomicU64,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_topic(&mut self, name: impl Into<String>, producer_layer: Layer) -> Result<(), BusError> {
        let name = name.into();
        if self.topics.contains_key(&name) {
            return Err(BusError::DuplicateTopic(name));
        }
        self.topics.insert(
            name.clone(),
            Topic {
                name,
                producer_layer,
            },
        );
        Ok(())
    }

    pub fn topic(&self, name: &str) -> Option<&Topic> {
        self.topics.get(name)
    }

    pub fn topics(&self) -> impl Iterator<Item = &Topic> {
        self.topics.values()
    }

    pub fn subscribe(&mut self, topic: &str, subscriber_layer: Layer) -> Result<SubscriptionId, BusError> {
        let producer = self
            .topics
            .get(topic)
            .ok_or_else(|| BusError::UnknownTopic(topic.to_string()))?
            .producer_layer;
        if producer.next() != Some(subscriber_layer) {
            return Err(BusError::Layering {
                producer,
                subscriber: subscriber_layer,
            });
        }
        self.subscriptions.push(Subscription {
            topic: topic.to_string(),
            layer: subscriber_layer,
            queue: VecDeque::new(),
        });
        Ok(SubscriptionId(self.subscriptions.len() - 1))
    }

    /// Layers subscribed to `topic`, in subscription order.
    pub fn subscriber_layers(&self, topic: &str) -> Vec<Layer> {
        self.subscriptions
            .iter()
            .filter(|s| s.topic == topic)
            .map(|s| s.layer)
            .collect()
    }

    /// Subscriptions that will receive messages on `topic`, in subscription order.
    pub fn subscribers(&self, topic: &str) -> Vec<SubscriptionId> {
        self.subscriptions
            .iter()
            .enumerate()
            .filter(|(_, s)| s.topic == topic)
            .map(|(i, _)| SubscriptionId(i))
            .collect()
    }

    pub fn publish(
        &mut self,
        topic: &str,
        publisher: Layer,
        payload: Payload,
        t_us: u64,
    ) -> Result<Message, BusError> {
        let owner = self
            .topics
            .get(topic)
            .ok_or_else(|| BusError::UnknownTopic(topic.to_string()))?
            .producer_layer;
        if owner != publisher {
            return Err(BusError::ForeignPublisher {
                topic: topic.to_string(),
                owner,
                publisher,
            });
        }
        let seq = self.next_seq.fetch_add(1, Ordering::SeqCst);
        let message = Message {
            topic: topic.to_string(),
            producer_layer: owner,
            t_us,
            seq,
            payload,
        };
        for sub in self.subscriptions.iter_mut().filter(|s| s.topic == topic) {
            sub.queue.push_back(Delivery::Message(message.clone()));
        }
        Ok(message)
    }

    /// Sends an alert to every subscription, ahead of queued messages.
    pub fn broadcast_alert(&mut self, alert: &SafetyAlert) {
        for sub in &mut self.subscriptions {
            sub.queue.push_front(Delivery::Alert(alert.clone()));
        }
    }

    pub fn poll(&mut self, id: SubscriptionId) -> Option<Delivery> {
        self.subscriptions.get_mut(id.0)?.queue.pop_front()
    }

    pub fn drain(&mut self, id: SubscriptionId) -> Vec<Delivery> {
        self.subscriptions
            .get_mut(id.0)
            .map(|s| s.queue.drain(..).collect())
            .unwrap_or_default()
    }

    pub fn pending(&self, id: SubscriptionId) -> usize {
        self.subscriptions.get(id.0).map_or(0, |s| s.queue.len())
    }

    /// Discards queued ordinary messages, keeping alerts.
    pub fn purge_messages(&mut self) {
        for sub in &mut self.subscriptions {
            sub.queue.retain(|d| matches!(d, Delivery::Alert(_)));
        }
    }

    /// Number of messages published so far.
    pub fn published(&self) -> u64 {
        self.next_seq.load(Ordering::SeqCst)
    }
}
