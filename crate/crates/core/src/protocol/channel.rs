//! Simulated asynchronous channel between the two agents.
//!
//! Time is simulated. A message sent at `t` becomes deliverable at
//! `t + latency` unless the seeded RNG drops it. Messages travel as encoded
//! lines, so every delivery passes through the codec.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec::{decode, encode_line, Message};
use crate::error::{ConcordError, Result};
use crate::model::Role;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Simulated seconds from send to delivery.
    pub latency: f64,
    pub drop_probability: f64,
    /// Simulated seconds a requester waits for a reply.
    pub timeout: f64,
    pub rng_seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { latency: 0.5, drop_probability: 0.0, timeout: 5.0, rng_seed: 0 }
    }
}

impl ChannelConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(ConcordError::InvalidConfig(format!("latency {} must be >= 0", self.latency)));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(ConcordError::InvalidConfig(format!(
                "drop_probability {} must lie in [0, 1]",
                self.drop_probability
            )));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(ConcordError::InvalidConfig(format!("timeout {} must be > 0", self.timeout)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Sent,
    Dropped,
    Delivered,
}

/// One line of the channel log. Carries envelope metadata only, never content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub at: f64,
    pub event: EventKind,
    pub from: Role,
    pub to: Role,
    pub message_id: String,
    /// `query` or `response`, plus the status for responses.
    pub label: String,
}

#[derive(Debug, Clone)]
struct Envelope {
    deliver_at: f64,
    seq: u64,
    from: Role,
    to: Role,
    line: String,
    label: String,
    message_id: String,
}

#[derive(Debug)]
pub struct Channel {
    config: ChannelConfig,
    rng: ChaCha8Rng,
    seq: u64,
    in_flight: Vec<Envelope>,
    log: Vec<ChannelEvent>,
}

fn label(message: &Message) -> String {
    match message {
        Message::Query(_) => "query".into(),
        Message::Response(r) => format!("response:{}", r.status),
    }
}

impl Channel {
    pub fn new(config: ChannelConfig) -> Result<Self> {
        config.check()?;
        Ok(Channel {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            seq: 0,
            in_flight: Vec::new(),
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.config
    }

    /// Queues `message` for delivery to `to`, stamped at `message.sent_at()`.
    pub fn send(&mut self, from: Role, to: Role, message: &Message) {
        let at = message.sent_at();
        let event = |event| ChannelEvent {
            at,
            event,
            from,
            to,
            message_id: message.message_id().to_string(),
            label: label(message),
        };
        self.log.push(event(EventKind::Sent));
        // one draw per message keeps the RNG stream independent of timing
        let draw: f64 = self.rng.random();
        if draw < self.config.drop_probability {
            self.log.push(event(EventKind::Dropped));
            return;
        }
        self.in_flight.push(Envelope {
            deliver_at: at + self.config.latency,
            seq: self.seq,
            from,
            to,
            line: encode_line(message),
            label: label(message),
            message_id: message.message_id().to_string(),
        });
        self.seq += 1;
    }

    /// Removes and returns the messages for `to` deliverable by `now`, in
    /// delivery order (send order among equal delivery times).
    pub fn poll(&mut self, to: Role, now: f64) -> Result<Vec<(f64, Message)>> {
        let (mut ready, rest): (Vec<Envelope>, Vec<Envelope>) =
            self.in_flight.drain(..).partition(|e| e.to == to && e.deliver_at <= now);
        self.in_flight = rest;
        ready.sort_by(|a, b| a.deliver_at.total_cmp(&b.deliver_at).then(a.seq.cmp(&b.seq)));
        let mut out = Vec::with_capacity(ready.len());
        for e in ready {
            self.log.push(ChannelEvent {
                at: e.deliver_at,
                event: EventKind::Delivered,
                from: e.from,
                to: e.to,
                message_id: e.message_id,
                label: e.label,
            });
            out.push((e.deliver_at, decode(e.line.trim_end().as_bytes())?));
        }
        Ok(out)
    }

    /// Earliest pending delivery time.
    pub fn next_delivery(&self) -> Option<f64> {
        self.in_flight.iter().map(|e| e.deliver_at).min_by(f64::total_cmp)
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_empty()
    }

    pub fn log(&self) -> &[ChannelEvent] {
        &self.log
    }
}
