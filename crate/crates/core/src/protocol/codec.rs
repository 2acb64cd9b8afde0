//! JSON-lines wire format for queries and responses.
//!
//! Every message is one UTF-8 JSON object tagged by `"kind"`. Field names
//! follow the dataset schema. Unknown fields are rejected in strict mode and
//! carried along untouched in lenient mode.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{ConcordError, Result};
use crate::model::{ProtocolQuery, Urgency};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolPayload {
    pub intent: String,
    pub target_slot: String,
    pub urgency: Urgency,
    #[serde(flatten, default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub message_id: String,
    pub conversation_id: String,
    pub trigger_turn_id: u32,
    pub protocol_payload: ProtocolPayload,
    pub natural_language_fallback: String,
    /// Simulated seconds.
    pub sent_at: f64,
    #[serde(flatten, default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl QueryRequest {
    pub fn from_query(message_id: String, conversation_id: String, query: &ProtocolQuery, sent_at: f64) -> Self {
        QueryRequest {
            message_id,
            conversation_id,
            trigger_turn_id: query.trigger_turn_id,
            protocol_payload: ProtocolPayload {
                intent: query.intent.clone(),
                target_slot: query.target_slot.clone(),
                urgency: query.urgency,
                extra: BTreeMap::new(),
            },
            natural_language_fallback: query.natural_language_fallback.clone(),
            sent_at,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponseStatus {
    Answered,
    Partial,
    PendingApproval,
    Declined,
    TimedOut,
}

impl ResponseStatus {
    pub const NAMES: [&'static str; 5] = ["ANSWERED", "PARTIAL", "PENDING_APPROVAL", "DECLINED", "TIMED_OUT"];

    pub fn carries_content(self) -> bool {
        matches!(self, ResponseStatus::Answered | ResponseStatus::Partial)
    }

    pub fn is_terminal(self) -> bool {
        self != ResponseStatus::PendingApproval
    }
}

impl fmt::Display for ResponseStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = *self as usize;
        f.write_str(Self::NAMES[i])
    }
}

impl FromStr for ResponseStatus {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        use ResponseStatus::*;
        [Answered, Partial, PendingApproval, Declined, TimedOut]
            .into_iter()
            .find(|st| st.to_string() == s)
            .ok_or_else(|| ConcordError::Schema {
                field: "status".into(),
                message: format!("`{s}` is not one of {:?}", Self::NAMES),
            })
    }
}

/// Why a query was declined. Only "nothing found" is stated; withheld answers
/// carry no reason, so suppression and abort look the same on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeclineReason {
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub message_id: String,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default)]
    pub masked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<DeclineReason>,
    pub sent_at: f64,
    #[serde(flatten, default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl QueryResponse {
    pub fn new(message_id: impl Into<String>, status: ResponseStatus, sent_at: f64) -> Self {
        QueryResponse {
            message_id: message_id.into(),
            status,
            content: None,
            masked: false,
            reason: None,
            sent_at,
            extra: BTreeMap::new(),
        }
    }

    pub fn declined(message_id: impl Into<String>, reason: Option<DeclineReason>, sent_at: f64) -> Self {
        QueryResponse { reason, ..QueryResponse::new(message_id, ResponseStatus::Declined, sent_at) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Message {
    Query(QueryRequest),
    Response(QueryResponse),
}

impl Message {
    pub fn message_id(&self) -> &str {
        match self {
            Message::Query(q) => &q.message_id,
            Message::Response(r) => &r.message_id,
        }
    }

    pub fn sent_at(&self) -> f64 {
        match self {
            Message::Query(q) => q.sent_at,
            Message::Response(r) => r.sent_at,
        }
    }

    /// Checks the invariants a well-formed message must hold.
    pub fn check(&self) -> Result<()> {
        let schema = |field: &str, message: &str| {
            Err(ConcordError::Schema { field: field.into(), message: message.into() })
        };
        match self {
            Message::Query(q) => {
                if q.message_id.is_empty() {
                    return schema("message_id", "must not be empty");
                }
                if q.protocol_payload.intent.is_empty() {
                    return schema("intent", "must not be empty");
                }
                if q.protocol_payload.target_slot.is_empty() {
                    return schema("target_slot", "must not be empty");
                }
                if !(q.sent_at >= 0.0) {
                    return schema("sent_at", "must be a non-negative number");
                }
            }
            Message::Response(r) => {
                if r.message_id.is_empty() {
                    return schema("message_id", "must not be empty");
                }
                if r.status.carries_content() != r.content.is_some() {
                    return schema("content", "present exactly when status is ANSWERED or PARTIAL");
                }
                if r.masked && r.status != ResponseStatus::Partial {
                    return schema("masked", "only PARTIAL responses are masked");
                }
                if r.reason.is_some() && r.status != ResponseStatus::Declined {
                    return schema("reason", "only DECLINED responses carry a reason");
                }
                if !(r.sent_at >= 0.0) {
                    return schema("sent_at", "must be a non-negative number");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    #[default]
    Strict,
    Lenient,
}

/// Canonical encoding: compact JSON, declared field order, no trailing newline.
pub fn encode(message: &Message) -> Vec<u8> {
    serde_json::to_vec(message).expect("message serializes")
}

/// Canonical encoding followed by a newline, for `.jsonl` streams.
pub fn encode_line(message: &Message) -> String {
    let mut s = String::from_utf8(encode(message)).expect("JSON is UTF-8");
    s.push('\n');
    s
}

pub fn decode(bytes: &[u8]) -> Result<Message> {
    decode_with(bytes, DecodeMode::Strict)
}

pub fn decode_with(bytes: &[u8], mode: DecodeMode) -> Result<Message> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| ConcordError::Decode {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let Value::Object(obj) = &value else {
        return Err(ConcordError::Decode { offset: 0, message: "expected a JSON object".into() });
    };
    let kind = obj.get("kind").and_then(Value::as_str).map(str::to_string).ok_or_else(|| ConcordError::Schema {
        field: "kind".into(),
        message: "missing or not a string".into(),
    })?;
    match kind.as_str() {
        "query" => {
            check_fields(obj, QUERY_FIELDS, "", mode)?;
            let payload = obj.get("protocol_payload").and_then(Value::as_object).ok_or_else(|| {
                ConcordError::Schema { field: "protocol_payload".into(), message: "missing or not an object".into() }
            })?;
            check_fields(payload, PAYLOAD_FIELDS, "protocol_payload.", mode)?;
            if let Some(u) = payload.get("urgency") {
                Urgency::from_str(u.as_str().unwrap_or_default())?;
            }
        }
        "response" => {
            check_fields(obj, RESPONSE_FIELDS, "", mode)?;
            if let Some(s) = obj.get("status") {
                ResponseStatus::from_str(s.as_str().unwrap_or_default())?;
            }
        }
        other => {
            return Err(ConcordError::Schema {
                field: "kind".into(),
                message: format!("`{other}` is not one of [\"query\", \"response\"]"),
            })
        }
    }
    let message: Message = serde_json::from_value(value).map_err(|e| ConcordError::Schema {
        field: kind,
        message: e.to_string(),
    })?;
    message.check()?;
    Ok(message)
}

const QUERY_FIELDS: &[&str] = &[
    "kind",
    "message_id",
    "conversation_id",
    "trigger_turn_id",
    "protocol_payload",
    "natural_language_fallback",
    "sent_at",
];
const PAYLOAD_FIELDS: &[&str] = &["intent", "target_slot", "urgency"];
const RESPONSE_FIELDS: &[&str] = &["kind", "message_id", "status", "content", "masked", "reason", "sent_at"];

fn check_fields(obj: &Map<String, Value>, known: &[&str], prefix: &str, mode: DecodeMode) -> Result<()> {
    if mode == DecodeMode::Lenient {
        return Ok(());
    }
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(ConcordError::Schema {
            field: format!("{prefix}{k}"),
            message: "unknown field".into(),
        }),
        None => Ok(()),
    }
}

/// Byte offset of a 1-based line and column.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in bytes.split(|&b| b == b'\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(bytes.len());
        }
        offset += l.len() + 1;
    }
    bytes.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QueryQuality;

    fn turn44() -> Message {
        let q = ProtocolQuery {
            trigger_turn_id: 44,
            intent: "RESOLVE_MISSING_ENTITY".into(),
            target_slot: "LOCATION_DESTINATION".into(),
            urgency: Urgency::Immediate,
            quality: QueryQuality::HighValue,
            natural_language_fallback: "Requesting MRI center name from Turn 44.".into(),
        };
        Message::Query(QueryRequest::from_query("A-0001".into(), "scenario".into(), &q, 440.0))
    }

    #[test]
    fn field_names_follow_the_schema() {
        let s = String::from_utf8(encode(&turn44())).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"query","message_id":"A-0001","conversation_id":"scenario","trigger_turn_id":44,"protocol_payload":{"intent":"RESOLVE_MISSING_ENTITY","target_slot":"LOCATION_DESTINATION","urgency":"IMMEDIATE"},"natural_language_fallback":"Requesting MRI center name from Turn 44.","sent_at":440.0}"#
        );
        assert_eq!(decode(s.as_bytes()).unwrap(), turn44());
    }

    #[test]
    fn malformed_input_reports_offset() {
        let err = decode(b"{\"kind\": \"query\",, }").unwrap_err();
        match err {
            ConcordError::Decode { offset, .. } => assert_eq!(offset, 17),
            other => panic!("{other:?}"),
        }
        assert!(matches!(decode(b""), Err(ConcordError::Decode { offset: 0, .. })));
    }

    #[test]
    fn enum_violation_is_a_schema_error() {
        let s = String::from_utf8(encode(&turn44())).unwrap().replace("IMMEDIATE", "SOMEDAY");
        match decode(s.as_bytes()) {
            Err(ConcordError::Schema { field, .. }) => assert_eq!(field, "urgency"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strict_rejects_and_lenient_keeps_unknown_fields() {
        let s = String::from_utf8(encode(&turn44())).unwrap().replace("\"sent_at\"", "\"hint\":1,\"sent_at\"");
        assert!(matches!(decode(s.as_bytes()), Err(ConcordError::Schema { field, .. }) if field == "hint"));
        let m = decode_with(s.as_bytes(), DecodeMode::Lenient).unwrap();
        let Message::Query(q) = &m else { panic!() };
        assert_eq!(q.extra.get("hint"), Some(&Value::from(1)));
        assert_eq!(decode_with(&encode(&m), DecodeMode::Lenient).unwrap(), m);
    }

    #[test]
    fn response_invariants() {
        let mut r = QueryResponse::new("x", ResponseStatus::Answered, 1.0);
        assert!(Message::Response(r.clone()).check().is_err());
        r.content = Some("8 AM".into());
        assert!(Message::Response(r.clone()).check().is_ok());
        r.masked = true;
        assert!(Message::Response(r).check().is_err());
        let d = QueryResponse::declined("x", Some(DeclineReason::NotFound), 2.0);
        let bytes = encode(&Message::Response(d.clone()));
        assert_eq!(decode(&bytes).unwrap(), Message::Response(d));
    }
}
