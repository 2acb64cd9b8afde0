//! The annotated dialogue record and its schema guard.
//!
//! Records are checked in two passes. [`schema_violations`] walks the raw JSON
//! and reports missing, unknown or renamed fields with their path. Once the
//! record is typed, [`validate_dataset`] checks the semantic invariants: turn
//! ordering, trigger turns that exist, and enum-valued query fields.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::model::{
    MobileContextSnapshot, ProtocolQuery, QueryQuality, RelationshipLevel, ResolutionRecord, Role,
    Turn, Urgency,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backstory {
    pub summary: String,
    pub relationship: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPair {
    pub user_a: MobileContextSnapshot,
    pub user_b: MobileContextSnapshot,
}

impl SnapshotPair {
    pub fn for_role(&self, role: Role) -> &MobileContextSnapshot {
        match role {
            Role::UserA => &self.user_a,
            Role::UserB => &self.user_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPayload {
    pub intent: String,
    #[serde(alias = "target_attribute")]
    pub target_slot: String,
    pub urgency: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_ref: Option<String>,
}

/// A gold query as annotated in a record. Enum-valued fields stay as strings so
/// that out-of-vocabulary values surface as violations instead of parse failures.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldQuery {
    pub trigger_turn_id: u32,
    pub query_quality_check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub protocol_payload: GoldPayload,
    pub natural_language_fallback: String,
}

impl GoldQuery {
    pub fn quality(&self) -> Option<QueryQuality> {
        self.query_quality_check.parse().ok()
    }

    pub fn urgency(&self) -> Option<Urgency> {
        self.protocol_payload.urgency.parse().ok()
    }

    pub fn is_high_value(&self) -> bool {
        self.quality() == Some(QueryQuality::HighValue)
    }

    pub fn to_protocol_query(&self) -> Option<ProtocolQuery> {
        Some(ProtocolQuery {
            trigger_turn_id: self.trigger_turn_id,
            intent: self.protocol_payload.intent.clone(),
            target_slot: self.protocol_payload.target_slot.clone(),
            urgency: self.urgency()?,
            quality: self.quality()?,
            natural_language_fallback: self.natural_language_fallback.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub dataset_id: String,
    pub backstory: Backstory,
    pub mobile_context_snapshot: SnapshotPair,
    pub conversation_transcript: Vec<Turn>,
    pub ground_truth_resolutions: Vec<ResolutionRecord>,
    pub required_protocol_queries: Vec<GoldQuery>,
}

impl DatasetRecord {
    pub fn high_value_queries(&self) -> impl Iterator<Item = &GoldQuery> {
        self.required_protocol_queries.iter().filter(|q| q.is_high_value())
    }

    pub fn low_value_queries(&self) -> impl Iterator<Item = &GoldQuery> {
        self.required_protocol_queries
            .iter()
            .filter(|q| q.quality() == Some(QueryQuality::LowValue))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    MissingField { path: String },
    UnknownField { path: String },
    RenamedField { path: String, found: String, expected: String },
    WrongType { path: String, expected: String },
    InvalidTurnId { turn_id: u32 },
    NonIncreasingTurnId { turn_id: u32, previous: u32 },
    EmptyTurnText { turn_id: u32 },
    DanglingTriggerTurn { turn_id: u32 },
    InvalidEnum { field: String, value: String },
    LowValueWithUrgency { turn_id: u32 },
    CalendarOrder { user: String, title: String },
    EmptyDatasetId,
}

impl Violation {
    /// Shorthand constructor used throughout the tests.
    #[allow(non_snake_case)]
    pub fn DanglingTriggerTurn(turn_id: u32) -> Self {
        Violation::DanglingTriggerTurn { turn_id }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingField { path } => write!(f, "missing field `{path}`"),
            Violation::UnknownField { path } => write!(f, "unknown field `{path}`"),
            Violation::RenamedField { path, found, expected } => {
                write!(f, "field `{found}` at `{path}` should be `{expected}`")
            }
            Violation::WrongType { path, expected } => write!(f, "`{path}` should be {expected}"),
            Violation::InvalidTurnId { turn_id } => write!(f, "turn_id {turn_id} is not >= 1"),
            Violation::NonIncreasingTurnId { turn_id, previous } => {
                write!(f, "turn_id {turn_id} does not increase after {previous}")
            }
            Violation::EmptyTurnText { turn_id } => write!(f, "turn {turn_id} has empty text"),
            Violation::DanglingTriggerTurn { turn_id } => {
                write!(f, "trigger_turn_id {turn_id} is not in the transcript")
            }
            Violation::InvalidEnum { field, value } => {
                write!(f, "`{value}` is not a valid value for `{field}`")
            }
            Violation::LowValueWithUrgency { turn_id } => {
                write!(f, "LOW_VALUE query at turn {turn_id} has urgency other than NONE")
            }
            Violation::CalendarOrder { user, title } => {
                write!(f, "{user} calendar event `{title}` ends before it starts")
            }
            Violation::EmptyDatasetId => f.write_str("dataset_id is empty"),
        }
    }
}

/// Semantic checks on a typed record. An empty list means the record is valid.
pub fn validate_dataset(record: &DatasetRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if record.dataset_id.trim().is_empty() {
        out.push(Violation::EmptyDatasetId);
    }

    let mut previous: Option<u32> = None;
    for turn in &record.conversation_transcript {
        if turn.turn_id == 0 {
            out.push(Violation::InvalidTurnId { turn_id: 0 });
        }
        if let Some(prev) = previous {
            if turn.turn_id <= prev {
                out.push(Violation::NonIncreasingTurnId {
                    turn_id: turn.turn_id,
                    previous: prev,
                });
            }
        }
        if turn.text.trim().is_empty() {
            out.push(Violation::EmptyTurnText { turn_id: turn.turn_id });
        }
        previous = Some(turn.turn_id);
    }

    let ids: BTreeSet<u32> = record.conversation_transcript.iter().map(|t| t.turn_id).collect();
    for res in &record.ground_truth_resolutions {
        if !ids.contains(&res.trigger_turn_id) {
            out.push(Violation::DanglingTriggerTurn { turn_id: res.trigger_turn_id });
        }
    }
    for q in &record.required_protocol_queries {
        if !ids.contains(&q.trigger_turn_id) {
            out.push(Violation::DanglingTriggerTurn { turn_id: q.trigger_turn_id });
        }
        let quality = q.quality();
        if quality.is_none() {
            out.push(Violation::InvalidEnum {
                field: "query_quality_check".into(),
                value: q.query_quality_check.clone(),
            });
        }
        let urgency = q.urgency();
        if urgency.is_none() {
            out.push(Violation::InvalidEnum {
                field: "urgency".into(),
                value: q.protocol_payload.urgency.clone(),
            });
        }
        if quality == Some(QueryQuality::LowValue) && matches!(urgency, Some(u) if u != Urgency::None) {
            out.push(Violation::LowValueWithUrgency { turn_id: q.trigger_turn_id });
        }
    }

    for (user, snap) in [
        ("user_a", &record.mobile_context_snapshot.user_a),
        ("user_b", &record.mobile_context_snapshot.user_b),
    ] {
        for ev in &snap.calendar {
            if ev.start > ev.end {
                out.push(Violation::CalendarOrder {
                    user: user.into(),
                    title: ev.title.clone(),
                });
            }
        }
    }
    out
}

struct Shape {
    required: &'static [&'static str],
    optional: &'static [&'static str],
}

const ROOT: Shape = Shape {
    required: &[
        "dataset_id",
        "backstory",
        "mobile_context_snapshot",
        "conversation_transcript",
        "ground_truth_resolutions",
        "required_protocol_queries",
    ],
    optional: &[],
};
const BACKSTORY: Shape = Shape { required: &["summary", "relationship"], optional: &[] };
const SNAPSHOT_PAIR: Shape = Shape { required: &["user_a", "user_b"], optional: &[] };
const SNAPSHOT: Shape = Shape {
    required: &["location_semantic"],
    optional: &["gps_coords", "wifi_ssid", "calendar", "calendar_next", "aux_logs"],
};
const EVENT: Shape = Shape { required: &["title", "start", "end"], optional: &["location"] };
const TURN: Shape = Shape { required: &["turn_id", "speaker", "text"], optional: &["start_time"] };
const RESOLUTION: Shape = Shape {
    required: &["trigger_turn_id", "ambiguous_phrase", "resolved_entity", "resolution_source"],
    optional: &[],
};
const QUERY: Shape = Shape {
    required: &[
        "trigger_turn_id",
        "query_quality_check",
        "protocol_payload",
        "natural_language_fallback",
    ],
    optional: &["reason"],
};
const PAYLOAD: Shape = Shape {
    required: &["intent", "target_slot", "urgency"],
    optional: &["context_ref", "target_attribute"],
};

fn check_shape(value: &Value, path: &str, shape: &Shape, out: &mut Vec<Violation>) -> bool {
    let Some(obj) = value.as_object() else {
        out.push(Violation::WrongType { path: path.to_string(), expected: "an object".into() });
        return false;
    };
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    let mut missing: Vec<&str> = shape
        .required
        .iter()
        .copied()
        .filter(|k| !obj.contains_key(*k))
        .collect();
    // `target_attribute` is an accepted spelling of `target_slot`.
    if missing == ["target_slot"] && obj.contains_key("target_attribute") {
        missing.clear();
    }
    let unknown: Vec<&String> = obj
        .keys()
        .filter(|k| !shape.required.contains(&k.as_str()) && !shape.optional.contains(&k.as_str()))
        .collect();
    if missing.len() == 1 && unknown.len() == 1 {
        out.push(Violation::RenamedField {
            path: path.to_string(),
            found: unknown[0].clone(),
            expected: missing[0].to_string(),
        });
        return false;
    }
    out.extend(missing.iter().map(|k| Violation::MissingField { path: join(k) }));
    out.extend(unknown.iter().map(|k| Violation::UnknownField { path: join(k) }));
    true
}

fn check_array(value: Option<&Value>, path: &str, shape: &Shape, out: &mut Vec<Violation>) {
    let Some(value) = value else { return };
    let Some(items) = value.as_array() else {
        out.push(Violation::WrongType { path: path.to_string(), expected: "an array".into() });
        return;
    };
    for (i, item) in items.iter().enumerate() {
        let p = format!("{path}[{i}]");
        if check_shape(item, &p, shape, out) && std::ptr::eq(shape, &QUERY) {
            if let Some(payload) = item.get("protocol_payload") {
                check_shape(payload, &format!("{p}.protocol_payload"), &PAYLOAD, out);
            }
        }
    }
}

/// Structural check on raw JSON: reports missing, unknown and renamed fields by path.
pub fn schema_violations(value: &Value) -> Vec<Violation> {
    let mut out = Vec::new();
    if !check_shape(value, "", &ROOT, &mut out) {
        return out;
    }
    if let Some(b) = value.get("backstory") {
        check_shape(b, "backstory", &BACKSTORY, &mut out);
    }
    if let Some(snap) = value.get("mobile_context_snapshot") {
        if check_shape(snap, "mobile_context_snapshot", &SNAPSHOT_PAIR, &mut out) {
            for user in ["user_a", "user_b"] {
                let Some(u) = snap.get(user) else { continue };
                let path = format!("mobile_context_snapshot.{user}");
                if check_shape(u, &path, &SNAPSHOT, &mut out) {
                    let cal = u.get("calendar").or_else(|| u.get("calendar_next"));
                    check_array(cal, &format!("{path}.calendar"), &EVENT, &mut out);
                }
            }
        }
    }
    check_array(value.get("conversation_transcript"), "conversation_transcript", &TURN, &mut out);
    check_array(
        value.get("ground_truth_resolutions"),
        "ground_truth_resolutions",
        &RESOLUTION,
        &mut out,
    );
    check_array(
        value.get("required_protocol_queries"),
        "required_protocol_queries",
        &QUERY,
        &mut out,
    );
    out
}

/// Maps free-form backstory relationship labels onto trust levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMapping {
    labels: BTreeMap<String, RelationshipLevel>,
}

impl Default for LevelMapping {
    fn default() -> Self {
        use RelationshipLevel::*;
        let pairs = [
            ("doctor", L3),
            ("patient", L3),
            ("lawyer", L3),
            ("manager", L3),
            ("employee", L3),
            ("client", L3),
            ("developer", L3),
            ("teacher", L3),
            ("student", L3),
            ("ta", L3),
            ("colleague", L2),
            ("friend", L2),
            ("housemate", L2),
            ("roommate", L2),
            ("spouse", L1),
            ("partner", L1),
            ("family", L1),
            ("parent", L1),
            ("sibling", L1),
        ];
        LevelMapping {
            labels: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

impl LevelMapping {
    pub fn insert(&mut self, label: &str, level: RelationshipLevel) {
        self.labels.insert(normalize_label(label), level);
    }

    /// Looks the label up; multi-part labels such as `Doctor-Patient` use the
    /// most restrictive level among their known parts.
    pub fn level_for(&self, label: &str) -> Option<RelationshipLevel> {
        if let Some(&level) = self.labels.get(&normalize_label(label)) {
            return Some(level);
        }
        label
            .split(|c: char| !c.is_alphanumeric())
            .filter(|p| !p.is_empty())
            .filter_map(|p| self.labels.get(&normalize_label(p)).copied())
            .min()
    }
}

fn normalize_label(label: &str) -> String {
    let l = label.trim().to_lowercase();
    l.strip_suffix('s').filter(|s| s.len() > 2).map(str::to_string).unwrap_or(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn minimal() -> Value {
        json!({
            "dataset_id": "scenario_protocol_test",
            "backstory": {"summary": "s", "relationship": "Doctor"},
            "mobile_context_snapshot": {
                "user_a": {"location_semantic": "Clinic"},
                "user_b": {"location_semantic": "Clinic"}
            },
            "conversation_transcript": [
                {"turn_id": 1, "speaker": "User A", "text": "Hi."},
                {"turn_id": 2, "speaker": "User B", "text": "Hello."}
            ],
            "ground_truth_resolutions": [],
            "required_protocol_queries": [{
                "trigger_turn_id": 2,
                "query_quality_check": "HIGH_VALUE",
                "protocol_payload": {"intent": "RESOLVE_MISSING_ENTITY", "target_slot": "X", "urgency": "ROUTINE"},
                "natural_language_fallback": "f"
            }]
        })
    }

    fn typed(v: Value) -> DatasetRecord {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn minimal_record_is_clean() {
        let v = minimal();
        assert!(schema_violations(&v).is_empty());
        assert!(validate_dataset(&typed(v)).is_empty());
    }

    #[test]
    fn dangling_resolution_trigger() {
        let mut v = minimal();
        v["ground_truth_resolutions"] = json!([{
            "trigger_turn_id": 999, "ambiguous_phrase": "p", "resolved_entity": "e", "resolution_source": "s"
        }]);
        assert_eq!(validate_dataset(&typed(v)), vec![Violation::DanglingTriggerTurn(999)]);
    }

    #[test]
    fn out_of_vocabulary_urgency() {
        let mut v = minimal();
        v["required_protocol_queries"][0]["protocol_payload"]["urgency"] = json!("SOMEDAY");
        let violations = validate_dataset(&typed(v));
        assert_eq!(
            violations,
            vec![Violation::InvalidEnum { field: "urgency".into(), value: "SOMEDAY".into() }]
        );
    }

    #[test]
    fn renamed_field_is_one_violation() {
        let mut v = minimal();
        let obj = v.as_object_mut().unwrap();
        let turns = obj.remove("conversation_transcript").unwrap();
        obj.insert("transcript".into(), turns);
        let violations = schema_violations(&v);
        assert_eq!(violations.len(), 1);
        assert!(matches!(&violations[0], Violation::RenamedField { found, expected, .. }
            if found == "transcript" && expected == "conversation_transcript"));
    }

    #[test]
    fn nested_renamed_field_names_path() {
        let mut v = minimal();
        let payload = v["required_protocol_queries"][0]["protocol_payload"].as_object_mut().unwrap();
        let u = payload.remove("urgency").unwrap();
        payload.insert("urgncy".into(), u);
        let violations = schema_violations(&v);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].to_string().contains("required_protocol_queries[0].protocol_payload"));
    }

    #[test]
    fn low_value_must_not_be_urgent() {
        let mut v = minimal();
        v["required_protocol_queries"][0]["query_quality_check"] = json!("LOW_VALUE");
        assert_eq!(
            validate_dataset(&typed(v)),
            vec![Violation::LowValueWithUrgency { turn_id: 2 }]
        );
    }

    #[test]
    fn label_mapping() {
        let m = LevelMapping::default();
        assert_eq!(m.level_for("Doctor"), Some(RelationshipLevel::L3));
        assert_eq!(m.level_for("Housemates"), Some(RelationshipLevel::L2));
        assert_eq!(m.level_for("Spouse"), Some(RelationshipLevel::L1));
        assert_eq!(m.level_for("Doctor-Patient"), Some(RelationshipLevel::L3));
        assert_eq!(m.level_for("Stranger"), None);
    }
}
