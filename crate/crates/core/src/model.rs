//! Domain types shared by every stage of the pipeline, plus masking of a full
//! transcript into a single owner's view.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ConcordError, Result};

/// One of the two conversation participants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "User A", alias = "UserA")]
    UserA,
    #[serde(rename = "User B", alias = "UserB")]
    UserB,
}

impl Role {
    pub fn peer(self) -> Role {
        match self {
            Role::UserA => Role::UserB,
            Role::UserB => Role::UserA,
        }
    }

    /// Human label used in resolution sources, e.g. `User A GPS`.
    pub fn label(self) -> &'static str {
        match self {
            Role::UserA => "User A",
            Role::UserB => "User B",
        }
    }

    /// Compact label used on the wire, e.g. `A2A:UserB`.
    pub fn tag(self) -> &'static str {
        match self {
            Role::UserA => "UserA",
            Role::UserB => "UserB",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Role {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace([' ', '_'], "").as_str() {
            "usera" | "a" => Ok(Role::UserA),
            "userb" | "b" => Ok(Role::UserB),
            _ => Err(ConcordError::InvalidConfig(format!("unknown role `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: u32,
    pub speaker: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_time: Option<f64>,
}

impl Turn {
    pub fn new(turn_id: u32, speaker: Role, text: impl Into<String>) -> Self {
        Turn {
            turn_id,
            speaker,
            text: text.into(),
            start_time: None,
        }
    }
}

/// Checks the per-turn and ordering invariants of a transcript.
pub fn check_transcript(turns: &[Turn]) -> Result<()> {
    let mut last: Option<u32> = None;
    for turn in turns {
        if turn.turn_id == 0 {
            return Err(ConcordError::InvalidTranscript("turn_id must be >= 1".into()));
        }
        if turn.text.trim().is_empty() {
            return Err(ConcordError::InvalidTranscript(format!(
                "turn {} has empty text",
                turn.turn_id
            )));
        }
        if let Some(t) = turn.start_time {
            if !(t >= 0.0) {
                return Err(ConcordError::InvalidTranscript(format!(
                    "turn {} has negative start_time",
                    turn.turn_id
                )));
            }
        }
        if let Some(prev) = last {
            if turn.turn_id <= prev {
                return Err(ConcordError::InvalidTranscript(format!(
                    "turn_id {} does not increase after {}",
                    turn.turn_id, prev
                )));
            }
        }
        last = Some(turn.turn_id);
    }
    Ok(())
}

/// The owner's view of a conversation: only turns the owner spoke are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneSidedTranscript {
    pub owner: Role,
    pub turns: Vec<Turn>,
    pub masked_slots: Vec<u32>,
}

impl OneSidedTranscript {
    pub fn kept_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.turns.iter().map(|t| t.turn_id)
    }

    pub fn turn(&self, turn_id: u32) -> Option<&Turn> {
        self.turns
            .binary_search_by_key(&turn_id, |t| t.turn_id)
            .ok()
            .map(|i| &self.turns[i])
    }

    pub fn is_masked(&self, turn_id: u32) -> bool {
        self.masked_slots.binary_search(&turn_id).is_ok()
    }

    /// Position of `turn_id` among kept turns.
    pub fn position(&self, turn_id: u32) -> Option<usize> {
        self.turns.binary_search_by_key(&turn_id, |t| t.turn_id).ok()
    }

    /// The masked slot immediately before `turn_id` in the original ordering,
    /// if the slot right before it was masked.
    pub fn masked_before(&self, turn_id: u32) -> Option<u32> {
        let prev_kept = self
            .turns
            .iter()
            .rev()
            .map(|t| t.turn_id)
            .find(|&id| id < turn_id);
        let prev_masked = self.masked_slots.iter().rev().copied().find(|&id| id < turn_id);
        match (prev_kept, prev_masked) {
            (_, None) => None,
            (None, Some(m)) => Some(m),
            (Some(k), Some(m)) => (m > k).then_some(m),
        }
    }

    /// The masked slot immediately after `turn_id`, if the next slot was masked.
    pub fn masked_after(&self, turn_id: u32) -> Option<u32> {
        let next_kept = self.turns.iter().map(|t| t.turn_id).find(|&id| id > turn_id);
        let next_masked = self.masked_slots.iter().copied().find(|&id| id > turn_id);
        match (next_kept, next_masked) {
            (_, None) => None,
            (None, Some(m)) => Some(m),
            (Some(k), Some(m)) => (m < k).then_some(m),
        }
    }
}

/// Masks every turn not spoken by `owner`.
pub fn one_sided_view(transcript: &[Turn], owner: Role) -> Result<OneSidedTranscript> {
    if transcript.is_empty() {
        return Err(ConcordError::EmptyTranscript);
    }
    check_transcript(transcript)?;
    let (kept, masked): (Vec<&Turn>, Vec<&Turn>) =
        transcript.iter().partition(|t| t.speaker == owner);
    Ok(OneSidedTranscript {
        owner,
        turns: kept.into_iter().cloned().collect(),
        masked_slots: masked.into_iter().map(|t| t.turn_id).collect(),
    })
}

/// Re-interleaves both participants' one-sided views into the full transcript.
pub fn interleave(a: &OneSidedTranscript, b: &OneSidedTranscript) -> Result<Vec<Turn>> {
    if a.owner == b.owner {
        return Err(ConcordError::InvalidTranscript(
            "both views belong to the same owner".into(),
        ));
    }
    let mut merged: Vec<Turn> = a.turns.iter().chain(b.turns.iter()).cloned().collect();
    merged.sort_by_key(|t| t.turn_id);
    check_transcript(&merged)?;
    Ok(merged)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(ConcordError::InvalidConfig(format!(
                "coordinates ({lat}, {lon}) out of range"
            )));
        }
        Ok(GeoPoint { lat, lon })
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.lat, self.lon)
    }
}

impl FromStr for GeoPoint {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',').map(str::trim);
        let (Some(lat), Some(lon), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ConcordError::InvalidConfig(format!("bad coordinates `{s}`")));
        };
        let lat: f64 = lat
            .parse()
            .map_err(|_| ConcordError::InvalidConfig(format!("bad latitude `{lat}`")))?;
        let lon: f64 = lon
            .parse()
            .map_err(|_| ConcordError::InvalidConfig(format!("bad longitude `{lon}`")))?;
        GeoPoint::new(lat, lon)
    }
}

impl Serialize for GeoPoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeoPoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalendarEvent {
    pub title: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub key: String,
    pub value: String,
}

/// Per-user phone context used to ground references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileContextSnapshot {
    pub location_semantic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gps_coords: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wifi_ssid: Option<String>,
    #[serde(default, alias = "calendar_next", skip_serializing_if = "Vec::is_empty")]
    pub calendar: Vec<CalendarEvent>,
    #[serde(
        default,
        deserialize_with = "unique_log_names",
        skip_serializing_if = "BTreeMap::is_empty"
    )]
    pub aux_logs: BTreeMap<String, Vec<LogRecord>>,
}

impl MobileContextSnapshot {
    pub fn new(location_semantic: impl Into<String>) -> Self {
        MobileContextSnapshot {
            location_semantic: location_semantic.into(),
            gps_coords: None,
            wifi_ssid: None,
            calendar: Vec::new(),
            aux_logs: BTreeMap::new(),
        }
    }

    pub fn check(&self) -> Result<()> {
        for ev in &self.calendar {
            if ev.start > ev.end {
                return Err(ConcordError::InvalidConfig(format!(
                    "calendar event `{}` ends before it starts",
                    ev.title
                )));
            }
        }
        Ok(())
    }
}

fn unique_log_names<'de, D>(deserializer: D) -> std::result::Result<BTreeMap<String, Vec<LogRecord>>, D::Error>
where
    D: Deserializer<'de>,
{
    struct LogsVisitor;

    impl<'de> Visitor<'de> for LogsVisitor {
        type Value = BTreeMap<String, Vec<LogRecord>>;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a map of log name to records")
        }

        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = BTreeMap::new();
            while let Some((name, records)) = map.next_entry::<String, Vec<LogRecord>>()? {
                if out.insert(name.clone(), records).is_some() {
                    return Err(de::Error::custom(format!("duplicate aux log `{name}`")));
                }
            }
            Ok(out)
        }
    }

    deserializer.deserialize_map(LogsVisitor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Medical,
    Temporal,
    Spatial,
    Person,
    Object,
    Task,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Medical,
        Category::Temporal,
        Category::Spatial,
        Category::Person,
        Category::Object,
        Category::Task,
    ];
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Category {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConcordError::UnknownCategory(s.to_string()))
    }
}

/// How a mention refers to its entity. Drives which grounding rules apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceForm {
    /// `here`, `this place`, `now`
    Proximal,
    /// `there`, `that folder`, `then`
    Distal,
    /// `it`, `them`, `him`
    Pronoun,
    /// `tomorrow, 4:30 PM`, `last night`
    RelativeTime,
    /// `the trail`
    Definite,
    /// `my studio`
    OwnPossessive,
    /// `your biking group`
    PeerPossessive,
    /// `a slot`, `some Advil`
    Indefinite,
    /// `which bike`
    Interrogative,
    /// Proper names, named venues, absolute dates.
    Named,
}

impl ReferenceForm {
    pub fn is_deictic(self) -> bool {
        matches!(
            self,
            ReferenceForm::Proximal
                | ReferenceForm::Distal
                | ReferenceForm::Pronoun
                | ReferenceForm::RelativeTime
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub turn_id: u32,
    /// Character offsets `[start, end)` into the turn text.
    pub span: (usize, usize),
    pub surface: String,
    pub category: Category,
    pub form: ReferenceForm,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

impl EntityMention {
    pub fn check(&self, text: &str) -> Result<()> {
        let (start, end) = self.span;
        let len = text.chars().count();
        if start >= end || end > len {
            return Err(ConcordError::InvalidTranscript(format!(
                "span {:?} outside turn of {len} chars",
                self.span
            )));
        }
        let slice: String = text.chars().skip(start).take(end - start).collect();
        if slice != self.surface {
            return Err(ConcordError::InvalidTranscript(format!(
                "surface `{}` does not match text slice `{slice}`",
                self.surface
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ResolutionRecord {
    pub trigger_turn_id: u32,
    pub ambiguous_phrase: String,
    pub resolved_entity: String,
    pub resolution_source: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Urgency {
    None,
    Routine,
    Immediate,
}

impl Urgency {
    pub const NAMES: [&'static str; 3] = ["NONE", "ROUTINE", "IMMEDIATE"];
}

impl FromStr for Urgency {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "NONE" => Ok(Urgency::None),
            "ROUTINE" => Ok(Urgency::Routine),
            "IMMEDIATE" => Ok(Urgency::Immediate),
            _ => Err(ConcordError::Schema {
                field: "urgency".into(),
                message: format!("`{s}` is not one of {:?}", Urgency::NAMES),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QueryQuality {
    HighValue,
    LowValue,
}

impl QueryQuality {
    pub const NAMES: [&'static str; 2] = ["HIGH_VALUE", "LOW_VALUE"];
}

impl FromStr for QueryQuality {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HIGH_VALUE" => Ok(QueryQuality::HighValue),
            "LOW_VALUE" => Ok(QueryQuality::LowValue),
            _ => Err(ConcordError::Schema {
                field: "query_quality_check".into(),
                message: format!("`{s}` is not one of {:?}", QueryQuality::NAMES),
            }),
        }
    }
}

pub const RESOLVE_MISSING_ENTITY: &str = "RESOLVE_MISSING_ENTITY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolQuery {
    pub trigger_turn_id: u32,
    pub intent: String,
    pub target_slot: String,
    pub urgency: Urgency,
    pub quality: QueryQuality,
    pub natural_language_fallback: String,
}

impl ProtocolQuery {
    pub fn check(&self) -> Result<()> {
        if self.quality == QueryQuality::LowValue && self.urgency != Urgency::None {
            return Err(ConcordError::Schema {
                field: "urgency".into(),
                message: "LOW_VALUE queries must carry urgency NONE".into(),
            });
        }
        Ok(())
    }
}

/// Trust class of the interlocutor. Ordered by trust rank, so `L3 < L2 < L1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationshipLevel {
    /// Intimate
    L1,
    /// Social
    L2,
    /// Professional
    L3,
}

impl RelationshipLevel {
    pub const ALL: [RelationshipLevel; 3] =
        [RelationshipLevel::L1, RelationshipLevel::L2, RelationshipLevel::L3];

    pub fn trust_rank(self) -> u8 {
        match self {
            RelationshipLevel::L1 => 3,
            RelationshipLevel::L2 => 2,
            RelationshipLevel::L3 => 1,
        }
    }
}

impl PartialOrd for RelationshipLevel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RelationshipLevel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.trust_rank().cmp(&other.trust_rank())
    }
}

impl fmt::Display for RelationshipLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for RelationshipLevel {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L1" | "1" | "INTIMATE" => Ok(RelationshipLevel::L1),
            "L2" | "2" | "SOCIAL" => Ok(RelationshipLevel::L2),
            "L3" | "3" | "PROFESSIONAL" => Ok(RelationshipLevel::L3),
            _ => Err(ConcordError::InvalidConfig(format!("unknown relationship level `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sensitivity {
    Low,
    Mid,
    High,
    Critical,
}

impl Sensitivity {
    pub const ALL: [Sensitivity; 4] = [
        Sensitivity::Low,
        Sensitivity::Mid,
        Sensitivity::High,
        Sensitivity::Critical,
    ];

    pub fn rank(self) -> u8 {
        match self {
            Sensitivity::Low => 1,
            Sensitivity::Mid => 2,
            Sensitivity::High => 3,
            Sensitivity::Critical => 4,
        }
    }
}

impl fmt::Display for Sensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Sensitivity {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        Sensitivity::ALL
            .into_iter()
            .find(|g| g.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConcordError::InvalidConfig(format!("unknown sensitivity `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DisclosureOutcome {
    DirectReveal,
    PartialReveal { masked_spans: Vec<(usize, usize)> },
    ApprovalLoop,
    Suppress,
    Abort,
}

impl DisclosureOutcome {
    /// Builds a partial reveal; an empty span list collapses to a direct reveal.
    pub fn partial(masked_spans: Vec<(usize, usize)>) -> Self {
        if masked_spans.is_empty() {
            DisclosureOutcome::DirectReveal
        } else {
            DisclosureOutcome::PartialReveal { masked_spans }
        }
    }

    /// DirectReveal > PartialReveal > ApprovalLoop > Suppress > Abort
    pub fn permissiveness(&self) -> u8 {
        match self {
            DisclosureOutcome::DirectReveal => 5,
            DisclosureOutcome::PartialReveal { .. } => 4,
            DisclosureOutcome::ApprovalLoop => 3,
            DisclosureOutcome::Suppress => 2,
            DisclosureOutcome::Abort => 1,
        }
    }

    pub fn reveals(&self) -> bool {
        matches!(
            self,
            DisclosureOutcome::DirectReveal | DisclosureOutcome::PartialReveal { .. }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn turns(speakers: &[Role]) -> Vec<Turn> {
        speakers
            .iter()
            .enumerate()
            .map(|(i, &s)| Turn::new(i as u32 + 1, s, format!("turn {}", i + 1)))
            .collect()
    }

    #[test]
    fn empty_transcript_is_an_error() {
        assert!(matches!(
            one_sided_view(&[], Role::UserA),
            Err(ConcordError::EmptyTranscript)
        ));
    }

    #[test]
    fn single_owner_turn_is_identity() {
        let t = turns(&[Role::UserA]);
        let view = one_sided_view(&t, Role::UserA).unwrap();
        assert_eq!(view.turns, t);
        assert!(view.masked_slots.is_empty());
    }

    #[test]
    fn back_to_back_turns_are_allowed() {
        let t = turns(&[Role::UserA, Role::UserA, Role::UserB]);
        let view = one_sided_view(&t, Role::UserB).unwrap();
        assert_eq!(view.kept_ids().collect::<Vec<_>>(), vec![3]);
        assert_eq!(view.masked_slots, vec![1, 2]);
    }

    #[test]
    fn rejects_non_increasing_ids() {
        let mut t = turns(&[Role::UserA, Role::UserB]);
        t[1].turn_id = 1;
        assert!(one_sided_view(&t, Role::UserA).is_err());
    }

    #[test]
    fn non_contiguous_ids_are_fine() {
        let mut t = turns(&[Role::UserA, Role::UserB, Role::UserA]);
        t[1].turn_id = 7;
        t[2].turn_id = 12;
        let view = one_sided_view(&t, Role::UserA).unwrap();
        assert_eq!(view.masked_slots, vec![7]);
        assert_eq!(view.masked_before(12), Some(7));
        assert_eq!(view.masked_after(1), Some(7));
        assert_eq!(view.masked_before(1), None);
    }

    #[test]
    fn geo_point_parses_and_bounds() {
        let p: GeoPoint = "30.2672, -97.7431".parse().unwrap();
        assert_eq!(p.lat, 30.2672);
        assert!("91.0, 0".parse::<GeoPoint>().is_err());
        assert!("0, 181".parse::<GeoPoint>().is_err());
    }

    #[test]
    fn duplicate_aux_logs_rejected() {
        let json = r#"{"location_semantic":"x","aux_logs":{"Object Log":[],"Object Log":[]}}"#;
        assert!(serde_json::from_str::<MobileContextSnapshot>(json).is_err());
    }

    #[test]
    fn level_order_follows_trust() {
        assert!(RelationshipLevel::L3 < RelationshipLevel::L2);
        assert!(RelationshipLevel::L2 < RelationshipLevel::L1);
        assert!(Sensitivity::Low < Sensitivity::Critical);
    }

    #[test]
    fn partial_requires_spans() {
        assert_eq!(DisclosureOutcome::partial(vec![]), DisclosureOutcome::DirectReveal);
        assert!(matches!(
            DisclosureOutcome::partial(vec![(0, 3)]),
            DisclosureOutcome::PartialReveal { .. }
        ));
    }
}
