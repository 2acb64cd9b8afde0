//! The two sides of a query: answering from one's own data, and folding
//! answers back into one's own annotations.
//!
//! [`Responder`] sees only the responder's transcript view and snapshot;
//! [`Requester`] sees only the requester's outstanding gaps.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::codec::{DeclineReason, QueryRequest, QueryResponse, ResponseStatus};
use crate::disclosure::{
    classify_sensitivity, decide, detect_privacy_intent, disclosed_content, ApprovalSignal, DecisionTrace,
    DisclosureRequest,
};
use crate::error::{ConcordError, Result};
use crate::gaps::{quoted_phrase, InformationGap};
use crate::lexicon::Lexicons;
use crate::mentions::mentions_in;
use crate::model::{
    DisclosureOutcome, EntityMention, MobileContextSnapshot, OneSidedTranscript, ProtocolQuery, QueryQuality,
    ResolutionRecord, Role, Turn,
};
use crate::relationship::{assess_window, RelationshipAssessment, Thresholds};
use crate::resolver::{resolve_local, ReferenceWindow, HISTORY_TURNS};

/// Owner decisions for approval-loop prompts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApprovalPolicy {
    Grant,
    Deny,
    /// The owner never answers; approval loops fail closed.
    #[default]
    Silent,
    /// Per trigger turn; unlisted turns are treated as silent.
    Script(#[serde(with = "script_entries")] BTreeMap<u32, ApprovalSignal>),
}

/// Scripts travel as `[turn, signal]` pairs. Integer map keys do not survive
/// the buffering that tagged trace lines go through.
mod script_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::disclosure::ApprovalSignal;

    pub fn serialize<S: Serializer>(map: &BTreeMap<u32, ApprovalSignal>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, ApprovalSignal>, D::Error> {
        Ok(Vec::<(u32, ApprovalSignal)>::deserialize(d)?.into_iter().collect())
    }
}

impl ApprovalPolicy {
    pub fn signal_for(&self, trigger_turn_id: u32) -> Option<ApprovalSignal> {
        match self {
            ApprovalPolicy::Grant => Some(ApprovalSignal::Granted),
            ApprovalPolicy::Deny => Some(ApprovalSignal::Denied),
            ApprovalPolicy::Silent => None,
            ApprovalPolicy::Script(map) => map.get(&trigger_turn_id).copied(),
        }
    }

    /// Parses a script: one `turn_id grant|deny` pair per line, `#` comments.
    pub fn parse_script(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConcordError::Parse { line: i + 1, column: 1, message };
            let mut parts = line.split_whitespace();
            let (Some(turn), Some(signal), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected `turn_id grant|deny`, found `{line}`")));
            };
            let turn: u32 = turn.parse().map_err(|_| err(format!("`{turn}` is not a turn id")))?;
            let signal = match signal.to_ascii_lowercase().as_str() {
                "grant" | "granted" => ApprovalSignal::Granted,
                "deny" | "denied" => ApprovalSignal::Denied,
                other => return Err(err(format!("`{other}` is neither grant nor deny"))),
            };
            map.insert(turn, signal);
        }
        Ok(ApprovalPolicy::Script(map))
    }
}

impl FromStr for ApprovalPolicy {
    type Err = ConcordError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "grant" => Ok(ApprovalPolicy::Grant),
            "deny" => Ok(ApprovalPolicy::Deny),
            "silent" | "none" => Ok(ApprovalPolicy::Silent),
            other => Err(ConcordError::InvalidConfig(format!("unknown approval policy `{other}`"))),
        }
    }
}

/// The responder's own data. Nothing here belongs to the requester.
#[derive(Debug, Clone)]
pub struct Responder<'a> {
    pub view: &'a OneSidedTranscript,
    pub snapshot: &'a MobileContextSnapshot,
    pub lex: &'a Lexicons,
    pub thresholds: Thresholds,
    pub clock: NaiveDateTime,
    pub approvals: ApprovalPolicy,
    /// Answers already refused to this peer. They stay refused whatever slot
    /// a later query asks through.
    pub withheld: BTreeSet<String>,
}

/// What the responder found and decided. Private to the responder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponderDecision {
    pub message_id: String,
    pub trigger_turn_id: u32,
    pub target_slot: String,
    pub candidate: Option<Candidate>,
    pub relationship: Option<RelationshipAssessment>,
    pub trace: Option<DecisionTrace>,
    /// Declined because the same answer was refused earlier.
    #[serde(default)]
    pub previously_withheld: bool,
    pub status: ResponseStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: String,
    pub source: String,
    pub phrase: String,
}

/// Responses to send, in order. An approval loop yields an interim
/// `PENDING_APPROVAL` followed by the final answer once the owner decides.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub pending: Option<QueryResponse>,
    pub last: QueryResponse,
    pub decision: ResponderDecision,
}

fn flip_perspective(phrase: &str) -> String {
    phrase
        .split(' ')
        .map(|w| match w {
            "your" => "my".to_string(),
            "Your" => "My".to_string(),
            "yours" => "mine".to_string(),
            "my" => "your".to_string(),
            "My" => "Your".to_string(),
            "mine" => "yours".to_string(),
            _ => w.to_string(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl Responder<'_> {
    /// The window of the last own turn at or before `turn_id`.
    fn window_up_to(&self, turn_id: u32) -> Option<ReferenceWindow> {
        let last = self.view.turns.iter().rev().find(|t| t.turn_id <= turn_id)?;
        ReferenceWindow::at(self.view, last.turn_id)
    }

    fn ground(&self, mentions: Vec<EntityMention>, window: &ReferenceWindow, slot: &str) -> Option<Candidate> {
        let categories = self.lex.slot_categories(slot);
        mentions
            .into_iter()
            .filter(|m| categories.is_empty() || categories.contains(&m.category))
            .find_map(|m| resolve_local(&m, window, self.snapshot, self.clock, self.view.owner, self.lex))
            .map(|r| Candidate { answer: r.resolved_entity, source: r.resolution_source, phrase: r.ambiguous_phrase })
    }

    /// Searches the responder's own data for an answer: the trigger turn if
    /// the responder spoke it, then the quoted phrase seen from this side,
    /// then own turns near the trigger.
    pub fn locate(&self, request: &QueryRequest) -> Option<Candidate> {
        let slot = &request.protocol_payload.target_slot;
        let trigger = request.trigger_turn_id;
        if let Some(window) = ReferenceWindow::at(self.view, trigger) {
            if let Some(c) = self.ground(mentions_in(&window.focus, self.lex), &window, slot) {
                return Some(c);
            }
        }
        if let Some(phrase) = quoted_phrase(&request.natural_language_fallback) {
            let focus = Turn::new(trigger, self.view.owner, flip_perspective(&phrase));
            let history: Vec<Turn> = self.view.turns.iter().filter(|t| t.turn_id < trigger).cloned().collect();
            let from = history.len().saturating_sub(HISTORY_TURNS);
            if let Ok(window) = ReferenceWindow::new(focus, history[from..].to_vec()) {
                if let Some(c) = self.ground(mentions_in(&window.focus, self.lex), &window, slot) {
                    return Some(c);
                }
            }
        }
        let mut near: Vec<&Turn> = self
            .view
            .turns
            .iter()
            .filter(|t| t.turn_id != trigger && t.turn_id.abs_diff(trigger) <= 2)
            .collect();
        near.sort_by_key(|t| (t.turn_id.abs_diff(trigger), t.turn_id));
        near.into_iter().find_map(|t| {
            let window = ReferenceWindow::at(self.view, t.turn_id)?;
            self.ground(mentions_in(t, self.lex), &window, slot)
        })
    }

    /// Answers a request from the responder's own data under the disclosure
    /// policy. `at` is the simulated delivery time; `approval_delay` is how
    /// long the owner takes to answer an approval prompt.
    pub fn respond(&mut self, request: &QueryRequest, at: f64, approval_delay: f64) -> Reply {
        let id = request.message_id.clone();
        let mut decision = ResponderDecision {
            message_id: id.clone(),
            trigger_turn_id: request.trigger_turn_id,
            target_slot: request.protocol_payload.target_slot.clone(),
            candidate: None,
            relationship: None,
            trace: None,
            previously_withheld: false,
            status: ResponseStatus::Declined,
        };
        let Some(candidate) = self.locate(request) else {
            return Reply { pending: None, last: QueryResponse::declined(id, Some(DeclineReason::NotFound), at), decision };
        };
        decision.candidate = Some(candidate.clone());

        let window_turns: Vec<Turn> = self
            .window_up_to(request.trigger_turn_id)
            .map(|w| w.turns().cloned().collect())
            .unwrap_or_default();
        let relationship = assess_window(&window_turns, self.lex, &self.thresholds);
        let query = ProtocolQuery {
            trigger_turn_id: request.trigger_turn_id,
            intent: request.protocol_payload.intent.clone(),
            target_slot: request.protocol_payload.target_slot.clone(),
            urgency: request.protocol_payload.urgency,
            quality: QueryQuality::HighValue,
            natural_language_fallback: request.natural_language_fallback.clone(),
        };
        let disclosure = DisclosureRequest {
            sensitivity: classify_sensitivity(&query, &candidate.answer, self.lex),
            query,
            candidate_answer: candidate.answer.clone(),
            relationship: relationship.clone(),
            intent_elevated: detect_privacy_intent(&window_turns, self.lex),
        };
        let signal = self.approvals.signal_for(request.trigger_turn_id);
        let trace = decide(&disclosure, signal, self.lex);
        let looped = trace.matrix == Some(DisclosureOutcome::ApprovalLoop);
        let final_at = if looped { at + approval_delay } else { at };

        let disclosed = disclosed_content(&candidate.answer, &trace.outcome);
        decision.previously_withheld = disclosed.is_some() && self.withheld.contains(&candidate.answer);
        let last = match disclosed.filter(|_| !decision.previously_withheld) {
            Some(content) => {
                let masked = matches!(trace.outcome, DisclosureOutcome::PartialReveal { .. });
                let status = if masked { ResponseStatus::Partial } else { ResponseStatus::Answered };
                QueryResponse { content: Some(content), masked, ..QueryResponse::new(id.clone(), status, final_at) }
            }
            None => {
                self.withheld.insert(candidate.answer.clone());
                QueryResponse::declined(id.clone(), None, final_at)
            }
        };
        decision.status = last.status;
        decision.relationship = Some(relationship);
        decision.trace = Some(trace);
        let pending = looped.then(|| QueryResponse::new(id, ResponseStatus::PendingApproval, at));
        Reply { pending, last, decision }
    }
}

/// How a requester's query ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum GapClosure {
    Resolved { resolution: ResolutionRecord, masked: bool },
    Withheld { status: ResponseStatus },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outstanding {
    pub gap: InformationGap,
    pub query: ProtocolQuery,
    pub sent_at: f64,
    /// Deadline for the next reply; an interim reply moves it.
    pub deadline: f64,
    pub closure: Option<GapClosure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeNote {
    Resolved,
    Withheld,
    Pending,
    Orphan,
    Duplicate,
}

/// The requester's side: its dispatched queries and what became of them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Requester {
    pub owner: Option<Role>,
    pub outstanding: BTreeMap<String, Outstanding>,
    pub resolutions: Vec<ResolutionRecord>,
    /// Responses that matched nothing open, by message id.
    pub ignored: Vec<(String, MergeNote)>,
}

impl Requester {
    pub fn new(owner: Role) -> Self {
        Requester { owner: Some(owner), ..Default::default() }
    }

    pub fn track(&mut self, message_id: String, gap: InformationGap, query: ProtocolQuery, sent_at: f64, timeout: f64) {
        self.outstanding.insert(
            message_id,
            Outstanding { gap, query, sent_at, deadline: sent_at + timeout, closure: None },
        );
    }

    /// Folds a response into the requester's annotations and closes the gap.
    pub fn merge_response(&mut self, response: &QueryResponse, peer: Role, timeout: f64) -> MergeNote {
        let Some(entry) = self.outstanding.get_mut(&response.message_id) else {
            log::warn!("orphan response {}", response.message_id);
            self.ignored.push((response.message_id.clone(), MergeNote::Orphan));
            return MergeNote::Orphan;
        };
        if entry.closure.is_some() {
            log::debug!("response {} for a closed gap ignored", response.message_id);
            self.ignored.push((response.message_id.clone(), MergeNote::Duplicate));
            return MergeNote::Duplicate;
        }
        match (response.status, &response.content) {
            (ResponseStatus::PendingApproval, _) => {
                entry.deadline = response.sent_at.max(entry.deadline - timeout) + timeout;
                MergeNote::Pending
            }
            (ResponseStatus::Answered | ResponseStatus::Partial, Some(content)) => {
                let resolution = ResolutionRecord {
                    trigger_turn_id: entry.gap.trigger_turn_id,
                    ambiguous_phrase: entry.gap.mention.surface.clone(),
                    resolved_entity: content.clone(),
                    resolution_source: format!("A2A:{}", peer.tag()),
                };
                self.resolutions.push(resolution.clone());
                entry.closure = Some(GapClosure::Resolved { resolution, masked: response.masked });
                MergeNote::Resolved
            }
            (status, _) => {
                entry.closure = Some(GapClosure::Withheld { status });
                MergeNote::Withheld
            }
        }
    }

    /// Closes every open query whose deadline has passed by `now`.
    pub fn expire(&mut self, now: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (id, entry) in self.outstanding.iter_mut() {
            if entry.closure.is_none() && entry.deadline <= now {
                entry.closure = Some(GapClosure::Withheld { status: ResponseStatus::TimedOut });
                out.push(id.clone());
            }
        }
        out
    }

    pub fn next_deadline(&self) -> Option<f64> {
        self.outstanding
            .values()
            .filter(|e| e.closure.is_none())
            .map(|e| e.deadline)
            .min_by(f64::total_cmp)
    }

    pub fn all_closed(&self) -> bool {
        self.outstanding.values().all(|e| e.closure.is_some())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaps::fallback_text;
    use crate::model::{CalendarEvent, Category, ReferenceForm, Urgency};
    use crate::protocol::codec::QueryRequest;
    use chrono::NaiveDate;

    fn dt(d: u32, h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2024, 6, d).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    fn doctor_side() -> (OneSidedTranscript, MobileContextSnapshot) {
        let view = OneSidedTranscript {
            owner: Role::UserB,
            turns: vec![
                Turn::new(40, Role::UserB, "Let's talk about the testing."),
                Turn::new(42, Role::UserB, "Was the appointment for 2:00 PM or later?"),
                Turn::new(44, Role::UserB, "And for the MRI, you have a slot at that center I recommended, right?"),
            ],
            masked_slots: vec![41, 43, 45],
        };
        let mut snap = MobileContextSnapshot::new("Dr. Sharma's Clinic, West Avenue, Austin");
        snap.calendar.push(CalendarEvent {
            title: "MRI referral sent for Samantha".into(),
            start: dt(10, 9, 0),
            end: dt(10, 9, 15),
            location: Some("Medical Imaging Center, West Campus, Austin".into()),
        });
        (view, snap)
    }

    fn request(slot: &str, phrase: &str, turn: u32) -> QueryRequest {
        let q = ProtocolQuery {
            trigger_turn_id: turn,
            intent: "RESOLVE_MISSING_ENTITY".into(),
            target_slot: slot.into(),
            urgency: Urgency::Immediate,
            quality: QueryQuality::HighValue,
            natural_language_fallback: fallback_text(slot, phrase, turn),
        };
        QueryRequest::from_query("A-1".into(), "c".into(), &q, 440.0)
    }

    fn responder<'a>(
        view: &'a OneSidedTranscript,
        snap: &'a MobileContextSnapshot,
        lex: &'a Lexicons,
        approvals: ApprovalPolicy,
    ) -> Responder<'a> {
        Responder {
            view,
            snapshot: snap,
            lex,
            thresholds: Thresholds::default(),
            clock: dt(12, 10, 30),
            approvals,
            withheld: BTreeSet::new(),
        }
    }

    #[test]
    fn approved_location_is_answered() {
        let lex = Lexicons::default();
        let (view, snap) = doctor_side();
        let mut r = responder(&view, &snap, &lex, ApprovalPolicy::Grant);
        let reply = r.respond(&request("LOCATION_DESTINATION", "it", 44), 441.0, 1.0);
        assert_eq!(reply.pending.as_ref().map(|p| p.status), Some(ResponseStatus::PendingApproval));
        assert_eq!(reply.last.status, ResponseStatus::Answered);
        assert_eq!(reply.last.content.as_deref(), Some("Medical Imaging Center, West Campus, Austin"));
        assert_eq!(reply.last.sent_at, 442.0);
    }

    #[test]
    fn approval_fails_closed() {
        let lex = Lexicons::default();
        let (view, snap) = doctor_side();
        for policy in [ApprovalPolicy::Deny, ApprovalPolicy::Silent] {
            let reply = responder(&view, &snap, &lex, policy).respond(&request("LOCATION_DESTINATION", "it", 44), 0.0, 1.0);
            assert_eq!(reply.last.status, ResponseStatus::Declined);
            assert_eq!(reply.last.content, None);
            assert_eq!(reply.last.reason, None);
        }
    }

    #[test]
    fn high_grade_answer_is_declined_without_reason() {
        let lex = Lexicons::default();
        let (view, mut snap) = doctor_side();
        snap.calendar[0].location = Some("Psychiatric Center, West Campus".into());
        let reply = responder(&view, &snap, &lex, ApprovalPolicy::Grant)
            .respond(&request("LOCATION_DESTINATION", "it", 44), 0.0, 1.0);
        assert_eq!(reply.last.status, ResponseStatus::Declined);
        assert_eq!(reply.last.reason, None);
        assert!(reply.pending.is_none());
    }

    #[test]
    fn refused_answer_stays_refused() {
        let lex = Lexicons::default();
        let (view, snap) = doctor_side();
        let script = ApprovalPolicy::parse_script("44 deny").unwrap();
        let mut r = responder(&view, &snap, &lex, script);
        let first = r.respond(&request("LOCATION_DESTINATION", "it", 44), 0.0, 1.0);
        assert_eq!(first.last.status, ResponseStatus::Declined);
        r.approvals = ApprovalPolicy::Grant;
        let again = r.respond(&request("LOCATION_DESTINATION", "it", 44), 5.0, 1.0);
        assert_eq!(again.last.status, ResponseStatus::Declined);
        assert!(again.decision.previously_withheld);
    }

    #[test]
    fn unknown_entity_is_not_found() {
        let lex = Lexicons::default();
        let (view, snap) = doctor_side();
        let reply = responder(&view, &snap, &lex, ApprovalPolicy::Grant)
            .respond(&request("OBJECT_EQUIPMENT", "which bike", 51), 0.0, 1.0);
        assert_eq!(reply.last.reason, Some(DeclineReason::NotFound));
        assert!(reply.decision.candidate.is_none());
    }

    fn gap(turn: u32) -> InformationGap {
        let mention = EntityMention {
            turn_id: turn,
            span: (0, 2),
            surface: "it".into(),
            category: Category::Spatial,
            form: ReferenceForm::Pronoun,
            attributes: Default::default(),
        };
        InformationGap::new(mention, ["building_floor_or_room".to_string()].into(), turn)
    }

    fn query(turn: u32) -> ProtocolQuery {
        ProtocolQuery {
            trigger_turn_id: turn,
            intent: "RESOLVE_MISSING_ENTITY".into(),
            target_slot: "APPOINTMENT_TIME".into(),
            urgency: Urgency::Immediate,
            quality: QueryQuality::HighValue,
            natural_language_fallback: String::new(),
        }
    }

    #[test]
    fn merge_records_peer_source_and_is_idempotent() {
        let mut req = Requester::new(Role::UserA);
        req.track("m1".into(), gap(44), query(44), 0.0, 5.0);
        let answer = QueryResponse { content: Some("8 AM".into()), ..QueryResponse::new("m1", ResponseStatus::Answered, 1.0) };
        assert_eq!(req.merge_response(&answer, Role::UserB, 5.0), MergeNote::Resolved);
        assert_eq!(req.resolutions[0].resolution_source, "A2A:UserB");
        assert_eq!(req.resolutions[0].resolved_entity, "8 AM");
        assert_eq!(req.merge_response(&answer, Role::UserB, 5.0), MergeNote::Duplicate);
        assert_eq!(req.resolutions.len(), 1);
        let stray = QueryResponse::declined("nope", None, 2.0);
        assert_eq!(req.merge_response(&stray, Role::UserB, 5.0), MergeNote::Orphan);
    }

    #[test]
    fn declined_and_timed_out_close_the_gap() {
        let mut req = Requester::new(Role::UserB);
        req.track("m1".into(), gap(5), query(5), 0.0, 5.0);
        req.track("m2".into(), gap(7), query(7), 0.0, 5.0);
        req.merge_response(&QueryResponse::declined("m1", None, 1.0), Role::UserA, 5.0);
        assert!(req.expire(4.9).is_empty());
        assert_eq!(req.expire(5.0), ["m2"]);
        assert!(req.all_closed());
        assert!(req.resolutions.is_empty());
    }

    #[test]
    fn pending_moves_the_deadline() {
        let mut req = Requester::new(Role::UserA);
        req.track("m1".into(), gap(44), query(44), 0.0, 5.0);
        req.merge_response(&QueryResponse::new("m1", ResponseStatus::PendingApproval, 4.0), Role::UserB, 5.0);
        assert_eq!(req.next_deadline(), Some(9.0));
    }

    #[test]
    fn approval_script() {
        let p = ApprovalPolicy::parse_script("# owner answers\n44 grant\n48 deny\n").unwrap();
        assert_eq!(p.signal_for(44), Some(ApprovalSignal::Granted));
        assert_eq!(p.signal_for(48), Some(ApprovalSignal::Denied));
        assert_eq!(p.signal_for(50), None);
        assert!(matches!(ApprovalPolicy::parse_script("44 maybe"), Err(ConcordError::Parse { line: 1, .. })));
        assert_eq!(flip_perspective("your biking group"), "my biking group");
    }
}
