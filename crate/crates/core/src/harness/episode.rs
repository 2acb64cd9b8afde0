//! End-to-end two-agent episode over a simulated channel.

use serde::{Deserialize, Serialize};

use super::config::EngineConfig;
use crate::dataset::{validate_dataset, DatasetRecord};
use crate::error::{ConcordError, Result};
use crate::gaps::InformationGap;
use crate::lexicon::Lexicons;
use crate::model::{one_sided_view, EntityMention, ProtocolQuery, RelationshipLevel, ResolutionRecord, Role};
use crate::pipeline::{analyze, AgentConfig, Inference};
use crate::protocol::{
    Channel, ChannelConfig, ChannelEvent, GapClosure, MergeNote, Message, QueryRequest, QueryResponse, Requester,
    Responder, ResponderDecision, ResponseStatus,
};
use crate::relationship::MarkerCounts;
use crate::resolver::{default_clock, reference_clock};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLevel {
    pub turn_id: u32,
    pub level: RelationshipLevel,
    pub locked: bool,
    pub counts: MarkerCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub message_id: String,
    pub query: ProtocolQuery,
    pub inference: Inference,
    pub sent_at: f64,
    /// Terminal status as the requester saw it.
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedResponse {
    pub at: f64,
    pub response: QueryResponse,
}

/// What one agent knows and did as a requester. Holds only the owner's own
/// data and what the peer chose to send.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub owner: Role,
    pub mentions: Vec<EntityMention>,
    /// Local resolutions, then peer-supplied ones.
    pub resolutions: Vec<ResolutionRecord>,
    pub gaps: Vec<InformationGap>,
    pub relationship: Vec<WindowLevel>,
    pub queries: Vec<DispatchRecord>,
    /// Planned low-value queries that were never sent.
    pub held_back: Vec<ProtocolQuery>,
    pub responses: Vec<ReceivedResponse>,
    pub ignored: Vec<(String, MergeNote)>,
}

/// One agent's decisions as a responder. Never shown to the peer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateTrace {
    pub owner: Role,
    pub decisions: Vec<ResponderDecision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub dataset_id: String,
    pub seed: u64,
    pub engine: EngineConfig,
    pub channel: ChannelConfig,
    pub agents: Vec<AgentTrace>,
    pub private: Vec<PrivateTrace>,
    pub channel_log: Vec<ChannelEvent>,
}

/// One line of a `.jsonl` trace dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "section", rename_all = "snake_case")]
pub enum TraceLine {
    Header { dataset_id: String, seed: u64, engine: EngineConfig, channel: ChannelConfig },
    Agent(AgentTrace),
    ResponderPrivate(PrivateTrace),
    Channel(ChannelEvent),
}

impl TraceLine {
    /// Whether the line may be shown to a requester.
    pub fn requester_visible(&self) -> bool {
        !matches!(self, TraceLine::ResponderPrivate(_))
    }
}

impl EpisodeTrace {
    pub fn lines(&self) -> Vec<TraceLine> {
        let mut out = vec![TraceLine::Header {
            dataset_id: self.dataset_id.clone(),
            seed: self.seed,
            engine: self.engine.clone(),
            channel: self.channel,
        }];
        out.extend(self.agents.iter().cloned().map(TraceLine::Agent));
        out.extend(self.private.iter().cloned().map(TraceLine::ResponderPrivate));
        out.extend(self.channel_log.iter().cloned().map(TraceLine::Channel));
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for line in self.lines() {
            s.push_str(&serde_json::to_string(&line).expect("trace serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let (mut agents, mut private, mut channel_log) = (Vec::new(), Vec::new(), Vec::new());
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: TraceLine = serde_json::from_str(raw).map_err(|e| ConcordError::Parse {
                line: i + 1,
                column: e.column(),
                message: e.to_string(),
            })?;
            match line {
                TraceLine::Header { dataset_id, seed, engine, channel } => header = Some((dataset_id, seed, engine, channel)),
                TraceLine::Agent(a) => agents.push(a),
                TraceLine::ResponderPrivate(p) => private.push(p),
                TraceLine::Channel(e) => channel_log.push(e),
            }
        }
        let (dataset_id, seed, engine, channel) =
            header.ok_or_else(|| ConcordError::Parse { line: 1, column: 1, message: "trace has no header line".into() })?;
        Ok(EpisodeTrace { dataset_id, seed, engine, channel, agents, private, channel_log })
    }

    pub fn agent(&self, owner: Role) -> Option<&AgentTrace> {
        self.agents.iter().find(|a| a.owner == owner)
    }

    /// Every peer-supplied resolution, both directions.
    pub fn a2a_resolutions(&self) -> impl Iterator<Item = &ResolutionRecord> {
        self.agents.iter().flat_map(|a| a.resolutions.iter()).filter(|r| r.resolution_source.starts_with("A2A:"))
    }
}

struct Scheduled {
    at: f64,
    seq: usize,
    from: Role,
    message: Message,
}

struct Planned {
    gap: InformationGap,
    query: ProtocolQuery,
    inference: Inference,
    sent_at: f64,
}

fn observed_turn(trigger: u32, inference: Inference) -> u32 {
    match inference {
        Inference::Direct => trigger,
        Inference::AckLed { from_turn } | Inference::DemonstrativeAck { from_turn } | Inference::QuestionForward { from_turn } => {
            trigger.max(from_turn)
        }
    }
}

const ROLES: [Role; 2] = [Role::UserA, Role::UserB];

fn idx(role: Role) -> usize {
    match role {
        Role::UserA => 0,
        Role::UserB => 1,
    }
}

pub fn run_episode(record: &DatasetRecord, engine: &EngineConfig, channel: &ChannelConfig) -> Result<EpisodeTrace> {
    run_episode_with(record, engine, channel, &Lexicons::default())
}

/// Runs both agents over their one-sided views, exchanges queries over the
/// channel until every dispatched query is closed, and records the trace.
pub fn run_episode_with(
    record: &DatasetRecord,
    engine: &EngineConfig,
    channel_config: &ChannelConfig,
    lex: &Lexicons,
) -> Result<EpisodeTrace> {
    engine.check()?;
    let violations = validate_dataset(record);
    if !violations.is_empty() {
        return Err(ConcordError::Validation(violations));
    }
    let mut channel = Channel::new(*channel_config)?;
    let timeout = channel_config.timeout;

    let views = [
        one_sided_view(&record.conversation_transcript, Role::UserA)?,
        one_sided_view(&record.conversation_transcript, Role::UserB)?,
    ];
    let snapshots = ROLES.map(|r| record.mobile_context_snapshot.for_role(r));
    let clocks = snapshots.map(|s| reference_clock(s).unwrap_or_else(default_clock));
    let analyses: Vec<_> = (0..2)
        .map(|i| {
            let cfg = AgentConfig { lex, thresholds: engine.thresholds, clock: clocks[i] };
            analyze(&views[i], snapshots[i], &cfg)
        })
        .collect();
    let mut responders: Vec<Responder> = (0..2)
        .map(|i| Responder {
            view: &views[i],
            snapshot: snapshots[i],
            lex,
            thresholds: engine.thresholds,
            clock: clocks[i],
            approvals: engine.approvals.clone(),
            withheld: Default::default(),
        })
        .collect();

    let mut outbox = Vec::new();
    let mut planned: [std::collections::BTreeMap<String, Planned>; 2] = Default::default();
    let mut seq = 0;
    for role in ROLES {
        for (n, pq) in analyses[idx(role)].dispatchable().enumerate() {
            let id = format!("{}-{:04}", role.tag(), n + 1);
            let turn = observed_turn(pq.query.trigger_turn_id, pq.inference);
            let sent_at = turn as f64 * engine.turn_seconds;
            let request = QueryRequest::from_query(id.clone(), record.dataset_id.clone(), &pq.query, sent_at);
            outbox.push(Scheduled { at: sent_at, seq, from: role, message: Message::Query(request) });
            seq += 1;
            planned[idx(role)].insert(
                id,
                Planned { gap: pq.gap.clone(), query: pq.query.clone(), inference: pq.inference, sent_at },
            );
        }
    }

    let mut requesters = ROLES.map(Requester::new);
    let mut received: [Vec<ReceivedResponse>; 2] = Default::default();
    let mut decisions: [Vec<ResponderDecision>; 2] = Default::default();

    loop {
        let next_send = outbox.iter().map(|s: &Scheduled| s.at).min_by(f64::total_cmp);
        let next_deadline = requesters.iter().filter_map(Requester::next_deadline).min_by(f64::total_cmp);
        let Some(now) = [next_send, channel.next_delivery(), next_deadline].into_iter().flatten().min_by(f64::total_cmp)
        else {
            break;
        };

        let (mut due, rest): (Vec<Scheduled>, Vec<Scheduled>) = outbox.into_iter().partition(|s| s.at <= now);
        outbox = rest;
        due.sort_by(|a, b| a.at.total_cmp(&b.at).then(a.seq.cmp(&b.seq)));
        for s in due {
            if let Message::Query(q) = &s.message {
                let p = &planned[idx(s.from)][&q.message_id];
                requesters[idx(s.from)].track(q.message_id.clone(), p.gap.clone(), p.query.clone(), s.at, timeout);
            }
            channel.send(s.from, s.from.peer(), &s.message);
        }

        for role in ROLES {
            for (at, message) in channel.poll(role, now)? {
                match message {
                    Message::Query(q) => {
                        let reply = responders[idx(role)].respond(&q, at, engine.approval_delay);
                        decisions[idx(role)].push(reply.decision);
                        for r in reply.pending.into_iter().chain([reply.last]) {
                            outbox.push(Scheduled { at: r.sent_at, seq, from: role, message: Message::Response(r) });
                            seq += 1;
                        }
                    }
                    Message::Response(r) => {
                        requesters[idx(role)].merge_response(&r, role.peer(), timeout);
                        received[idx(role)].push(ReceivedResponse { at, response: r });
                    }
                }
            }
        }

        for r in requesters.iter_mut() {
            r.expire(now);
        }
    }

    let mut agents = Vec::new();
    for role in ROLES {
        let i = idx(role);
        let analysis = &analyses[i];
        let requester = &requesters[i];
        let queries = planned[i]
            .iter()
            .map(|(id, p)| {
                let closure = requester.outstanding.get(id).and_then(|o| o.closure.clone());
                let (status, content) = match closure {
                    Some(GapClosure::Resolved { resolution, masked }) => (
                        if masked { ResponseStatus::Partial } else { ResponseStatus::Answered },
                        Some(resolution.resolved_entity),
                    ),
                    Some(GapClosure::Withheld { status }) => (status, None),
                    None => (ResponseStatus::TimedOut, None),
                };
                DispatchRecord {
                    message_id: id.clone(),
                    query: p.query.clone(),
                    inference: p.inference,
                    sent_at: p.sent_at,
                    status,
                    content,
                }
            })
            .collect();
        let mut resolutions: Vec<ResolutionRecord> = analysis.resolutions().cloned().collect();
        resolutions.extend(requester.resolutions.iter().cloned());
        agents.push(AgentTrace {
            owner: role,
            mentions: analysis.turns.iter().flat_map(|t| t.mentions.iter().cloned()).collect(),
            resolutions,
            gaps: analysis.turns.iter().flat_map(|t| t.gaps.iter().cloned()).collect(),
            relationship: analysis
                .turns
                .iter()
                .map(|t| WindowLevel {
                    turn_id: t.turn_id,
                    level: t.relationship.level,
                    locked: t.relationship.locked,
                    counts: t.relationship.counts,
                })
                .collect(),
            queries,
            held_back: analysis.queries.iter().filter(|q| !q.dispatchable()).map(|q| q.query.clone()).collect(),
            responses: std::mem::take(&mut received[i]),
            ignored: requester.ignored.clone(),
        });
    }
    let private =
        ROLES.into_iter().map(|r| PrivateTrace { owner: r, decisions: std::mem::take(&mut decisions[idx(r)]) }).collect();

    Ok(EpisodeTrace {
        dataset_id: record.dataset_id.clone(),
        seed: channel_config.rng_seed,
        engine: engine.clone(),
        channel: *channel_config,
        agents,
        private,
        channel_log: channel.log().to_vec(),
    })
}
