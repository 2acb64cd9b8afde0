//! Concord: one-sided transcript processing for assistant-to-assistant
//! context recovery.
//!
//! Each participant's agent sees only its owner's turns. It grounds what it
//! can from the owner's phone context, labels the rest as information gaps,
//! and asks the peer's agent, which answers only what the relationship and
//! sensitivity of the answer allow.

pub mod dataset;
pub mod disclosure;
pub mod error;
pub mod gaps;
pub mod harness;
pub mod lexicon;
pub mod mentions;
pub mod model;
pub mod pipeline;
pub mod protocol;
pub mod relationship;
pub mod resolver;
pub mod speaker_gate;
pub mod text;

pub use dataset::{validate_dataset, DatasetRecord, LevelMapping, Violation};
pub use error::{ConcordError, Result};
pub use gaps::{build_query, classify_quality, detect_gaps, required_attributes, InformationGap};
pub use lexicon::Lexicons;
pub use model::*;
pub use resolver::{extract_mentions, resolution_similarity, resolve_local, ReferenceWindow, ResolverBackend, RuleResolver};
pub use harness::{evaluate, generate_fixture, load_dataset, run_episode, EngineConfig, EpisodeTrace, EvalReport};
pub use pipeline::{analyze, AgentAnalysis, AgentConfig, PlannedQuery};
pub use protocol::{ApprovalPolicy, ChannelConfig, Message, QueryRequest, QueryResponse, ResponseStatus};
pub use relationship::{assess_window, RelationshipAssessment, Thresholds};
