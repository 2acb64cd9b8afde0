//! Assistant-to-assistant messaging: wire format, simulated channel and the
//! two agent roles.

pub mod agent;
pub mod channel;
pub mod codec;

pub use agent::{ApprovalPolicy, Candidate, GapClosure, MergeNote, Reply, Requester, Responder, ResponderDecision};
pub use channel::{Channel, ChannelConfig, ChannelEvent, EventKind};
pub use codec::{
    decode, decode_with, encode, encode_line, DeclineReason, DecodeMode, Message, ProtocolPayload, QueryRequest,
    QueryResponse, ResponseStatus,
};
