//! Shared inputs for the pipeline benchmarks.

use concord_core::harness::parse_dataset;
use concord_core::protocol::{Message, QueryRequest, QueryResponse, ResponseStatus};
use concord_core::{DatasetRecord, ProtocolQuery, QueryQuality, Urgency};

const DOCTOR: &str = include_str!("../../core/fixtures/doctor_patient.json");

pub fn doctor() -> DatasetRecord {
    parse_dataset(DOCTOR).expect("bundled fixture parses")
}

/// A query and an answer, the two shapes that cross the channel.
pub fn messages() -> [Message; 2] {
    let q = ProtocolQuery {
        trigger_turn_id: 44,
        intent: concord_core::RESOLVE_MISSING_ENTITY.into(),
        target_slot: "LOCATION_DESTINATION".into(),
        urgency: Urgency::Immediate,
        quality: QueryQuality::HighValue,
        natural_language_fallback: "Requesting MRI center name from Turn 44.".into(),
    };
    let mut answer = QueryResponse::new("UserA-0001", ResponseStatus::Answered, 442.0);
    answer.content = Some("Medical Imaging Center, West Campus, Austin".into());
    [
        Message::Query(QueryRequest::from_query("UserA-0001".into(), "scenario_protocol_doctor_patient".into(), &q, 440.0)),
        Message::Response(answer),
    ]
}
