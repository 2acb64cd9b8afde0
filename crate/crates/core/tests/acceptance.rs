//! Acceptance checks. Each criterion prints one PASS/FAIL line; the target
//! fails if any criterion fails.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use concord_core::disclosure::{decide, matrix_decide, ApprovalSignal, DisclosureRequest};
use concord_core::gaps::detect_gaps;
use concord_core::harness::{exposures, generate_fixture, load_dataset, run_episode, EngineConfig, TEMPLATES};
use concord_core::model::{
    one_sided_view, DisclosureOutcome, ProtocolQuery, QueryQuality, RelationshipLevel, Role, Sensitivity, Turn,
    Urgency,
};
use concord_core::pipeline::{analyze, AgentConfig};
use concord_core::protocol::{
    decode, decode_with, encode, ApprovalPolicy, Channel, ChannelConfig, DeclineReason, DecodeMode, Message,
    QueryRequest, QueryResponse, ResponseStatus,
};
use concord_core::relationship::{assess_level, assess_window, MarkerCounts, RelationshipAssessment, Thresholds};
use concord_core::resolver::{default_clock, extract_mentions, reference_clock, resolve_local, ReferenceWindow};
use concord_core::speaker_gate::{calibrate_threshold, segment_windows, synthetic_scores, GateConfig};
use concord_core::{DatasetRecord, Lexicons};

type Check = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn doctor() -> DatasetRecord {
    load_dataset(fixtures_dir().join("doctor_patient.json")).expect("bundled fixture loads")
}

fn assessment(level: RelationshipLevel) -> RelationshipAssessment {
    RelationshipAssessment { level, counts: MarkerCounts::default(), evidence: vec![], locked: false }
}

fn query(slot: &str) -> ProtocolQuery {
    ProtocolQuery {
        trigger_turn_id: 1,
        intent: "RESOLVE_MISSING_ENTITY".into(),
        target_slot: slot.into(),
        urgency: Urgency::Routine,
        quality: QueryQuality::HighValue,
        natural_language_fallback: String::new(),
    }
}

fn request(s: Sensitivity, level: RelationshipLevel, intent: bool) -> DisclosureRequest {
    DisclosureRequest {
        query: query("LOCATION_DESTINATION"),
        candidate_answer: "Room 4B".into(),
        sensitivity: s,
        relationship: assessment(level),
        intent_elevated: intent,
    }
}

/// Permissiveness order of outcomes.
fn rank(o: &DisclosureOutcome) -> u8 {
    match o {
        DisclosureOutcome::DirectReveal => 4,
        DisclosureOutcome::PartialReveal { .. } => 3,
        DisclosureOutcome::ApprovalLoop => 2,
        DisclosureOutcome::Suppress => 1,
        DisclosureOutcome::Abort => 0,
    }
}

fn policy_matrix() -> Check {
    use DisclosureOutcome::*;
    use RelationshipLevel::*;
    use Sensitivity::*;
    let start = Instant::now();
    // rows: L1, L2, L3; columns: Low, Mid, High
    let table = [
        (L1, [DirectReveal, DirectReveal, DirectReveal]),
        (L2, [DirectReveal, ApprovalLoop, Suppress]),
        (L3, [ApprovalLoop, Suppress, Suppress]),
    ];
    let lex = Lexicons::default();
    let mut cells = 0;
    for (level, row) in table {
        for (s, expected) in [Low, Mid, High].into_iter().zip(row) {
            let got = matrix_decide(s, level).map_err(|e| e.to_string())?;
            ensure(got == expected, format!("({level:?}, {s:?}) gave {got:?}, expected {expected:?}"))?;
            let trace = decide(&request(s, level, false), None, &lex);
            ensure(trace.matrix.as_ref() == Some(&expected), format!("decide disagrees at ({level:?}, {s:?})"))?;
            cells += 1;
        }
        let trace = decide(&request(Critical, level, false), Some(ApprovalSignal::Granted), &lex);
        ensure(trace.outcome == Abort, format!("(Critical, {level:?}) gave {:?}", trace.outcome))?;
        cells += 1;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!("{cells} cells in {took:?}"))
}

fn hard_lock_dominance() -> Check {
    let lex = Lexicons::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let answers = ["Room 4B", "my password is hunter2", "8 AM", "diagnosis pending", "card 4111 1111 1111 1111"];
    let mut violations = 0;
    let n = 2000;
    for _ in 0..n {
        let level = *RelationshipLevel::ALL.choose(&mut rng).unwrap();
        let approval = *[None, Some(ApprovalSignal::Granted), Some(ApprovalSignal::Denied)].choose(&mut rng).unwrap();
        let mut r = request(Sensitivity::Critical, level, rng.random_bool(0.5));
        r.candidate_answer = answers.choose(&mut rng).unwrap().to_string();
        r.relationship.locked = rng.random_bool(0.3);
        let trace = decide(&r, approval, &lex);
        if trace.outcome != DisclosureOutcome::Abort || trace.matrix.is_some() {
            violations += 1;
        }
    }
    ensure(violations == 0, format!("{violations} of {n} critical requests were not aborted"))?;
    Ok(format!("{n} randomized critical requests, 0 violations"))
}

fn safety_bias() -> Check {
    let t = Thresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 5000;
    let (mut increased, mut single_l1) = (0, 0);
    for _ in 0..n {
        let c = MarkerCounts {
            honorifics: rng.random_range(0..3),
            distancing_modals: rng.random_range(0..3),
            endearments_relational: rng.random_range(0..3),
            first_name_address: rng.random_range(0..3),
            collective_pronouns: rng.random_range(0..4),
            implicit_refs: rng.random_range(0..6),
            explicit_refs: rng.random_range(0..6),
            private_space_refs: rng.random_range(0..3),
        };
        let before = assess_level(&c, &t).0.trust_rank();
        for more in [
            MarkerCounts { honorifics: c.honorifics + 1, ..c },
            MarkerCounts { distancing_modals: c.distancing_modals + 1, ..c },
        ] {
            if assess_level(&more, &t).0.trust_rank() > before {
                increased += 1;
            }
        }
        // exactly one intimacy cue type, nothing else intimate
        let single = match rng.random_range(0..4) {
            0 => MarkerCounts { endearments_relational: rng.random_range(1..5), ..Default::default() },
            1 => MarkerCounts { private_space_refs: rng.random_range(1..5), ..Default::default() },
            2 => MarkerCounts { collective_pronouns: rng.random_range(2..6), ..Default::default() },
            _ => MarkerCounts { implicit_refs: rng.random_range(1..6), ..Default::default() },
        };
        let single = MarkerCounts { first_name_address: rng.random_range(0..2), ..single };
        if assess_level(&single, &t).0 == RelationshipLevel::L1 {
            single_l1 += 1;
        }
    }
    ensure(increased == 0, format!("{increased} distance additions raised trust"))?;
    ensure(single_l1 == 0, format!("{single_l1} single-cue windows reached L1"))?;
    Ok(format!("{n} randomized marker sets, 0 violations"))
}

fn elevation_monotonicity() -> Check {
    let lex = Lexicons::default();
    let mut pairs = 0;
    for s in Sensitivity::ALL {
        for level in RelationshipLevel::ALL {
            let plain = decide(&request(s, level, false), None, &lex);
            let elevated = decide(&request(s, level, true), None, &lex);
            let pre = |t: &concord_core::disclosure::DecisionTrace| t.matrix.clone().unwrap_or(DisclosureOutcome::Abort);
            ensure(
                rank(&pre(&elevated)) <= rank(&pre(&plain)),
                format!("({s:?}, {level:?}) elevated {:?} beats {:?}", pre(&elevated), pre(&plain)),
            )?;
            for approval in [None, Some(ApprovalSignal::Granted), Some(ApprovalSignal::Denied)] {
                let a = decide(&request(s, level, false), approval, &lex).outcome;
                let b = decide(&request(s, level, true), approval, &lex).outcome;
                ensure(rank(&b) <= rank(&a), format!("({s:?}, {level:?}, {approval:?}) elevated {b:?} beats {a:?}"))?;
            }
            pairs += 1;
        }
    }
    Ok(format!("{pairs} (grade, level) pairs"))
}

/// Smallest threshold over every observed score and 0 whose FPR, counted
/// directly, stays within target.
fn scan_oracle(impostors: &[f64], genuine: &[f64], target: f64) -> f64 {
    let mut candidates: Vec<f64> = impostors.iter().chain(genuine).copied().chain([0.0]).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    for t in candidates {
        let fp = impostors.iter().filter(|&&s| s > t).count();
        if fp as f64 / impostors.len() as f64 <= target {
            return t;
        }
    }
    f64::INFINITY
}

fn calibration() -> Check {
    let (imp, gen) = synthetic_scores(5000, 5000, 21);
    let start = Instant::now();
    let cal = calibrate_threshold(&imp, &gen, 0.01).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let oracle = scan_oracle(&imp, &gen, 0.01);
    ensure(cal.threshold == oracle, format!("threshold {} vs oracle {oracle}", cal.threshold))?;
    let (held_imp, _) = synthetic_scores(5000, 0, 22);
    let held_fpr = held_imp.iter().filter(|&&s| s > cal.threshold).count() as f64 / held_imp.len() as f64;
    ensure(held_fpr <= 0.012, format!("held-out FPR {held_fpr}"))?;
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!("threshold {:.4} = oracle, held-out FPR {held_fpr:.4}, {took:?}", cal.threshold))
}

fn segmentation() -> Check {
    let cfg = GateConfig::default();
    let w = segment_windows(10.0, &cfg).map_err(|e| e.to_string())?;
    let expected = vec![(0.0, 2.0), (1.5, 3.5), (3.0, 5.0), (4.5, 6.5), (6.0, 8.0), (7.5, 9.5), (8.0, 10.0)];
    ensure(w == expected, format!("got {w:?}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let d: f64 = rng.random_range(2.0..120.0);
        let w = segment_windows(d, &cfg).map_err(|e| e.to_string())?;
        ensure(w[0].0 == 0.0 && (w.last().unwrap().1 - d).abs() < 1e-9, format!("{d}: ends not covered"))?;
        for pair in w.windows(2) {
            ensure(pair[1].0 <= pair[0].1 + 1e-9, format!("{d}: hole between {pair:?}"))?;
        }
        // the anchored tail may overlap more; every regular neighbour overlaps by exactly 0.5
        for pair in w[..w.len() - 1].windows(2) {
            ensure((pair[0].1 - pair[1].0 - 0.5).abs() < 1e-9, format!("{d}: overlap {pair:?}"))?;
        }
    }
    Ok("10 s split matches; 100 random durations covered".into())
}

/// Required attributes per category, written out independently.
fn required(category: &str) -> BTreeSet<&'static str> {
    match category {
        "Medical" => ["name", "dosage", "frequency"].into(),
        "Temporal" => ["anchored_datetime_or_event"].into(),
        "Spatial" => ["building_floor_or_room"].into(),
        _ => ["identifying_attribute"].into(),
    }
}

fn bundled_fixtures() -> Vec<(String, DatasetRecord)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(fixtures_dir())
        .expect("fixtures directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), load_dataset(&p).expect("fixture loads")))
        .collect()
}

fn gap_oracle() -> Check {
    let lex = Lexicons::default();
    let mut windows = 0;
    let fixtures = bundled_fixtures();
    for (name, record) in &fixtures {
        for role in [Role::UserA, Role::UserB] {
            let view = one_sided_view(&record.conversation_transcript, role).map_err(|e| e.to_string())?;
            let snap = record.mobile_context_snapshot.for_role(role);
            let clock = reference_clock(snap).unwrap_or_else(default_clock);
            for turn in &view.turns {
                let window = ReferenceWindow::at(&view, turn.turn_id).unwrap();
                let mentions = extract_mentions(&window, &lex);
                let resolutions: Vec<_> =
                    mentions.iter().filter_map(|m| resolve_local(m, &window, snap, clock, role, &lex)).collect();
                let got: BTreeSet<_> = detect_gaps(&window, &mentions, &resolutions)
                    .into_iter()
                    .map(|g| (g.mention.turn_id, g.mention.span, g.missing_attributes.into_iter().collect::<Vec<_>>()))
                    .collect();
                let mut oracle = BTreeSet::new();
                for m in &mentions {
                    if m.turn_id != turn.turn_id {
                        continue;
                    }
                    let resolved = resolutions.iter().any(|r| r.trigger_turn_id == m.turn_id && r.ambiguous_phrase == m.surface);
                    let missing: Vec<String> = required(&m.category.to_string())
                        .into_iter()
                        .filter(|a| !m.attributes.contains_key(*a))
                        .map(String::from)
                        .collect();
                    if !resolved && !missing.is_empty() {
                        oracle.insert((m.turn_id, m.span, missing));
                    }
                }
                ensure(got == oracle, format!("{name} {role} turn {}: {got:?} vs {oracle:?}", turn.turn_id))?;
                windows += 1;
            }
        }
    }

    let record = doctor();
    let cfg = |clock| AgentConfig { lex: &lex, thresholds: Thresholds::default(), clock };
    let mut dispatched = BTreeSet::new();
    for role in [Role::UserA, Role::UserB] {
        let view = one_sided_view(&record.conversation_transcript, role).unwrap();
        let snap = record.mobile_context_snapshot.for_role(role);
        let analysis = analyze(&view, snap, &cfg(reference_clock(snap).unwrap_or_else(default_clock)));
        dispatched.extend(analysis.dispatchable().map(|q| q.query.trigger_turn_id));
    }
    let high: Vec<u32> = record.high_value_queries().map(|q| q.trigger_turn_id).collect();
    let low: Vec<u32> = record.low_value_queries().map(|q| q.trigger_turn_id).collect();
    let matched = high.iter().filter(|t| dispatched.contains(t)).count();
    let at_low = low.iter().filter(|t| dispatched.contains(t)).count();
    ensure(high.len() == 8 && low.len() == 4, "gold query counts changed")?;
    ensure(matched == 8, format!("{matched}/8 gold high-value turns dispatched"))?;
    ensure(at_low == 0, format!("{at_low} dispatches at gold low-value turns"))?;
    Ok(format!("{windows} windows over {} fixtures agree; 8/8 high-value matched, 0 at low-value turns", fixtures.len()))
}

fn relationship_fixtures() -> Check {
    let lex = Lexicons::default();
    let t = Thresholds::default();
    let record = doctor();
    let mut checked = 0;
    for role in [Role::UserA, Role::UserB] {
        let view = one_sided_view(&record.conversation_transcript, role).unwrap();
        for turn in &view.turns {
            let window = ReferenceWindow::at(&view, turn.turn_id).unwrap();
            let turns: Vec<Turn> = window.turns().cloned().collect();
            let a = assess_window(&turns, &lex, &t);
            if a.counts.honorifics > 0 {
                ensure(a.level == RelationshipLevel::L3, format!("{role} turn {}: {:?} with an honorific", turn.turn_id, a.level))?;
                checked += 1;
            }
        }
    }
    ensure(checked > 0, "no window carried an honorific")?;

    let hand_built: [(&[&str], RelationshipLevel); 4] = [
        (
            &[
                "babe, did you leave your charger in our bedroom?",
                "We should grab it before we head out, love.",
                "It's on the shelf there, next to ours.",
            ],
            RelationshipLevel::L1,
        ),
        (&["Hey Sam, pizza later?", "Cool, the usual place works."], RelationshipLevel::L2),
        (&["Thanks, Jordan.", "See you at practice tomorrow."], RelationshipLevel::L2),
        (
            &["Good morning, Dr. Patel.", "Could you please send the results to Mr. Novak?"],
            RelationshipLevel::L3,
        ),
    ];
    for (texts, expected) in hand_built {
        let turns: Vec<Turn> = texts.iter().enumerate().map(|(i, s)| Turn::new(2 * i as u32 + 1, Role::UserA, *s)).collect();
        let got = assess_window(&turns, &lex, &t).level;
        ensure(got == expected, format!("{texts:?}: {got:?}, expected {expected:?}"))?;
    }
    Ok(format!("{checked} honorific windows at L3; 4/4 hand-built windows correct"))
}

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let pieces = ["Room 4B", " ", "\"quoted\"", "caf\u{e9}", "\u{1f6b2}", "\\", "line\nbreak", "8 AM", "it's", "\u{2014}"];
    (0..rng.random_range(1..6)).map(|_| *pieces.choose(rng).unwrap()).collect()
}

fn random_message(rng: &mut ChaCha8Rng, i: usize) -> Message {
    let sent_at = rng.random_range(0..10_000) as f64 / 8.0;
    if rng.random_bool(0.5) {
        let q = ProtocolQuery {
            trigger_turn_id: rng.random_range(1..500),
            intent: "RESOLVE_MISSING_ENTITY".into(),
            target_slot: ["LOCATION_DESTINATION", "APPOINTMENT_TIME", "OBJECT_DOCUMENT"].choose(rng).unwrap().to_string(),
            urgency: *[Urgency::None, Urgency::Routine, Urgency::Immediate].choose(rng).unwrap(),
            quality: QueryQuality::HighValue,
            natural_language_fallback: random_text(rng),
        };
        Message::Query(QueryRequest::from_query(format!("m{i}"), random_text(rng), &q, sent_at))
    } else {
        let status = *[
            ResponseStatus::Answered,
            ResponseStatus::Partial,
            ResponseStatus::PendingApproval,
            ResponseStatus::Declined,
            ResponseStatus::TimedOut,
        ]
        .choose(rng)
        .unwrap();
        let mut r = QueryResponse::new(format!("m{i}"), status, sent_at);
        if status.carries_content() {
            r.content = Some(random_text(rng));
        }
        r.masked = status == ResponseStatus::Partial && rng.random_bool(0.5);
        if status == ResponseStatus::Declined && rng.random_bool(0.5) {
            r.reason = Some(DeclineReason::NotFound);
        }
        Message::Response(r)
    }
}

fn codec() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for i in 0..100 {
        let m = random_message(&mut rng, i);
        let back = decode(&encode(&m)).map_err(|e| format!("message {i}: {e}"))?;
        ensure(back == m, format!("message {i} changed in round trip"))?;
    }
    let q = ProtocolQuery {
        trigger_turn_id: 44,
        intent: "RESOLVE_MISSING_ENTITY".into(),
        target_slot: "LOCATION_DESTINATION".into(),
        urgency: Urgency::Immediate,
        quality: QueryQuality::HighValue,
        natural_language_fallback: "Requesting MRI center name from Turn 44.".into(),
    };
    let turn44 = Message::Query(QueryRequest::from_query("A-0001".into(), "scenario_protocol_doctor_patient".into(), &q, 440.0));
    let canonical = r#"{"kind":"query","message_id":"A-0001","conversation_id":"scenario_protocol_doctor_patient","trigger_turn_id":44,"protocol_payload":{"intent":"RESOLVE_MISSING_ENTITY","target_slot":"LOCATION_DESTINATION","urgency":"IMMEDIATE"},"natural_language_fallback":"Requesting MRI center name from Turn 44.","sent_at":440.0}"#;
    let bytes = encode(&turn44);
    ensure(bytes == canonical.as_bytes(), format!("canonical bytes differ: {}", String::from_utf8_lossy(&bytes)))?;
    ensure(encode(&decode(&bytes).map_err(|e| e.to_string())?) == bytes, "re-encode not byte-stable")?;

    let mut renamed = 0;
    let answered = Message::Response(QueryResponse {
        content: Some("x".into()),
        ..QueryResponse::new("r1", ResponseStatus::Answered, 1.0)
    });
    let declined = Message::Response(QueryResponse::declined("r2", Some(DeclineReason::NotFound), 2.0));
    for m in [&turn44, &answered, &declined] {
        let text = String::from_utf8(encode(m)).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut keys: Vec<String> = value.as_object().unwrap().keys().cloned().collect();
        if let Some(p) = value.get("protocol_payload").and_then(|p| p.as_object()) {
            keys.extend(p.keys().cloned());
        }
        for k in keys {
            let mutated = text.replacen(&format!("\"{k}\":"), &format!("\"{k}_v2\":"), 1);
            ensure(decode(mutated.as_bytes()).is_err(), format!("strict decode accepted renamed `{k}`"))?;
            renamed += 1;
        }
    }
    ensure(decode_with(canonical.as_bytes(), DecodeMode::Lenient).is_ok(), "lenient decode failed")?;
    Ok(format!("100 random round trips; canonical bytes stable; {renamed} renamed fields rejected"))
}

fn end_to_end() -> Check {
    let record = doctor();
    let engine = EngineConfig {
        approvals: ApprovalPolicy::parse_script("44 grant\n45 grant\n").map_err(|e| e.to_string())?,
        ..Default::default()
    };
    let channel = ChannelConfig { drop_probability: 0.0, rng_seed: 7, ..Default::default() };
    let start = Instant::now();
    let trace = run_episode(&record, &engine, &channel).map_err(|e| e.to_string())?;
    let rerun = run_episode(&record, &engine, &channel).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    let a = trace.agent(Role::UserA).ok_or("no User A trace")?;
    let q44 = a
        .queries
        .iter()
        .find(|q| q.query.trigger_turn_id == 44 && q.query.target_slot == "LOCATION_DESTINATION")
        .ok_or("no Turn 44 LOCATION_DESTINATION query dispatched")?;
    let resolved = a.resolutions.iter().find(|r| r.trigger_turn_id == 44 && r.resolution_source == "A2A:UserB");
    let content = resolved.map(|r| r.resolved_entity.clone()).unwrap_or_default();
    ensure(q44.status == ResponseStatus::Answered, format!("Turn 44 query ended {:?}", q44.status))?;
    ensure(content.contains("Medical Imaging Center"), format!("Turn 44 content `{content}`"))?;
    ensure(trace.to_jsonl() == rerun.to_jsonl(), "same-seed reruns differ")?;
    ensure(took < Duration::from_secs(5), format!("two runs took {took:?}"))?;
    Ok(format!("Turn 44 resolved to \"{content}\" via A2A:UserB; reruns identical; {took:?} for two runs"))
}

fn channel_semantics() -> Check {
    let record = doctor();
    let engine = EngineConfig { approvals: ApprovalPolicy::Grant, ..Default::default() };
    let dropped = run_episode(&record, &engine, &ChannelConfig { drop_probability: 1.0, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let all: Vec<_> = dropped.agents.iter().flat_map(|a| &a.queries).collect();
    ensure(!all.is_empty(), "nothing dispatched")?;
    ensure(all.iter().all(|q| q.status == ResponseStatus::TimedOut), "a query escaped TIMED_OUT at drop 1.0")?;

    let mut ch = Channel::new(ChannelConfig { latency: 2.0, timeout: 5.0, ..Default::default() }).map_err(|e| e.to_string())?;
    ch.send(Role::UserA, Role::UserB, &Message::Response(QueryResponse::new("m", ResponseStatus::PendingApproval, 0.0)));
    let early = ch.poll(Role::UserB, 1.999).map_err(|e| e.to_string())?;
    let on_time = ch.poll(Role::UserB, 2.0).map_err(|e| e.to_string())?;
    ensure(early.is_empty() && on_time.len() == 1, "latency 2.0 not respected on the channel")?;
    let slow = run_episode(&record, &engine, &ChannelConfig { latency: 2.0, timeout: 5.0, ..Default::default() })
        .map_err(|e| e.to_string())?;
    for a in &slow.agents {
        for r in &a.responses {
            let q = a.queries.iter().find(|q| q.message_id == r.response.message_id).ok_or("response without query")?;
            ensure(r.at - q.sent_at >= 2.0, format!("{} answered after {}", q.message_id, r.at - q.sent_at))?;
        }
    }

    let lossy = ChannelConfig { drop_probability: 0.3, rng_seed: 99, ..Default::default() };
    let x = run_episode(&record, &engine, &lossy).map_err(|e| e.to_string())?;
    let y = run_episode(&record, &engine, &lossy).map_err(|e| e.to_string())?;
    ensure(x.channel_log == y.channel_log, "seeded event logs differ")?;
    Ok(format!("{} queries timed out at drop 1.0; latency respected; seeded logs identical", all.len()))
}

fn privacy_audit() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (mut withheld, mut explained) = (0, 0);
    let doctor_record = doctor();
    for i in 0..100 {
        let record = if i % 10 == 0 {
            doctor_record.clone()
        } else {
            generate_fixture(TEMPLATES.choose(&mut rng).unwrap(), rng.random_range(0..10_000)).map_err(|e| e.to_string())?
        };
        let approvals = match rng.random_range(0..4) {
            0 => ApprovalPolicy::Grant,
            1 => ApprovalPolicy::Deny,
            2 => ApprovalPolicy::Silent,
            _ => {
                let mut script = std::collections::BTreeMap::new();
                for t in 1..=record.conversation_transcript.len() as u32 {
                    match rng.random_range(0..4) {
                        0 => script.insert(t, ApprovalSignal::Granted),
                        1 => script.insert(t, ApprovalSignal::Denied),
                        _ => None,
                    };
                }
                ApprovalPolicy::Script(script)
            }
        };
        let engine = EngineConfig { approvals, ..Default::default() };
        let channel = ChannelConfig { drop_probability: rng.random_range(0.0..0.4), rng_seed: i, ..Default::default() };
        let trace = run_episode(&record, &engine, &channel).map_err(|e| e.to_string())?;
        withheld += trace
            .private
            .iter()
            .flat_map(|p| &p.decisions)
            .filter(|d| d.candidate.is_some() && !d.status.carries_content())
            .count();
        for e in exposures(&trace, &record) {
            ensure(!e.is_leak(), format!("episode {i}: withheld `{}` visible to the requester ({})", e.content, e.message_id))?;
            explained += 1;
        }
    }
    Ok(format!(
        "100 episodes, {withheld} withheld answers, 0 leaks ({explained} strings the requester already held)"
    ))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("policy matrix exhaustion", policy_matrix),
        ("hard-lock dominance", hard_lock_dominance),
        ("safety-bias monotonicity", safety_bias),
        ("elevation monotonicity", elevation_monotonicity),
        ("calibration correctness", calibration),
        ("window segmentation", segmentation),
        ("gap-detector oracle equivalence", gap_oracle),
        ("relationship fixture accuracy", relationship_fixtures),
        ("codec round-trip", codec),
        ("end-to-end episode", end_to_end),
        ("channel semantics", channel_semantics),
        ("privacy audit", privacy_audit),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: panicked", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
