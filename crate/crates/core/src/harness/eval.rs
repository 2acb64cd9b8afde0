//! Scoring an episode trace against the record's gold annotations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::episode::EpisodeTrace;
use crate::dataset::{DatasetRecord, LevelMapping};
use crate::disclosure::{matrix_decide, ApprovalSignal};
use crate::error::{ConcordError, Result};
use crate::model::{DisclosureOutcome, RelationshipLevel, ResolutionRecord, Sensitivity};
use crate::pipeline::Inference;
use crate::resolver::resolution_similarity;

/// Raw counts behind every rate in [`EvalReport`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalCounts {
    pub gold_resolutions: usize,
    pub matched_resolutions: usize,
    pub similarity_sum: f64,
    pub gold_high: usize,
    pub matched_high: usize,
    pub matched_high_turns: usize,
    pub dispatched: usize,
    pub spurious_dispatches: usize,
    pub negative_candidates: usize,
    pub dispatched_at_gold_low: usize,
    pub windows: usize,
    pub windows_correct: usize,
    pub should_withhold: usize,
    pub withheld_correctly: usize,
    pub should_reveal: usize,
    pub revealed_correctly: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotCounts {
    pub gold: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StatusCounts {
    pub dispatched: usize,
    pub answered: usize,
    pub partial: usize,
    pub declined: usize,
    pub timed_out: usize,
    pub a2a_resolutions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset_id: String,
    pub gold_level: Option<RelationshipLevel>,
    pub resolution_tpr: f64,
    pub resolution_similarity_mean: f64,
    pub gap_tpr: f64,
    /// Gold high-value queries matched on trigger turn alone.
    pub gap_turn_recall: f64,
    pub gap_fpr: f64,
    pub relationship_accuracy: f64,
    pub gate_tnr: f64,
    pub gate_tpr: f64,
    pub counts: EvalCounts,
    pub per_slot: BTreeMap<String, SlotCounts>,
    pub per_agent: BTreeMap<String, StatusCounts>,
}

/// `n / d`, or 0 when there is nothing to count.
pub fn rate(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl EvalReport {
    /// Rates recomputed from the counts alone.
    pub fn rates_from_counts(c: &EvalCounts) -> [f64; 8] {
        [
            rate(c.matched_resolutions, c.gold_resolutions),
            if c.matched_resolutions == 0 { 0.0 } else { c.similarity_sum / c.matched_resolutions as f64 },
            rate(c.matched_high, c.gold_high),
            rate(c.matched_high_turns, c.gold_high),
            rate(c.spurious_dispatches, c.negative_candidates),
            rate(c.windows_correct, c.windows),
            rate(c.withheld_correctly, c.should_withhold),
            rate(c.revealed_correctly, c.should_reveal),
        ]
    }

    pub fn rates(&self) -> [f64; 8] {
        [
            self.resolution_tpr,
            self.resolution_similarity_mean,
            self.gap_tpr,
            self.gap_turn_recall,
            self.gap_fpr,
            self.relationship_accuracy,
            self.gate_tnr,
            self.gate_tpr,
        ]
    }

    pub const RATE_NAMES: [&'static str; 8] = [
        "resolution_tpr",
        "resolution_similarity_mean",
        "gap_tpr",
        "gap_turn_recall",
        "gap_fpr",
        "relationship_accuracy",
        "gate_tnr",
        "gate_tpr",
    ];
}

/// One-to-one pairing of gold and predicted resolutions on the same turn,
/// most similar pairs first. Returns (matched pairs, similarity sum).
fn match_resolutions(gold: &[ResolutionRecord], predicted: &[&ResolutionRecord]) -> (usize, f64) {
    let mut by_turn: BTreeMap<u32, (Vec<&ResolutionRecord>, Vec<&ResolutionRecord>)> = BTreeMap::new();
    for g in gold {
        by_turn.entry(g.trigger_turn_id).or_default().0.push(g);
    }
    for p in predicted {
        by_turn.entry(p.trigger_turn_id).or_default().1.push(p);
    }
    let (mut matched, mut sum) = (0, 0.0);
    for (gs, ps) in by_turn.values() {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, g) in gs.iter().enumerate() {
            for (j, p) in ps.iter().enumerate() {
                let s = resolution_similarity(&p.resolved_entity, &g.resolved_entity).unwrap_or(0.0);
                pairs.push((s, i, j));
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let (mut used_g, mut used_p) = (BTreeSet::new(), BTreeSet::new());
        for (s, i, j) in pairs {
            if used_g.contains(&i) || used_p.contains(&j) {
                continue;
            }
            used_g.insert(i);
            used_p.insert(j);
            matched += 1;
            sum += s;
        }
    }
    (matched, sum)
}

/// The gold disclosure cell: `Some(true)` should reveal, `Some(false)` should
/// withhold, `None` is neither (an unapproved or partial path).
fn gold_reveal(sensitivity: Sensitivity, level: RelationshipLevel, approval: Option<ApprovalSignal>) -> Option<bool> {
    if sensitivity == Sensitivity::Critical {
        return Some(false);
    }
    match matrix_decide(sensitivity, level).ok()? {
        DisclosureOutcome::Suppress | DisclosureOutcome::Abort => Some(false),
        DisclosureOutcome::DirectReveal => Some(true),
        DisclosureOutcome::ApprovalLoop => (approval == Some(ApprovalSignal::Granted)).then_some(true),
        DisclosureOutcome::PartialReveal { .. } => None,
    }
}

pub fn evaluate(trace: &EpisodeTrace, record: &DatasetRecord, levels: &LevelMapping) -> Result<EvalReport> {
    if trace.dataset_id != record.dataset_id {
        return Err(ConcordError::DatasetMismatch { trace: trace.dataset_id.clone(), record: record.dataset_id.clone() });
    }
    let mut c = EvalCounts::default();

    // resolutions, deduplicated across agents
    let mut seen = BTreeSet::new();
    let predicted: Vec<&ResolutionRecord> = trace
        .agents
        .iter()
        .flat_map(|a| a.resolutions.iter())
        .filter(|r| seen.insert((r.trigger_turn_id, r.ambiguous_phrase.clone(), r.resolved_entity.clone())))
        .collect();
    c.gold_resolutions = record.ground_truth_resolutions.len();
    (c.matched_resolutions, c.similarity_sum) = match_resolutions(&record.ground_truth_resolutions, &predicted);

    // gaps
    let dispatched: BTreeSet<(u32, String)> = trace
        .agents
        .iter()
        .flat_map(|a| a.queries.iter())
        .map(|q| (q.query.trigger_turn_id, q.query.target_slot.clone()))
        .collect();
    let dispatched_turns: BTreeSet<u32> = dispatched.iter().map(|(t, _)| *t).collect();
    let gold_high: Vec<_> = record.high_value_queries().collect();
    let gold_high_turns: BTreeSet<u32> = gold_high.iter().map(|q| q.trigger_turn_id).collect();
    let gold_low_turns: BTreeSet<u32> = record.low_value_queries().map(|q| q.trigger_turn_id).collect();
    let mut per_slot: BTreeMap<String, SlotCounts> = BTreeMap::new();
    c.gold_high = gold_high.len();
    for q in &gold_high {
        let slot = &q.protocol_payload.target_slot;
        let hit = dispatched.contains(&(q.trigger_turn_id, slot.clone()));
        let entry = per_slot.entry(slot.clone()).or_default();
        entry.gold += 1;
        if hit {
            entry.matched += 1;
            c.matched_high += 1;
        }
        if dispatched_turns.contains(&q.trigger_turn_id) {
            c.matched_high_turns += 1;
        }
    }
    c.dispatched = dispatched.len();
    c.spurious_dispatches = dispatched.iter().filter(|(t, _)| !gold_high_turns.contains(t)).count();
    c.dispatched_at_gold_low = dispatched.iter().filter(|(t, _)| gold_low_turns.contains(t)).count();
    let mention_negatives = trace
        .agents
        .iter()
        .flat_map(|a| a.mentions.iter())
        .filter(|m| !gold_high_turns.contains(&m.turn_id))
        .count();
    // inferred gaps sit on turns the requester has no mentions for
    let inferred_negatives: BTreeSet<(u32, String)> = trace
        .agents
        .iter()
        .flat_map(|a| a.queries.iter())
        .filter(|q| q.inference != Inference::Direct && !gold_high_turns.contains(&q.query.trigger_turn_id))
        .map(|q| (q.query.trigger_turn_id, q.query.target_slot.clone()))
        .collect();
    c.negative_candidates = mention_negatives + inferred_negatives.len();

    // relationship and disclosure
    let gold_level = levels.level_for(&record.backstory.relationship);
    if let Some(gold) = gold_level {
        for w in trace.agents.iter().flat_map(|a| a.relationship.iter()) {
            c.windows += 1;
            if w.level == gold {
                c.windows_correct += 1;
            }
        }
        for d in trace.private.iter().flat_map(|p| p.decisions.iter()) {
            let Some(t) = &d.trace else { continue };
            let approval = trace.engine.approvals.signal_for(d.trigger_turn_id);
            match gold_reveal(t.sensitivity, gold, approval) {
                Some(false) => {
                    c.should_withhold += 1;
                    if !d.status.carries_content() {
                        c.withheld_correctly += 1;
                    }
                }
                Some(true) => {
                    c.should_reveal += 1;
                    if d.status.carries_content() {
                        c.revealed_correctly += 1;
                    }
                }
                None => {}
            }
        }
    }

    let mut per_agent = BTreeMap::new();
    for a in &trace.agents {
        let mut s = StatusCounts { dispatched: a.queries.len(), ..Default::default() };
        for q in &a.queries {
            use crate::protocol::ResponseStatus::*;
            match q.status {
                Answered => s.answered += 1,
                Partial => s.partial += 1,
                Declined => s.declined += 1,
                TimedOut | PendingApproval => s.timed_out += 1,
            }
        }
        s.a2a_resolutions = a.resolutions.iter().filter(|r| r.resolution_source.starts_with("A2A:")).count();
        per_agent.insert(a.owner.label().to_string(), s);
    }

    let [resolution_tpr, resolution_similarity_mean, gap_tpr, gap_turn_recall, gap_fpr, relationship_accuracy, gate_tnr, gate_tpr] =
        EvalReport::rates_from_counts(&c);
    Ok(EvalReport {
        dataset_id: record.dataset_id.clone(),
        gold_level,
        resolution_tpr,
        resolution_similarity_mean,
        gap_tpr,
        gap_turn_recall,
        gap_fpr,
        relationship_accuracy,
        gate_tnr,
        gate_tpr,
        counts: c,
        per_slot,
        per_agent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::EngineConfig;
    use crate::harness::episode::run_episode;
    use crate::harness::load::parse_dataset;
    use crate::protocol::{ApprovalPolicy, ChannelConfig};

    fn doctor() -> DatasetRecord {
        parse_dataset(include_str!("../../fixtures/doctor_patient.json")).unwrap()
    }

    fn empty_trace(record: &DatasetRecord) -> EpisodeTrace {
        EpisodeTrace {
            dataset_id: record.dataset_id.clone(),
            seed: 0,
            engine: EngineConfig::default(),
            channel: ChannelConfig::default(),
            agents: vec![],
            private: vec![],
            channel_log: vec![],
        }
    }

    #[test]
    fn empty_trace_scores_zero() {
        let r = doctor();
        let report = evaluate(&empty_trace(&r), &r, &LevelMapping::default()).unwrap();
        assert_eq!(report.resolution_tpr, 0.0);
        assert_eq!(report.gap_tpr, 0.0);
        assert_eq!(report.gate_tpr, 0.0);
        assert_eq!(report.counts.gold_high, 8);
    }

    #[test]
    fn mismatched_dataset_is_an_error() {
        let r = doctor();
        let mut t = empty_trace(&r);
        t.dataset_id = "other".into();
        assert!(matches!(evaluate(&t, &r, &LevelMapping::default()), Err(ConcordError::DatasetMismatch { .. })));
    }

    #[test]
    fn rates_reconcile_with_counts() {
        let r = doctor();
        let engine = EngineConfig { approvals: ApprovalPolicy::Grant, ..Default::default() };
        let trace = run_episode(&r, &engine, &ChannelConfig::default()).unwrap();
        let report = evaluate(&trace, &r, &LevelMapping::default()).unwrap();
        assert_eq!(report.rates(), EvalReport::rates_from_counts(&report.counts));
        assert!(report.rates().iter().all(|x| (0.0..=1.0).contains(x)));
        let dispatched: usize = report.per_agent.values().map(|s| s.dispatched).sum();
        assert_eq!(dispatched, trace.agents.iter().map(|a| a.queries.len()).sum::<usize>());
    }

    #[test]
    fn gold_cells() {
        use RelationshipLevel::*;
        use Sensitivity::*;
        assert_eq!(gold_reveal(Critical, L1, Some(ApprovalSignal::Granted)), Some(false));
        assert_eq!(gold_reveal(Low, L1, None), Some(true));
        assert_eq!(gold_reveal(High, L3, None), Some(false));
        assert_eq!(gold_reveal(Low, L3, Some(ApprovalSignal::Granted)), Some(true));
        assert_eq!(gold_reveal(Low, L3, None), None);
    }
}
