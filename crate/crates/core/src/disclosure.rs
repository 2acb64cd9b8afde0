//! Sensitivity grading, the hard lock, the social sharing matrix, privacy
//! intent elevation and the approval loop.

use serde::{Deserialize, Serialize};

use crate::error::{ConcordError, Result};
use crate::lexicon::Lexicons;
use crate::model::{DisclosureOutcome, ProtocolQuery, RelationshipLevel, Sensitivity, Turn};
use crate::relationship::RelationshipAssessment;
use crate::text::tokenize;

pub const REDACTED: &str = "[REDACTED]";

/// A graded span of a candidate answer, in character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedSpan {
    pub start: usize,
    pub end: usize,
    pub grade: Sensitivity,
    /// Lexicon phrase or critical class that matched.
    pub matched: String,
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Every lexicon and critical-class hit in `answer`.
pub fn graded_spans(answer: &str, lex: &Lexicons) -> Vec<GradedSpan> {
    let mut out = Vec::new();
    for (class, re) in &lex.critical {
        for m in re.find_iter(answer) {
            out.push(GradedSpan {
                start: char_offset(answer, m.start()),
                end: char_offset(answer, m.end()),
                grade: Sensitivity::Critical,
                matched: class.clone(),
            });
        }
    }
    let tokens = tokenize(answer);
    let mut i = 0;
    while i < tokens.len() {
        match lex.sensitivity.match_at(&tokens, i) {
            Some((len, grade)) => {
                out.push(GradedSpan {
                    start: tokens[i].start,
                    end: tokens[i + len - 1].end,
                    grade: *grade,
                    matched: tokens[i..i + len].iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" "),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    out.sort_by_key(|s| (s.start, s.end));
    out
}

/// Critical on any critical-class match; otherwise the highest of the slot's
/// grade and the keyword grades; Low when nothing matches.
pub fn classify_sensitivity(query: &ProtocolQuery, candidate_answer: &str, lex: &Lexicons) -> Sensitivity {
    let spans = graded_spans(candidate_answer, lex);
    let slot = lex.slot_grades.get(&query.target_slot).copied().unwrap_or(Sensitivity::Low);
    spans.iter().map(|s| s.grade).fold(slot, Sensitivity::max)
}

/// Self-censoring or abstraction cues (`I had some personal stuff`).
pub fn detect_privacy_intent(owner_turns_near: &[Turn], lex: &Lexicons) -> bool {
    owner_turns_near.iter().any(|t| lex.privacy_cues.any(&tokenize(&t.text)))
}

pub fn elevate(sensitivity: Sensitivity, intent: bool) -> Sensitivity {
    match (intent, sensitivity) {
        (false, s) => s,
        (true, Sensitivity::Low) => Sensitivity::Mid,
        (true, Sensitivity::Mid) => Sensitivity::High,
        (true, s) => s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HardLock {
    Abort,
    Proceed,
}

/// Zero tolerance for the critical class, whatever the relationship.
pub fn hard_lock(sensitivity: Sensitivity, _relationship: RelationshipLevel) -> HardLock {
    if sensitivity == Sensitivity::Critical {
        HardLock::Abort
    } else {
        HardLock::Proceed
    }
}

pub fn matrix_decide(sensitivity: Sensitivity, level: RelationshipLevel) -> Result<DisclosureOutcome> {
    use DisclosureOutcome::*;
    use RelationshipLevel::*;
    use Sensitivity::*;
    Ok(match (level, sensitivity) {
        (_, Critical) => return Err(ConcordError::OutsideMatrix(sensitivity.to_string())),
        (L1, _) => DirectReveal,
        (L2, Low) => DirectReveal,
        (L2, Mid) => ApprovalLoop,
        (L2, High) => Suppress,
        (L3, Low) => ApprovalLoop,
        (L3, Mid | High) => Suppress,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApprovalSignal {
    Granted,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisclosureRequest {
    pub query: ProtocolQuery,
    pub candidate_answer: String,
    pub sensitivity: Sensitivity,
    pub relationship: RelationshipAssessment,
    pub intent_elevated: bool,
}

/// Spans of the answer graded strictly above `decided`.
pub fn spans_above(answer: &str, decided: Sensitivity, lex: &Lexicons) -> Vec<(usize, usize)> {
    let mut spans: Vec<(usize, usize)> = graded_spans(answer, lex)
        .into_iter()
        .filter(|s| s.grade > decided)
        .map(|s| (s.start, s.end))
        .collect();
    // merge overlaps so masking is well defined
    spans.sort();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (s, e) in spans {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

fn reveal(request: &DisclosureRequest, lex: &Lexicons) -> DisclosureOutcome {
    DisclosureOutcome::partial(spans_above(&request.candidate_answer, request.sensitivity, lex))
}

pub fn finalize(
    request: &DisclosureRequest,
    matrix_outcome: &DisclosureOutcome,
    approval_signal: Option<ApprovalSignal>,
    lex: &Lexicons,
) -> DisclosureOutcome {
    if hard_lock(request.sensitivity, request.relationship.level) == HardLock::Abort {
        return DisclosureOutcome::Abort;
    }
    let outcome = match matrix_outcome {
        DisclosureOutcome::Abort => DisclosureOutcome::Abort,
        DisclosureOutcome::Suppress => DisclosureOutcome::Suppress,
        DisclosureOutcome::ApprovalLoop => match approval_signal {
            Some(ApprovalSignal::Granted) => reveal(request, lex),
            _ => DisclosureOutcome::Suppress,
        },
        DisclosureOutcome::DirectReveal | DisclosureOutcome::PartialReveal { .. } => reveal(request, lex),
    };
    if approval_signal.is_some() && *matrix_outcome != DisclosureOutcome::ApprovalLoop {
        log::debug!("approval signal ignored for outcome {matrix_outcome:?}");
    }
    outcome
}

/// The answer text a requester may see under `outcome`.
pub fn disclosed_content(answer: &str, outcome: &DisclosureOutcome) -> Option<String> {
    match outcome {
        DisclosureOutcome::DirectReveal => Some(answer.to_string()),
        DisclosureOutcome::PartialReveal { masked_spans } => Some(mask(answer, masked_spans)),
        _ => None,
    }
}

/// Replaces each character span with [`REDACTED`].
pub fn mask(text: &str, spans: &[(usize, usize)]) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for &(s, e) in spans {
        let (s, e) = (s.min(chars.len()), e.min(chars.len()));
        if s < at {
            continue;
        }
        out.extend(&chars[at..s]);
        out.push_str(REDACTED);
        at = e;
    }
    out.extend(&chars[at..]);
    out
}

/// Every step of a disclosure decision, for traces and `policy-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub base_sensitivity: Sensitivity,
    pub intent_elevated: bool,
    pub sensitivity: Sensitivity,
    pub level: RelationshipLevel,
    pub hard_lock: HardLock,
    pub matrix: Option<DisclosureOutcome>,
    pub approval: Option<ApprovalSignal>,
    pub outcome: DisclosureOutcome,
}

/// Runs elevation, hard lock, matrix and finalization for a request whose
/// `sensitivity` holds the base (unelevated) grade.
pub fn decide(request: &DisclosureRequest, approval: Option<ApprovalSignal>, lex: &Lexicons) -> DecisionTrace {
    let base = request.sensitivity;
    let sensitivity = elevate(base, request.intent_elevated);
    let level = request.relationship.level;
    let elevated = DisclosureRequest { sensitivity, ..request.clone() };
    let lock = hard_lock(sensitivity, level);
    let matrix = match lock {
        HardLock::Abort => None,
        HardLock::Proceed => matrix_decide(sensitivity, level).ok(),
    };
    let outcome = match &matrix {
        None => DisclosureOutcome::Abort,
        Some(m) => {
            let approval = if *m == DisclosureOutcome::ApprovalLoop { approval } else { None };
            match finalize(&elevated, m, approval, lex) {
                // elevation picks the cell; the masking bar stays at the base grade
                DisclosureOutcome::DirectReveal | DisclosureOutcome::PartialReveal { .. } => {
                    DisclosureOutcome::partial(spans_above(&request.candidate_answer, base, lex))
                }
                other => other,
            }
        }
    };
    let approval = if matches!(matrix, Some(DisclosureOutcome::ApprovalLoop)) { approval } else { None };
    DecisionTrace {
        base_sensitivity: base,
        intent_elevated: request.intent_elevated,
        sensitivity,
        level,
        hard_lock: lock,
        matrix,
        approval,
        outcome,
    }
}
