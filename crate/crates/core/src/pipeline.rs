//! Per-agent analysis of a one-sided transcript: resolution, gap detection,
//! conversational inference over masked turns, relationship assessment and
//! query planning.

use std::collections::BTreeSet;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::gaps::{build_query, classify_quality, detect_gaps, missing_attributes, InformationGap};
use crate::lexicon::Lexicons;
use crate::model::{
    Category, EntityMention, MobileContextSnapshot, OneSidedTranscript, ProtocolQuery, QueryQuality, ReferenceForm,
    ResolutionRecord, Role,
};
use crate::relationship::{assess_window, RelationshipAssessment, Thresholds};
use crate::resolver::{ack_opening, extract_mentions, resolve_local, ReferenceWindow};
use crate::text::{speech_start, tokenize};

/// How a gap came to be attributed to a turn the owner never heard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inference {
    /// Found in the trigger turn itself.
    Direct,
    /// A reference in an acknowledging reply points back at the masked turn.
    AckLed { from_turn: u32 },
    /// A demonstrative acknowledgement (`That should help.`) of the masked turn.
    DemonstrativeAck { from_turn: u32 },
    /// The owner's question was answered in the masked turn that followed.
    QuestionForward { from_turn: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedQuery {
    pub gap: InformationGap,
    pub query: ProtocolQuery,
    pub inference: Inference,
}

impl PlannedQuery {
    pub fn dispatchable(&self) -> bool {
        self.query.quality == QueryQuality::HighValue
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnAnalysis {
    pub turn_id: u32,
    pub mentions: Vec<EntityMention>,
    pub resolutions: Vec<ResolutionRecord>,
    pub gaps: Vec<InformationGap>,
    pub relationship: RelationshipAssessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAnalysis {
    pub owner: Role,
    pub turns: Vec<TurnAnalysis>,
    /// Every planned query, low-value ones included, ordered by trigger turn.
    pub queries: Vec<PlannedQuery>,
}

impl AgentAnalysis {
    pub fn resolutions(&self) -> impl Iterator<Item = &ResolutionRecord> {
        self.turns.iter().flat_map(|t| t.resolutions.iter())
    }

    pub fn dispatchable(&self) -> impl Iterator<Item = &PlannedQuery> {
        self.queries.iter().filter(|q| q.dispatchable())
    }
}

/// Category a moved reference takes from what the reply names explicitly.
const RETARGET_PRIORITY: [Category; 4] = [Category::Spatial, Category::Person, Category::Temporal, Category::Object];

fn retarget_category(mentions: &[EntityMention]) -> Option<Category> {
    RETARGET_PRIORITY
        .into_iter()
        .find(|c| mentions.iter().any(|m| m.category == *c && !m.form.is_deictic()))
}

fn recategorize(gap: &InformationGap, category: Category, trigger: u32) -> Option<InformationGap> {
    let mut mention = gap.mention.clone();
    mention.category = category;
    let missing = missing_attributes(&mention);
    (!missing.is_empty()).then(|| InformationGap::new(mention, missing, trigger))
}

fn is_question(text: &str) -> bool {
    text.trim_end().ends_with('?')
}

/// A stand-in mention for the demonstrative that opens the focus turn.
fn demonstrative_mention(window: &ReferenceWindow, lex: &Lexicons) -> Option<EntityMention> {
    let ack = ack_opening(&window.focus.text, lex)?;
    if !(ack.starts_with("that ") || ack.starts_with("this ")) {
        return None;
    }
    let tokens = tokenize(&window.focus.text);
    let first = &tokens[speech_start(&tokens)];
    Some(EntityMention {
        turn_id: window.focus.turn_id,
        span: (first.start, first.end),
        surface: first.text.clone(),
        category: Category::Object,
        form: ReferenceForm::Distal,
        attributes: Default::default(),
    })
}

pub struct AgentConfig<'a> {
    pub lex: &'a Lexicons,
    pub thresholds: Thresholds,
    pub clock: NaiveDateTime,
}

/// Runs resolution, gap detection and inference over every kept turn.
pub fn analyze(view: &OneSidedTranscript, snapshot: &MobileContextSnapshot, config: &AgentConfig) -> AgentAnalysis {
    let lex = config.lex;
    let mut turns = Vec::new();
    // (gap, window it was found in, inference)
    let mut planned: Vec<(InformationGap, ReferenceWindow, Inference)> = Vec::new();

    for turn in &view.turns {
        let window = ReferenceWindow::at(view, turn.turn_id).expect("kept turn has a window");
        let mentions = extract_mentions(&window, lex);
        let resolutions: Vec<ResolutionRecord> = mentions
            .iter()
            .filter_map(|m| resolve_local(m, &window, snapshot, config.clock, view.owner, lex))
            .collect();
        let gaps = detect_gaps(&window, &mentions, &resolutions);
        let relationship = assess_window(&window.turns().cloned().collect::<Vec<_>>(), lex, &config.thresholds);

        let masked = window.masked_before_focus;
        let acked = window.acknowledges_masked(lex);
        let mut kept_here = Vec::new();
        for gap in &gaps {
            let pointing_back = matches!(gap.mention.form, ReferenceForm::Pronoun | ReferenceForm::Distal);
            match (acked, masked, pointing_back) {
                (true, Some(m), true) => {
                    let category = retarget_category(&mentions).unwrap_or(gap.mention.category);
                    if let Some(moved) = recategorize(gap, category, m) {
                        planned.push((moved, window.clone(), Inference::AckLed { from_turn: turn.turn_id }));
                    }
                }
                _ => kept_here.push(gap.clone()),
            }
        }
        if acked {
            if let (Some(m), Some(mention)) = (masked, demonstrative_mention(&window, lex)) {
                if !planned.iter().any(|(g, _, _)| g.trigger_turn_id == m) {
                    let missing = missing_attributes(&mention);
                    planned.push((
                        InformationGap::new(mention, missing, m),
                        window.clone(),
                        Inference::DemonstrativeAck { from_turn: turn.turn_id },
                    ));
                }
            }
        }
        for gap in &kept_here {
            planned.push((gap.clone(), window.clone(), Inference::Direct));
        }

        // a question followed by a masked answer the owner then acknowledged
        if is_question(&turn.text) {
            if let Some(answer) = view.masked_after(turn.turn_id) {
                let next = view.turns.iter().find(|t| t.turn_id > answer);
                let reply_acks = next.is_some_and(|n| ack_opening(&n.text, lex).is_some());
                if reply_acks {
                    for gap in &kept_here {
                        let moved = InformationGap::new(gap.mention.clone(), gap.missing_attributes.clone(), answer);
                        planned.push((moved, window.clone(), Inference::QuestionForward { from_turn: turn.turn_id }));
                    }
                }
            }
        }

        turns.push(TurnAnalysis { turn_id: turn.turn_id, mentions, resolutions, gaps, relationship });
    }

    let mut seen = BTreeSet::new();
    let mut queries: Vec<PlannedQuery> = planned
        .into_iter()
        .filter_map(|(gap, window, inference)| {
            let quality = classify_quality(&gap, &window.focus.text, lex);
            let query = build_query(&gap, quality, &window, lex);
            seen.insert((query.trigger_turn_id, query.target_slot.clone()))
                .then_some(PlannedQuery { gap, query, inference })
        })
        .collect();
    queries.sort_by_key(|q| q.query.trigger_turn_id);
    AgentAnalysis { owner: view.owner, turns, queries }
}
