//! Entity-attribute templates, information gap detection, query value
//! filtering and protocol query construction.

use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lexicon::{Lexicons, SlotMatcher};
use crate::mentions::{ATTR_ANCHORED, ATTR_DOSAGE, ATTR_FREQUENCY, ATTR_IDENTIFYING, ATTR_NAME, ATTR_PLACE};
use crate::model::{
    Category, EntityMention, ProtocolQuery, QueryQuality, ResolutionRecord, Urgency, RESOLVE_MISSING_ENTITY,
};
use crate::resolver::ReferenceWindow;
use crate::text::tokenize;

/// Slots that always warrant an immediate answer.
pub const URGENT_SLOTS: &[&str] = &["SYMPTOM_LOCATION", "SYMPTOM_ESCALATION_POLICY", "APPOINTMENT_TIME"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeTemplate {
    pub category: Category,
    pub required_attributes: BTreeSet<String>,
}

impl AttributeTemplate {
    pub fn for_category(category: Category) -> Self {
        AttributeTemplate { category, required_attributes: required_attributes(category) }
    }
}

pub fn required_attributes(category: Category) -> BTreeSet<String> {
    let names: &[&str] = match category {
        Category::Medical => &[ATTR_NAME, ATTR_DOSAGE, ATTR_FREQUENCY],
        Category::Temporal => &[ATTR_ANCHORED],
        Category::Spatial => &[ATTR_PLACE],
        Category::Person | Category::Object | Category::Task => &[ATTR_IDENTIFYING],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Template lookup by category name.
pub fn required_attributes_named(category: &str) -> Result<BTreeSet<String>> {
    Ok(required_attributes(Category::from_str(category)?))
}

/// Does the mention carry every attribute its template requires?
pub fn is_complete(mention: &EntityMention) -> bool {
    missing_attributes(mention).is_empty()
}

pub fn missing_attributes(mention: &EntityMention) -> BTreeSet<String> {
    required_attributes(mention.category)
        .into_iter()
        .filter(|a| !mention.attributes.contains_key(a))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InformationGap {
    pub mention: EntityMention,
    pub missing_attributes: BTreeSet<String>,
    pub trigger_turn_id: u32,
    pub reason: String,
}

impl InformationGap {
    pub fn new(mention: EntityMention, missing: BTreeSet<String>, trigger_turn_id: u32) -> Self {
        let attrs: Vec<&str> = missing.iter().map(String::as_str).collect();
        let reason = format!(
            "{} reference '{}' lacks {}",
            mention.category,
            mention.surface,
            attrs.join(", ")
        );
        InformationGap { mention, missing_attributes: missing, trigger_turn_id, reason }
    }
}

/// A resolution covers a mention when it was made for the same turn and phrase.
pub fn covers(record: &ResolutionRecord, mention: &EntityMention) -> bool {
    record.trigger_turn_id == mention.turn_id && record.ambiguous_phrase == mention.surface
}

/// Mentions still missing required attributes after merging any resolution
/// made for them. A resolution supplies every attribute of its mention's
/// template.
pub fn detect_gaps(
    window: &ReferenceWindow,
    mentions: &[EntityMention],
    resolutions: &[ResolutionRecord],
) -> Vec<InformationGap> {
    mentions
        .iter()
        .filter(|m| m.turn_id == window.focus.turn_id)
        .filter(|m| !resolutions.iter().any(|r| covers(r, m)))
        .filter_map(|m| {
            let missing = missing_attributes(m);
            (!missing.is_empty()).then(|| InformationGap::new(m.clone(), missing, m.turn_id))
        })
        .collect()
}

/// The small-talk slot matched by `focus_text`, if any.
pub fn smalltalk_slot(focus_text: &str, lex: &Lexicons) -> Option<String> {
    lex.smalltalk.first_in(&tokenize(focus_text)).cloned()
}

fn is_actionable(gap: &InformationGap, focus_text: &str, lex: &Lexicons) -> bool {
    let focus = tokenize(focus_text);
    let surface = tokenize(&gap.mention.surface);
    let appointment = lex.cue("appointment");
    gap.mention.category == Category::Medical
        || (gap.mention.category == Category::Temporal && (appointment.any(&focus) || appointment.any(&surface)))
        || lex.cue("escalation").any(&focus)
}

pub fn classify_quality(gap: &InformationGap, focus_text: &str, lex: &Lexicons) -> QueryQuality {
    if smalltalk_slot(focus_text, lex).is_some() && !is_actionable(gap, focus_text, lex) {
        QueryQuality::LowValue
    } else {
        QueryQuality::HighValue
    }
}

/// First slot rule matching the gap's category and keywords.
pub fn target_slot(gap: &InformationGap, window: &ReferenceWindow, lex: &Lexicons) -> String {
    let focus = tokenize(&window.focus.text);
    let surface = tokenize(&gap.mention.surface);
    for rule in &lex.slot_rules {
        if rule.category.is_some_and(|c| c != gap.mention.category) {
            continue;
        }
        let hit = match &rule.matcher {
            SlotMatcher::Any => true,
            SlotMatcher::Head(words) => words.any(&surface),
            SlotMatcher::Focus(cue) => lex.cue(cue).any(&focus),
            SlotMatcher::Window(cue) => window.turns().any(|t| lex.cue(cue).any(&tokenize(&t.text))),
        };
        if hit {
            return rule.slot.clone();
        }
    }
    GENERAL_ATTRIBUTE.to_string()
}

pub const GENERAL_ATTRIBUTE: &str = "GENERAL_ATTRIBUTE";

pub fn build_query(
    gap: &InformationGap,
    quality: QueryQuality,
    window: &ReferenceWindow,
    lex: &Lexicons,
) -> ProtocolQuery {
    let (slot, urgency) = match quality {
        QueryQuality::LowValue => (
            smalltalk_slot(&window.focus.text, lex).unwrap_or_else(|| GENERAL_ATTRIBUTE.to_string()),
            Urgency::None,
        ),
        QueryQuality::HighValue => {
            let slot = target_slot(gap, window, lex);
            let focus = tokenize(&window.focus.text);
            let urgent = gap.mention.category == Category::Medical
                || URGENT_SLOTS.contains(&slot.as_str())
                || lex.cue("appointment").any(&focus)
                || lex.cue("escalation").any(&focus);
            (slot, if urgent { Urgency::Immediate } else { Urgency::Routine })
        }
    };
    ProtocolQuery {
        trigger_turn_id: gap.trigger_turn_id,
        intent: RESOLVE_MISSING_ENTITY.to_string(),
        natural_language_fallback: fallback_text(&slot, &gap.mention.surface, gap.trigger_turn_id),
        target_slot: slot,
        urgency,
        quality,
    }
}

pub fn fallback_text(slot: &str, phrase: &str, turn_id: u32) -> String {
    format!("Requesting {slot} for '{phrase}' from Turn {turn_id}.")
}

/// Recovers the quoted phrase from a fallback built by [`fallback_text`], or
/// the first single-quoted phrase in free text.
pub fn quoted_phrase(fallback: &str) -> Option<String> {
    let start = fallback.find('\'')? + 1;
    // the closing quote is followed by a non-letter, so `it's` inside survives
    let rest = &fallback[start..];
    let mut end = None;
    for (i, c) in rest.char_indices() {
        if c == '\'' && !rest[i + 1..].starts_with(|n: char| n.is_alphabetic()) {
            end = Some(i);
            break;
        }
    }
    let phrase = &rest[..end?];
    (!phrase.trim().is_empty()).then(|| phrase.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mentions::mentions_in;
    use crate::model::{Role, Turn};

    fn window(text: &str) -> ReferenceWindow {
        ReferenceWindow::new(Turn::new(44, Role::UserB, text), vec![]).unwrap()
    }

    #[test]
    fn templates() {
        assert_eq!(required_attributes(Category::Medical).len(), 3);
        assert!(required_attributes(Category::Spatial).contains(ATTR_PLACE));
        assert!(required_attributes(Category::Temporal).contains(ATTR_ANCHORED));
        assert!(required_attributes_named("Gadget").is_err());
        for c in Category::ALL {
            assert!(!AttributeTemplate::for_category(c).required_attributes.is_empty());
        }
    }

    #[test]
    fn center_gap_builds_location_query() {
        let lex = Lexicons::default();
        let w = window("And for the MRI, you have a slot at that center I recommended, right?");
        let mentions = mentions_in(&w.focus, &lex);
        let gaps = detect_gaps(&w, &mentions, &[]);
        let gap = gaps.iter().find(|g| g.mention.surface == "that center I recommended").unwrap();
        assert_eq!(gap.missing_attributes, [ATTR_PLACE.to_string()].into());
        let q = build_query(gap, classify_quality(gap, &w.focus.text, &lex), &w, &lex);
        assert_eq!(q.target_slot, "LOCATION_DESTINATION");
        assert_eq!(q.quality, QueryQuality::HighValue);
        assert_eq!(q.urgency, Urgency::Immediate);
        assert_eq!(q.natural_language_fallback, "Requesting LOCATION_DESTINATION for 'that center I recommended' from Turn 44.");
    }

    #[test]
    fn resolved_mentions_are_not_gaps() {
        let lex = Lexicons::default();
        let w = window("I left it at that center.");
        let mentions = mentions_in(&w.focus, &lex);
        let res = ResolutionRecord {
            trigger_turn_id: 44,
            ambiguous_phrase: "that center".into(),
            resolved_entity: "X".into(),
            resolution_source: "Literal".into(),
        };
        let gaps = detect_gaps(&w, &mentions, &[res]);
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].mention.surface, "it");
    }

    #[test]
    fn weather_is_low_value_with_no_urgency() {
        let lex = Lexicons::default();
        let w = window("(smiling) You too. Hopefully the sun won't be so brutal later.");
        let mentions = mentions_in(&w.focus, &lex);
        let gaps = detect_gaps(&w, &mentions, &[]);
        assert!(!gaps.is_empty());
        for g in &gaps {
            let quality = classify_quality(g, &w.focus.text, &lex);
            assert_eq!(quality, QueryQuality::LowValue);
            let q = build_query(g, quality, &w, &lex);
            assert_eq!(q.urgency, Urgency::None);
            assert_eq!(q.target_slot, "CASUAL_JOKE");
        }
    }

    #[test]
    fn empty_smalltalk_lexicon_keeps_everything() {
        let lex = Lexicons::from_sources(|n| (n == "smalltalk").then(String::new)).unwrap();
        let w = window("Hopefully the sun won't be so brutal later.");
        for g in detect_gaps(&w, &mentions_in(&w.focus, &lex), &[]) {
            assert_eq!(classify_quality(&g, &w.focus.text, &lex), QueryQuality::HighValue);
        }
    }

    #[test]
    fn group_gap_is_routine() {
        let lex = Lexicons::default();
        let w = window("And when you noticed 'it' starting, was it before or after you met up with your biking group?");
        let gaps = detect_gaps(&w, &mentions_in(&w.focus, &lex), &[]);
        let g = gaps.iter().find(|g| g.mention.surface == "your biking group").unwrap();
        let q = build_query(g, QueryQuality::HighValue, &w, &lex);
        assert_eq!(q.target_slot, "PERSON_GROUP_LIST");
        assert_eq!(q.urgency, Urgency::Routine);
    }

    #[test]
    fn fallback_phrase_round_trip() {
        assert_eq!(quoted_phrase(&fallback_text("X", "it", 44)).as_deref(), Some("it"));
        assert_eq!(quoted_phrase(&fallback_text("X", "it's mine", 4)).as_deref(), Some("it's mine"));
        assert_eq!(quoted_phrase("no quotes"), None);
    }
}
