//! Relationship level from linguistic markers over a window of the owner's turns.

use serde::{Deserialize, Serialize};

use crate::error::{ConcordError, Result};
use crate::lexicon::{Lexicons, WordList};
use crate::mentions::mentions_in;
use crate::model::{ReferenceForm, RelationshipLevel, Turn};
use crate::text::{speech_start, tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MarkerCounts {
    pub honorifics: u32,
    pub distancing_modals: u32,
    pub endearments_relational: u32,
    pub first_name_address: u32,
    pub collective_pronouns: u32,
    pub implicit_refs: u32,
    pub explicit_refs: u32,
    pub private_space_refs: u32,
}

impl MarkerCounts {
    pub fn distance_markers(&self) -> u32 {
        self.honorifics + self.distancing_modals
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marker {
    Honorific,
    DistancingModal,
    Endearment,
    FirstNameAddress,
    CollectivePronoun,
    ImplicitReference,
    ExplicitReference,
    PrivateSpace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub marker: Marker,
    pub turn_id: u32,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Distance markers that lock the window to L3.
    pub distance_lock: u32,
    /// Distinct intimacy marker types needed for L1.
    pub intimacy_types: u32,
    pub collective_floor: u32,
    pub implicit_ratio_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { distance_lock: 2, intimacy_types: 3, collective_floor: 2, implicit_ratio_floor: 0.6 }
    }
}

impl Thresholds {
    pub fn check(&self) -> Result<()> {
        if self.distance_lock == 0 || self.intimacy_types < 2 {
            return Err(ConcordError::InvalidConfig(
                "distance_lock must be >= 1 and intimacy_types >= 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.implicit_ratio_floor) {
            return Err(ConcordError::InvalidConfig("implicit_ratio_floor must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipAssessment {
    pub level: RelationshipLevel,
    pub counts: MarkerCounts,
    pub evidence: Vec<Evidence>,
    /// The distance lock fired; implies L3.
    pub locked: bool,
}

fn hits(list: &WordList, tokens: &[Token], text: &str) -> Vec<String> {
    list.find_all(tokens)
        .into_iter()
        .map(|(s, l)| crate::text::char_slice(text, tokens[s].start, tokens[s + l - 1].end))
        .collect()
}

/// Capitalized words used in address: after a greeting, or set off by commas
/// (`Hello, Samantha,` / `You're welcome, Samantha.`). Titled names are not
/// first-name address.
fn first_names(tokens: &[Token], lex: &Lexicons) -> Vec<String> {
    let mut out = Vec::new();
    let speech = speech_start(tokens);
    for i in speech..tokens.len() {
        let t = &tokens[i];
        if !t.is_word || !t.is_capitalized() || t.is_numeric() || t.lower == "i" {
            continue;
        }
        let prev = i.checked_sub(1).map(|p| &tokens[p]);
        let prev2 = i.checked_sub(2).map(|p| &tokens[p]);
        let titled = prev.is_some_and(|p| p.text == ".") && prev2.is_some() && lex.honorifics.match_at(tokens, i - 2) == Some(1)
            || lex.honorifics.match_at(tokens, i) == Some(1)
            || prev.is_some_and(|_| lex.honorifics.match_at(tokens, i - 1) == Some(1));
        if titled {
            continue;
        }
        let after_greeting = match prev {
            Some(p) if p.is_word => lex.greetings.match_at(tokens, i - 1) == Some(1),
            Some(p) if p.text == "," => prev2.is_some_and(|_| lex.greetings.match_at(tokens, i - 2) == Some(1)),
            _ => false,
        };
        let next_closes = tokens.get(i + 1).is_none_or(|n| !n.is_word && matches!(n.text.as_str(), "," | "." | "!" | "?"));
        let comma_before = prev.is_some_and(|p| p.text == ",");
        let vocative = comma_before && next_closes;
        if (after_greeting && next_closes) || vocative {
            out.push(t.text.clone());
        }
    }
    out
}

pub fn extract_markers(window_turns: &[Turn], lex: &Lexicons) -> (MarkerCounts, Vec<Evidence>) {
    let mut counts = MarkerCounts::default();
    let mut evidence = Vec::new();
    for turn in window_turns {
        let tokens = tokenize(&turn.text);
        let mut note = |marker: Marker, found: Vec<String>, slot: &mut u32| {
            *slot += found.len() as u32;
            evidence.extend(found.into_iter().map(|text| Evidence { marker, turn_id: turn.turn_id, text }));
        };
        note(Marker::Honorific, hits(&lex.honorifics, &tokens, &turn.text), &mut counts.honorifics);
        note(Marker::DistancingModal, hits(&lex.distancing, &tokens, &turn.text), &mut counts.distancing_modals);
        note(Marker::Endearment, hits(&lex.endearments, &tokens, &turn.text), &mut counts.endearments_relational);
        note(Marker::PrivateSpace, hits(&lex.private_spaces, &tokens, &turn.text), &mut counts.private_space_refs);
        note(Marker::CollectivePronoun, hits(&lex.collective, &tokens, &turn.text), &mut counts.collective_pronouns);
        note(Marker::FirstNameAddress, first_names(&tokens, lex), &mut counts.first_name_address);
        let mentions = mentions_in(turn, lex);
        let implicit: Vec<String> =
            mentions.iter().filter(|m| m.form.is_deictic()).map(|m| m.surface.clone()).collect();
        let explicit: Vec<String> =
            mentions.iter().filter(|m| m.form == ReferenceForm::Named).map(|m| m.surface.clone()).collect();
        note(Marker::ImplicitReference, implicit, &mut counts.implicit_refs);
        note(Marker::ExplicitReference, explicit, &mut counts.explicit_refs);
    }
    (counts, evidence)
}

/// `implicit / (implicit + explicit)`; absent when there are no references.
pub fn implicit_ratio(counts: &MarkerCounts) -> Option<f64> {
    let total = counts.implicit_refs + counts.explicit_refs;
    (total > 0).then(|| counts.implicit_refs as f64 / total as f64)
}

/// Number of distinct intimacy marker types present.
pub fn intimacy_types(counts: &MarkerCounts, t: &Thresholds) -> u32 {
    [
        counts.endearments_relational >= 1,
        counts.private_space_refs >= 1,
        counts.collective_pronouns >= t.collective_floor,
        implicit_ratio(counts).is_some_and(|r| r >= t.implicit_ratio_floor),
    ]
    .into_iter()
    .filter(|&b| b)
    .count() as u32
}

pub fn assess_level(counts: &MarkerCounts, t: &Thresholds) -> (RelationshipLevel, bool) {
    if counts.distance_markers() >= t.distance_lock {
        return (RelationshipLevel::L3, true);
    }
    if intimacy_types(counts, t) >= t.intimacy_types && counts.distance_markers() == 0 {
        return (RelationshipLevel::L1, false);
    }
    if counts.first_name_address >= 1 && counts.honorifics == 0 {
        return (RelationshipLevel::L2, false);
    }
    (RelationshipLevel::L3, false)
}

/// Markers and level for a window of turns.
pub fn assess_window(window_turns: &[Turn], lex: &Lexicons, t: &Thresholds) -> RelationshipAssessment {
    let (counts, evidence) = extract_markers(window_turns, lex);
    let (level, locked) = assess_level(&counts, t);
    RelationshipAssessment { level, counts, evidence, locked }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;

    fn counts(texts: &[&str]) -> MarkerCounts {
        let turns: Vec<Turn> =
            texts.iter().enumerate().map(|(i, t)| Turn::new(i as u32 + 1, Role::UserA, *t)).collect();
        extract_markers(&turns, &Lexicons::default()).0
    }

    #[test]
    fn formal_markers() {
        let c = counts(&["Hi, Dr. Sharma, I'm here for my appointment.", "Could you check the file?"]);
        assert!(c.honorifics >= 1);
        assert!(c.distancing_modals >= 1);
        assert_eq!(c.first_name_address, 0);
        let (level, locked) = assess_level(&c, &Thresholds::default());
        assert_eq!((level, locked), (RelationshipLevel::L3, true));
    }

    #[test]
    fn intimate_markers() {
        let c = counts(&["babe, grab that from the bedroom, it's ours"]);
        assert_eq!(c.endearments_relational, 1);
        assert_eq!(c.private_space_refs, 1);
        assert_eq!(c.collective_pronouns, 1);
    }

    #[test]
    fn first_name_is_social() {
        let c = counts(&["Hey Sam, pizza later?"]);
        assert_eq!(c.first_name_address, 1);
        assert_eq!(assess_level(&c, &Thresholds::default()).0, RelationshipLevel::L2);
        let c = counts(&["You're welcome, Samantha. Enjoy the rest of your day."]);
        assert_eq!(c.first_name_address, 1);
    }

    #[test]
    fn lone_collective_stays_professional() {
        let c = counts(&["Please submit the form to our office by Friday."]);
        assert_eq!(assess_level(&c, &Thresholds::default()).0, RelationshipLevel::L3);
    }

    #[test]
    fn empty_lexicons_count_nothing() {
        let empty = |_: &str| Some(String::new());
        let lex = Lexicons::from_sources(empty).unwrap();
        let turns = [Turn::new(1, Role::UserA, "babe, Dr. Sharma, could you grab that from our bedroom")];
        let c = extract_markers(&turns, &lex).0;
        // vocatives and deixis are structural, everything else is lexicon-driven
        let lexical = MarkerCounts { first_name_address: 0, implicit_refs: 0, explicit_refs: 0, ..c };
        assert_eq!(lexical, MarkerCounts::default());
    }

    #[test]
    fn implicit_ratio_cases() {
        let mut c = MarkerCounts { implicit_refs: 3, explicit_refs: 1, ..Default::default() };
        assert_eq!(implicit_ratio(&c), Some(0.75));
        c.implicit_refs = 0;
        c.explicit_refs = 5;
        assert_eq!(implicit_ratio(&c), Some(0.0));
        c.explicit_refs = 0;
        assert_eq!(implicit_ratio(&c), None);
    }

    #[test]
    fn l1_needs_several_types() {
        let t = Thresholds::default();
        let c = MarkerCounts { endearments_relational: 1, private_space_refs: 1, collective_pronouns: 2, ..Default::default() };
        assert_eq!(assess_level(&c, &t).0, RelationshipLevel::L1);
        let c = MarkerCounts { endearments_relational: 5, ..Default::default() };
        assert_ne!(assess_level(&c, &t).0, RelationshipLevel::L1);
    }
}
