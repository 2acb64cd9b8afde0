//! Local reference resolution against the owner's own transcript window and
//! phone context.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{ConcordError, Result};
use crate::gaps::is_complete;
use crate::lexicon::Lexicons;
use crate::mentions::{content_words, head_of, mentions_in, parse_temporal, DayRef, TemporalExpr, WeekdayDir};
use crate::model::{
    CalendarEvent, Category, EntityMention, MobileContextSnapshot, OneSidedTranscript, ReferenceForm,
    ResolutionRecord, Role, Turn,
};
use crate::text::{speech_start, tokenize, word_set};

/// Number of preceding turns visible to resolution and relationship assessment.
pub const HISTORY_TURNS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceWindow {
    pub focus: Turn,
    /// Oldest first.
    pub history: Vec<Turn>,
    /// The masked slot right before the focus turn, if any.
    pub masked_before_focus: Option<u32>,
}

impl ReferenceWindow {
    pub fn new(focus: Turn, history: Vec<Turn>) -> Result<Self> {
        if focus.text.trim().is_empty() {
            return Err(ConcordError::InvalidTranscript("focus turn is empty".into()));
        }
        if history.len() > HISTORY_TURNS {
            return Err(ConcordError::InvalidTranscript(format!(
                "window history holds {} turns, at most {HISTORY_TURNS} allowed",
                history.len()
            )));
        }
        if history.iter().any(|t| t.turn_id >= focus.turn_id) {
            return Err(ConcordError::InvalidTranscript(
                "window history must precede the focus turn".into(),
            ));
        }
        Ok(ReferenceWindow { focus, history, masked_before_focus: None })
    }

    /// The window around kept turn `turn_id` of a one-sided view.
    pub fn at(view: &OneSidedTranscript, turn_id: u32) -> Option<Self> {
        let pos = view.position(turn_id)?;
        let from = pos.saturating_sub(HISTORY_TURNS);
        Some(ReferenceWindow {
            focus: view.turns[pos].clone(),
            history: view.turns[from..pos].to_vec(),
            masked_before_focus: view.masked_before(turn_id),
        })
    }

    /// History and focus, oldest first.
    pub fn turns(&self) -> impl Iterator<Item = &Turn> {
        self.history.iter().chain(std::iter::once(&self.focus))
    }

    /// Whether the focus turn opens by acknowledging the masked turn before it.
    pub fn acknowledges_masked(&self, lex: &Lexicons) -> bool {
        self.masked_before_focus.is_some() && opens_with_ack(&self.focus.text, lex)
    }
}

/// Does `text` open with an acknowledgement cue such as `Yes,` or `Of course.`?
pub fn opens_with_ack(text: &str, lex: &Lexicons) -> bool {
    ack_opening(text, lex).is_some()
}

/// The acknowledgement cue opening `text`, as lowercased words.
pub fn ack_opening(text: &str, lex: &Lexicons) -> Option<String> {
    let tokens = tokenize(text);
    let at = speech_start(&tokens);
    let len = lex.ack_cues.starts_at(&tokens, at)?;
    // the cue must stand alone: `Good.` but not `Good morning`
    if tokens.get(at + len).is_some_and(|t| t.is_word) {
        return None;
    }
    Some(tokens[at..at + len].iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" "))
}

/// Mentions in the focus turn of `window`.
pub fn extract_mentions(window: &ReferenceWindow, lex: &Lexicons) -> Vec<EntityMention> {
    mentions_in(&window.focus, lex)
}

/// The ground a resolution came from. Each variant maps to one source label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ground {
    Literal,
    AuxLog(String),
    Calendar,
    Clock,
    Location { gps: bool, wifi: bool },
    PriorTurn(u32),
}

impl Ground {
    pub fn source(&self, owner: Role) -> String {
        let who = owner.label();
        match self {
            Ground::Literal => "Literal".into(),
            Ground::AuxLog(name) => format!("{who} {name}"),
            Ground::Calendar => format!("{who} Calendar"),
            Ground::Clock => format!("{who} Clock"),
            Ground::Location { gps: true, wifi: true } => format!("{who} GPS + Wifi"),
            Ground::Location { gps: true, wifi: false } => format!("{who} GPS"),
            Ground::Location { gps: false, wifi: true } => format!("{who} Wifi"),
            Ground::Location { gps: false, wifi: false } => format!("{who} Location"),
            Ground::PriorTurn(id) => format!("Prior Turn {id}"),
        }
    }
}

/// Pluggable resolution backend.
pub trait ResolverBackend {
    fn resolve(
        &self,
        mention: &EntityMention,
        window: &ReferenceWindow,
        snapshot: &MobileContextSnapshot,
    ) -> Option<ResolutionRecord>;
}

/// The deterministic rule cascade.
#[derive(Debug, Clone, Copy)]
pub struct RuleResolver<'a> {
    pub lex: &'a Lexicons,
    pub owner: Role,
    pub clock: NaiveDateTime,
}

impl ResolverBackend for RuleResolver<'_> {
    fn resolve(
        &self,
        mention: &EntityMention,
        window: &ReferenceWindow,
        snapshot: &MobileContextSnapshot,
    ) -> Option<ResolutionRecord> {
        resolve_local(mention, window, snapshot, self.clock, self.owner, self.lex)
    }
}

pub fn resolve_local(
    mention: &EntityMention,
    window: &ReferenceWindow,
    snapshot: &MobileContextSnapshot,
    reference_clock: NaiveDateTime,
    owner: Role,
    lex: &Lexicons,
) -> Option<ResolutionRecord> {
    resolve_traced(mention, window, snapshot, reference_clock, lex).map(|(entity, ground)| ResolutionRecord {
        trigger_turn_id: mention.turn_id,
        ambiguous_phrase: mention.surface.clone(),
        resolved_entity: entity,
        resolution_source: ground.source(owner),
    })
}

/// The rule cascade, returning the resolved entity and the ground consulted.
pub fn resolve_traced(
    mention: &EntityMention,
    window: &ReferenceWindow,
    snapshot: &MobileContextSnapshot,
    clock: NaiveDateTime,
    lex: &Lexicons,
) -> Option<(String, Ground)> {
    use ReferenceForm::*;
    if is_complete(mention) {
        return Some((mention.surface.clone(), Ground::Literal));
    }
    // the peer's own things and open questions are theirs to answer
    if matches!(mention.form, PeerPossessive | Interrogative | Indefinite) {
        return None;
    }
    if !matches!(mention.form, Pronoun) && !is_bare_deictic(mention) {
        if let Some((log, value)) = aux_lookup(mention, snapshot, lex) {
            return Some((value, Ground::AuxLog(log)));
        }
    }
    if mention.category == Category::Temporal {
        if let Some(expr) = parse_temporal(&mention.surface, lex) {
            return anchor(expr, clock, snapshot);
        }
    }
    if !matches!(mention.form, Pronoun) && !is_bare_deictic(mention) {
        if let Some(found) = calendar_lookup(mention, snapshot, clock, lex) {
            return Some((found, Ground::Calendar));
        }
    }
    if mention.form == Proximal && mention.category == Category::Spatial {
        let ground = Ground::Location {
            gps: snapshot.gps_coords.is_some(),
            wifi: snapshot.wifi_ssid.is_some(),
        };
        return Some((snapshot.location_semantic.clone(), ground));
    }
    if matches!(mention.form, Distal | Pronoun) && !window.acknowledges_masked(lex) {
        return prior_turn_antecedent(mention.category, window, lex);
    }
    None
}

fn is_bare_deictic(mention: &EntityMention) -> bool {
    matches!(
        mention.surface.to_lowercase().as_str(),
        "here" | "there" | "that" | "this" | "those" | "these" | "then" | "now"
    )
}

/// Rule 1: a log record whose key occurs in the mention, or whose key ends in
/// the mention's head noun. Longest key wins.
fn aux_lookup(mention: &EntityMention, snapshot: &MobileContextSnapshot, lex: &Lexicons) -> Option<(String, String)> {
    let content = content_words(&mention.surface);
    if content.is_empty() {
        return None;
    }
    let head: Vec<String> = head_of(&mention.surface, lex)
        .map(|h| h.split(' ').map(str::to_string).collect())
        .unwrap_or_default();
    let mut best: Option<(usize, &str, &str)> = None;
    for (log, records) in &snapshot.aux_logs {
        for rec in records {
            let key: Vec<String> = tokenize(&rec.key).into_iter().filter(|t| t.is_word).map(|t| t.lower).collect();
            if key.is_empty() {
                continue;
            }
            let contained = content.windows(key.len()).any(|w| w == key.as_slice());
            let head_hit = !head.is_empty() && key.ends_with(&head);
            if (contained || head_hit) && best.is_none_or(|(n, _, _)| key.len() > n) {
                best = Some((key.len(), log, &rec.value));
            }
        }
    }
    best.map(|(_, log, value)| (log.to_string(), value.to_string()))
}

/// Rule 2 for nominal mentions: a calendar event whose title or location
/// contains the mention's head noun. The event nearest the clock wins.
fn calendar_lookup(
    mention: &EntityMention,
    snapshot: &MobileContextSnapshot,
    clock: NaiveDateTime,
    lex: &Lexicons,
) -> Option<String> {
    let head = head_of(&mention.surface, lex)?;
    let head: Vec<String> = head.split(' ').map(str::to_string).collect();
    let has = |s: &str| {
        let words: Vec<String> = tokenize(s).into_iter().filter(|t| t.is_word).map(|t| t.lower).collect();
        words.windows(head.len()).any(|w| w == head.as_slice())
    };
    let event = snapshot
        .calendar
        .iter()
        .filter(|e| has(&e.title) || e.location.as_deref().is_some_and(has))
        .min_by_key(|e| (e.start - clock).num_seconds().abs())?;
    Some(match mention.category {
        Category::Spatial => event.location.clone().unwrap_or_else(|| event.title.clone()),
        Category::Temporal | Category::Task => {
            format!("{}, {}", event.title, format_datetime(event.start))
        }
        _ => event.title.clone(),
    })
}

/// Rule 2 for relative time: anchors the expression to a date (and time) and
/// reports whether the calendar corroborates it.
fn anchor(expr: TemporalExpr, clock: NaiveDateTime, snapshot: &MobileContextSnapshot) -> Option<(String, Ground)> {
    let today = clock.date();
    let (date, time) = match expr.day {
        DayRef::Now => (today, Some(clock.time())),
        DayRef::Offset(d) => (today + Duration::days(d), expr.time),
        DayRef::Absolute(d) => (d, expr.time),
        DayRef::Weekday(wd, dir) => {
            let delta = (wd.num_days_from_monday() as i64) - (today.weekday().num_days_from_monday() as i64);
            let days = match dir {
                WeekdayDir::Last => {
                    if delta < 0 { delta } else { delta - 7 }
                }
                WeekdayDir::Next => {
                    if delta > 0 { delta } else { delta + 7 }
                }
                WeekdayDir::Coming => delta.rem_euclid(7),
            };
            (today + Duration::days(days), expr.time)
        }
        DayRef::Unanchored => return None,
    };
    let on_calendar = |e: &CalendarEvent| match time {
        Some(t) => {
            let at = date.and_time(t);
            e.start <= at && at <= e.end
        }
        None => e.start.date() <= date && date <= e.end.date(),
    };
    let ground = if snapshot.calendar.iter().any(on_calendar) { Ground::Calendar } else { Ground::Clock };
    let text = match time {
        Some(t) => format_datetime(date.and_time(t)),
        None => format_date(date),
    };
    Some((text, ground))
}

/// Rule 4: most recent explicit mention of the same category in an earlier
/// turn of the window.
fn prior_turn_antecedent(category: Category, window: &ReferenceWindow, lex: &Lexicons) -> Option<(String, Ground)> {
    for turn in window.history.iter().rev() {
        let found = mentions_in(turn, lex)
            .into_iter()
            .rev()
            .find(|m| m.category == category && (m.form == ReferenceForm::Named || is_complete(m)));
        if let Some(m) = found {
            return Some((m.surface, Ground::PriorTurn(turn.turn_id)));
        }
    }
    None
}

pub fn format_datetime(dt: NaiveDateTime) -> String {
    dt.format("%B %-d, %Y, %-I:%M %p").to_string()
}

pub fn format_date(d: NaiveDate) -> String {
    d.format("%B %-d, %Y").to_string()
}

/// The instant relative expressions are anchored to: the start of the
/// calendar event held at the current location, else the earliest event.
pub fn reference_clock(snapshot: &MobileContextSnapshot) -> Option<NaiveDateTime> {
    let place = snapshot
        .location_semantic
        .split(',')
        .next()
        .map(word_set)
        .filter(|w| !w.is_empty());
    let here = place.as_ref().and_then(|place| {
        snapshot
            .calendar
            .iter()
            .filter(|e| {
                let loc = word_set(e.location.as_deref().unwrap_or_default());
                place.is_subset(&loc)
            })
            .map(|e| e.start)
            .min()
    });
    here.or_else(|| snapshot.calendar.iter().map(|e| e.start).min())
}

/// Fallback when a snapshot has no calendar at all.
pub fn default_clock() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2024, 1, 1)
        .expect("valid date")
        .and_time(NaiveTime::MIN)
}

/// Case-folded token-set overlap `|P ∩ G| / |P ∪ G|`.
pub fn resolution_similarity(predicted: &str, gold: &str) -> Result<f64> {
    if predicted.trim().is_empty() || gold.trim().is_empty() {
        return Err(ConcordError::EmptySimilarityInput);
    }
    let p = word_set(predicted);
    let g = word_set(gold);
    let union = p.union(&g).count();
    if union == 0 {
        return Ok(if predicted.trim() == gold.trim() { 1.0 } else { 0.0 });
    }
    Ok(p.intersection(&g).count() as f64 / union as f64)
}
