//! Entity mention extraction from a single turn.
//!
//! Candidates come from several matchers (time expressions, medications,
//! named places and people, determiner noun phrases, pronouns and deictic
//! adverbs). Overlaps are settled by keeping the longest candidate.

use std::collections::BTreeMap;

use chrono::{NaiveDate, NaiveTime, Weekday};
use regex::Regex;
use std::sync::OnceLock;

use crate::gaps::required_attributes;
use crate::lexicon::{Lexicons, MedicalKind};
use crate::model::{Category, EntityMention, ReferenceForm, Turn};
use crate::text::{char_slice, speech_start, tokenize, Token};

pub const ATTR_NAME: &str = "name";
pub const ATTR_DOSAGE: &str = "dosage";
pub const ATTR_FREQUENCY: &str = "frequency";
pub const ATTR_ANCHORED: &str = "anchored_datetime_or_event";
pub const ATTR_PLACE: &str = "building_floor_or_room";
pub const ATTR_IDENTIFYING: &str = "identifying_attribute";

/// Which calendar day a temporal expression points at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DayRef {
    /// The reference instant itself (`now`).
    Now,
    Offset(i64),
    /// `last Thursday`, `next Monday`, `on Friday`.
    Weekday(Weekday, WeekdayDir),
    Absolute(NaiveDate),
    /// `later`, `soon`: cannot be placed on a calendar.
    Unanchored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeekdayDir {
    Last,
    Next,
    /// Bare weekday: the closest upcoming one, today included.
    Coming,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalExpr {
    pub day: DayRef,
    pub time: Option<NaiveTime>,
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september",
    "october", "november", "december",
];

const WEEKDAYS: [(&str, Weekday); 7] = [
    ("monday", Weekday::Mon),
    ("tuesday", Weekday::Tue),
    ("wednesday", Weekday::Wed),
    ("thursday", Weekday::Thu),
    ("friday", Weekday::Fri),
    ("saturday", Weekday::Sat),
    ("sunday", Weekday::Sun),
];

fn month_of(word: &str) -> Option<u32> {
    let word = word.trim_end_matches('.');
    MONTHS
        .iter()
        .position(|m| *m == word || (word.len() >= 3 && m.starts_with(word)))
        .map(|i| i as u32 + 1)
}

fn weekday_of(word: &str) -> Option<Weekday> {
    WEEKDAYS.iter().find(|(w, _)| *w == word).map(|(_, d)| *d)
}

fn leading_number(word: &str) -> Option<u32> {
    let digits: String = word.chars().take_while(char::is_ascii_digit).collect();
    let rest = &word[digits.len()..];
    if digits.is_empty() || !(rest.is_empty() || ["st", "nd", "rd", "th"].contains(&rest)) {
        return None;
    }
    digits.parse().ok()
}

fn word(tokens: &[Token], i: usize) -> Option<&str> {
    tokens.get(i).filter(|t| t.is_word).map(|t| t.lower.as_str())
}

fn punct(tokens: &[Token], i: usize, p: &str) -> bool {
    tokens.get(i).is_some_and(|t| !t.is_word && t.text == p)
}

/// Clock time at `i`: `4:30 PM`, `3 AM`, `8 p.m.`, `noon`. Returns tokens used.
pub fn time_at(tokens: &[Token], i: usize) -> Option<(usize, NaiveTime)> {
    let w = word(tokens, i)?;
    match w {
        "noon" | "midday" => return Some((1, NaiveTime::from_hms_opt(12, 0, 0)?)),
        "midnight" => return Some((1, NaiveTime::from_hms_opt(0, 0, 0)?)),
        _ => {}
    }
    let (h, m) = match w.split_once(':') {
        Some((h, m)) => (h.parse::<u32>().ok()?, m.parse::<u32>().ok()?),
        None => (w.parse::<u32>().ok()?, 0),
    };
    let (meridiem, used) = match word(tokens, i + 1) {
        Some("am") => ("am", 2),
        Some("pm") => ("pm", 2),
        // `a.m.` tokenizes as a . m .
        Some(x @ ("a" | "p")) if punct(tokens, i + 2, ".") && word(tokens, i + 3) == Some("m") => {
            let used = if punct(tokens, i + 4, ".") { 5 } else { 4 };
            (if x == "a" { "am" } else { "pm" }, used)
        }
        // 24-hour `14:00`
        _ if w.contains(':') && h < 24 => return Some((1, NaiveTime::from_hms_opt(h, m, 0)?)),
        _ => return None,
    };
    if !(1..=12).contains(&h) || m > 59 {
        return None;
    }
    let h24 = match (meridiem, h) {
        ("am", 12) => 0,
        ("am", h) => h,
        ("pm", 12) => 12,
        (_, h) => h + 12,
    };
    Some((used, NaiveTime::from_hms_opt(h24, m, 0)?))
}

/// Optional `,`/`at` connector followed by a clock time.
fn trailing_time(tokens: &[Token], i: usize) -> Option<(usize, NaiveTime)> {
    let mut j = i;
    if punct(tokens, j, ",") {
        j += 1;
    }
    if word(tokens, j) == Some("at") {
        j += 1;
    }
    time_at(tokens, j).map(|(n, t)| (j - i + n, t))
}

/// A temporal expression starting at token `i`.
pub fn temporal_at(tokens: &[Token], i: usize, lex: &Lexicons) -> Option<(usize, TemporalExpr)> {
    // absolute date: June 13[, 2024][, 4:30 PM]
    if let Some(month) = word(tokens, i).and_then(month_of) {
        // `may` is too often a verb to count without a following day number
        if let Some(day) = word(tokens, i + 1).and_then(leading_number) {
            let mut n = 2;
            let mut year = None;
            let j = if punct(tokens, i + 2, ",") { i + 3 } else { i + 2 };
            if let Some(y) = word(tokens, j).and_then(|w| (w.len() == 4).then(|| w.parse::<i32>().ok()).flatten()) {
                year = Some(y);
                n = j + 1 - i;
            }
            if let Some(year) = year {
                let date = NaiveDate::from_ymd_opt(year, month, day)?;
                let (extra, time) = match trailing_time(tokens, i + n) {
                    Some((k, t)) => (k, Some(t)),
                    None => (0, None),
                };
                return Some((n + extra, TemporalExpr { day: DayRef::Absolute(date), time }));
            }
        }
    }
    // weekdays: [last|next|this|on] Thursday
    let (skip, dir) = match word(tokens, i) {
        Some("last") => (1, WeekdayDir::Last),
        Some("next") => (1, WeekdayDir::Next),
        Some("this" | "on") => (1, WeekdayDir::Coming),
        _ => (0, WeekdayDir::Coming),
    };
    if let Some(wd) = word(tokens, i + skip).and_then(weekday_of) {
        let n = skip + 1;
        let (extra, time) = match trailing_time(tokens, i + n) {
            Some((k, t)) => (k, Some(t)),
            None => (0, None),
        };
        return Some((n + extra, TemporalExpr { day: DayRef::Weekday(wd, dir), time }));
    }
    // relative days from the lexicon, optionally with a time
    if let Some((n, offset)) = lex.relative_time.match_at(tokens, i) {
        let surface: Vec<&str> = tokens[i..i + n].iter().map(|t| t.lower.as_str()).collect();
        let day = match (offset, surface.as_slice()) {
            (_, ["now"] | ["right", "now"]) => DayRef::Now,
            (Some(o), _) => DayRef::Offset(*o),
            (None, _) => DayRef::Unanchored,
        };
        if day == DayRef::Now || day == DayRef::Unanchored {
            return Some((n, TemporalExpr { day, time: None }));
        }
        let (extra, time) = match trailing_time(tokens, i + n) {
            Some((k, t)) => (k, Some(t)),
            None => (0, None),
        };
        return Some((n + extra, TemporalExpr { day, time }));
    }
    // bare clock time: today at that time
    time_at(tokens, i).map(|(n, t)| (n, TemporalExpr { day: DayRef::Offset(0), time: Some(t) }))
}

/// Parses a whole phrase as a temporal expression, if it is exactly one.
pub fn parse_temporal(phrase: &str, lex: &Lexicons) -> Option<TemporalExpr> {
    let tokens = tokenize(phrase);
    let start = tokens.iter().position(|t| t.is_word)?;
    let (n, expr) = temporal_at(&tokens, start, lex)?;
    tokens[start + n..].iter().all(|t| !t.is_word).then_some(expr)
}

fn determiner(w: &str) -> Option<ReferenceForm> {
    use ReferenceForm::*;
    Some(match w {
        "the" | "his" | "her" | "their" | "its" => Definite,
        "that" | "those" => Distal,
        "this" | "these" => Proximal,
        "my" | "our" => OwnPossessive,
        "your" => PeerPossessive,
        "a" | "an" | "some" | "any" | "another" => Indefinite,
        "which" | "what" => Interrogative,
        _ => return None,
    })
}

/// Words that cannot sit between a determiner and its head noun.
const CLOSED_CLASS: &[&str] = &[
    "the", "a", "an", "that", "this", "those", "these", "my", "your", "our", "his", "her",
    "their", "its", "some", "any", "which", "what", "i", "you", "we", "they", "he", "she", "it",
    "me", "us", "them", "him", "is", "are", "was", "were", "be", "been", "am", "'s", "'re", "'m",
    "'ve", "'ll", "'d", "n't", "do", "does", "did", "have", "has", "had", "will", "would", "can",
    "could", "should", "may", "might", "must", "and", "or", "but", "so", "if", "when", "then",
    "to", "of", "in", "on", "at", "for", "with", "from", "by", "about", "into", "over", "after",
    "before", "as", "than", "not", "no", "yes", "there", "here", "now", "how", "who", "where",
    "why", "just", "still", "also", "very", "too",
];

const PREPOSITIONS: &[&str] = &[
    "to", "of", "in", "on", "at", "for", "with", "from", "by", "about", "into", "over", "after",
    "before", "under", "near", "behind", "beside", "during",
];

const SUBJECT_PRONOUNS: &[&str] = &["i", "you", "we", "they", "she", "he"];

fn is_sentence_start(tokens: &[Token], i: usize, speech: usize) -> bool {
    i <= speech
        || tokens
            .get(i - 1)
            .is_some_and(|t| !t.is_word && matches!(t.text.as_str(), "." | "!" | "?" | "\"" | "(" | ")"))
}

#[derive(Debug, Clone)]
struct Candidate {
    start: usize,
    end: usize,
    categories: Vec<Category>,
    form: ReferenceForm,
    attributes: BTreeMap<String, String>,
    /// Lower wins among candidates of equal length.
    rank: u8,
}

fn dosage_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b\d+(?:\.\d+)?\s?(?:mg|mcg|µg|ml|g|iu|units?|tablets?|pills?|capsules?|puffs?|drops?)\b")
            .expect("static regex")
    })
}

struct Extractor<'a> {
    lex: &'a Lexicons,
    text: &'a str,
    tokens: Vec<Token>,
    speech: usize,
    out: Vec<Candidate>,
}

impl<'a> Extractor<'a> {
    fn new(lex: &'a Lexicons, text: &'a str) -> Self {
        let tokens = tokenize(text);
        let speech = speech_start(&tokens);
        Extractor { lex, text, tokens, speech, out: Vec::new() }
    }

    fn push(&mut self, start: usize, end: usize, categories: Vec<Category>, form: ReferenceForm, attributes: BTreeMap<String, String>, rank: u8) {
        self.out.push(Candidate { start, end, categories, form, attributes, rank });
    }

    fn surface(&self, start: usize, end: usize) -> String {
        char_slice(self.text, self.tokens[start].start, self.tokens[end - 1].end)
    }

    fn temporal(&mut self) {
        let n = self.tokens.len();
        for i in self.speech..n {
            if let Some((len, expr)) = temporal_at(&self.tokens, i, self.lex) {
                let mut attrs = BTreeMap::new();
                let form = match expr.day {
                    DayRef::Absolute(_) => {
                        attrs.insert(ATTR_ANCHORED.to_string(), self.surface(i, i + len));
                        ReferenceForm::Named
                    }
                    DayRef::Now => ReferenceForm::Proximal,
                    _ => ReferenceForm::RelativeTime,
                };
                self.push(i, i + len, vec![Category::Temporal], form, attrs, 0);
            }
            if word(&self.tokens, i) == Some("then") {
                self.push(i, i + 1, vec![Category::Temporal], ReferenceForm::Distal, BTreeMap::new(), 5);
            }
        }
    }

    fn medical(&mut self) {
        let focus_dosage = dosage_re().find(self.text).map(|m| m.as_str().to_string());
        let focus_freq = self
            .lex
            .frequency
            .find_all(&self.tokens)
            .first()
            .map(|&(s, l)| self.surface(s, s + l));
        for i in self.speech..self.tokens.len() {
            let Some((len, kind)) = self.lex.medical.match_at(&self.tokens, i) else { continue };
            let kind = *kind;
            let det = i
                .checked_sub(1)
                .filter(|&p| p >= self.speech)
                .and_then(|p| word(&self.tokens, p).and_then(determiner).map(|f| (p, f)));
            let (start, form) = match det {
                Some((p, f)) => (p, f),
                None if kind == MedicalKind::Name => (i, ReferenceForm::Named),
                None => (i, ReferenceForm::Definite),
            };
            let mut end = i + len;
            let mut attrs = BTreeMap::new();
            if kind == MedicalKind::Name {
                attrs.insert(ATTR_NAME.to_string(), self.surface(i, i + len));
            }
            // absorb `, 200 mg, twice daily` right after the term
            let mut j = end;
            loop {
                let k = if punct(&self.tokens, j, ",") { j + 1 } else { j };
                if let Some(fl) = self.lex.frequency.match_at(&self.tokens, k) {
                    j = k + fl;
                    end = j;
                    continue;
                }
                let dose_len = (k < self.tokens.len())
                    .then(|| {
                        let rest = &self.tokens[k..];
                        let from = rest[0].start;
                        let tail: String = self.text.chars().skip(from).collect();
                        dosage_re().find(&tail).filter(|m| m.start() == 0).map(|m| {
                            let stop = from + tail[..m.end()].chars().count();
                            rest.iter().take_while(|t| t.end <= stop).count()
                        })
                    })
                    .flatten();
                match dose_len {
                    Some(dl) if dl > 0 => {
                        j = k + dl;
                        end = j;
                    }
                    _ => break,
                }
            }
            if let Some(d) = &focus_dosage {
                attrs.insert(ATTR_DOSAGE.to_string(), d.clone());
            }
            if let Some(f) = &focus_freq {
                attrs.insert(ATTR_FREQUENCY.to_string(), f.clone());
            }
            self.push(start, end, vec![Category::Medical], form, attrs, 1);
        }
    }

    /// Runs of capitalized words ending in a venue head, e.g. `Medical Imaging
    /// Center`, `Dr. Sharma's Clinic`; `Room 2`-style identifiers; `Dr. Sharma`.
    fn named(&mut self) {
        let tokens = self.tokens.clone();
        let toks = &tokens;
        let n = toks.len();
        let cap = |i: usize| toks.get(i).is_some_and(|t| t.is_word && t.is_capitalized());
        for h in self.speech..n {
            // Room 2, Floor 3, Suite 400
            if cap(h)
                && matches!(toks[h].lower.as_str(), "room" | "floor" | "suite" | "building" | "level")
                && toks.get(h + 1).is_some_and(|t| t.is_word && t.is_numeric())
            {
                let mut start = h;
                while start > self.speech && (cap(start - 1) || toks[start - 1].lower == "'s") {
                    start -= 1;
                }
                let surface = self.surface(start, h + 2);
                self.push(start, h + 2, vec![Category::Spatial], ReferenceForm::Named, [(ATTR_PLACE.to_string(), surface)].into(), 2);
                continue;
            }
            if !(cap(h) && self.lex.venue_heads.match_at(toks, h) == Some(1)) {
                continue;
            }
            let mut start = h;
            loop {
                if start == 0 || start <= self.speech {
                    break;
                }
                let p = start - 1;
                if cap(p) {
                    start = p;
                } else if p > 0
                    && cap(p - 1)
                    && (toks[p].lower == "'s"
                        || (toks[p].text == "." && self.lex.honorifics.match_at(toks, p - 1) == Some(1))
                        || (toks[p].lower == "of" && start < h))
                {
                    // possessive, abbreviated honorific, or `X of Y`
                    start = p - 1;
                } else {
                    break;
                }
            }
            // a sentence-initial determiner is not part of the name
            if is_sentence_start(toks, start, self.speech) && determiner(&toks[start].lower).is_some() {
                start += 1;
            }
            if start == h {
                continue;
            }
            let surface = self.surface(start, h + 1);
            self.push(start, h + 1, vec![Category::Spatial], ReferenceForm::Named, [(ATTR_PLACE.to_string(), surface)].into(), 2);
        }
        // Dr. Sharma, Ms. Lee
        for i in self.speech..n {
            if self.lex.honorifics.match_at(toks, i) != Some(1) || !cap(i) {
                continue;
            }
            let j = if punct(toks, i + 1, ".") { i + 2 } else { i + 1 };
            if cap(j) {
                let surface = self.surface(i, j + 1);
                self.push(i, j + 1, vec![Category::Person], ReferenceForm::Named, [(ATTR_IDENTIFYING.to_string(), surface)].into(), 2);
            }
        }
    }

    /// Determiner, up to three modifiers, a head noun, then an optional
    /// `I recommended`-style relative clause or a person's name.
    fn noun_phrases(&mut self) {
        let toks = self.tokens.clone();
        let n = toks.len();
        for i in self.speech..n {
            let Some(form) = word(&toks, i).and_then(determiner) else { continue };
            let mut best: Option<(usize, usize, Vec<Category>)> = None;
            let mut j = i + 1;
            while j < n && j <= i + 4 {
                if let Some((len, cats)) = self.lex.heads.match_at(&toks, j) {
                    best = Some((j, j + len, cats.clone()));
                }
                let t = &toks[j];
                if !t.is_word || CLOSED_CLASS.contains(&t.lower.as_str()) {
                    break;
                }
                j += 1;
            }
            let Some((_, mut end, cats)) = best else { continue };
            let mut attrs = BTreeMap::new();
            if cats.contains(&Category::Person)
                && toks.get(end).is_some_and(|t| t.is_word && t.is_capitalized() && !CLOSED_CLASS.contains(&t.lower.as_str()))
            {
                attrs.insert(ATTR_IDENTIFYING.to_string(), toks[end].text.clone());
                end += 1;
            } else if word(&toks, end).is_some_and(|w| SUBJECT_PRONOUNS.contains(&w))
                && word(&toks, end + 1).is_some_and(|w| w.len() > 3 && w.ends_with("ed"))
            {
                end += 2;
            }
            self.push(i, end, cats, form, attrs, 3);
        }
    }

    fn deixis(&mut self) {
        let toks = self.tokens.clone();
        let n = toks.len();
        let follows_open = |i: usize| match toks.get(i + 1) {
            None => true,
            Some(t) if !t.is_word => t.text != "'",
            Some(t) => PREPOSITIONS.contains(&t.lower.as_str()),
        };
        for i in self.speech..n {
            let Some(w) = word(&toks, i) else { continue };
            let (cat, form) = match w {
                "it" => (Category::Object, ReferenceForm::Pronoun),
                "them" | "him" => (Category::Person, ReferenceForm::Pronoun),
                "her" if follows_open(i) => (Category::Person, ReferenceForm::Pronoun),
                "here" => (Category::Spatial, ReferenceForm::Proximal),
                "there" => {
                    // existential `there is`, `there's`
                    if matches!(word(&toks, i + 1), Some("'s" | "is" | "are" | "was" | "were" | "'re")) {
                        continue;
                    }
                    (Category::Spatial, ReferenceForm::Distal)
                }
                "that" | "those" if follows_open(i) => (Category::Object, ReferenceForm::Distal),
                "this" | "these" if follows_open(i) => (Category::Object, ReferenceForm::Proximal),
                _ => continue,
            };
            self.push(i, i + 1, vec![cat], form, BTreeMap::new(), 4);
        }
    }

    fn finish(mut self, turn_id: u32) -> Vec<EntityMention> {
        let mut cands = std::mem::take(&mut self.out);
        cands.sort_by(|a, b| {
            (b.end - b.start)
                .cmp(&(a.end - a.start))
                .then(a.rank.cmp(&b.rank))
                .then(a.start.cmp(&b.start))
        });
        let mut taken = vec![false; self.tokens.len()];
        let mut kept = Vec::new();
        for c in cands {
            if taken[c.start..c.end].iter().any(|&t| t) {
                continue;
            }
            taken[c.start..c.end].iter_mut().for_each(|t| *t = true);
            kept.push(c);
        }
        kept.sort_by_key(|c| c.start);
        kept.into_iter()
            .map(|c| {
                let category = pick_category(&c.categories, &c.attributes);
                EntityMention {
                    turn_id,
                    span: (self.tokens[c.start].start, self.tokens[c.end - 1].end),
                    surface: self.surface(c.start, c.end),
                    category,
                    form: c.form,
                    attributes: c.attributes,
                }
            })
            .collect()
    }
}

/// For ambiguous heads, the category with the most missing attributes wins;
/// ties keep lexicon order.
fn pick_category(cats: &[Category], attrs: &BTreeMap<String, String>) -> Category {
    let missing = |c: &Category| required_attributes(*c).iter().filter(|a| !attrs.contains_key(a.as_str())).count();
    let mut best = cats[0];
    for c in &cats[1..] {
        if missing(c) > missing(&best) {
            best = *c;
        }
    }
    best
}

/// All mentions in `turn`, in text order, with non-overlapping spans.
pub fn mentions_in(turn: &Turn, lex: &Lexicons) -> Vec<EntityMention> {
    let mut ex = Extractor::new(lex, &turn.text);
    ex.temporal();
    ex.medical();
    ex.named();
    ex.noun_phrases();
    ex.deixis();
    ex.finish(turn.turn_id)
}

/// Content words of a mention surface: determiners and function words removed.
pub fn content_words(surface: &str) -> Vec<String> {
    tokenize(surface)
        .into_iter()
        .filter(|t| t.is_word && !CLOSED_CLASS.contains(&t.lower.as_str()))
        .map(|t| t.lower)
        .collect()
}

/// The head noun of a mention, when it has one from the head lexicon.
pub fn head_of(surface: &str, lex: &Lexicons) -> Option<String> {
    let tokens = tokenize(surface);
    let mut head = None;
    for i in 0..tokens.len() {
        if let Some((len, _)) = lex.heads.match_at(&tokens, i) {
            head = Some(tokens[i..i + len].iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" "));
        }
    }
    head
}
