//! Plain-text lexicons.
//!
//! Two file shapes are supported, both with `#` comments and blank lines
//! ignored:
//!
//! - word lists: one phrase per line
//! - mappings: `key = value` per line
//!
//! Every lexicon has a built-in default compiled from `lexicons/*.txt`;
//! [`Lexicons::from_dir`] overrides any of them with a same-named file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use regex::Regex;

use crate::error::{ConcordError, Result};
use crate::model::{Category, Sensitivity};
use crate::text::{matches_at, phrase_tokens, Token};

/// A set of phrases matched against token sequences, longest first.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordList {
    phrases: Vec<Vec<String>>,
}

impl WordList {
    pub fn new<I, S>(phrases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut phrases: Vec<Vec<String>> = phrases
            .into_iter()
            .map(|p| phrase_tokens(p.as_ref()))
            .filter(|p| !p.is_empty())
            .collect();
        phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        phrases.dedup();
        WordList { phrases }
    }

    pub fn parse(name: &str, source: &str) -> Result<Self> {
        let lines = content_lines(source);
        if let Some((line, _)) = lines.iter().find(|(_, l)| l.contains(" = ")) {
            return Err(ConcordError::Lexicon {
                name: name.into(),
                line: *line,
                message: "word lists hold one phrase per line".into(),
            });
        }
        Ok(WordList::new(lines.into_iter().map(|(_, l)| l)))
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    /// Longest phrase matching at token index `at`, as a token count.
    pub fn match_at(&self, tokens: &[Token], at: usize) -> Option<usize> {
        self.phrases
            .iter()
            .find(|p| matches_at(tokens, at, p))
            .map(Vec::len)
    }

    /// Leftmost-longest, non-overlapping matches as `(start, len)` token ranges.
    pub fn find_all(&self, tokens: &[Token]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            match self.match_at(tokens, i) {
                Some(len) => {
                    out.push((i, len));
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }

    pub fn count(&self, tokens: &[Token]) -> usize {
        self.find_all(tokens).len()
    }

    pub fn any(&self, tokens: &[Token]) -> bool {
        (0..tokens.len()).any(|i| self.match_at(tokens, i).is_some())
    }

    /// Whether the tokens starting at `at` begin with one of the phrases.
    pub fn starts_at(&self, tokens: &[Token], at: usize) -> Option<usize> {
        self.match_at(tokens, at)
    }
}

/// An ordered phrase → value mapping; the longest phrase wins at each position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhraseMap<V> {
    entries: Vec<(Vec<String>, V)>,
}

impl<V> Default for PhraseMap<V> {
    fn default() -> Self {
        PhraseMap { entries: Vec::new() }
    }
}

impl<V: Clone> PhraseMap<V> {
    pub fn new(entries: Vec<(String, V)>) -> Self {
        let mut entries: Vec<(Vec<String>, V)> = entries
            .into_iter()
            .map(|(k, v)| (phrase_tokens(&k), v))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        // stable: equal-length phrases keep file order
        entries.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
        PhraseMap { entries }
    }

    pub fn parse_with<F>(name: &str, source: &str, mut value: F) -> Result<Self>
    where
        F: FnMut(&str) -> std::result::Result<V, String>,
    {
        let mut entries = Vec::new();
        for (line, (k, v)) in mapping_lines(name, source)? {
            let v = value(&v).map_err(|message| ConcordError::Lexicon {
                name: name.into(),
                line,
                message,
            })?;
            entries.push((k, v));
        }
        Ok(PhraseMap::new(entries))
    }

    pub fn match_at(&self, tokens: &[Token], at: usize) -> Option<(usize, &V)> {
        self.entries
            .iter()
            .find(|(p, _)| matches_at(tokens, at, p))
            .map(|(p, v)| (p.len(), v))
    }

    pub fn get(&self, phrase: &str) -> Option<&V> {
        let key = phrase_tokens(phrase);
        self.entries.iter().find(|(p, _)| *p == key).map(|(_, v)| v)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First entry (in file order within equal lengths) found anywhere in the tokens.
    pub fn first_in(&self, tokens: &[Token]) -> Option<&V> {
        let mut best: Option<(usize, usize)> = None;
        for (idx, (p, _)) in self.entries.iter().enumerate() {
            if (0..tokens.len()).any(|i| matches_at(tokens, i, p)) {
                best = match best {
                    Some((b, _)) if b <= idx => best,
                    _ => Some((idx, 0)),
                };
            }
        }
        best.map(|(idx, _)| &self.entries[idx].1)
    }

    pub fn values(&self) -> impl Iterator<Item = &V> {
        self.entries.iter().map(|(_, v)| v)
    }
}

fn content_lines(source: &str) -> Vec<(usize, String)> {
    source
        .lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.trim();
            (!line.is_empty() && !line.starts_with('#')).then(|| (i + 1, line.to_string()))
        })
        .collect()
}

fn mapping_lines(name: &str, source: &str) -> Result<Vec<(usize, (String, String))>> {
    content_lines(source)
        .into_iter()
        .map(|(line, l)| match l.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
                Ok((line, (k.trim().to_string(), v.trim().to_string())))
            }
            _ => Err(ConcordError::Lexicon {
                name: name.into(),
                line,
                message: "expected `key = value`".into(),
            }),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MedicalKind {
    /// A specific drug or treatment name.
    Name,
    /// A generic reference such as `medication`.
    Generic,
}

/// Where a slot rule looks for its keywords.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotMatcher {
    Any,
    /// Keywords in the mention surface.
    Head(WordList),
    /// A named cue list matched in the focus turn.
    Focus(String),
    /// A named cue list matched anywhere in the reference window.
    Window(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotRule {
    /// `None` matches every category.
    pub category: Option<Category>,
    pub matcher: SlotMatcher,
    pub slot: String,
}

fn parse_slot_rules(source: &str) -> Result<Vec<SlotRule>> {
    let err = |line: usize, message: String| ConcordError::Lexicon {
        name: "slots".into(),
        line,
        message,
    };
    let mut rules = Vec::new();
    for (line, (lhs, slot)) in mapping_lines("slots", source)? {
        let mut parts = lhs.split_whitespace();
        let cat = parts.next().ok_or_else(|| err(line, "missing category".into()))?;
        let category = match cat {
            "*" => None,
            c => Some(Category::from_str(c).map_err(|e| err(line, e.to_string()))?),
        };
        let matcher = match parts.next() {
            None | Some("*") => SlotMatcher::Any,
            Some(m) => match m.split_once(':') {
                Some(("head", words)) => SlotMatcher::Head(WordList::new(words.split(','))),
                Some(("focus", cue)) => SlotMatcher::Focus(cue.to_string()),
                Some(("window", cue)) => SlotMatcher::Window(cue.to_string()),
                _ => return Err(err(line, format!("unknown matcher `{m}`"))),
            },
        };
        if parts.next().is_some() {
            return Err(err(line, "trailing tokens".into()));
        }
        rules.push(SlotRule { category, matcher, slot });
    }
    Ok(rules)
}

macro_rules! builtin {
    ($name:literal) => {
        ($name, include_str!(concat!("../lexicons/", $name, ".txt")))
    };
}

const BUILTIN: &[(&str, &str)] = &[
    builtin!("heads"),
    builtin!("venue_heads"),
    builtin!("medical"),
    builtin!("frequency"),
    builtin!("relative_time"),
    builtin!("ack_cues"),
    builtin!("smalltalk"),
    builtin!("slots"),
    builtin!("symptom_cues"),
    builtin!("escalation_cues"),
    builtin!("appointment_cues"),
    builtin!("honorifics"),
    builtin!("distancing"),
    builtin!("endearments"),
    builtin!("private_spaces"),
    builtin!("collective"),
    builtin!("greetings"),
    builtin!("sensitivity"),
    builtin!("critical"),
    builtin!("privacy_cues"),
];

/// All lexicons used by the pipeline. Immutable once loaded.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub heads: PhraseMap<Vec<Category>>,
    pub venue_heads: WordList,
    pub medical: PhraseMap<MedicalKind>,
    pub frequency: WordList,
    /// Relative day expressions with their day offset; `None` cannot be anchored.
    pub relative_time: PhraseMap<Option<i64>>,
    pub ack_cues: WordList,
    /// Small-talk phrases with the low-value slot they map to.
    pub smalltalk: PhraseMap<String>,
    pub slot_rules: Vec<SlotRule>,
    pub cues: BTreeMap<String, WordList>,
    pub honorifics: WordList,
    pub distancing: WordList,
    pub endearments: WordList,
    pub private_spaces: WordList,
    pub collective: WordList,
    pub greetings: WordList,
    pub sensitivity: PhraseMap<Sensitivity>,
    /// `slot:NAME` entries from the sensitivity lexicon.
    pub slot_grades: BTreeMap<String, Sensitivity>,
    pub critical: Vec<(String, Regex)>,
    pub privacy_cues: WordList,
}

impl Default for Lexicons {
    fn default() -> Self {
        Lexicons::from_sources(|_| None).expect("built-in lexicons parse")
    }
}

impl Lexicons {
    /// Loads built-ins, replacing any lexicon that has a `<name>.txt` in `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut overrides = BTreeMap::new();
        for (name, _) in BUILTIN {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                overrides.insert(*name, fs::read_to_string(path)?);
            }
        }
        Lexicons::from_sources(|name| overrides.get(name).cloned())
    }

    pub fn from_sources<F>(mut lookup: F) -> Result<Self>
    where
        F: FnMut(&str) -> Option<String>,
    {
        let mut src: BTreeMap<&str, String> = BTreeMap::new();
        for (name, builtin) in BUILTIN {
            src.insert(name, lookup(name).unwrap_or_else(|| builtin.to_string()));
        }
        let words = |name: &str| WordList::parse(name, &src[name]);

        let heads = PhraseMap::parse_with("heads", &src["heads"], |v| {
            v.split(',')
                .map(|c| Category::from_str(c).map_err(|e| e.to_string()))
                .collect()
        })?;
        let medical = PhraseMap::parse_with("medical", &src["medical"], |v| match v {
            "name" => Ok(MedicalKind::Name),
            "generic" => Ok(MedicalKind::Generic),
            _ => Err(format!("expected `name` or `generic`, got `{v}`")),
        })?;
        let relative_time = PhraseMap::parse_with("relative_time", &src["relative_time"], |v| {
            if v == "none" {
                Ok(None)
            } else {
                v.trim_start_matches('+')
                    .parse::<i64>()
                    .map(Some)
                    .map_err(|_| format!("expected a day offset or `none`, got `{v}`"))
            }
        })?;
        let smalltalk = PhraseMap::parse_with("smalltalk", &src["smalltalk"], |v| Ok(v.to_string()))?;

        let mut sensitivity_entries = Vec::new();
        let mut slot_grades = BTreeMap::new();
        for (line, (k, v)) in mapping_lines("sensitivity", &src["sensitivity"])? {
            let grade = Sensitivity::from_str(&v).map_err(|e| ConcordError::Lexicon {
                name: "sensitivity".into(),
                line,
                message: e.to_string(),
            })?;
            if grade == Sensitivity::Critical {
                return Err(ConcordError::Lexicon {
                    name: "sensitivity".into(),
                    line,
                    message: "Critical is reserved for the critical lexicon".into(),
                });
            }
            match k.strip_prefix("slot:") {
                Some(slot) => {
                    slot_grades.insert(slot.trim().to_string(), grade);
                }
                None => sensitivity_entries.push((k, grade)),
            }
        }

        let mut critical = Vec::new();
        for (line, (class, pattern)) in mapping_lines("critical", &src["critical"])? {
            let re = Regex::new(&pattern).map_err(|e| ConcordError::Lexicon {
                name: "critical".into(),
                line,
                message: e.to_string(),
            })?;
            critical.push((class, re));
        }

        let mut cues = BTreeMap::new();
        for cue in ["symptom", "escalation", "appointment"] {
            cues.insert(cue.to_string(), words(&format!("{cue}_cues"))?);
        }
        let slot_rules = parse_slot_rules(&src["slots"])?;
        for rule in &slot_rules {
            if let SlotMatcher::Focus(c) | SlotMatcher::Window(c) = &rule.matcher {
                if !cues.contains_key(c) {
                    return Err(ConcordError::Lexicon {
                        name: "slots".into(),
                        line: 0,
                        message: format!("unknown cue list `{c}`"),
                    });
                }
            }
        }

        Ok(Lexicons {
            heads,
            venue_heads: words("venue_heads")?,
            medical,
            frequency: words("frequency")?,
            relative_time,
            ack_cues: words("ack_cues")?,
            smalltalk,
            slot_rules,
            cues,
            honorifics: words("honorifics")?,
            distancing: words("distancing")?,
            endearments: words("endearments")?,
            private_spaces: words("private_spaces")?,
            collective: words("collective")?,
            greetings: words("greetings")?,
            sensitivity: PhraseMap::new(sensitivity_entries),
            slot_grades,
            critical,
            privacy_cues: words("privacy_cues")?,
        })
    }

    pub fn cue(&self, name: &str) -> &WordList {
        static EMPTY: WordList = WordList { phrases: Vec::new() };
        self.cues.get(name).unwrap_or(&EMPTY)
    }

    /// Categories that can fill `slot`, derived from the slot rules.
    /// An empty result means any category.
    pub fn slot_categories(&self, slot: &str) -> Vec<Category> {
        let mut out = Vec::new();
        for rule in self.slot_rules.iter().filter(|r| r.slot == slot) {
            match rule.category {
                None => return Vec::new(),
                Some(c) if !out.contains(&c) => out.push(c),
                _ => {}
            }
        }
        out
    }

    /// All slot names the rules can produce, plus the small-talk slots.
    pub fn slot_vocabulary(&self) -> Vec<String> {
        let mut out: Vec<String> = self.slot_rules.iter().map(|r| r.slot.clone()).collect();
        out.extend(self.smalltalk.values().cloned());
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    #[test]
    fn builtins_load() {
        let lex = Lexicons::default();
        assert!(!lex.heads.is_empty());
        assert!(lex.slot_vocabulary().contains(&"LOCATION_DESTINATION".to_string()));
        assert!(lex.slot_vocabulary().contains(&"GENERAL_ATTRIBUTE".to_string()));
    }

    #[test]
    fn word_list_longest_match() {
        let wl = WordList::new(["could you", "could"]);
        let toks = tokenize("Could you help");
        assert_eq!(wl.match_at(&toks, 0), Some(2));
        assert_eq!(wl.count(&toks), 1);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let wl = WordList::parse("x", "# header\n\nbabe\n  # indented comment\nmom\n").unwrap();
        assert_eq!(wl.len(), 2);
    }

    #[test]
    fn word_list_rejects_mapping_lines() {
        assert!(WordList::parse("x", "a = b\n").is_err());
    }

    #[test]
    fn override_from_dir() {
        let dir = std::env::temp_dir().join(format!("concord-lex-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("smalltalk.txt"), "# none\n").unwrap();
        let lex = Lexicons::from_dir(&dir).unwrap();
        assert!(lex.smalltalk.is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn bad_critical_regex_reports_line() {
        let err = Lexicons::from_sources(|n| (n == "critical").then(|| "# c\nbad = (\n".to_string()))
            .unwrap_err();
        assert!(matches!(err, ConcordError::Lexicon { line: 2, .. }));
    }

    #[test]
    fn slot_categories_from_rules() {
        let lex = Lexicons::default();
        assert_eq!(lex.slot_categories("LOCATION_DESTINATION"), vec![Category::Spatial]);
        assert_eq!(lex.slot_categories("APPOINTMENT_TIME"), vec![Category::Temporal]);
    }
}
