//! Word tokenization with character offsets, and phrase lookup over tokens.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Lowercased, with typographic apostrophes folded to `'`.
    pub lower: String,
    /// Character offsets `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub is_word: bool,
}

impl Token {
    pub fn is_capitalized(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_uppercase)
    }

    pub fn is_numeric(&self) -> bool {
        self.text.chars().next().is_some_and(|c| c.is_ascii_digit())
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn joins_word(c: char, prev: Option<char>, next: Option<char>) -> bool {
    let alnum = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
    let digit = |c: Option<char>| c.is_some_and(|c| c.is_ascii_digit());
    match c {
        c if is_apostrophe(c) || c == '-' => alnum(prev) && alnum(next),
        ':' => digit(prev) && digit(next),
        _ => false,
    }
}

const CLITICS: [&str; 6] = ["'s", "'ll", "'re", "'ve", "'d", "'m"];

/// Splits text into word and punctuation tokens. Contractions are split into
/// their host word and clitic (`it's` becomes `it` + `'s`).
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c.is_alphanumeric() {
            let start = i;
            i += 1;
            while i < chars.len() {
                let c = chars[i];
                if c.is_alphanumeric()
                    || joins_word(c, Some(chars[i - 1]), chars.get(i + 1).copied())
                {
                    i += 1;
                } else {
                    break;
                }
            }
            push_word(&chars, start, i, &mut out);
        } else {
            let s: String = c.to_string();
            out.push(Token {
                lower: s.replace('\u{2019}', "'"),
                text: s,
                start: i,
                end: i + 1,
                is_word: false,
            });
            i += 1;
        }
    }
    out
}

fn push_word(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let word: String = chars[start..end].iter().collect();
    let lower = word.to_lowercase().replace('\u{2019}', "'");
    let n = lower.chars().count();
    let mut split_at = None;
    if lower.ends_with("n't") && n > 3 {
        split_at = Some(n - 3);
    } else if let Some(cl) = CLITICS.iter().find(|cl| lower.ends_with(*cl) && n > cl.len()) {
        split_at = Some(n - cl.chars().count());
    }
    let mut emit = |s: usize, e: usize| {
        let text: String = chars[s..e].iter().collect();
        out.push(Token {
            lower: text.to_lowercase().replace('\u{2019}', "'"),
            text,
            start: s,
            end: e,
            is_word: true,
        });
    };
    match split_at {
        Some(k) => {
            emit(start, start + k);
            emit(start + k, end);
        }
        None => emit(start, end),
    }
}

/// Characters `[start, end)` of `text`.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

/// Splits a lexicon phrase the same way text is tokenized, returning the
/// lowercased token strings.
pub fn phrase_tokens(phrase: &str) -> Vec<String> {
    tokenize(phrase).into_iter().map(|t| t.lower).collect()
}

/// Does `phrase` occur at token index `at`?
pub fn matches_at(tokens: &[Token], at: usize, phrase: &[String]) -> bool {
    !phrase.is_empty()
        && at + phrase.len() <= tokens.len()
        && phrase.iter().zip(&tokens[at..]).all(|(p, t)| *p == t.lower)
}

/// Case-folded word set used for token-overlap similarity.
pub fn word_set(text: &str) -> std::collections::BTreeSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.is_word)
        .map(|t| t.lower)
        .collect()
}

/// Removes parenthetical stage directions such as `(smiling)` and returns the
/// character offset where the remaining speech starts.
pub fn speech_start(tokens: &[Token]) -> usize {
    let mut i = 0;
    while i < tokens.len() && tokens[i].text == "(" {
        match tokens[i..].iter().position(|t| t.text == ")") {
            Some(close) => i += close + 1,
            None => break,
        }
    }
    i
}
