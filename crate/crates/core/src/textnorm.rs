//! Text normalization, placeholder masking, tokenization and truecasing.
//!
//! All operations are pure per-line functions. `normalize` is idempotent and
//! lossy by design; `mask_placeholders`/`unmask` form an exact inverse pair
//! on normalized text; `tokenize` conserves non-whitespace characters.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextNormError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed truecase model line (want `form<TAB>count`)")]
    ModelFormat { path: PathBuf, line: u64 },
    #[error("no slot recorded for placeholder {token}")]
    MissingSlot { token: String },
}

/// Decode `&amp;` `&lt;` `&gt;` `&quot;` `&#NNN;` `&#xHH;` once, left to right.
/// Unknown or invalid entities are copied through unchanged.
fn decode_entities_once(text: &str) -> String {
    static ENTITY: LazyLock<Regex> =
        LazyLock::new(|| Regex::new(r"&(?:amp|lt|gt|quot|#[0-9]+|#x[0-9a-fA-F]+);").unwrap());
    ENTITY
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let m = caps.get(0).unwrap().as_str();
            let body = &m[1..m.len() - 1];
            let decoded = match body {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                _ => {
                    let digits = &body[1..];
                    let parsed = if let Some(hex) = digits.strip_prefix('x') {
                        u32::from_str_radix(hex, 16)
                    } else {
                        digits.parse::<u32>()
                    };
                    parsed.ok().and_then(char::from_u32)
                }
            };
            match decoded {
                Some(c) => c.to_string(),
                None => m.to_string(),
            }
        })
        .into_owned()
}

fn map_char(c: char) -> char {
    match c {
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{201F}' | '\u{00AB}' | '\u{00BB}' => '"',
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{201B}' | '\u{2039}' | '\u{203A}'
        | '\u{02BC}' => '\'',
        '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2015}' => '-',
        '\u{00A0}' => ' ',
        other => other,
    }
}

/// Normalize punctuation and whitespace in one line of text.
///
/// HTML entities are decoded to a fixpoint (each pass shortens the text, so
/// this terminates), typographic quotes/dashes are mapped to ASCII, and all
/// whitespace runs collapse to a single space with the ends trimmed. The
/// output therefore never contains tab, CR or LF, and the function is
/// idempotent.
pub fn normalize(text: &str) -> String {
    let mut decoded = decode_entities_once(text);
    loop {
        let next = decode_entities_once(&decoded);
        if next == decoded {
            break;
        }
        decoded = next;
    }
    let mapped: String = decoded.chars().map(map_char).collect();
    let mut out = String::with_capacity(mapped.len());
    let mut in_ws = false;
    for c in mapped.chars() {
        if c.is_whitespace() {
            in_ws = true;
        } else {
            if in_ws && !out.is_empty() {
                out.push(' ');
            }
            in_ws = false;
            out.push(c);
        }
    }
    out
}

/// Category of a masked substring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PlaceholderKind {
    Email,
    Url,
    Tag,
}

impl PlaceholderKind {
    fn label(self) -> &'static str {
        match self {
            PlaceholderKind::Email => "EMAIL",
            PlaceholderKind::Url => "URL",
            PlaceholderKind::Tag => "TAG",
        }
    }
}

/// One masked substring: `__<KIND>_<index>__` in the text maps back to
/// `original`. Indices start at 1 and are contiguous per kind per sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub kind: PlaceholderKind,
    pub index: u32,
    pub original: String,
}

/// Sidecar record holding every slot of one sentence, in placeholder order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderMap {
    pub slots: Vec<Slot>,
}

impl PlaceholderMap {
    fn get(&self, kind: PlaceholderKind, index: u32) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.kind == kind && s.index == index)
    }
}

/// Masked text plus the map needed to restore it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Masked {
    pub text: String,
    pub map: PlaceholderMap,
}

/// Restored text plus the number of slots the text never referenced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unmasked {
    pub text: String,
    pub unused_slots: usize,
}

static URL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:https?://|www\.)\S+").unwrap());
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[a-zA-Z/!?][^<>]*>").unwrap());
static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"__(EMAIL|URL|TAG)_([0-9]+)__").unwrap());

/// Replace emails, URLs and XML-ish tags with numbered placeholder tokens.
///
/// Candidates from all three patterns are resolved longest-match-first with
/// ties going to the leftmost; survivors are numbered left to right per kind.
pub fn mask_placeholders(text: &str) -> Masked {
    struct Candidate {
        kind: PlaceholderKind,
        start: usize,
        end: usize,
    }
    let mut candidates = Vec::new();
    for m in URL.find_iter(text) {
        // a URL match runs to the next whitespace; trailing punctuation
        // belongs to the sentence, not the URL
        let trimmed = m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']', '}', '>', '"', '\'']);
        candidates.push(Candidate {
            kind: PlaceholderKind::Url,
            start: m.start(),
            end: m.start() + trimmed.len(),
        });
    }
    for m in EMAIL.find_iter(text) {
        candidates.push(Candidate {
            kind: PlaceholderKind::Email,
            start: m.start(),
            end: m.end(),
        });
    }
    for m in TAG.find_iter(text) {
        candidates.push(Candidate {
            kind: PlaceholderKind::Tag,
            start: m.start(),
            end: m.end(),
        });
    }
    candidates.sort_by(|a, b| {
        (b.end - b.start)
            .cmp(&(a.end - a.start))
            .then(a.start.cmp(&b.start))
            .then((a.kind as u8).cmp(&(b.kind as u8)))
    });
    let mut accepted: Vec<Candidate> = Vec::new();
    for c in candidates {
        if accepted.iter().all(|a| c.end <= a.start || c.start >= a.end) {
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|c| c.start);

    let mut out = String::with_capacity(text.len());
    let mut slots = Vec::with_capacity(accepted.len());
    let mut counters: HashMap<PlaceholderKind, u32> = HashMap::new();
    let mut last = 0;
    for c in accepted {
        let index = counters.entry(c.kind).or_insert(0);
        *index += 1;
        out.push_str(&text[last..c.start]);
        out.push_str(&format!("__{}_{}__", c.kind.label(), index));
        slots.push(Slot {
            kind: c.kind,
            index: *index,
            original: text[c.start..c.end].to_string(),
        });
        last = c.end;
    }
    out.push_str(&text[last..]);
    Masked {
        text: out,
        map: PlaceholderMap { slots },
    }
}

/// Substitute placeholder tokens back with their recorded originals.
///
/// A placeholder without a matching slot is an error; slots the text never
/// references are ignored and counted.
pub fn unmask(text: &str, map: &PlaceholderMap) -> Result<Unmasked, TextNormError> {
    let mut out = String::with_capacity(text.len());
    let mut used = vec![false; map.slots.len()];
    let mut last = 0;
    for caps in PLACEHOLDER.captures_iter(text) {
        let m = caps.get(0).unwrap();
        let kind = match &caps[1] {
            "EMAIL" => PlaceholderKind::Email,
            "URL" => PlaceholderKind::Url,
            _ => PlaceholderKind::Tag,
        };
        let index: u32 = caps[2].parse().unwrap_or(0);
        let slot = map
            .get(kind, index)
            .ok_or_else(|| TextNormError::MissingSlot {
                token: m.as_str().to_string(),
            })?;
        used[slot] = true;
        out.push_str(&text[last..m.start()]);
        out.push_str(&map.slots[slot].original);
        last = m.end();
    }
    out.push_str(&text[last..]);
    Ok(Unmasked {
        text: out,
        unused_slots: used.iter().filter(|&&u| !u).count(),
    })
}

fn scan_core(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<char> = chunk.chars().collect();
    let mut cur = String::new();
    for i in 0..chars.len() {
        let c = chars[i];
        if c.is_alphanumeric() {
            cur.push(c);
            continue;
        }
        let prev = i.checked_sub(1).map(|j| chars[j]);
        let next = chars.get(i + 1).copied();
        // word-internal apostrophes/hyphens stay attached; `.`/`,` stay
        // attached only between digits (decimal and grouping separators)
        let attach = match c {
            '\'' | '-' => {
                prev.is_some_and(|p| p.is_alphanumeric()) && next.is_some_and(|n| n.is_alphanumeric())
            }
            '.' | ',' => {
                prev.is_some_and(|p| p.is_ascii_digit()) && next.is_some_and(|n| n.is_ascii_digit())
            }
            _ => false,
        };
        if attach {
            cur.push(c);
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(c.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
}

/// Split one line into tokens.
///
/// Placeholder tokens are atomic; otherwise every non-alphanumeric character
/// becomes its own token unless it is a word-internal apostrophe/hyphen or a
/// digit-separating `.`/`,`. Tokens are never empty, and concatenating them
/// restores the input minus whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if chunk.contains("__") {
            let mut last = 0;
            for m in PLACEHOLDER.find_iter(chunk) {
                scan_core(&chunk[last..m.start()], &mut out);
                out.push(m.as_str().to_string());
                last = m.end();
            }
            scan_core(&chunk[last..], &mut out);
        } else {
            scan_core(chunk, &mut out);
        }
    }
    out
}

/// Join tokens with spaces, dropping the space before closing punctuation
/// (`,.;:!?)]}%`) and after opening brackets (`([{`).
pub fn detokenize(tokens: &[String]) -> String {
    let joined = tokens.join(" ");
    let mut out = String::with_capacity(joined.len());
    let chars: Vec<char> = joined.chars().collect();
    for i in 0..chars.len() {
        let c = chars[i];
        if c == ' ' {
            let next_closes = chars
                .get(i + 1)
                .is_some_and(|n| ",.;:!?)]}%".contains(*n));
            let prev_opens = out.chars().last().is_some_and(|p| "([{".contains(p));
            let doubled = out.ends_with(' ');
            if next_closes || prev_opens || doubled {
                continue;
            }
        }
        out.push(c);
    }
    out
}

/// Most-frequent-surface-form truecasing model.
///
/// `table` maps each lowercased key to the most frequent surface form seen at
/// non-sentence-initial positions; ties go to the form seen first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruecaseModel {
    table: HashMap<String, String>,
    counts: HashMap<String, u64>,
    first_seen: HashMap<String, u64>,
}

impl TruecaseModel {
    pub fn lookup(&self, key: &str) -> Option<&str> {
        self.table.get(key).map(|s| s.as_str())
    }

    pub fn count(&self, form: &str) -> u64 {
        self.counts.get(form).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    fn rebuild_table(&mut self) {
        self.table.clear();
        let mut forms: Vec<&String> = self.counts.keys().collect();
        // argmax per key: highest count, then earliest first seen
        forms.sort_by(|a, b| {
            let ka = (&self.counts[*a], std::cmp::Reverse(self.first_seen[*a]));
            let kb = (&self.counts[*b], std::cmp::Reverse(self.first_seen[*b]));
            kb.cmp(&ka)
        });
        for form in forms {
            self.table.entry(form.to_lowercase()).or_insert_with(|| form.clone());
        }
    }

    /// Serialize as `surface_form<TAB>count`, sorted by lowercased key, then
    /// count descending, then first-seen order. The loader's first-line-per-
    /// key rule reconstructs the same table.
    pub fn save(&self, path: &Path) -> Result<(), TextNormError> {
        let mut rows: Vec<(&String, u64, u64)> = self
            .counts
            .iter()
            .map(|(form, &count)| (form, count, self.first_seen[form]))
            .collect();
        rows.sort_by(|a, b| {
            a.0.to_lowercase()
                .cmp(&b.0.to_lowercase())
                .then(b.1.cmp(&a.1))
                .then(a.2.cmp(&b.2))
        });
        let mut out = String::new();
        for (form, count, _) in rows {
            out.push_str(form);
            out.push('\t');
            out.push_str(&count.to_string());
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| TextNormError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TextNormError> {
        let body = std::fs::read_to_string(path).map_err(|source| TextNormError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut model = TruecaseModel::default();
        for (i, line) in body.lines().enumerate() {
            let (form, count) = line
                .split_once('\t')
                .and_then(|(f, c)| c.parse::<u64>().ok().map(|c| (f, c)))
                .ok_or(TextNormError::ModelFormat {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                })?;
            *model.counts.entry(form.to_string()).or_insert(0) += count;
            model.first_seen.entry(form.to_string()).or_insert(i as u64);
        }
        model.rebuild_table();
        Ok(model)
    }
}

/// Count surface forms at non-sentence-initial positions and pick the most
/// frequent form per lowercased key.
pub fn truecase_train<S: AsRef<[String]>>(sentences: &[S]) -> TruecaseModel {
    let mut model = TruecaseModel::default();
    let mut position = 0u64;
    for sent in sentences {
        for token in sent.as_ref().iter().skip(1) {
            *model.counts.entry(token.clone()).or_insert(0) += 1;
            model.first_seen.entry(token.clone()).or_insert(position);
            position += 1;
        }
    }
    model.rebuild_table();
    model
}

/// Recase the sentence-initial token using the model; all other tokens pass
/// through untouched.
pub fn truecase_apply(tokens: &mut [String], model: &TruecaseModel) {
    if let Some(first) = tokens.first_mut() {
        if let Some(form) = model.lookup(&first.to_lowercase()) {
            *first = form.to_string();
        }
    }
}

/// Uppercase the first letter of the sentence-initial token.
pub fn detruecase(tokens: &mut [String]) {
    if let Some(first) = tokens.first_mut() {
        let mut chars = first.chars();
        if let Some(c) = chars.next() {
            let rest: String = chars.collect();
            *first = c.to_uppercase().chain(rest.chars()).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalize_quotes_and_entities() {
        assert_eq!(normalize("\u{201C}a\u{201D} &amp; \u{2018}b\u{2019}"), "\"a\" & 'b'");
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("a  b"), "a b");
        assert_eq!(normalize("  a\tb \u{00A0} c  "), "a b c");
    }

    #[test]
    fn normalize_plain_text_unchanged() {
        assert_eq!(normalize("plain ascii text."), "plain ascii text.");
    }

    #[test]
    fn normalize_numeric_entities() {
        assert_eq!(normalize("&#65;&#x42;"), "AB");
        // double-encoded entity decodes to fixpoint
        assert_eq!(normalize("&amp;amp;"), "&");
        // invalid codepoint left alone
        assert_eq!(normalize("&#x110000;"), "&#x110000;");
    }

    #[test]
    fn normalize_dashes() {
        assert_eq!(normalize("a\u{2013}b\u{2014}c"), "a-b-c");
    }

    #[test]
    fn normalize_idempotent_on_samples() {
        for s in [
            "\u{201C}a\u{201D} &amp; \u{2018}b\u{2019}",
            "a  b",
            "&amp;amp;lt;",
            "x \u{00A0}\t y",
        ] {
            let once = normalize(s);
            assert_eq!(normalize(&once), once, "input: {s:?}");
        }
    }

    #[test]
    fn mask_single_url() {
        let masked = mask_placeholders("see http://x.io now");
        assert_eq!(masked.text, "see __URL_1__ now");
        assert_eq!(
            masked.map.slots,
            vec![Slot {
                kind: PlaceholderKind::Url,
                index: 1,
                original: "http://x.io".to_string()
            }]
        );
    }

    #[test]
    fn mask_numbers_emails_left_to_right() {
        let masked = mask_placeholders("a@b.com or c@d.org");
        assert_eq!(masked.text, "__EMAIL_1__ or __EMAIL_2__");
        assert_eq!(masked.map.slots[0].original, "a@b.com");
        assert_eq!(masked.map.slots[1].original, "c@d.org");
    }

    #[test]
    fn mask_plain_text_no_slots() {
        let masked = mask_placeholders("nothing special here");
        assert_eq!(masked.text, "nothing special here");
        assert!(masked.map.slots.is_empty());
    }

    #[test]
    fn mask_tag() {
        let masked = mask_placeholders("a <b>bold</b> word");
        assert_eq!(masked.text, "a __TAG_1__bold__TAG_2__ word");
    }

    #[test]
    fn mask_url_strips_trailing_punctuation() {
        let masked = mask_placeholders("go to www.example.com.");
        assert_eq!(masked.text, "go to __URL_1__.");
        assert_eq!(masked.map.slots[0].original, "www.example.com");
    }

    #[test]
    fn mask_overlap_longest_wins() {
        // the URL contains an email-shaped substring; the longer URL match wins
        let text = "http://x.io/mail@host.com/page";
        let masked = mask_placeholders(text);
        assert_eq!(masked.text, "__URL_1__");
        assert_eq!(masked.map.slots[0].original, text);
    }

    #[test]
    fn unmask_restores_originals() {
        let map = PlaceholderMap {
            slots: vec![Slot {
                kind: PlaceholderKind::Url,
                index: 1,
                original: "http://x.io".to_string(),
            }],
        };
        let got = unmask("go __URL_1__", &map).unwrap();
        assert_eq!(got.text, "go http://x.io");
        assert_eq!(got.unused_slots, 0);
    }

    #[test]
    fn unmask_missing_slot_names_token() {
        let err = unmask("go __URL_2__", &PlaceholderMap::default()).unwrap_err();
        match err {
            TextNormError::MissingSlot { token } => assert_eq!(token, "__URL_2__"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unmask_counts_unused_slots() {
        let map = PlaceholderMap {
            slots: vec![
                Slot {
                    kind: PlaceholderKind::Url,
                    index: 1,
                    original: "http://a.io".to_string(),
                },
                Slot {
                    kind: PlaceholderKind::Email,
                    index: 1,
                    original: "x@y.zz".to_string(),
                },
            ],
        };
        let got = unmask("only __URL_1__ here", &map).unwrap();
        assert_eq!(got.text, "only http://a.io here");
        assert_eq!(got.unused_slots, 1);
    }

    #[test]
    fn unmask_inverts_mask() {
        for text in [
            "see http://x.io now",
            "a@b.com or c@d.org",
            "a <b>bold</b> word and www.site.org, plus x@y.zz!",
            "plain",
        ] {
            let normalized = normalize(text);
            let masked = mask_placeholders(&normalized);
            let restored = unmask(&masked.text, &masked.map).unwrap();
            assert_eq!(restored.text, normalized);
            assert_eq!(restored.unused_slots, 0);
        }
    }

    #[test]
    fn tokenize_splits_punctuation() {
        assert_eq!(tokenize("Hello, world!"), toks(&["Hello", ",", "world", "!"]));
    }

    #[test]
    fn tokenize_placeholder_atomic() {
        assert_eq!(tokenize("__URL_1__."), toks(&["__URL_1__", "."]));
    }

    #[test]
    fn tokenize_keeps_internal_apostrophe_and_hyphen() {
        assert_eq!(tokenize("don't"), toks(&["don't"]));
        assert_eq!(tokenize("e-mail"), toks(&["e-mail"]));
        assert_eq!(tokenize("'tis"), toks(&["'", "tis"]));
    }

    #[test]
    fn tokenize_keeps_decimal_numbers() {
        assert_eq!(tokenize("3,5"), toks(&["3,5"]));
        assert_eq!(tokenize("1.234,56"), toks(&["1.234,56"]));
        assert_eq!(tokenize("3,"), toks(&["3", ","]));
    }

    #[test]
    fn tokenize_conserves_characters() {
        for text in [
            "Hello, world!",
            "a (b) c -- d... 3,5% of €2",
            "__URL_1__, see x__TAG_2__y",
            "",
        ] {
            let tokens = tokenize(text);
            assert!(tokens.iter().all(|t| !t.is_empty()));
            let joined: String = tokens.concat();
            let stripped: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            assert_eq!(joined, stripped, "input: {text:?}");
        }
    }

    #[test]
    fn detokenize_examples() {
        assert_eq!(detokenize(&toks(&["Hello", ",", "world", "!"])), "Hello, world!");
        assert_eq!(detokenize(&[]), "");
        assert_eq!(detokenize(&toks(&["a", "(", "b", ")"])), "a (b)");
    }

    #[test]
    fn detokenize_inverts_tokenize_on_simple_sentences() {
        for s in [
            "Hello, world!",
            "He said yes.",
            "A (quick) test!",
            "Wait; really?",
            "One, two: three.",
            "100% done",
        ] {
            assert_eq!(detokenize(&tokenize(s)), s, "input: {s:?}");
        }
    }

    #[test]
    fn truecase_train_hand_count() {
        let sents = vec![toks(&["The", "cat", "."]), toks(&["the", "cat", "."])];
        let model = truecase_train(&sents);
        assert_eq!(model.lookup("cat"), Some("cat"));
        assert_eq!(model.lookup("."), Some("."));
        // "the" appears only sentence-initially, so it has no entry
        assert_eq!(model.lookup("the"), None);
        assert_eq!(model.count("cat"), 2);
    }

    #[test]
    fn truecase_train_all_uppercase() {
        let sents = vec![toks(&["ON", "THE", "HILL"])];
        let model = truecase_train(&sents);
        assert_eq!(model.lookup("the"), Some("THE"));
        assert_eq!(model.lookup("hill"), Some("HILL"));
    }

    #[test]
    fn truecase_train_empty() {
        let model = truecase_train::<Vec<String>>(&[]);
        assert!(model.is_empty());
    }

    #[test]
    fn truecase_train_argmax_and_ties() {
        // "Paris" twice vs "paris" once: argmax wins
        let sents = vec![toks(&["x", "Paris", "paris", "Paris"])];
        let model = truecase_train(&sents);
        assert_eq!(model.lookup("paris"), Some("Paris"));
        // tie between "Bonn" and "BONN": first seen wins
        let sents = vec![toks(&["x", "BONN", "Bonn"])];
        let model = truecase_train(&sents);
        assert_eq!(model.lookup("bonn"), Some("BONN"));
    }

    #[test]
    fn truecase_apply_examples() {
        let sents = vec![toks(&["x", "the", "cat"])];
        let model = truecase_train(&sents);
        let mut tokens = toks(&["The", "cat"]);
        truecase_apply(&mut tokens, &model);
        assert_eq!(tokens, toks(&["the", "cat"]));

        let mut unknown = toks(&["Zxq", "cat"]);
        truecase_apply(&mut unknown, &model);
        assert_eq!(unknown[0], "Zxq");
    }

    #[test]
    fn truecase_apply_touches_only_initial_token() {
        let sents = vec![toks(&["x", "a", "The", "The"])];
        let model = truecase_train(&sents);
        let mut tokens = toks(&["a", "the", "THE"]);
        truecase_apply(&mut tokens, &model);
        assert_eq!(&tokens[1..], &toks(&["the", "THE"])[..]);
    }

    #[test]
    fn detruecase_uppercases_first_letter() {
        let mut tokens = toks(&["the", "cat"]);
        detruecase(&mut tokens);
        assert_eq!(tokens, toks(&["The", "cat"]));
        let mut empty: Vec<String> = vec![];
        detruecase(&mut empty);
        assert!(empty.is_empty());
    }

    #[test]
    fn truecase_model_roundtrip() {
        let dir = tempfile::TempDir::new().unwrap();
        let sents = vec![
            toks(&["x", "Paris", "paris", "Paris", "BONN", "Bonn", "."]),
            toks(&["y", "iPhone"]),
        ];
        let model = truecase_train(&sents);
        let path = dir.path().join("truecase.tsv");
        model.save(&path).unwrap();
        let loaded = TruecaseModel::load(&path).unwrap();
        for key in ["paris", "bonn", ".", "iphone"] {
            assert_eq!(loaded.lookup(key), model.lookup(key), "key {key}");
        }
        assert_eq!(loaded.count("Paris"), 2);
    }

    #[test]
    fn truecase_model_load_rejects_garbage() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("bad.tsv");
        std::fs::write(&path, "no tab here\n").unwrap();
        assert!(matches!(
            TruecaseModel::load(&path),
            Err(TextNormError::ModelFormat { line: 1, .. })
        ));
    }
}
