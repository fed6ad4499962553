//! Heuristic parallel-data filtering: corruption, empty/identical sides,
//! length, non-letter ratio, wrong language, low content overlap, plus exact
//! deduplication.
//!
//! `filter_pair` evaluates rules in a fixed order and reports the first
//! failure, so verdicts are deterministic and independent of how the corpus
//! is sharded or parallelized.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentencePair;
use crate::textnorm::tokenize;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed lexicon line (want `src<TAB>tgt[<TAB>prob]`)")]
    LexiconFormat { path: PathBuf, line: u64 },
    #[error("language identification needs at least two languages, got {got}")]
    TooFewLanguages { got: usize },
    #[error("language {lang}: training corpus contains no characters")]
    EmptyLangCorpus { lang: String },
    #[error("cannot classify empty text")]
    EmptyClassifyInput,
    #[error("filter config: {message}")]
    BadConfig { message: String },
}

fn default_max_tokens() -> usize {
    128
}
fn default_max_len_ratio() -> f64 {
    3.0
}
fn default_len_slack() -> usize {
    5
}
fn default_min_letter_ratio() -> f64 {
    0.5
}
fn default_min_overlap() -> f64 {
    0.1
}

/// Thresholds for [`filter_pair`]. All defaults are overridable and
/// deliberately permissive for short sentences (`len_slack`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_max_tokens")]
    pub max_tokens: usize,
    #[serde(default = "default_max_len_ratio")]
    pub max_len_ratio: f64,
    #[serde(default = "default_len_slack")]
    pub len_slack: usize,
    #[serde(default = "default_min_letter_ratio")]
    pub min_letter_ratio: f64,
    #[serde(default = "default_min_overlap")]
    pub min_overlap: f64,
    #[serde(default)]
    pub expected_src_lang: Option<String>,
    #[serde(default)]
    pub expected_tgt_lang: Option<String>,
    #[serde(default)]
    pub langid_margin: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_tokens: default_max_tokens(),
            max_len_ratio: default_max_len_ratio(),
            len_slack: default_len_slack(),
            min_letter_ratio: default_min_letter_ratio(),
            min_overlap: default_min_overlap(),
            expected_src_lang: None,
            expected_tgt_lang: None,
            langid_margin: 0.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        let bad = |message: &str| {
            Err(FilterError::BadConfig {
                message: message.to_string(),
            })
        };
        if self.max_tokens == 0 {
            return bad("max_tokens must be positive");
        }
        // negated comparisons also reject NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.max_len_ratio >= 1.0) {
            return bad("max_len_ratio must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.min_letter_ratio) {
            return bad("min_letter_ratio must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return bad("min_overlap must be in [0, 1]");
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.langid_margin >= 0.0) {
            return bad("langid_margin must be nonnegative");
        }
        Ok(())
    }
}

const SMOOTHING: f64 = 0.1;
const MAX_ORDER: usize = 3;

#[derive(Debug, Clone, Default)]
struct CondTable {
    // context string -> (total count, per-character counts)
    contexts: HashMap<String, (u64, HashMap<char, u64>)>,
}

impl CondTable {
    fn bump(&mut self, ctx: &str, c: char) {
        let entry = self
            .contexts
            .entry(ctx.to_string())
            .or_insert_with(|| (0, HashMap::new()));
        entry.0 += 1;
        *entry.1.entry(c).or_insert(0) += 1;
    }

    /// Additively smoothed conditional log-probability. The event space is
    /// the global alphabet plus one unknown symbol, so the distribution sums
    /// to 1 for every context, seen or unseen.
    fn log_prob(&self, ctx: &str, c: char, alphabet_size: usize) -> f64 {
        let (total, count) = match self.contexts.get(ctx) {
            Some((total, counts)) => (*total, counts.get(&c).copied().unwrap_or(0)),
            None => (0, 0),
        };
        let events = alphabet_size as f64 + 1.0;
        ((count as f64 + SMOOTHING) / (total as f64 + SMOOTHING * events)).ln()
    }
}

/// Character n-gram (n = 1..3) language classifier with additive smoothing.
///
/// Context resets at word boundaries, so a text's score is the length-
/// weighted mean of its words' scores and classification is invariant to
/// repeating the text.
#[derive(Debug, Clone)]
pub struct LangIdModel {
    languages: Vec<String>,
    tables: Vec<[CondTable; MAX_ORDER]>,
    alphabet: HashSet<char>,
}

/// Train a classifier from `(language, seed text)` corpora. Multiple entries
/// per language accumulate; at least two distinct languages are required.
pub fn langid_train<'a, I>(corpora: I) -> Result<LangIdModel, FilterError>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut by_lang: BTreeMap<&str, String> = BTreeMap::new();
    for (lang, text) in corpora {
        let blob = by_lang.entry(lang).or_default();
        blob.push_str(text);
        blob.push(' ');
    }
    if by_lang.len() < 2 {
        return Err(FilterError::TooFewLanguages { got: by_lang.len() });
    }
    let mut alphabet = HashSet::new();
    for text in by_lang.values() {
        alphabet.extend(text.split_whitespace().flat_map(|w| w.chars()));
    }
    let mut languages = Vec::new();
    let mut tables = Vec::new();
    for (lang, text) in &by_lang {
        let mut table: [CondTable; MAX_ORDER] = Default::default();
        let mut seen = false;
        for word in text.split_whitespace() {
            let chars: Vec<char> = word.chars().collect();
            seen = true;
            for i in 0..chars.len() {
                for n in 1..=MAX_ORDER {
                    let lo = i.saturating_sub(n - 1);
                    let ctx: String = chars[lo..i].iter().collect();
                    table[n - 1].bump(&ctx, chars[i]);
                }
            }
        }
        if !seen {
            return Err(FilterError::EmptyLangCorpus {
                lang: lang.to_string(),
            });
        }
        languages.push(lang.to_string());
        tables.push(table);
    }
    Ok(LangIdModel {
        languages,
        tables,
        alphabet,
    })
}

impl LangIdModel {
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    fn score(&self, lang_idx: usize, text: &str) -> Result<f64, FilterError> {
        let tables = &self.tables[lang_idx];
        let mut sum = 0.0;
        let mut chars_scored = 0usize;
        for word in text.split_whitespace() {
            let chars: Vec<char> = word.chars().collect();
            for i in 0..chars.len() {
                let mut per_char = 0.0;
                for n in 1..=MAX_ORDER {
                    let lo = i.saturating_sub(n - 1);
                    let ctx: String = chars[lo..i].iter().collect();
                    per_char += tables[n - 1].log_prob(&ctx, chars[i], self.alphabet.len());
                }
                sum += per_char / MAX_ORDER as f64;
                chars_scored += 1;
            }
        }
        if chars_scored == 0 {
            return Err(FilterError::EmptyClassifyInput);
        }
        Ok(sum / chars_scored as f64)
    }

    /// Best language by mean per-character log-likelihood, plus the margin to
    /// the runner-up. Ties resolve to the lexicographically first language.
    pub fn classify(&self, text: &str) -> Result<(&str, f64), FilterError> {
        let mut best: Option<(usize, f64)> = None;
        let mut second: Option<f64> = None;
        for idx in 0..self.languages.len() {
            let s = self.score(idx, text)?;
            match best {
                Some((_, b)) if s <= b => {
                    if second.is_none_or(|sec| s > sec) {
                        second = Some(s);
                    }
                }
                _ => {
                    if let Some((_, b)) = best {
                        second = Some(b);
                    }
                    best = Some((idx, s));
                }
            }
        }
        let (idx, b) = best.expect("at least two languages");
        let margin = b - second.expect("at least two languages");
        Ok((&self.languages[idx], margin))
    }
}

/// Bilingual lexicon: a set of `(src_word, tgt_word)` translation entries.
/// Probabilities in the file are accepted and ignored.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashSet<(String, String)>,
}

impl Lexicon {
    pub fn from_entries<I, A, B>(entries: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        Self {
            entries: entries
                .into_iter()
                .map(|(a, b)| (a.into(), b.into()))
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, FilterError> {
        let body = std::fs::read_to_string(path).map_err(|source| FilterError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut entries = HashSet::new();
        for (i, line) in body.lines().enumerate() {
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(t), None, None) => {
                    entries.insert((s.to_string(), t.to_string()));
                }
                (Some(s), Some(t), Some(prob), None) if prob.parse::<f64>().is_ok() => {
                    entries.insert((s.to_string(), t.to_string()));
                }
                _ => {
                    return Err(FilterError::LexiconFormat {
                        path: path.to_path_buf(),
                        line: i as u64 + 1,
                    })
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, src: &str, tgt: &str) -> bool {
        self.entries.contains(&(src.to_string(), tgt.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Lexicon with every entry flipped, for scoring in the other direction.
    pub fn reversed(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(s, t)| (t.clone(), s.clone()))
                .collect(),
        }
    }
}

fn is_content(token: &str) -> bool {
    token.chars().any(char::is_alphanumeric)
}

fn digits_of(token: &str) -> String {
    token.chars().filter(char::is_ascii_digit).collect()
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
        cur.fill(0);
    }
    prev[b.len()]
}

fn cognate_match(a: &str, b: &str) -> bool {
    let ac: Vec<char> = a.chars().collect();
    let bc: Vec<char> = b.chars().collect();
    let max = ac.len().max(bc.len());
    if max == 0 {
        return false;
    }
    lcs_len(&ac, &bc) as f64 / max as f64 >= 0.7
}

fn token_matches(src: &str, tgt: &str, lexicon: &Lexicon) -> bool {
    if lexicon.contains(src, tgt) || src == tgt {
        return true;
    }
    let (ds, dt) = (digits_of(src), digits_of(tgt));
    if !ds.is_empty() && ds == dt {
        return true;
    }
    cognate_match(src, tgt)
}

/// Content-overlap score and whether a side had no content tokens at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapScore {
    pub value: f64,
    pub no_content: bool,
}

/// Fraction of content tokens covered in the other side, minimized over the
/// two directions. A token is covered if the lexicon translates it, it
/// appears verbatim, its digit string matches, or an LCS-ratio cognate
/// (≥ 0.7) exists.
pub fn content_overlap(
    src_tokens: &[String],
    tgt_tokens: &[String],
    lexicon: &Lexicon,
) -> OverlapScore {
    let src: Vec<&String> = src_tokens.iter().filter(|t| is_content(t)).collect();
    let tgt: Vec<&String> = tgt_tokens.iter().filter(|t| is_content(t)).collect();
    if src.is_empty() || tgt.is_empty() {
        return OverlapScore {
            value: 0.0,
            no_content: true,
        };
    }
    let covered_st = src
        .iter()
        .filter(|s| tgt.iter().any(|t| token_matches(s, t, lexicon)))
        .count();
    let reversed = lexicon.reversed();
    let covered_ts = tgt
        .iter()
        .filter(|t| src.iter().any(|s| token_matches(t, s, &reversed)))
        .count();
    let cov_st = covered_st as f64 / src.len() as f64;
    let cov_ts = covered_ts as f64 / tgt.len() as f64;
    OverlapScore {
        value: cov_st.min(cov_ts),
        no_content: false,
    }
}

/// Rejection rules in evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Corrupted,
    EmptySide,
    Identical,
    TooLong,
    LengthRatio,
    LetterRatio,
    WrongLanguage,
    LowOverlap,
}

impl Rule {
    pub const ALL: [Rule; 8] = [
        Rule::Corrupted,
        Rule::EmptySide,
        Rule::Identical,
        Rule::TooLong,
        Rule::LengthRatio,
        Rule::LetterRatio,
        Rule::WrongLanguage,
        Rule::LowOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Corrupted => "corrupted",
            Rule::EmptySide => "empty_side",
            Rule::Identical => "identical",
            Rule::TooLong => "too_long",
            Rule::LengthRatio => "length_ratio",
            Rule::LetterRatio => "letter_ratio",
            Rule::WrongLanguage => "wrong_language",
            Rule::LowOverlap => "low_overlap",
        }
    }
}

/// Scores computed on the way to a verdict. Rules past the first failure are
/// never evaluated, so later fields may be absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Details {
    pub src_tokens: Option<usize>,
    pub tgt_tokens: Option<usize>,
    pub letter_ratio_src: Option<f64>,
    pub letter_ratio_tgt: Option<f64>,
    pub src_lang: Option<(String, f64)>,
    pub tgt_lang: Option<(String, f64)>,
    pub overlap: Option<f64>,
    pub no_content: bool,
}

/// Outcome of [`filter_pair`]. `pass` holds exactly when `failed_rule` is
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub pass: bool,
    pub failed_rule: Option<Rule>,
    pub details: Details,
}

impl Verdict {
    fn fail(rule: Rule, details: Details) -> Self {
        Self {
            pass: false,
            failed_rule: Some(rule),
            details,
        }
    }

    fn pass(details: Details) -> Self {
        Self {
            pass: true,
            failed_rule: None,
            details,
        }
    }
}

fn has_corruption(text: &str) -> bool {
    text.chars().any(|c| {
        matches!(c, '\u{0000}'..='\u{0008}' | '\u{000B}'..='\u{001F}' | '\u{FFFD}')
    })
}

fn letter_ratio(text: &str) -> f64 {
    let mut letters = 0usize;
    let mut non_space = 0usize;
    for c in text.chars() {
        if c.is_whitespace() {
            continue;
        }
        non_space += 1;
        if c.is_alphabetic() {
            letters += 1;
        }
    }
    if non_space == 0 {
        0.0
    } else {
        letters as f64 / non_space as f64
    }
}

/// Evaluate all rejection rules on one pair, stopping at the first failure.
///
/// The pair's text is tokenized internally for the token-count rules; the
/// language model and lexicon are optional, and their rules only run when
/// they are supplied.
pub fn filter_pair(
    pair: &SentencePair,
    config: &FilterConfig,
    langid: Option<&LangIdModel>,
    lexicon: Option<&Lexicon>,
) -> Verdict {
    let mut details = Details::default();

    // rule 1: corrupted characters
    if has_corruption(&pair.src) || has_corruption(&pair.tgt) {
        return Verdict::fail(Rule::Corrupted, details);
    }
    // rule 2: empty side
    if pair.src.trim().is_empty() || pair.tgt.trim().is_empty() {
        return Verdict::fail(Rule::EmptySide, details);
    }
    // rule 3: identical sides after case folding
    if pair.src.to_lowercase() == pair.tgt.to_lowercase() {
        return Verdict::fail(Rule::Identical, details);
    }
    let src_tokens = tokenize(&pair.src);
    let tgt_tokens = tokenize(&pair.tgt);
    details.src_tokens = Some(src_tokens.len());
    details.tgt_tokens = Some(tgt_tokens.len());
    // rule 4: too long
    if src_tokens.len() > config.max_tokens || tgt_tokens.len() > config.max_tokens {
        return Verdict::fail(Rule::TooLong, details);
    }
    // rule 5: length ratio with additive slack
    let longer = src_tokens.len().max(tgt_tokens.len()) as f64;
    let shorter = src_tokens.len().min(tgt_tokens.len()) as f64;
    if longer > config.max_len_ratio * shorter + config.len_slack as f64 {
        return Verdict::fail(Rule::LengthRatio, details);
    }
    // rule 6: non-letter ratio
    let lr_src = letter_ratio(&pair.src);
    let lr_tgt = letter_ratio(&pair.tgt);
    details.letter_ratio_src = Some(lr_src);
    details.letter_ratio_tgt = Some(lr_tgt);
    if lr_src < config.min_letter_ratio || lr_tgt < config.min_letter_ratio {
        return Verdict::fail(Rule::LetterRatio, details);
    }
    // rule 7: wrong language (only with a model and expected codes)
    if let Some(model) = langid {
        let mut wrong = false;
        if let Some(expected) = &config.expected_src_lang {
            if let Ok((lang, margin)) = model.classify(&pair.src) {
                details.src_lang = Some((lang.to_string(), margin));
                wrong |= lang != expected && margin > config.langid_margin;
            }
        }
        if !wrong {
            if let Some(expected) = &config.expected_tgt_lang {
                if let Ok((lang, margin)) = model.classify(&pair.tgt) {
                    details.tgt_lang = Some((lang.to_string(), margin));
                    wrong |= lang != expected && margin > config.langid_margin;
                }
            }
        }
        if wrong {
            return Verdict::fail(Rule::WrongLanguage, details);
        }
    }
    // rule 8: content overlap (only with a lexicon)
    if let Some(lexicon) = lexicon {
        let src_lower: Vec<String> = src_tokens.iter().map(|t| t.to_lowercase()).collect();
        let tgt_lower: Vec<String> = tgt_tokens.iter().map(|t| t.to_lowercase()).collect();
        let overlap = content_overlap(&src_lower, &tgt_lower, lexicon);
        details.overlap = Some(overlap.value);
        details.no_content = overlap.no_content;
        if overlap.value < config.min_overlap {
            return Verdict::fail(Rule::LowOverlap, details);
        }
    }
    Verdict::pass(details)
}

/// Remove exact `(src, tgt)` duplicates, keeping the first occurrence.
pub fn dedupe(pairs: Vec<SentencePair>) -> Vec<SentencePair> {
    let mut seen: HashSet<(String, String)> = HashSet::with_capacity(pairs.len());
    pairs
        .into_iter()
        .filter(|p| seen.insert((p.src.clone(), p.tgt.clone())))
        .collect()
}

/// Aggregate outcome of a filtering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: u64,
    pub kept: u64,
    pub retention: f64,
    pub rejected_by_rule: BTreeMap<String, u64>,
}

impl FilterReport {
    pub fn rejected_total(&self) -> u64 {
        self.rejected_by_rule.values().sum()
    }
}

/// Filter a corpus in parallel; kept pairs stay in input order and the
/// report is independent of thread count.
pub fn run_filter_pipeline(
    pairs: &[SentencePair],
    config: &FilterConfig,
    langid: Option<&LangIdModel>,
    lexicon: Option<&Lexicon>,
) -> (Vec<SentencePair>, FilterReport) {
    let verdicts: Vec<Verdict> = pairs
        .par_iter()
        .map(|p| filter_pair(p, config, langid, lexicon))
        .collect();
    let mut kept = Vec::new();
    let mut rejected_by_rule: BTreeMap<String, u64> = BTreeMap::new();
    for (pair, verdict) in pairs.iter().zip(&verdicts) {
        match verdict.failed_rule {
            None => kept.push(pair.clone()),
            Some(rule) => *rejected_by_rule.entry(rule.name().to_string()).or_insert(0) += 1,
        }
    }
    let report = FilterReport {
        input: pairs.len() as u64,
        kept: kept.len() as u64,
        retention: if pairs.is_empty() {
            1.0
        } else {
            kept.len() as f64 / pairs.len() as f64
        },
        rejected_by_rule,
    };
    (kept, report)
}
