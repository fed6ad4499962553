//! Subword segmentation and synthetic unknown-word data.
//!
//! Byte-pair encoding with optional morpheme-boundary constraints: merges
//! never join symbols across a supplied boundary position, so subword units
//! respect externally known morphology. Augmentation replaces sampled
//! content words with an unknown-token marker to teach models to copy.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::SentencePair;

/// End-of-word sentinel symbol. Sorts after all real symbols in merge
/// tie-breaks and is stripped from emitted subwords.
const END_MARK: &str = "</w>";

/// Continuation marker appended to every non-final subword piece.
const CONT_MARK: &str = "@@";

#[derive(Debug, Error)]
pub enum SegAugError {
    #[error("cannot train merges on an empty corpus")]
    EmptyCorpus,
    #[error("number of merges must be at least 1")]
    BadMergeCount,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed merge line (want `left right`)")]
    MergeFormat { path: PathBuf, line: u64 },
    #[error("{path}:{line}: malformed boundary line (want `word<TAB>pos1,pos2,...`)")]
    BoundaryFormat { path: PathBuf, line: u64 },
    #[error("boundary position {pos} is not strictly inside word `{word}`")]
    BadBoundary { word: String, pos: usize },
    #[error("bad augment config: {message}")]
    BadConfig { message: String },
}

/// An ordered list of learned merges. Applying them in training order is
/// deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeTable {
    pub merges: Vec<(String, String)>,
    /// Minimum pair frequency for a merge to be learned.
    pub vocab_threshold: u64,
}

impl MergeTable {
    /// Write one merge per line, `left right`, in training order.
    pub fn save(&self, path: &Path) -> Result<(), SegAugError> {
        let mut out = String::new();
        for (left, right) in &self.merges {
            out.push_str(left);
            out.push(' ');
            out.push_str(right);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| SegAugError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SegAugError> {
        let body = std::fs::read_to_string(path).map_err(|source| SegAugError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut merges = Vec::new();
        for (i, line) in body.lines().enumerate() {
            match line.split_once(' ') {
                Some((left, right)) if !left.is_empty() && !right.is_empty() => {
                    merges.push((left.to_string(), right.to_string()));
                }
                _ => {
                    return Err(SegAugError::MergeFormat {
                        path: path.to_path_buf(),
                        line: i as u64 + 1,
                    })
                }
            }
        }
        Ok(Self {
            merges,
            vocab_threshold: 1,
        })
    }
}

/// Forbidden-crossing positions per word: a position p means a morpheme
/// boundary lies between characters p-1 and p, so no merge may join a
/// symbol ending at p with one starting at p.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundarySet {
    words: HashMap<String, BTreeSet<usize>>,
}

impl BoundarySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record boundary positions for `word`. Positions must be strictly
    /// inside the word (0 < p < char length).
    pub fn insert(
        &mut self,
        word: impl Into<String>,
        positions: impl IntoIterator<Item = usize>,
    ) -> Result<(), SegAugError> {
        let word = word.into();
        let len = word.chars().count();
        let mut set = BTreeSet::new();
        for pos in positions {
            if pos == 0 || pos >= len {
                return Err(SegAugError::BadBoundary { word, pos });
            }
            set.insert(pos);
        }
        self.words.entry(word).or_default().extend(set);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&BTreeSet<usize>> {
        self.words.get(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Load a `word<TAB>pos1,pos2,...` file.
    pub fn load(path: &Path) -> Result<Self, SegAugError> {
        let body = std::fs::read_to_string(path).map_err(|source| SegAugError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut set = Self::new();
        for (i, line) in body.lines().enumerate() {
            let bad = || SegAugError::BoundaryFormat {
                path: path.to_path_buf(),
                line: i as u64 + 1,
            };
            let (word, positions) = line.split_once('\t').ok_or_else(bad)?;
            if word.is_empty() {
                return Err(bad());
            }
            let mut parsed = Vec::new();
            for field in positions.split(',') {
                parsed.push(field.trim().parse::<usize>().map_err(|_| bad())?);
            }
            set.insert(word, parsed)?;
        }
        Ok(set)
    }
}

/// Sentinel-aware pair ordering for tie-breaks: the end-of-word marker
/// sorts after every real symbol.
fn pair_key(pair: &(String, String)) -> ((bool, &str), (bool, &str)) {
    (
        (pair.0 == END_MARK, pair.0.as_str()),
        (pair.1 == END_MARK, pair.1.as_str()),
    )
}

/// One word type under segmentation: symbols plus the character offset at
/// which each symbol ends, so boundary crossings stay checkable as symbols
/// grow.
struct SegWord {
    syms: Vec<String>,
    ends: Vec<usize>,
}

impl SegWord {
    fn decompose(word: &str) -> Self {
        let mut syms: Vec<String> = Vec::new();
        let mut ends = Vec::new();
        for (i, c) in word.chars().enumerate() {
            syms.push(c.to_string());
            ends.push(i + 1);
        }
        let len = syms.len();
        syms.push(END_MARK.to_string());
        ends.push(len);
        Self { syms, ends }
    }

    /// Replace every non-overlapping left-to-right occurrence of the pair,
    /// skipping junctions that sit on a boundary.
    fn apply_merge(&mut self, left: &str, right: &str, bounds: Option<&BTreeSet<usize>>) {
        let mut i = 0;
        while i + 1 < self.syms.len() {
            if self.syms[i] == left
                && self.syms[i + 1] == right
                && bounds.is_none_or(|b| !b.contains(&self.ends[i]))
            {
                self.syms[i] = format!("{left}{right}");
                self.ends[i] = self.ends[i + 1];
                self.syms.remove(i + 1);
                self.ends.remove(i + 1);
            }
            i += 1;
        }
    }

    /// Count adjacent pairs into `counts`, skipping boundary junctions.
    fn count_pairs(
        &self,
        weight: u64,
        bounds: Option<&BTreeSet<usize>>,
        counts: &mut HashMap<(String, String), u64>,
    ) {
        for i in 0..self.syms.len() - 1 {
            if bounds.is_some_and(|b| b.contains(&self.ends[i])) {
                continue;
            }
            *counts
                .entry((self.syms[i].clone(), self.syms[i + 1].clone()))
                .or_insert(0) += weight;
        }
    }

    /// Emit subword pieces: drop or strip the end marker, mark non-final
    /// pieces with the continuation suffix.
    fn emit(mut self) -> Vec<String> {
        match self.syms.last() {
            Some(last) if last == END_MARK => {
                self.syms.pop();
            }
            Some(last) if last.ends_with(END_MARK) => {
                let stripped = last[..last.len() - END_MARK.len()].to_string();
                *self.syms.last_mut().unwrap() = stripped;
            }
            _ => {}
        }
        let n = self.syms.len();
        for piece in self.syms.iter_mut().take(n.saturating_sub(1)) {
            piece.push_str(CONT_MARK);
        }
        self.syms
    }
}

/// Learn `num_merges` byte-pair merges with minimum pair frequency 1.
pub fn bpe_train(
    corpus: &[Vec<String>],
    num_merges: usize,
    boundaries: Option<&BoundarySet>,
) -> Result<MergeTable, SegAugError> {
    bpe_train_thresholded(corpus, num_merges, 1, boundaries)
}

/// Learn merges, stopping early once no pair reaches `vocab_threshold`
/// occurrences. Ties between equally frequent pairs go to the
/// lexicographically smaller pair (end marker last).
pub fn bpe_train_thresholded(
    corpus: &[Vec<String>],
    num_merges: usize,
    vocab_threshold: u64,
    boundaries: Option<&BoundarySet>,
) -> Result<MergeTable, SegAugError> {
    if num_merges == 0 {
        return Err(SegAugError::BadMergeCount);
    }
    let mut word_counts: HashMap<&str, u64> = HashMap::new();
    for sentence in corpus {
        for word in sentence {
            *word_counts.entry(word).or_insert(0) += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(SegAugError::EmptyCorpus);
    }

    let mut words: Vec<(SegWord, u64, Option<&BTreeSet<usize>>)> = word_counts
        .into_iter()
        .map(|(word, count)| {
            let bounds = boundaries.and_then(|b| b.get(word));
            (SegWord::decompose(word), count, bounds)
        })
        .collect();

    let mut merges = Vec::with_capacity(num_merges);
    for _ in 0..num_merges {
        let mut counts: HashMap<(String, String), u64> = HashMap::new();
        for (word, weight, bounds) in &words {
            word.count_pairs(*weight, *bounds, &mut counts);
        }
        let best = counts
            .into_iter()
            .filter(|&(_, count)| count >= vocab_threshold.max(1))
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| pair_key(&b.0).cmp(&pair_key(&a.0))));
        let Some(((left, right), _)) = best else {
            break;
        };
        for (word, _, bounds) in &mut words {
            word.apply_merge(&left, &right, *bounds);
        }
        merges.push((left, right));
    }
    Ok(MergeTable {
        merges,
        vocab_threshold,
    })
}

fn segment_word(word: &str, table: &MergeTable, boundaries: Option<&BoundarySet>) -> Vec<String> {
    if word.is_empty() {
        return Vec::new();
    }
    let bounds = boundaries.and_then(|b| b.get(word));
    let mut seg = SegWord::decompose(word);
    for (left, right) in &table.merges {
        seg.apply_merge(left, right, bounds);
    }
    seg.emit()
}

/// Split each token into subword pieces by replaying the merge table.
pub fn bpe_apply(
    tokens: &[String],
    table: &MergeTable,
    boundaries: Option<&BoundarySet>,
) -> Vec<String> {
    tokens
        .iter()
        .flat_map(|t| segment_word(t, table, boundaries))
        .collect()
}

/// Reverse [`bpe_apply`]: concatenate continuation-marked pieces back into
/// whole tokens.
pub fn bpe_undo(subwords: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut buf = String::new();
    for piece in subwords {
        match piece.strip_suffix(CONT_MARK) {
            Some(stem) => buf.push_str(stem),
            None => {
                buf.push_str(piece);
                out.push(std::mem::take(&mut buf));
            }
        }
    }
    if !buf.is_empty() {
        out.push(buf);
    }
    out
}

/// Merge-table applier with a per-word-type cache. Segmentation is pure per
/// word, so cached results are safe to reuse.
pub struct BpeApplier<'a> {
    table: &'a MergeTable,
    boundaries: Option<&'a BoundarySet>,
    cache: HashMap<String, Vec<String>>,
}

impl<'a> BpeApplier<'a> {
    pub fn new(table: &'a MergeTable, boundaries: Option<&'a BoundarySet>) -> Self {
        Self {
            table,
            boundaries,
            cache: HashMap::new(),
        }
    }

    pub fn apply(&mut self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for token in tokens {
            let pieces = self
                .cache
                .entry(token.clone())
                .or_insert_with(|| segment_word(token, self.table, self.boundaries));
            out.extend(pieces.iter().cloned());
        }
        out
    }
}

fn default_k_min() -> u32 {
    1
}

fn default_k_max() -> u32 {
    3
}

fn default_unk_token() -> String {
    "<unk>".to_string()
}

fn default_output_ratio() -> u32 {
    1
}

/// Configuration for unknown-token augmentation. Stopword lists are matched
/// against lowercased tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default = "default_k_min")]
    pub k_min: u32,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_unk_token")]
    pub unk_token: String,
    #[serde(default)]
    pub src_stopwords: HashSet<String>,
    #[serde(default)]
    pub tgt_stopwords: HashSet<String>,
    #[serde(default)]
    pub seed: u64,
    /// Synthetic copies emitted per input pair.
    #[serde(default = "default_output_ratio")]
    pub output_ratio: u32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            k_min: default_k_min(),
            k_max: default_k_max(),
            unk_token: default_unk_token(),
            src_stopwords: HashSet::new(),
            tgt_stopwords: HashSet::new(),
            seed: 0,
            output_ratio: default_output_ratio(),
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), SegAugError> {
        if self.k_min == 0 || self.k_min > self.k_max {
            return Err(SegAugError::BadConfig {
                message: format!("need 1 <= k_min <= k_max, got {}..{}", self.k_min, self.k_max),
            });
        }
        if self.unk_token.is_empty() {
            return Err(SegAugError::BadConfig {
                message: "unk_token must be nonempty".to_string(),
            });
        }
        Ok(())
    }
}

/// Synthetic pairs plus the id of the source pair each one came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentOutput {
    pub pairs: Vec<SentencePair>,
    pub sources: Vec<u64>,
    /// Input pairs skipped because one side had no content words.
    pub skipped: u64,
}

/// splitmix64 finalizer; used to derive stable per-record RNG seeds.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A content word is fully alphabetic, at least two characters long, and
/// not a stopword.
fn content_positions(tokens: &[&str], stopwords: &HashSet<String>) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| {
            t.chars().count() >= 2
                && t.chars().all(char::is_alphabetic)
                && !stopwords.contains(&t.to_lowercase())
        })
        .map(|(i, _)| i)
        .collect()
}

/// Replace `take` sampled positions with the unknown token; returns the
/// replaced positions.
fn replace_sampled(
    tokens: &mut [String],
    positions: &mut [usize],
    take: usize,
    unk: &str,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    for i in 0..take {
        let j = i + (rng.next_u64() % (positions.len() - i) as u64) as usize;
        positions.swap(i, j);
    }
    let mut replaced = positions[..take].to_vec();
    replaced.sort_unstable();
    for &p in &replaced {
        tokens[p] = unk.to_string();
    }
    replaced
}

/// Emit synthetic copies of each pair with one to three content words per
/// side replaced by the unknown token. The RNG is seeded per (seed, pair id,
/// copy index), so output is independent of sharding. Synthetic ids are
/// `source_id * output_ratio + copy`.
pub fn unk_augment(
    corpus: &[SentencePair],
    config: &AugmentConfig,
) -> Result<AugmentOutput, SegAugError> {
    config.validate()?;
    let mut out = AugmentOutput {
        pairs: Vec::new(),
        sources: Vec::new(),
        skipped: 0,
    };
    for pair in corpus {
        let src_tokens: Vec<&str> = pair.src.split_whitespace().collect();
        let tgt_tokens: Vec<&str> = pair.tgt.split_whitespace().collect();
        let src_content = content_positions(&src_tokens, &config.src_stopwords);
        let tgt_content = content_positions(&tgt_tokens, &config.tgt_stopwords);
        if src_content.is_empty() || tgt_content.is_empty() {
            out.skipped += 1;
            continue;
        }
        for copy in 0..config.output_ratio {
            let seed = mix64(mix64(mix64(config.seed) ^ pair.id) ^ copy as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let span = (config.k_max - config.k_min + 1) as u64;
            let k = config.k_min as usize + (rng.next_u64() % span) as usize;

            let mut src: Vec<String> = src_tokens.iter().map(|t| t.to_string()).collect();
            let mut tgt: Vec<String> = tgt_tokens.iter().map(|t| t.to_string()).collect();
            let mut src_pos = src_content.clone();
            let mut tgt_pos = tgt_content.clone();
            replace_sampled(
                &mut src,
                &mut src_pos,
                k.min(src_content.len()),
                &config.unk_token,
                &mut rng,
            );
            replace_sampled(
                &mut tgt,
                &mut tgt_pos,
                k.min(tgt_content.len()),
                &config.unk_token,
                &mut rng,
            );

            let mut synthetic = SentencePair::new(
                pair.id * config.output_ratio as u64 + copy as u64,
                src.join(" "),
                tgt.join(" "),
            );
            synthetic.origin = "unk_aug".to_string();
            out.pairs.push(synthetic);
            out.sources.push(pair.id);
        }
    }
    Ok(out)
}
