//! N-best list re-ranking with a reverse-direction model.
//!
//! Hypotheses scored by a left-to-right decoder are re-scored by adding a
//! right-to-left model's log-probability; the product-maximizing hypothesis
//! (sum in log space) wins. Scores are joined on the exact hypothesis
//! string, and any unmatched hypothesis is a hard error because a silent
//! fallback would corrupt the comparison.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    NBestFormat {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}:{line}: malformed score line (want `id<TAB>logprob<TAB>tokens`)")]
    ScoreFormat { path: PathBuf, line: u64 },
    #[error("conflicting scores for hypothesis (id {sent_id}, `{tokens}`)")]
    AmbiguousScore { sent_id: u64, tokens: String },
    #[error("no score for hypothesis (id {sent_id}, `{tokens}`)")]
    MissingScore { sent_id: u64, tokens: String },
    #[error("hypothesis (id {sent_id}, `{tokens}`) was not joined with a reverse score")]
    NotJoined { sent_id: u64, tokens: String },
    #[error("group {sent_id} is empty")]
    EmptyGroup { sent_id: u64 },
    #[error("group {sent_id} has {len} entries, more than the configured n = {n}")]
    GroupTooLarge { sent_id: u64, len: usize, n: usize },
    #[error("bad rerank config: {message}")]
    BadConfig { message: String },
}

/// One n-best hypothesis. `total` is the forward (left-to-right) log
/// probability; `r2l` is attached by [`join_r2l`].
#[derive(Debug, Clone, PartialEq)]
pub struct NBestEntry {
    pub sent_id: u64,
    pub tokens: String,
    pub features: Vec<(String, Vec<f64>)>,
    pub total: f64,
    pub r2l: Option<f64>,
}

/// All hypotheses for one sentence, in original n-best order.
#[derive(Debug, Clone, PartialEq)]
pub struct NBestGroup {
    pub sent_id: u64,
    pub entries: Vec<NBestEntry>,
}

fn default_n() -> usize {
    12
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    /// Maximum hypotheses per sentence.
    pub n: usize,
    pub w_l2r: f64,
    pub w_r2l: f64,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            n: default_n(),
            w_l2r: 1.0,
            w_r2l: 1.0,
        }
    }
}

fn parse_features(segment: &str) -> Result<Vec<(String, Vec<f64>)>, String> {
    let mut features: Vec<(String, Vec<f64>)> = Vec::new();
    for token in segment.split_whitespace() {
        if let Some(name) = token.strip_suffix('=') {
            features.push((name.to_string(), Vec::new()));
        } else if let Some((name, value)) = token.split_once('=') {
            let value: f64 = value
                .parse()
                .map_err(|_| format!("bad feature value `{token}`"))?;
            features.push((name.to_string(), vec![value]));
        } else {
            let value: f64 = token
                .parse()
                .map_err(|_| format!("bad feature token `{token}`"))?;
            match features.last_mut() {
                Some((_, values)) => values.push(value),
                None => return Err(format!("feature value `{token}` before any feature name")),
            }
        }
    }
    Ok(features)
}

/// Parse a Moses-format n-best file (`id ||| tokens ||| features ||| total`)
/// into groups sorted by ascending sentence id, preserving within-group
/// order. Ids may arrive in any order.
pub fn parse_nbest(path: &Path) -> Result<Vec<NBestGroup>, RerankError> {
    let body = std::fs::read_to_string(path).map_err(|source| RerankError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut groups: BTreeMap<u64, Vec<NBestEntry>> = BTreeMap::new();
    for (i, line) in body.lines().enumerate() {
        let fail = |message: String| RerankError::NBestFormat {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message,
        };
        let segments: Vec<&str> = line.split("|||").map(str::trim).collect();
        if segments.len() != 4 {
            return Err(fail(format!(
                "expected 4 `|||` segments, got {}",
                segments.len()
            )));
        }
        let sent_id: u64 = segments[0]
            .parse()
            .map_err(|_| fail(format!("bad sentence id `{}`", segments[0])))?;
        let features = parse_features(segments[2]).map_err(fail)?;
        let total: f64 = segments[3]
            .parse()
            .map_err(|_| fail(format!("bad total score `{}`", segments[3])))?;
        groups.entry(sent_id).or_default().push(NBestEntry {
            sent_id,
            tokens: segments[1].to_string(),
            features,
            total,
            r2l: None,
        });
    }
    Ok(groups
        .into_iter()
        .map(|(sent_id, entries)| NBestGroup { sent_id, entries })
        .collect())
}

/// Write groups in canonical Moses format, single-space separated.
pub fn write_nbest(path: &Path, groups: &[NBestGroup]) -> Result<(), RerankError> {
    let mut out = String::new();
    for group in groups {
        for entry in &group.entries {
            write_entry(&mut out, entry);
        }
    }
    std::fs::write(path, out).map_err(|source| RerankError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_entry(out: &mut String, entry: &NBestEntry) {
    out.push_str(&format!("{} ||| {} |||", entry.sent_id, entry.tokens));
    for (name, values) in &entry.features {
        out.push_str(&format!(" {name}="));
        for v in values {
            out.push_str(&format!(" {v}"));
        }
    }
    out.push_str(&format!(" ||| {}\n", entry.total));
}

/// Read reverse-model scores (`id<TAB>logprob<TAB>tokens`) keyed by
/// (sentence id, exact hypothesis string). Exact duplicates are tolerated;
/// conflicting duplicates are an error.
pub fn read_r2l_scores(path: &Path) -> Result<HashMap<(u64, String), f64>, RerankError> {
    let body = std::fs::read_to_string(path).map_err(|source| RerankError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut scores = HashMap::new();
    for (i, line) in body.lines().enumerate() {
        let fail = || RerankError::ScoreFormat {
            path: path.to_path_buf(),
            line: i as u64 + 1,
        };
        let mut fields = line.splitn(3, '\t');
        let sent_id: u64 = fields.next().ok_or_else(fail)?.parse().map_err(|_| fail())?;
        let logprob: f64 = fields.next().ok_or_else(fail)?.parse().map_err(|_| fail())?;
        let tokens = fields.next().ok_or_else(fail)?.to_string();
        match scores.insert((sent_id, tokens.clone()), logprob) {
            Some(previous) if previous != logprob => {
                return Err(RerankError::AmbiguousScore { sent_id, tokens });
            }
            _ => {}
        }
    }
    Ok(scores)
}

/// Attach a reverse score to every hypothesis. Every entry must match.
pub fn join_r2l(
    groups: &mut [NBestGroup],
    scores: &HashMap<(u64, String), f64>,
) -> Result<(), RerankError> {
    for group in groups.iter_mut() {
        for entry in &mut group.entries {
            match scores.get(&(entry.sent_id, entry.tokens.clone())) {
                Some(&logprob) => entry.r2l = Some(logprob),
                None => {
                    return Err(RerankError::MissingScore {
                        sent_id: entry.sent_id,
                        tokens: entry.tokens.clone(),
                    })
                }
            }
        }
    }
    Ok(())
}

/// Re-ranked output: the winning hypothesis per sentence plus each group
/// fully re-sorted by combined score.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutput {
    pub best: Vec<NBestEntry>,
    pub groups: Vec<NBestGroup>,
}

fn combined(entry: &NBestEntry, config: &RerankConfig) -> Result<f64, RerankError> {
    let r2l = entry.r2l.ok_or_else(|| RerankError::NotJoined {
        sent_id: entry.sent_id,
        tokens: entry.tokens.clone(),
    })?;
    Ok(config.w_l2r * entry.total + config.w_r2l * r2l)
}

/// Pick the combined-score argmax per sentence. Ties go to the entry
/// earliest in the original n-best order; output is in ascending sentence
/// id order.
pub fn rerank(groups: &[NBestGroup], config: &RerankConfig) -> Result<RerankOutput, RerankError> {
    if config.n == 0 {
        return Err(RerankError::BadConfig {
            message: "n must be at least 1".to_string(),
        });
    }
    let mut reranked = groups
        .par_iter()
        .map(|group| {
            if group.entries.is_empty() {
                return Err(RerankError::EmptyGroup {
                    sent_id: group.sent_id,
                });
            }
            if group.entries.len() > config.n {
                return Err(RerankError::GroupTooLarge {
                    sent_id: group.sent_id,
                    len: group.entries.len(),
                    n: config.n,
                });
            }
            let scores: Vec<f64> = group
                .entries
                .iter()
                .map(|e| combined(e, config))
                .collect::<Result<_, _>>()?;
            let mut order: Vec<usize> = (0..group.entries.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let sorted = NBestGroup {
                sent_id: group.sent_id,
                entries: order.iter().map(|&i| group.entries[i].clone()).collect(),
            };
            Ok(sorted)
        })
        .collect::<Result<Vec<NBestGroup>, RerankError>>()?;
    reranked.sort_by_key(|g| g.sent_id);
    let best = reranked.iter().map(|g| g.entries[0].clone()).collect();
    Ok(RerankOutput {
        best,
        groups: reranked,
    })
}
