//! Interpolated modified Kneser–Ney n-gram language model.
//!
//! Scores are natural-log throughout; the ARPA text format (log base 10) is
//! converted only at the file boundary. Training is deterministic: identical
//! corpus and config produce bit-identical exported files.
//!
//! Event space: a model predicts tokens, the unknown symbol and the
//! end-of-sentence symbol. The begin-of-sentence symbol only ever appears as
//! context, so for every context the predicted distribution sums to 1 over
//! vocabulary ∪ {unk, eos}.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const UNK_SYM: &str = "<unk>";
pub const BOS_SYM: &str = "<s>";
pub const EOS_SYM: &str = "</s>";

const UNK: u32 = 0;
const BOS: u32 = 1;
const EOS: u32 = 2;

const LN_10: f64 = std::f64::consts::LN_10;
/// Conventional ARPA carrier value for the never-predicted begin symbol.
const BOS_LOG10: f64 = -99.0;
const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("cannot train a language model on an empty corpus")]
    EmptyCorpus,
    #[error("model order must be between 1 and 5, got {order}")]
    BadOrder { order: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    ArpaFormat {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

#[derive(Debug, Clone, Default)]
struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocab {
    fn with_reserved() -> Self {
        let mut v = Vocab::default();
        for sym in [UNK_SYM, BOS_SYM, EOS_SYM] {
            v.intern(sym);
        }
        v
    }

    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }
}

type Gram = Box<[u32]>;

/// Smoothed n-gram model. `probs` holds interpolated log-probabilities per
/// stored n-gram; `backoffs` holds log backoff weights per stored context.
/// Evaluation follows the standard ARPA recursion, which reproduces the
/// interpolated estimates exactly.
#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    vocab: Vocab,
    // probs[k-1]: k-gram -> ln P(last | rest)
    probs: Vec<HashMap<Gram, f64>>,
    // backoffs[k-1]: k-gram context -> ln backoff weight
    backoffs: Vec<HashMap<Gram, f64>>,
}

impl NGramModel {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored n-grams of the given order (1-based).
    pub fn ngram_count(&self, order: usize) -> usize {
        self.probs.get(order - 1).map_or(0, |m| m.len())
    }

    /// All predictable symbols: tokens, the unknown symbol, end-of-sentence.
    pub fn events(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.probs[0]
            .keys()
            .map(|g| self.vocab.name(g[0]))
            .filter(|&n| n != BOS_SYM)
            .collect();
        out.sort_unstable();
        out
    }

    /// Stored log-probabilities (nats), excluding the begin-symbol carrier.
    pub fn stored_log_probs(&self) -> impl Iterator<Item = f64> + '_ {
        self.probs.iter().enumerate().flat_map(|(k, map)| {
            map.iter()
                .filter(move |(g, _)| !(k == 0 && g[0] == BOS))
                .map(|(_, &p)| p)
        })
    }

    fn id_or_unk(&self, token: &str) -> u32 {
        match self.vocab.get(token) {
            Some(BOS) => UNK, // a literal begin symbol mid-sentence is noise
            Some(id) => id,
            None => UNK,
        }
    }

    fn log_prob_ids(&self, ctx: &[u32], w: u32) -> f64 {
        let k = ctx.len(); // gram order is k+1
        let mut gram = Vec::with_capacity(k + 1);
        gram.extend_from_slice(ctx);
        gram.push(w);
        if let Some(&p) = self.probs[k].get(gram.as_slice()) {
            return p;
        }
        if ctx.is_empty() {
            // unreachable for trained models (every event has a unigram);
            // imported files may omit <unk>
            return self
                .probs[0]
                .get([UNK].as_slice())
                .copied()
                .unwrap_or(f64::NEG_INFINITY);
        }
        let bow = self
            .backoffs
            .get(ctx.len() - 1)
            .and_then(|m| m.get(ctx).copied())
            .unwrap_or(0.0);
        bow + self.log_prob_ids(&ctx[1..], w)
    }

    /// ln P(word | context). The context is truncated to the last
    /// `order - 1` symbols; out-of-vocabulary tokens map to the unknown
    /// symbol. Boundary symbols are recognized in both arguments.
    pub fn log_prob(&self, context: &[&str], word: &str) -> f64 {
        let mut ctx: Vec<u32> = context
            .iter()
            .map(|t| if *t == BOS_SYM { BOS } else { self.id_or_unk(t) })
            .collect();
        let keep = self.order - 1;
        if ctx.len() > keep {
            ctx.drain(..ctx.len() - keep);
        }
        let w = if word == EOS_SYM { EOS } else { self.id_or_unk(word) };
        self.log_prob_ids(&ctx, w)
    }

    /// Total ln-probability of a sentence including the end-of-sentence
    /// event; the history starts with the begin symbol.
    pub fn sentence_log_prob(&self, tokens: &[String]) -> f64 {
        let ids: Vec<u32> = tokens.iter().map(|t| self.id_or_unk(t)).collect();
        let mut history = Vec::with_capacity(ids.len() + 1);
        history.push(BOS);
        let mut total = 0.0;
        for &w in ids.iter().chain(std::iter::once(&EOS)) {
            let lo = history.len().saturating_sub(self.order - 1);
            total += self.log_prob_ids(&history[lo.min(history.len())..], w);
            history.push(w);
        }
        total
    }
}

/// Cross-entropy in nats per predicted event: −(1/(T+1)) Σ ln P, where the
/// end-of-sentence event is always included. An empty sentence scores only
/// that event.
pub fn lm_cross_entropy(tokens: &[String], model: &NGramModel) -> f64 {
    -model.sentence_log_prob(tokens) / (tokens.len() as f64 + 1.0)
}

/// exp(total negative log-probability / total predicted events) over a
/// corpus.
pub fn lm_perplexity(corpus: &[Vec<String>], model: &NGramModel) -> f64 {
    let mut nll = 0.0;
    let mut events = 0u64;
    for sent in corpus {
        nll -= model.sentence_log_prob(sent);
        events += sent.len() as u64 + 1;
    }
    if events == 0 {
        return 1.0;
    }
    (nll / events as f64).exp()
}

/// Per-order discount values for adjusted counts 1, 2 and 3+.
#[derive(Debug, Clone, Copy)]
struct Discounts {
    d1: f64,
    d2: f64,
    d3: f64,
}

impl Discounts {
    fn of(&self, count: u64) -> f64 {
        match count {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3,
        }
    }

    /// Chen–Goodman estimates from count-of-count statistics; falls back to
    /// flat absolute discounting when the statistics are degenerate.
    fn estimate(counts: impl Iterator<Item = u64>) -> Self {
        let mut n = [0u64; 4];
        for c in counts {
            if (1..=4).contains(&c) {
                n[(c - 1) as usize] += 1;
            }
        }
        let flat = Discounts {
            d1: FALLBACK_DISCOUNT,
            d2: FALLBACK_DISCOUNT,
            d3: FALLBACK_DISCOUNT,
        };
        if n.contains(&0) {
            return flat;
        }
        let (n1, n2, n3, n4) = (n[0] as f64, n[1] as f64, n[2] as f64, n[3] as f64);
        let y = n1 / (n1 + 2.0 * n2);
        let d = Discounts {
            d1: 1.0 - 2.0 * y * n2 / n1,
            d2: 2.0 - 3.0 * y * n3 / n2,
            d3: 3.0 - 4.0 * y * n4 / n3,
        };
        if d.d1 <= 0.0 || d.d2 <= 0.0 || d.d3 <= 0.0 {
            flat
        } else {
            d
        }
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct CtxStat {
    total: u64, // Σ adjusted counts of continuations
    n1: u64,
    n2: u64,
    n3p: u64,
}

impl CtxStat {
    fn add(&mut self, count: u64) {
        self.total += count;
        match count {
            1 => self.n1 += 1,
            2 => self.n2 += 1,
            _ => self.n3p += 1,
        }
    }

    fn gamma(&self, d: Discounts) -> f64 {
        (d.d1 * self.n1 as f64 + d.d2 * self.n2 as f64 + d.d3 * self.n3p as f64)
            / self.total as f64
    }
}

/// Train an interpolated modified Kneser–Ney model.
///
/// Sentences are padded with single begin/end symbols. Tokens seen fewer
/// than `min_count` times are replaced by the unknown symbol before
/// counting. Lower-order estimates use continuation counts, except for
/// begin-anchored n-grams, which keep raw counts because nothing can
/// precede them.
pub fn lm_train(
    corpus: &[Vec<String>],
    order: usize,
    min_count: u64,
) -> Result<NGramModel, LmError> {
    if !(1..=5).contains(&order) {
        return Err(LmError::BadOrder { order });
    }
    if corpus.is_empty() {
        return Err(LmError::EmptyCorpus);
    }

    // vocabulary: kept tokens in sorted order for deterministic ids
    let mut token_counts: HashMap<&str, u64> = HashMap::new();
    for sent in corpus {
        for tok in sent {
            *token_counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<&str> = token_counts
        .iter()
        .filter(|(tok, &c)| {
            c >= min_count.max(1) && **tok != UNK_SYM && **tok != BOS_SYM && **tok != EOS_SYM
        })
        .map(|(&tok, _)| tok)
        .collect();
    kept.sort_unstable();
    let mut vocab = Vocab::with_reserved();
    for tok in kept {
        vocab.intern(tok);
    }

    // raw counts at every order over padded sentences
    let mut raw: Vec<HashMap<Gram, u64>> = vec![HashMap::new(); order];
    for sent in corpus {
        let mut padded = Vec::with_capacity(sent.len() + 2);
        padded.push(BOS);
        padded.extend(sent.iter().map(|t| vocab.get(t).unwrap_or(UNK)));
        padded.push(EOS);
        for k in 1..=order {
            for win in padded.windows(k) {
                *raw[k - 1].entry(win.into()).or_insert(0) += 1;
            }
        }
    }

    // adjusted counts: continuation counts below the top order, raw counts
    // for begin-anchored grams and at the top order
    let mut adjusted: Vec<HashMap<Gram, u64>> = Vec::with_capacity(order);
    for k in 1..=order {
        if k == order {
            adjusted.push(raw[k - 1].clone());
            continue;
        }
        let mut cont: HashMap<Gram, u64> = HashMap::new();
        for higher in raw[k].keys() {
            *cont.entry(higher[1..].into()).or_insert(0) += 1;
        }
        let map = raw[k - 1]
            .iter()
            .map(|(g, &r)| {
                let a = if g[0] == BOS { r } else { cont[g] };
                (g.clone(), a)
            })
            .collect();
        adjusted.push(map);
    }

    // per-order discounts; the begin-symbol unigram is context-only and
    // excluded from unigram statistics
    let discounts: Vec<Discounts> = (1..=order)
        .map(|k| {
            Discounts::estimate(
                adjusted[k - 1]
                    .iter()
                    .filter(|(g, _)| !(k == 1 && g[0] == BOS))
                    .map(|(_, &a)| a),
            )
        })
        .collect();

    // per-context totals and count buckets (integer, so order-independent)
    let mut ctx_stats: Vec<HashMap<Gram, CtxStat>> = vec![HashMap::new(); order];
    for k in 1..=order {
        for (g, &a) in &adjusted[k - 1] {
            if k == 1 && g[0] == BOS {
                continue;
            }
            ctx_stats[k - 1]
                .entry(g[..k - 1].into())
                .or_default()
                .add(a);
        }
    }

    // interpolated probabilities, bottom-up; linear space during build
    let n_events = {
        let unigrams = adjusted[0].keys().filter(|g| g[0] != BOS).count();
        let has_unk = adjusted[0].contains_key([UNK].as_slice());
        unigrams + usize::from(!has_unk)
    };
    let p0 = 1.0 / n_events as f64;

    let mut linear: Vec<HashMap<Gram, f64>> = vec![HashMap::new(); order];
    let root: Gram = Box::from(&[][..]);
    let uni_stat = ctx_stats[0][&root];
    let uni_gamma = uni_stat.gamma(discounts[0]);
    for (g, &a) in &adjusted[0] {
        if g[0] == BOS {
            continue;
        }
        let p = (a as f64 - discounts[0].of(a)) / uni_stat.total as f64 + uni_gamma * p0;
        linear[0].insert(g.clone(), p);
    }
    linear[0]
        .entry(Box::from(&[UNK][..]))
        .or_insert(uni_gamma * p0);

    for k in 2..=order {
        let (lower_done, rest) = linear.split_at_mut(k - 1);
        let lower = &lower_done[k - 2];
        for (g, &a) in &adjusted[k - 1] {
            let ctx: Gram = g[..k - 1].into();
            let stat = ctx_stats[k - 1][&ctx];
            let gamma = stat.gamma(discounts[k - 1]);
            let lower_p = lower[&g[1..]];
            let p = (a as f64 - discounts[k - 1].of(a)) / stat.total as f64 + gamma * lower_p;
            rest[0].insert(g.clone(), p);
        }
    }

    let mut probs: Vec<HashMap<Gram, f64>> = linear
        .into_iter()
        .map(|m| m.into_iter().map(|(g, p)| (g, p.ln())).collect())
        .collect();
    probs[0].insert(Box::from(&[BOS][..]), BOS_LOG10 * LN_10);

    // backoff weight = γ of each stored context (lengths 1..order-1)
    let mut backoffs: Vec<HashMap<Gram, f64>> = vec![HashMap::new(); order.saturating_sub(1)];
    for k in 2..=order {
        for (ctx, stat) in &ctx_stats[k - 1] {
            backoffs[k - 2].insert(ctx.clone(), stat.gamma(discounts[k - 1]).ln());
        }
    }

    Ok(NGramModel {
        order,
        vocab,
        probs,
        backoffs,
    })
}

fn fmt_log10(nats: f64) -> String {
    format!("{}", nats / LN_10)
}

/// Write the model in ARPA text format (log base 10, n-grams sorted by
/// token strings). Output is a pure function of the model.
pub fn arpa_export(model: &NGramModel, path: &Path) -> Result<(), LmError> {
    let mut out = String::new();
    out.push_str("\\data\\\n");
    for k in 1..=model.order {
        out.push_str(&format!("ngram {k}={}\n", model.probs[k - 1].len()));
    }
    for k in 1..=model.order {
        out.push_str(&format!("\n\\{k}-grams:\n"));
        let mut entries: Vec<(Vec<&str>, &Gram, f64)> = model.probs[k - 1]
            .iter()
            .map(|(g, &p)| {
                let names: Vec<&str> = g.iter().map(|&id| model.vocab.name(id)).collect();
                (names, g, p)
            })
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (names, gram, p) in entries {
            if k == 1 && gram[0] == BOS {
                out.push_str("-99");
            } else {
                out.push_str(&fmt_log10(p));
            }
            out.push('\t');
            out.push_str(&names.join(" "));
            if k < model.order {
                if let Some(&bow) = model.backoffs[k - 1].get(gram.as_ref()) {
                    out.push('\t');
                    out.push_str(&fmt_log10(bow));
                }
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    std::fs::write(path, out).map_err(|source| LmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Read a model from ARPA text format. Section counts must match the
/// `\data\` header; errors carry the offending line number.
pub fn arpa_import(path: &Path) -> Result<NGramModel, LmError> {
    let body = std::fs::read_to_string(path).map_err(|source| LmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let err = |line: usize, message: &str| LmError::ArpaFormat {
        path: path.to_path_buf(),
        line: line as u64 + 1,
        message: message.to_string(),
    };

    let lines: Vec<&str> = body.lines().collect();
    let mut i = 0;
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    if i >= lines.len() || lines[i].trim() != "\\data\\" {
        return Err(err(i.min(lines.len().saturating_sub(1)), "expected \\data\\ header"));
    }
    i += 1;
    let mut declared: Vec<usize> = Vec::new();
    while i < lines.len() {
        let line = lines[i].trim();
        if line.is_empty() {
            break;
        }
        let rest = line
            .strip_prefix("ngram ")
            .ok_or_else(|| err(i, "expected `ngram N=count` line"))?;
        let (k, count) = rest
            .split_once('=')
            .ok_or_else(|| err(i, "expected `ngram N=count` line"))?;
        let k: usize = k.trim().parse().map_err(|_| err(i, "bad n-gram order"))?;
        let count: usize = count.trim().parse().map_err(|_| err(i, "bad n-gram count"))?;
        if k != declared.len() + 1 {
            return Err(err(i, "n-gram orders must be consecutive from 1"));
        }
        declared.push(count);
        i += 1;
    }
    let order = declared.len();
    if !(1..=5).contains(&order) {
        return Err(err(0, "model order must be between 1 and 5"));
    }

    let mut vocab = Vocab::with_reserved();
    let mut probs: Vec<HashMap<Gram, f64>> = vec![HashMap::new(); order];
    let mut backoffs: Vec<HashMap<Gram, f64>> = vec![HashMap::new(); order.saturating_sub(1)];

    for (k, &expected) in declared.iter().enumerate() {
        let k = k + 1;
        while i < lines.len() && lines[i].trim().is_empty() {
            i += 1;
        }
        let header = format!("\\{k}-grams:");
        if i >= lines.len() || lines[i].trim() != header {
            return Err(err(i.min(lines.len() - 1), &format!("expected {header} section")));
        }
        i += 1;
        let mut seen = 0usize;
        while i < lines.len() {
            let line = lines[i];
            if line.trim().is_empty() || line.starts_with('\\') {
                break;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(err(i, "expected `logprob<TAB>ngram[<TAB>backoff]`"));
            }
            let logp: f64 = fields[0]
                .parse()
                .map_err(|_| err(i, "log-probability is not a number"))?;
            let tokens: Vec<&str> = fields[1].split(' ').collect();
            if tokens.len() != k || tokens.iter().any(|t| t.is_empty()) {
                return Err(err(i, &format!("expected {k} space-separated tokens")));
            }
            let gram: Gram = if k == 1 {
                Box::from([vocab.intern(tokens[0])])
            } else {
                let ids = tokens
                    .iter()
                    .map(|t| {
                        vocab
                            .get(t)
                            .ok_or_else(|| err(i, &format!("token `{t}` missing from unigrams")))
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                ids.into()
            };
            if k < order {
                if let Some(bow) = fields.get(2) {
                    let bow: f64 = bow
                        .parse()
                        .map_err(|_| err(i, "backoff weight is not a number"))?;
                    backoffs[k - 1].insert(gram.clone(), bow * LN_10);
                }
            } else if fields.len() == 3 {
                return Err(err(i, "highest-order n-grams cannot carry a backoff"));
            }
            probs[k - 1].insert(gram, logp * LN_10);
            seen += 1;
            i += 1;
        }
        if seen != expected {
            return Err(err(
                i.min(lines.len() - 1),
                &format!("\\data\\ declares {expected} {k}-grams, section has {seen}"),
            ));
        }
    }
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    if i >= lines.len() || lines[i].trim() != "\\end\\" {
        return Err(err(i.min(lines.len() - 1), "expected \\end\\ marker"));
    }

    Ok(NGramModel {
        order,
        vocab,
        probs,
        backoffs,
    })
}
