//! Score combination and data selection: dual conditional cross-entropy
//! filtering, cross-entropy-difference monolingual selection, and
//! bitext/synthetic mixture construction.
//!
//! All selection is deterministic: ties break on record id, sampling and
//! shuffling are seeded, and selected records keep their input order unless
//! a strategy explicitly shuffles.

use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{shuffle_lines, MonoSentence, SentencePair};
use crate::lm::{lm_cross_entropy, NGramModel};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("{which} must be nonnegative, got {value}")]
    NegativeEntropy { which: &'static str, value: f64 },
    #[error("keep fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("keep threshold must be in [0, 1], got {0}")]
    BadThreshold(f64),
    #[error("got {scores} scores for {records} records")]
    ScoreCountMismatch { records: usize, scores: usize },
    #[error("cutoff mixture requires synthetic scores")]
    CutoffNeedsScores,
    #[error("upsampling needs at least as much synthetic data as bitext, got {synthetic} synthetic vs {bitext} bitext")]
    UpsampleImpossible { bitext: usize, synthetic: usize },
    #[error("mixture strategy {strategy} requires nonempty {what}")]
    EmptyInput {
        strategy: &'static str,
        what: &'static str,
    },
    #[error("mixture ratio parts must be positive")]
    BadRatio,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed score line (want `id<TAB>value`)")]
    ScoreFormat { path: PathBuf, line: u64 },
}

/// Dual conditional cross-entropy score of one sentence pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DccefScore {
    pub h_fwd: f64,
    pub h_bwd: f64,
    /// exp(−(|h_fwd − h_bwd| + (h_fwd + h_bwd)/2)), in (0, 1].
    pub dual: f64,
    /// min(1, exp(h_out − h_in)) when domain entropies were supplied.
    pub dom_weight: Option<f64>,
    /// dual · dom_weight (dom_weight = 1 when absent).
    pub final_score: f64,
}

/// Combine forward/backward translation cross-entropies, optionally weighted
/// by in-domain/out-of-domain language model cross-entropies `(h_in, h_out)`.
pub fn dccef_score(
    h_fwd: f64,
    h_bwd: f64,
    domain: Option<(f64, f64)>,
) -> Result<DccefScore, SelectError> {
    for (which, value) in [("h_fwd", h_fwd), ("h_bwd", h_bwd)] {
        // the negated comparison also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(value >= 0.0) {
            return Err(SelectError::NegativeEntropy { which, value });
        }
    }
    let dual = (-((h_fwd - h_bwd).abs() + (h_fwd + h_bwd) / 2.0)).exp();
    let dom_weight = domain.map(|(h_in, h_out)| (h_out - h_in).exp().min(1.0));
    Ok(DccefScore {
        h_fwd,
        h_bwd,
        dual,
        dom_weight,
        final_score: dual * dom_weight.unwrap_or(1.0),
    })
}

/// Keep policy for [`dccef_filter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Keep {
    /// Keep the top ⌈f·N⌉ records by final score.
    Fraction(f64),
    /// Keep records with final score ≥ τ.
    Threshold(f64),
}

/// Filter pairs by their scores. Kept pairs stay in input order; fraction
/// mode breaks score ties in favor of the lower pair id.
pub fn dccef_filter(
    pairs: &[SentencePair],
    scores: &[DccefScore],
    keep: Keep,
) -> Result<Vec<SentencePair>, SelectError> {
    if pairs.len() != scores.len() {
        return Err(SelectError::ScoreCountMismatch {
            records: pairs.len(),
            scores: scores.len(),
        });
    }
    let selected: Vec<bool> = match keep {
        Keep::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(SelectError::BadFraction(f));
            }
            let k = ((f * pairs.len() as f64).ceil() as usize).min(pairs.len());
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .final_score
                    .total_cmp(&scores[a].final_score)
                    .then(pairs[a].id.cmp(&pairs[b].id))
            });
            let mut mask = vec![false; pairs.len()];
            for &i in &order[..k] {
                mask[i] = true;
            }
            mask
        }
        Keep::Threshold(t) => {
            if !(0.0..=1.0).contains(&t) {
                return Err(SelectError::BadThreshold(t));
            }
            scores.iter().map(|s| s.final_score >= t).collect()
        }
    };
    Ok(pairs
        .iter()
        .zip(&selected)
        .filter(|(_, &keep)| keep)
        .map(|(p, _)| p.clone())
        .collect())
}

/// Cross-entropy-difference score of one monolingual sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonoScore {
    pub h_in: f64,
    pub h_out: f64,
    /// h_out − h_in; positive means closer to the in-domain model.
    pub combined: f64,
}

pub fn mono_score(tokens: &[String], lm_in: &NGramModel, lm_out: &NGramModel) -> MonoScore {
    let h_in = lm_cross_entropy(tokens, lm_in);
    let h_out = lm_cross_entropy(tokens, lm_out);
    MonoScore {
        h_in,
        h_out,
        combined: h_out - h_in,
    }
}

/// Selection policy for [`select_mono`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonoStrategy {
    /// Keep sentences with combined score ≥ τ.
    CombinedThreshold(f64),
    /// Keep the N sentences with the lowest in-domain cross-entropy.
    InDomainTop(usize),
}

/// Result of monolingual selection. `capped` is set when a top-N request
/// exceeded the corpus size and everything was kept.
#[derive(Debug, Clone, PartialEq)]
pub struct MonoSelection {
    pub sentences: Vec<MonoSentence>,
    pub capped: bool,
}

/// Select in-domain sentences. Output preserves the original corpus order;
/// top-N ties break on the lower sentence id.
pub fn select_mono(
    corpus: &[MonoSentence],
    scores: &[MonoScore],
    strategy: MonoStrategy,
) -> Result<MonoSelection, SelectError> {
    if corpus.len() != scores.len() {
        return Err(SelectError::ScoreCountMismatch {
            records: corpus.len(),
            scores: scores.len(),
        });
    }
    let (mask, capped) = match strategy {
        MonoStrategy::CombinedThreshold(t) => {
            (scores.iter().map(|s| s.combined >= t).collect::<Vec<_>>(), false)
        }
        MonoStrategy::InDomainTop(n) => {
            let capped = n > corpus.len();
            let k = n.min(corpus.len());
            let mut order: Vec<usize> = (0..corpus.len()).collect();
            order.sort_by(|&a, &b| {
                scores[a]
                    .h_in
                    .total_cmp(&scores[b].h_in)
                    .then(corpus[a].id.cmp(&corpus[b].id))
            });
            let mut mask = vec![false; corpus.len()];
            for &i in &order[..k] {
                mask[i] = true;
            }
            (mask, capped)
        }
    };
    Ok(MonoSelection {
        sentences: corpus
            .iter()
            .zip(&mask)
            .filter(|(_, &keep)| keep)
            .map(|(s, _)| s.clone())
            .collect(),
        capped,
    })
}

/// How bitext and synthetic corpora are combined into training data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureStrategy {
    /// Concatenate everything as-is.
    OriginalRatio,
    /// Repeat bitext (whole copies plus a seeded remainder sample) until it
    /// exactly matches the synthetic count.
    Upsampled1_1,
    /// All bitext plus the top-scoring synthetic pairs, truncated to
    /// ⌊(synthetic_parts / bitext_parts) · N_bitext⌋.
    Cutoff,
}

impl MixtureStrategy {
    fn name(self) -> &'static str {
        match self {
            MixtureStrategy::OriginalRatio => "original_ratio",
            MixtureStrategy::Upsampled1_1 => "upsampled_1_1",
            MixtureStrategy::Cutoff => "cutoff",
        }
    }
}

fn default_ratio() -> (u32, u32) {
    (1, 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub strategy: MixtureStrategy,
    /// (bitext_parts, synthetic_parts); used by the cutoff strategy.
    #[serde(default = "default_ratio")]
    pub ratio: (u32, u32),
    #[serde(default)]
    pub seed: u64,
}

/// A constructed training mixture. Ids are reassigned contiguously after the
/// final shuffle; `origin` still tells the sides apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    pub pairs: Vec<SentencePair>,
    pub bitext_lines: usize,
    pub synthetic_lines: usize,
}

/// Seeded sample of `k` distinct indices from `0..n` (partial Fisher–Yates,
/// stable across dependency versions).
fn sample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng.next_u64() % (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

/// Combine a bitext corpus and a synthetic (e.g. back-translated) corpus.
///
/// `syn_scores` (higher = better) is required by the cutoff strategy, which
/// keeps the top-scoring synthetic pairs; if fewer are available than the
/// ratio asks for, all synthetic pairs are used. The result is shuffled with
/// `spec.seed`.
pub fn build_mixture(
    bitext: &[SentencePair],
    synthetic: &[SentencePair],
    syn_scores: Option<&[f64]>,
    spec: &MixtureSpec,
) -> Result<Mixture, SelectError> {
    let strategy = spec.strategy.name();
    let mut out: Vec<SentencePair>;
    let bitext_lines;
    let synthetic_lines;
    match spec.strategy {
        MixtureStrategy::OriginalRatio => {
            out = bitext.to_vec();
            out.extend(synthetic.iter().cloned());
            bitext_lines = bitext.len();
            synthetic_lines = synthetic.len();
        }
        MixtureStrategy::Upsampled1_1 => {
            if bitext.is_empty() {
                return Err(SelectError::EmptyInput {
                    strategy,
                    what: "bitext",
                });
            }
            if synthetic.len() < bitext.len() {
                return Err(SelectError::UpsampleImpossible {
                    bitext: bitext.len(),
                    synthetic: synthetic.len(),
                });
            }
            let copies = synthetic.len() / bitext.len();
            let remainder = synthetic.len() - copies * bitext.len();
            out = Vec::with_capacity(2 * synthetic.len());
            for _ in 0..copies {
                out.extend(bitext.iter().cloned());
            }
            for i in sample_indices(bitext.len(), remainder, spec.seed) {
                out.push(bitext[i].clone());
            }
            bitext_lines = out.len();
            synthetic_lines = synthetic.len();
            out.extend(synthetic.iter().cloned());
        }
        MixtureStrategy::Cutoff => {
            let (a, b) = spec.ratio;
            if a == 0 || b == 0 {
                return Err(SelectError::BadRatio);
            }
            let scores = syn_scores.ok_or(SelectError::CutoffNeedsScores)?;
            if scores.len() != synthetic.len() {
                return Err(SelectError::ScoreCountMismatch {
                    records: synthetic.len(),
                    scores: scores.len(),
                });
            }
            let target = (b as u64 * bitext.len() as u64 / a as u64) as usize;
            let take = target.min(synthetic.len());
            let mut order: Vec<usize> = (0..synthetic.len()).collect();
            order.sort_by(|&x, &y| {
                scores[y]
                    .total_cmp(&scores[x])
                    .then(synthetic[x].id.cmp(&synthetic[y].id))
            });
            out = bitext.to_vec();
            out.extend(order[..take].iter().map(|&i| synthetic[i].clone()));
            bitext_lines = bitext.len();
            synthetic_lines = take;
        }
    }
    shuffle_lines(&mut out, spec.seed);
    for (i, p) in out.iter_mut().enumerate() {
        p.id = i as u64;
    }
    Ok(Mixture {
        pairs: out,
        bitext_lines,
        synthetic_lines,
    })
}

/// Read a `id<TAB>value` score file, in file order.
pub fn read_score_file(path: &Path) -> Result<Vec<(u64, f64)>, SelectError> {
    let body = std::fs::read_to_string(path).map_err(|source| SelectError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate() {
        let parsed = line.split_once('\t').and_then(|(id, value)| {
            Some((id.parse::<u64>().ok()?, value.parse::<f64>().ok()?))
        });
        match parsed {
            Some(entry) => out.push(entry),
            None => {
                return Err(SelectError::ScoreFormat {
                    path: path.to_path_buf(),
                    line: i as u64 + 1,
                })
            }
        }
    }
    Ok(out)
}

/// Write a `id<TAB>value` score file.
pub fn write_score_file<I>(path: &Path, scores: I) -> Result<(), SelectError>
where
    I: IntoIterator<Item = (u64, f64)>,
{
    let mut out = String::new();
    for (id, value) in scores {
        out.push_str(&format!("{id}\t{value}\n"));
    }
    std::fs::write(path, out).map_err(|source| SelectError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::lm_train;

    fn pairs(n: u64) -> Vec<SentencePair> {
        (0..n)
            .map(|i| SentencePair::new(i, format!("s{i}"), format!("t{i}")))
            .collect()
    }

    fn score(final_score: f64) -> DccefScore {
        DccefScore {
            h_fwd: 0.0,
            h_bwd: 0.0,
            dual: final_score,
            dom_weight: None,
            final_score,
        }
    }

    #[test]
    fn dccef_score_examples() {
        assert_eq!(dccef_score(0.0, 0.0, None).unwrap().dual, 1.0);
        let s = dccef_score(1.0, 1.0, None).unwrap();
        assert!((s.dual - (-1.0f64).exp()).abs() < 1e-12);
        let s = dccef_score(2.0, 0.0, None).unwrap();
        assert!((s.dual - (-3.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn dccef_rejects_negative_entropy() {
        assert!(matches!(
            dccef_score(-0.1, 1.0, None),
            Err(SelectError::NegativeEntropy { which: "h_fwd", .. })
        ));
        assert!(matches!(
            dccef_score(1.0, -2.0, None),
            Err(SelectError::NegativeEntropy { which: "h_bwd", .. })
        ));
    }

    #[test]
    fn dccef_domain_weight() {
        // out-of-domain sentence: h_out < h_in, weight < 1
        let s = dccef_score(1.0, 1.0, Some((2.0, 1.0))).unwrap();
        assert!((s.dom_weight.unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert!((s.final_score - s.dual * s.dom_weight.unwrap()).abs() < 1e-15);
        // in-domain sentence: weight clamps at 1
        let s = dccef_score(1.0, 1.0, Some((1.0, 5.0))).unwrap();
        assert_eq!(s.dom_weight, Some(1.0));
        assert_eq!(s.final_score, s.dual);
    }

    #[test]
    fn dual_score_range_and_monotonicity() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut uniform = || (rng.next_u64() % 1_000_000) as f64 / 100_000.0;
        for _ in 0..1000 {
            let sum = uniform() + 0.01;
            let gap = uniform().min(sum);
            let h_fwd = (sum + gap) / 2.0;
            let h_bwd = (sum - gap) / 2.0;
            let dual = dccef_score(h_fwd, h_bwd, None).unwrap().dual;
            assert!(dual > 0.0 && dual <= 1.0);
            // widen the gap, same sum
            let wider = dccef_score((sum + gap + 0.1) / 2.0, (sum - gap - 0.1).max(0.0) / 2.0, None);
            if (sum - gap - 0.1) >= 0.0 {
                assert!(wider.unwrap().dual < dual);
            }
            // raise the sum, same gap
            let higher = dccef_score((sum + 0.2 + gap) / 2.0, (sum + 0.2 - gap) / 2.0, None).unwrap();
            assert!(higher.dual < dual);
        }
    }

    #[test]
    fn dual_score_matches_independent_form() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let h_fwd = (rng.next_u64() % 1000) as f64 / 100.0;
            let h_bwd = (rng.next_u64() % 1000) as f64 / 100.0;
            let dual = dccef_score(h_fwd, h_bwd, None).unwrap().dual;
            // independent factored recomputation
            let expect = (-(h_fwd - h_bwd).abs()).exp() * (-(h_fwd + h_bwd) / 2.0).exp();
            assert!((dual - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn filter_fraction_one_is_identity() {
        let ps = pairs(7);
        let scores: Vec<DccefScore> = (0..7).map(|i| score(i as f64 / 10.0)).collect();
        let kept = dccef_filter(&ps, &scores, Keep::Fraction(1.0)).unwrap();
        assert_eq!(kept, ps);
    }

    #[test]
    fn filter_fraction_keeps_exact_top() {
        let ps = pairs(10);
        let finals = [0.3, 0.9, 0.1, 0.8, 0.5, 0.2, 0.7, 0.4, 0.6, 0.05];
        let scores: Vec<DccefScore> = finals.iter().map(|&f| score(f)).collect();
        let kept = dccef_filter(&ps, &scores, Keep::Fraction(0.3)).unwrap();
        let kept_ids: Vec<u64> = kept.iter().map(|p| p.id).collect();
        // top three finals are 0.9 (id 1), 0.8 (id 3), 0.7 (id 6)
        assert_eq!(kept_ids, vec![1, 3, 6]);
    }

    #[test]
    fn filter_fraction_ties_prefer_lower_id() {
        let ps = pairs(4);
        let scores: Vec<DccefScore> = [0.5, 0.5, 0.5, 0.5].iter().map(|&f| score(f)).collect();
        let kept = dccef_filter(&ps, &scores, Keep::Fraction(0.5)).unwrap();
        let kept_ids: Vec<u64> = kept.iter().map(|p| p.id).collect();
        assert_eq!(kept_ids, vec![0, 1]);
    }

    #[test]
    fn filter_threshold_mode() {
        let ps = pairs(4);
        let scores: Vec<DccefScore> = [0.1, 0.6, 0.59, 0.9].iter().map(|&f| score(f)).collect();
        let kept = dccef_filter(&ps, &scores, Keep::Threshold(0.6)).unwrap();
        let kept_ids: Vec<u64> = kept.iter().map(|p| p.id).collect();
        assert_eq!(kept_ids, vec![1, 3]);
    }

    #[test]
    fn filter_rejects_bad_policy() {
        let ps = pairs(2);
        let scores = vec![score(0.5), score(0.6)];
        assert!(matches!(
            dccef_filter(&ps, &scores, Keep::Fraction(0.0)),
            Err(SelectError::BadFraction(_))
        ));
        assert!(matches!(
            dccef_filter(&ps, &scores, Keep::Fraction(1.5)),
            Err(SelectError::BadFraction(_))
        ));
        assert!(matches!(
            dccef_filter(&ps, &scores, Keep::Threshold(1.5)),
            Err(SelectError::BadThreshold(_))
        ));
        assert!(matches!(
            dccef_filter(&ps, &scores[..1], Keep::Fraction(0.5)),
            Err(SelectError::ScoreCountMismatch { .. })
        ));
    }

    fn sents(text: &[&str]) -> Vec<Vec<String>> {
        text.iter()
            .map(|s| s.split_whitespace().map(String::from).collect())
            .collect()
    }

    #[test]
    fn mono_score_same_model_is_zero() {
        let lm = lm_train(&sents(&["a b c", "c b a"]), 2, 1).unwrap();
        let s = mono_score(&["a".to_string(), "b".to_string()], &lm, &lm);
        assert_eq!(s.combined, 0.0);
    }

    #[test]
    fn mono_score_antisymmetric() {
        let lm_a = lm_train(&sents(&["x y z x y"]), 2, 1).unwrap();
        let lm_b = lm_train(&sents(&["p q r p q"]), 2, 1).unwrap();
        let tokens: Vec<String> = vec!["x".into(), "q".into()];
        let fwd = mono_score(&tokens, &lm_a, &lm_b);
        let bwd = mono_score(&tokens, &lm_b, &lm_a);
        assert_eq!(fwd.combined, -bwd.combined);
    }

    #[test]
    fn mono_score_separates_synthetic_domains() {
        use rand_chacha::rand_core::{RngCore, SeedableRng};
        // disjoint-vocabulary domains
        let in_vocab = ["market", "price", "trade", "stock", "rate"];
        let out_vocab = ["cloud", "rain", "wind", "storm", "snow"];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut make = |vocab: &[&str], n: usize| -> Vec<Vec<String>> {
            (0..n)
                .map(|_| {
                    (0..4)
                        .map(|_| vocab[(rng.next_u64() % vocab.len() as u64) as usize].to_string())
                        .collect()
                })
                .collect()
        };
        let in_corpus = make(&in_vocab, 200);
        let out_corpus = make(&out_vocab, 200);
        let fixture = make(&in_vocab, 1000);
        let lm_in = lm_train(&in_corpus, 2, 1).unwrap();
        let lm_out = lm_train(&out_corpus, 2, 1).unwrap();
        let mean: f64 = fixture
            .iter()
            .map(|s| mono_score(s, &lm_in, &lm_out).combined)
            .sum::<f64>()
            / fixture.len() as f64;
        assert!(mean > 0.0, "mean combined score {mean}");
    }

    fn mono(n: u64) -> Vec<MonoSentence> {
        (0..n).map(|i| MonoSentence::new(i, format!("m{i}"))).collect()
    }

    fn mono_scores(h_in: &[f64]) -> Vec<MonoScore> {
        h_in.iter()
            .map(|&h| MonoScore {
                h_in: h,
                h_out: 0.0,
                combined: -h,
            })
            .collect()
    }

    #[test]
    fn select_mono_threshold_all_negative() {
        let corpus = mono(3);
        let scores = mono_scores(&[1.0, 2.0, 3.0]); // combined all negative
        let sel = select_mono(&corpus, &scores, MonoStrategy::CombinedThreshold(0.0)).unwrap();
        assert!(sel.sentences.is_empty());
        assert!(!sel.capped);
    }

    #[test]
    fn select_mono_top_by_hand() {
        let corpus = mono(4);
        let scores = mono_scores(&[5.0, 1.0, 2.0, 9.0]);
        let sel = select_mono(&corpus, &scores, MonoStrategy::InDomainTop(3)).unwrap();
        let ids: Vec<u64> = sel.sentences.iter().map(|s| s.id).collect();
        // selected set {1, 2, 0}, emitted in original corpus order
        assert_eq!(ids, vec![0, 1, 2]);
    }

    #[test]
    fn select_mono_top_caps_at_corpus_size() {
        let corpus = mono(4);
        let scores = mono_scores(&[5.0, 1.0, 2.0, 9.0]);
        let sel = select_mono(&corpus, &scores, MonoStrategy::InDomainTop(10)).unwrap();
        assert_eq!(sel.sentences.len(), 4);
        assert!(sel.capped);
    }

    #[test]
    fn select_mono_threshold_is_pointwise() {
        let corpus = mono(6);
        let scores = mono_scores(&[0.5, -1.0, 2.0, -0.2, 0.0, 3.0]);
        let sel = select_mono(&corpus, &scores, MonoStrategy::CombinedThreshold(-0.5)).unwrap();
        let base: Vec<u64> = sel.sentences.iter().map(|s| s.id).collect();

        // permute corpus and scores together; selected id set must match
        let perm = [3usize, 0, 5, 1, 4, 2];
        let pc: Vec<MonoSentence> = perm.iter().map(|&i| corpus[i].clone()).collect();
        let ps: Vec<MonoScore> = perm.iter().map(|&i| scores[i]).collect();
        let sel_p = select_mono(&pc, &ps, MonoStrategy::CombinedThreshold(-0.5)).unwrap();
        let mut permuted: Vec<u64> = sel_p.sentences.iter().map(|s| s.id).collect();
        permuted.sort_unstable();
        let mut expect = base.clone();
        expect.sort_unstable();
        assert_eq!(permuted, expect);
    }

    fn tagged(n: u64, origin: &str) -> Vec<SentencePair> {
        (0..n)
            .map(|i| {
                let mut p = SentencePair::new(i, format!("{origin}-s{i}"), format!("{origin}-t{i}"));
                p.origin = origin.to_string();
                p
            })
            .collect()
    }

    #[test]
    fn mixture_original_ratio_concatenates() {
        let mix = build_mixture(
            &tagged(5, "bit"),
            &tagged(8, "syn"),
            None,
            &MixtureSpec {
                strategy: MixtureStrategy::OriginalRatio,
                ratio: default_ratio(),
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!(mix.pairs.len(), 13);
        assert_eq!(mix.bitext_lines, 5);
        assert_eq!(mix.synthetic_lines, 8);
    }

    #[test]
    fn mixture_upsample_exact_counts() {
        let mix = build_mixture(
            &tagged(100, "bit"),
            &tagged(1000, "syn"),
            None,
            &MixtureSpec {
                strategy: MixtureStrategy::Upsampled1_1,
                ratio: default_ratio(),
                seed: 2,
            },
        )
        .unwrap();
        assert_eq!(mix.pairs.len(), 2000);
        let bit = mix.pairs.iter().filter(|p| p.origin == "bit").count();
        assert_eq!(bit, 1000);
    }

    #[test]
    fn mixture_upsample_remainder_sampling() {
        // 7 synthetic over 3 bitext: 2 full copies + 1 sampled
        let mix = build_mixture(
            &tagged(3, "bit"),
            &tagged(7, "syn"),
            None,
            &MixtureSpec {
                strategy: MixtureStrategy::Upsampled1_1,
                ratio: default_ratio(),
                seed: 3,
            },
        )
        .unwrap();
        let bit = mix.pairs.iter().filter(|p| p.origin == "bit").count();
        assert_eq!(bit, 7);
        assert_eq!(mix.pairs.len(), 14);
    }

    #[test]
    fn mixture_upsample_rejects_shrinking() {
        let got = build_mixture(
            &tagged(10, "bit"),
            &tagged(5, "syn"),
            None,
            &MixtureSpec {
                strategy: MixtureStrategy::Upsampled1_1,
                ratio: default_ratio(),
                seed: 0,
            },
        );
        assert!(matches!(got, Err(SelectError::UpsampleImpossible { .. })));
    }

    #[test]
    fn mixture_cutoff_ratio_arithmetic() {
        let synthetic = tagged(1000, "syn");
        let scores: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let mix = build_mixture(
            &tagged(100, "bit"),
            &synthetic,
            Some(&scores),
            &MixtureSpec {
                strategy: MixtureStrategy::Cutoff,
                ratio: (1, 2),
                seed: 4,
            },
        )
        .unwrap();
        assert_eq!(mix.pairs.len(), 300);
        // the 200 highest-scoring synthetic pairs are ids 800..1000
        let syn_kept: Vec<&SentencePair> =
            mix.pairs.iter().filter(|p| p.origin == "syn").collect();
        assert_eq!(syn_kept.len(), 200);
        assert!(syn_kept.iter().all(|p| {
            let n: u64 = p.src.trim_start_matches("syn-s").parse().unwrap();
            n >= 800
        }));
    }

    #[test]
    fn mixture_cutoff_caps_at_available() {
        let synthetic = tagged(5, "syn");
        let scores = vec![1.0; 5];
        let mix = build_mixture(
            &tagged(10, "bit"),
            &synthetic,
            Some(&scores),
            &MixtureSpec {
                strategy: MixtureStrategy::Cutoff,
                ratio: (1, 3),
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(mix.pairs.len(), 15);
    }

    #[test]
    fn mixture_cutoff_requires_scores() {
        let got = build_mixture(
            &tagged(10, "bit"),
            &tagged(10, "syn"),
            None,
            &MixtureSpec {
                strategy: MixtureStrategy::Cutoff,
                ratio: (1, 1),
                seed: 0,
            },
        );
        assert!(matches!(got, Err(SelectError::CutoffNeedsScores)));
    }

    #[test]
    fn mixture_is_seed_deterministic() {
        let bit = tagged(20, "bit");
        let syn = tagged(50, "syn");
        let spec = MixtureSpec {
            strategy: MixtureStrategy::Upsampled1_1,
            ratio: default_ratio(),
            seed: 7,
        };
        let a = build_mixture(&bit, &syn, None, &spec).unwrap();
        let b = build_mixture(&bit, &syn, None, &spec).unwrap();
        assert_eq!(a, b);
        let c = build_mixture(&bit, &syn, None, &MixtureSpec { seed: 8, ..spec }).unwrap();
        let texts = |m: &Mixture| m.pairs.iter().map(|p| p.src.clone()).collect::<Vec<_>>();
        assert_ne!(texts(&a), texts(&c), "different seed should reorder");
    }

    #[test]
    fn mixture_ids_contiguous_after_shuffle() {
        let mix = build_mixture(
            &tagged(5, "bit"),
            &tagged(5, "syn"),
            None,
            &MixtureSpec {
                strategy: MixtureStrategy::OriginalRatio,
                ratio: default_ratio(),
                seed: 11,
            },
        )
        .unwrap();
        let ids: Vec<u64> = mix.pairs.iter().map(|p| p.id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<u64>>());
    }

    #[test]
    fn score_file_roundtrip() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("scores.tsv");
        write_score_file(&path, [(0u64, 0.25), (1, -1.5), (2, 3.0)]).unwrap();
        let got = read_score_file(&path).unwrap();
        assert_eq!(got, vec![(0, 0.25), (1, -1.5), (2, 3.0)]);
        std::fs::write(&path, "0\tnot_a_number\n").unwrap();
        assert!(matches!(
            read_score_file(&path),
            Err(SelectError::ScoreFormat { line: 1, .. })
        ));
    }
}
