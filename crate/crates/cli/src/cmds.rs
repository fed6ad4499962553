//! Standalone subcommand implementations. Each command reads its inputs,
//! calls into the core library, writes outputs and prints a one-line summary
//! on stdout. Errors map to exit codes via [`crate::fail::Failure`].

use std::collections::{HashMap, HashSet};
use std::path::Path;

use corpusforge_core::corpus::{self, Manifest, ManifestEntry, SentencePair};
use corpusforge_core::filters::{self, FilterConfig, LangIdModel, Lexicon};
use corpusforge_core::lm;
use corpusforge_core::optim::{self, OptimKind, OptimizerConfig};
use corpusforge_core::rerank::{NBestGroup, RerankConfig};
use corpusforge_core::segaug::{self, AugmentConfig, BoundarySet, MergeTable};
use corpusforge_core::select::{self, Keep, MixtureSpec, MixtureStrategy, MonoStrategy};
use corpusforge_core::textnorm::{self, TruecaseModel};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::fail::{io_fail, CliResult, Failure};
use crate::{ApplySide, Side};

// ---------------------------------------------------------------------------
// shared helpers

pub(crate) fn split_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// `"<stage>:<hash>"` provenance tag; the hash covers the options that
/// influence output bytes.
pub(crate) fn stage_tag(stage: &str, config_json: &str) -> String {
    let digest = Sha256::digest(config_json.as_bytes());
    let hex: String = digest.iter().take(4).map(|b| format!("{b:02x}")).collect();
    format!("{stage}:{hex}")
}

/// Load a JSON config file; parse failures (including unknown keys) are
/// config errors, a missing file is an I/O error.
pub(crate) fn load_config_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    what: &str,
) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(io_fail(path))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("bad {what} config {}: {e}", path.display())))
}

/// Load a JSON data file; parse failures are data errors.
pub(crate) fn load_data_json<T: serde::de::DeserializeOwned>(
    path: &Path,
    what: &str,
) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(io_fail(path))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::data(format!("bad {what} file {}: {e}", path.display())))
}

pub(crate) fn save_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(io_fail(path))
}

pub(crate) fn save_manifest(entries: Vec<ManifestEntry>, path: &Path) -> CliResult<()> {
    Ok(Manifest { entries }.save(path)?)
}

fn maybe_save_manifest(entry: ManifestEntry, manifest: Option<&Path>) -> CliResult<()> {
    if let Some(path) = manifest {
        save_manifest(vec![entry], path)?;
    }
    Ok(())
}

/// `id<TAB>value` score file as an id-keyed map.
pub(crate) fn score_map(path: &Path) -> CliResult<HashMap<u64, f64>> {
    Ok(select::read_score_file(path)?.into_iter().collect())
}

/// Align a score map with a corpus; every record must be covered.
pub(crate) fn aligned_scores(
    pairs: &[SentencePair],
    map: &HashMap<u64, f64>,
    what: &str,
    path: &Path,
) -> CliResult<Vec<f64>> {
    pairs
        .iter()
        .map(|p| {
            map.get(&p.id).copied().ok_or_else(|| {
                Failure::data(format!(
                    "no {what} score for pair {} in {}",
                    p.id,
                    path.display()
                ))
            })
        })
        .collect()
}

/// Train a language id model from `lang=path` specs.
pub(crate) fn train_langid(specs: &[(String, std::path::PathBuf)]) -> CliResult<LangIdModel> {
    let mut corpora = Vec::new();
    for (lang, path) in specs {
        let text = std::fs::read_to_string(path).map_err(io_fail(path))?;
        corpora.push((lang.clone(), text));
    }
    Ok(filters::langid_train(
        corpora.iter().map(|(l, t)| (l.as_str(), t.as_str())),
    )?)
}

fn parse_langid_specs(specs: &[String]) -> CliResult<Vec<(String, std::path::PathBuf)>> {
    specs
        .iter()
        .map(|spec| {
            spec.split_once('=')
                .map(|(lang, path)| (lang.to_string(), std::path::PathBuf::from(path)))
                .ok_or_else(|| {
                    Failure::config(format!("bad --langid value `{spec}`, expected lang=path"))
                })
        })
        .collect()
}

pub(crate) fn read_word_set(path: &Path) -> CliResult<HashSet<String>> {
    let text = std::fs::read_to_string(path).map_err(io_fail(path))?;
    Ok(text.lines().map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect())
}

pub(crate) fn parse_ratio(s: &str) -> CliResult<(u32, u32)> {
    let parsed = s
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
    parsed.ok_or_else(|| Failure::config(format!("bad ratio `{s}`, expected a:b such as 1:2")))
}

pub(crate) fn parse_mix_strategy(s: &str) -> CliResult<MixtureStrategy> {
    match s {
        "original_ratio" => Ok(MixtureStrategy::OriginalRatio),
        "upsampled_1_1" => Ok(MixtureStrategy::Upsampled1_1),
        "cutoff" => Ok(MixtureStrategy::Cutoff),
        other => Err(Failure::config(format!(
            "unknown mixture strategy `{other}`, expected original_ratio, upsampled_1_1 or cutoff"
        ))),
    }
}

pub(crate) fn parse_optim_kinds(s: &str) -> CliResult<Vec<OptimKind>> {
    match s {
        "adam" => Ok(vec![OptimKind::Adam]),
        "qhadam" => Ok(vec![OptimKind::Qhadam]),
        "both" => Ok(vec![OptimKind::Adam, OptimKind::Qhadam]),
        other => Err(Failure::config(format!(
            "unknown optimizer `{other}`, expected adam, qhadam or both"
        ))),
    }
}

/// Score every pair, optionally with domain weighting of one side.
pub(crate) fn dccef_scores(
    pairs: &[SentencePair],
    fwd: &[f64],
    bwd: &[f64],
    domain_lms: Option<&(lm::NGramModel, lm::NGramModel)>,
    lm_side: Side,
) -> CliResult<Vec<select::DccefScore>> {
    pairs
        .par_iter()
        .zip(fwd.par_iter().zip(bwd))
        .map(|(pair, (&h_fwd, &h_bwd))| {
            let domain = domain_lms.map(|(lm_in, lm_out)| {
                let text = match lm_side {
                    Side::Src => &pair.src,
                    Side::Tgt => &pair.tgt,
                };
                let toks = split_tokens(text);
                (
                    lm::lm_cross_entropy(&toks, lm_in),
                    lm::lm_cross_entropy(&toks, lm_out),
                )
            });
            select::dccef_score(h_fwd, h_bwd, domain)
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::from)
}

// ---------------------------------------------------------------------------
// text commands

pub fn normalize(input: &Path, output: &Path, mono: bool, manifest: Option<&Path>) -> CliResult<()> {
    let tag = stage_tag("normalize", &format!("{{\"mono\":{mono}}}"));
    let entry = if mono {
        let mut sents = corpus::read_mono(input)?;
        for s in &mut sents {
            s.text = textnorm::normalize(&s.text);
        }
        corpus::write_mono(&sents, output, &tag)?
    } else {
        let mut pairs = corpus::read_parallel(input)?;
        for p in &mut pairs {
            p.src = textnorm::normalize(&p.src);
            p.tgt = textnorm::normalize(&p.tgt);
        }
        corpus::write_parallel(&pairs, output, &tag)?
    };
    println!("normalize: {} lines -> {}", entry.line_count, output.display());
    maybe_save_manifest(entry, manifest)
}

pub fn mask(input: &Path, output: &Path, map: &Path, mono: bool) -> CliResult<()> {
    let tag = stage_tag("mask", &format!("{{\"mono\":{mono}}}"));
    let mut sidecar = String::new();
    let entry = if mono {
        let mut sents = corpus::read_mono(input)?;
        for s in &mut sents {
            let masked = textnorm::mask_placeholders(&s.text);
            s.text = masked.text;
            let record = serde_json::json!({ "id": s.id, "slots": masked.map.slots });
            sidecar.push_str(&record.to_string());
            sidecar.push('\n');
        }
        corpus::write_mono(&sents, output, &tag)?
    } else {
        let mut pairs = corpus::read_parallel(input)?;
        for p in &mut pairs {
            let src = textnorm::mask_placeholders(&p.src);
            let tgt = textnorm::mask_placeholders(&p.tgt);
            p.src = src.text;
            p.tgt = tgt.text;
            let record = serde_json::json!({
                "id": p.id,
                "src": src.map.slots,
                "tgt": tgt.map.slots,
            });
            sidecar.push_str(&record.to_string());
            sidecar.push('\n');
        }
        corpus::write_parallel(&pairs, output, &tag)?
    };
    std::fs::write(map, sidecar).map_err(io_fail(map))?;
    println!(
        "mask: {} lines -> {} (map {})",
        entry.line_count,
        output.display(),
        map.display()
    );
    Ok(())
}

pub fn tokenize(input: &Path, output: &Path, mono: bool) -> CliResult<()> {
    let tag = stage_tag("tokenize", &format!("{{\"mono\":{mono}}}"));
    let entry = if mono {
        let mut sents = corpus::read_mono(input)?;
        for s in &mut sents {
            s.text = textnorm::tokenize(&s.text).join(" ");
        }
        corpus::write_mono(&sents, output, &tag)?
    } else {
        let mut pairs = corpus::read_parallel(input)?;
        for p in &mut pairs {
            p.src = textnorm::tokenize(&p.src).join(" ");
            p.tgt = textnorm::tokenize(&p.tgt).join(" ");
        }
        corpus::write_parallel(&pairs, output, &tag)?
    };
    println!("tokenize: {} lines -> {}", entry.line_count, output.display());
    Ok(())
}

pub fn truecase_train(
    input: &Path,
    model: &Path,
    side: Option<Side>,
    mono: bool,
) -> CliResult<()> {
    let sentences: Vec<Vec<String>> = if mono {
        corpus::read_mono(input)?
            .iter()
            .map(|s| split_tokens(&s.text))
            .collect()
    } else {
        let side = side.ok_or_else(|| {
            Failure::config("--side is required for parallel input (or pass --mono)")
        })?;
        corpus::read_parallel(input)?
            .iter()
            .map(|p| {
                split_tokens(match side {
                    Side::Src => &p.src,
                    Side::Tgt => &p.tgt,
                })
            })
            .collect()
    };
    let trained = textnorm::truecase_train(&sentences);
    trained.save(model)?;
    println!(
        "truecase-train: {} sentences -> {}",
        sentences.len(),
        model.display()
    );
    Ok(())
}

pub fn truecase_apply(
    input: &Path,
    output: &Path,
    model: &Path,
    side: ApplySide,
    mono: bool,
) -> CliResult<()> {
    let model_data = TruecaseModel::load(model)?;
    let recase = |text: &str| -> String {
        let mut toks = split_tokens(text);
        textnorm::truecase_apply(&mut toks, &model_data);
        toks.join(" ")
    };
    let tag = stage_tag("truecase-apply", &format!("{{\"mono\":{mono}}}"));
    let entry = if mono {
        let mut sents = corpus::read_mono(input)?;
        for s in &mut sents {
            s.text = recase(&s.text);
        }
        corpus::write_mono(&sents, output, &tag)?
    } else {
        let mut pairs = corpus::read_parallel(input)?;
        for p in &mut pairs {
            if matches!(side, ApplySide::Src | ApplySide::Both) {
                p.src = recase(&p.src);
            }
            if matches!(side, ApplySide::Tgt | ApplySide::Both) {
                p.tgt = recase(&p.tgt);
            }
        }
        corpus::write_parallel(&pairs, output, &tag)?
    };
    println!(
        "truecase-apply: {} lines -> {}",
        entry.line_count,
        output.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// filtering

#[allow(clippy::too_many_arguments)]
pub fn filter(
    input: &Path,
    output: &Path,
    config: Option<&Path>,
    lexicon: Option<&Path>,
    langid: &[String],
    report: Option<&Path>,
    rejected: Option<&Path>,
    manifest: Option<&Path>,
) -> CliResult<()> {
    let config_data: FilterConfig = match config {
        Some(path) => load_config_json(path, "filter")?,
        None => FilterConfig::default(),
    };
    config_data.validate()?;
    let lexicon_data = lexicon.map(Lexicon::load).transpose()?;
    let langid_specs = parse_langid_specs(langid)?;
    let langid_model = if langid_specs.is_empty() {
        None
    } else {
        Some(train_langid(&langid_specs)?)
    };
    if (config_data.expected_src_lang.is_some() || config_data.expected_tgt_lang.is_some())
        && langid_model.is_none()
    {
        return Err(Failure::config(
            "expected_src_lang/expected_tgt_lang set but no --langid training corpora given",
        ));
    }

    let pairs = corpus::read_parallel(input)?;
    let (kept, rep) =
        filters::run_filter_pipeline(&pairs, &config_data, langid_model.as_ref(), lexicon_data.as_ref());

    let tag = stage_tag(
        "filter",
        &serde_json::to_string(&config_data).expect("config serializes"),
    );
    let entry = corpus::write_parallel(&kept, output, &tag)?;

    if let Some(path) = rejected {
        let kept_ids: HashSet<u64> = kept.iter().map(|p| p.id).collect();
        let mut out = String::new();
        for pair in pairs.iter().filter(|p| !kept_ids.contains(&p.id)) {
            let verdict =
                filters::filter_pair(pair, &config_data, langid_model.as_ref(), lexicon_data.as_ref());
            let rule = verdict.failed_rule.map_or("unknown", |r| r.name());
            out.push_str(&format!("{}\t{}\t{}\n", pair.src, pair.tgt, rule));
        }
        std::fs::write(path, out).map_err(io_fail(path))?;
    }
    if let Some(path) = report {
        save_json(path, &rep)?;
    }
    println!(
        "filter: kept {}/{} ({:.3}) -> {}",
        rep.kept,
        rep.input,
        rep.retention,
        output.display()
    );
    maybe_save_manifest(entry, manifest)
}

pub fn dedupe(input: &Path, output: &Path, manifest: Option<&Path>) -> CliResult<()> {
    let pairs = corpus::read_parallel(input)?;
    let total = pairs.len();
    let kept = filters::dedupe(pairs);
    let entry = corpus::write_parallel(&kept, output, &stage_tag("dedupe", "{}"))?;
    println!("dedupe: kept {}/{} -> {}", kept.len(), total, output.display());
    maybe_save_manifest(entry, manifest)
}

// ---------------------------------------------------------------------------
// language models

pub fn lm_train(input: &Path, order: usize, min_count: u64, arpa: &Path) -> CliResult<()> {
    let sentences: Vec<Vec<String>> = corpus::read_mono(input)?
        .iter()
        .map(|s| split_tokens(&s.text))
        .collect();
    let model = lm::lm_train(&sentences, order, min_count)?;
    lm::arpa_export(&model, arpa)?;
    println!(
        "lm-train: order-{} model from {} sentences -> {}",
        order,
        sentences.len(),
        arpa.display()
    );
    Ok(())
}

pub fn lm_score(arpa: &Path, input: &Path, output: Option<&Path>) -> CliResult<()> {
    let model = lm::arpa_import(arpa)?;
    let sents = corpus::read_mono(input)?;
    let scores: Vec<(u64, f64)> = sents
        .par_iter()
        .map(|s| (s.id, lm::lm_cross_entropy(&split_tokens(&s.text), &model)))
        .collect();
    match output {
        Some(path) => {
            select::write_score_file(path, scores.iter().copied())?;
            let mean = scores.iter().map(|(_, v)| v).sum::<f64>() / scores.len().max(1) as f64;
            println!(
                "lm-score: {} sentences, mean cross-entropy {:.4} -> {}",
                scores.len(),
                mean,
                path.display()
            );
        }
        None => {
            for (id, value) in &scores {
                println!("{id}\t{value}");
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// selection and mixing

pub struct DccefArgs<'a> {
    pub pairs: &'a Path,
    pub fwd: &'a Path,
    pub bwd: &'a Path,
    pub in_lm: Option<&'a Path>,
    pub out_lm: Option<&'a Path>,
    pub lm_side: Side,
    pub keep_fraction: Option<f64>,
    pub keep_threshold: Option<f64>,
    pub output: &'a Path,
    pub scores: Option<&'a Path>,
    pub manifest: Option<&'a Path>,
}

pub fn dccef(args: DccefArgs) -> CliResult<()> {
    let keep = match (args.keep_fraction, args.keep_threshold) {
        (Some(f), None) => Keep::Fraction(f),
        (None, Some(t)) => Keep::Threshold(t),
        _ => {
            return Err(Failure::config(
                "exactly one of --keep-fraction and --keep-threshold is required",
            ))
        }
    };
    let domain_lms = match (args.in_lm, args.out_lm) {
        (Some(in_path), Some(out_path)) => {
            Some((lm::arpa_import(in_path)?, lm::arpa_import(out_path)?))
        }
        (None, None) => None,
        _ => return Err(Failure::config("--in-lm and --out-lm must be given together")),
    };

    let pairs = corpus::read_parallel(args.pairs)?;
    let fwd = aligned_scores(&pairs, &score_map(args.fwd)?, "forward", args.fwd)?;
    let bwd = aligned_scores(&pairs, &score_map(args.bwd)?, "backward", args.bwd)?;
    let scored = dccef_scores(&pairs, &fwd, &bwd, domain_lms.as_ref(), args.lm_side)?;
    let kept = select::dccef_filter(&pairs, &scored, keep)?;
    let tag = stage_tag(
        "dccef",
        &format!(
            "{{\"keep\":{:?},\"domain\":{}}}",
            keep,
            domain_lms.is_some()
        ),
    );
    let entry = corpus::write_parallel(&kept, args.output, &tag)?;
    if let Some(path) = args.scores {
        select::write_score_file(
            path,
            pairs.iter().zip(&scored).map(|(p, s)| (p.id, s.final_score)),
        )?;
    }
    println!(
        "dccef: kept {}/{} -> {}",
        kept.len(),
        pairs.len(),
        args.output.display()
    );
    maybe_save_manifest(entry, args.manifest)
}

#[allow(clippy::too_many_arguments)]
pub fn select_mono(
    input: &Path,
    in_lm: &Path,
    out_lm: &Path,
    strategy: &str,
    threshold: f64,
    top: Option<usize>,
    output: &Path,
    scores_out: Option<&Path>,
) -> CliResult<()> {
    let strat = match strategy {
        "combined_threshold" => MonoStrategy::CombinedThreshold(threshold),
        "in_domain_top" => MonoStrategy::InDomainTop(top.ok_or_else(|| {
            Failure::config("--top is required for the in_domain_top strategy")
        })?),
        other => {
            return Err(Failure::config(format!(
                "unknown strategy `{other}`, expected combined_threshold or in_domain_top"
            )))
        }
    };
    let lm_in = lm::arpa_import(in_lm)?;
    let lm_out = lm::arpa_import(out_lm)?;
    let sents = corpus::read_mono(input)?;
    let scored: Vec<select::MonoScore> = sents
        .par_iter()
        .map(|s| select::mono_score(&split_tokens(&s.text), &lm_in, &lm_out))
        .collect();
    let selection = select::select_mono(&sents, &scored, strat)?;
    let tag = stage_tag("select-mono", &format!("{{\"strategy\":\"{strategy}\"}}"));
    corpus::write_mono(&selection.sentences, output, &tag)?;
    if let Some(path) = scores_out {
        select::write_score_file(
            path,
            sents.iter().zip(&scored).map(|(s, sc)| (s.id, sc.combined)),
        )?;
    }
    if selection.capped {
        eprintln!("warning: budget exceeds corpus size, selected every sentence");
    }
    println!(
        "select-mono: kept {}/{} -> {}",
        selection.sentences.len(),
        sents.len(),
        output.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn mix(
    bitext: &Path,
    synthetic: &Path,
    strategy: &str,
    ratio: Option<&str>,
    scores: Option<&Path>,
    seed: u64,
    output: &Path,
    manifest: Option<&Path>,
) -> CliResult<()> {
    let spec = MixtureSpec {
        strategy: parse_mix_strategy(strategy)?,
        ratio: match ratio {
            Some(r) => parse_ratio(r)?,
            None => (1, 1),
        },
        seed,
    };
    let bitext_pairs = corpus::read_parallel(bitext)?;
    let synthetic_pairs = corpus::read_parallel(synthetic)?;
    let syn_scores = match scores {
        Some(path) => Some(aligned_scores(
            &synthetic_pairs,
            &score_map(path)?,
            "synthetic",
            path,
        )?),
        None => None,
    };
    let mixture = select::build_mixture(&bitext_pairs, &synthetic_pairs, syn_scores.as_deref(), &spec)?;
    let tag = stage_tag(
        "mix",
        &serde_json::to_string(&spec).expect("spec serializes"),
    );
    let entry = corpus::write_parallel(&mixture.pairs, output, &tag)?;
    println!(
        "mix: {} bitext + {} synthetic -> {} lines in {}",
        mixture.bitext_lines,
        mixture.synthetic_lines,
        mixture.pairs.len(),
        output.display()
    );
    maybe_save_manifest(entry, manifest)
}

// ---------------------------------------------------------------------------
// augmentation and subwords

pub struct AugmentArgs<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub config: Option<&'a Path>,
    pub seed: Option<u64>,
    pub ratio: Option<u32>,
    pub src_stopwords: Option<&'a Path>,
    pub tgt_stopwords: Option<&'a Path>,
    pub combined: bool,
    pub manifest: Option<&'a Path>,
}

pub fn augment_unk(args: AugmentArgs) -> CliResult<()> {
    let mut config: AugmentConfig = match args.config {
        Some(path) => load_config_json(path, "augmentation")?,
        None => AugmentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(ratio) = args.ratio {
        config.output_ratio = ratio;
    }
    if let Some(path) = args.src_stopwords {
        config.src_stopwords = read_word_set(path)?;
    }
    if let Some(path) = args.tgt_stopwords {
        config.tgt_stopwords = read_word_set(path)?;
    }

    let pairs = corpus::read_parallel(args.input)?;
    let augmented = segaug::unk_augment(&pairs, &config)?;
    let tag = stage_tag(
        "augment-unk",
        &serde_json::to_string(&config).expect("config serializes"),
    );
    let entry = if args.combined {
        corpus::write_parallel(pairs.iter().chain(&augmented.pairs), args.output, &tag)?
    } else {
        corpus::write_parallel(&augmented.pairs, args.output, &tag)?
    };
    println!(
        "augment-unk: {} pairs -> {} synthetic ({} skipped), {} lines in {}",
        pairs.len(),
        augmented.pairs.len(),
        augmented.skipped,
        entry.line_count,
        args.output.display()
    );
    maybe_save_manifest(entry, args.manifest)
}

pub fn bpe_train(
    input: &Path,
    num_merges: usize,
    vocab_threshold: u64,
    boundaries: Option<&Path>,
    merges_out: &Path,
) -> CliResult<()> {
    let sentences: Vec<Vec<String>> = corpus::read_mono(input)?
        .iter()
        .map(|s| split_tokens(&s.text))
        .collect();
    let bounds = boundaries.map(BoundarySet::load).transpose()?;
    let table = segaug::bpe_train_thresholded(&sentences, num_merges, vocab_threshold, bounds.as_ref())?;
    table.save(merges_out)?;
    println!(
        "bpe-train: learned {} merges from {} sentences -> {}",
        table.merges.len(),
        sentences.len(),
        merges_out.display()
    );
    Ok(())
}

pub fn bpe_apply(
    input: &Path,
    output: &Path,
    merges: &Path,
    boundaries: Option<&Path>,
    mono: bool,
) -> CliResult<()> {
    let table = MergeTable::load(merges)?;
    let bounds = boundaries.map(BoundarySet::load).transpose()?;
    let mut applier = segaug::BpeApplier::new(&table, bounds.as_ref());
    let tag = stage_tag("bpe-apply", &format!("{{\"mono\":{mono}}}"));
    let entry = if mono {
        let mut sents = corpus::read_mono(input)?;
        for s in &mut sents {
            s.text = applier.apply(&split_tokens(&s.text)).join(" ");
        }
        corpus::write_mono(&sents, output, &tag)?
    } else {
        let mut pairs = corpus::read_parallel(input)?;
        for p in &mut pairs {
            p.src = applier.apply(&split_tokens(&p.src)).join(" ");
            p.tgt = applier.apply(&split_tokens(&p.tgt)).join(" ");
        }
        corpus::write_parallel(&pairs, output, &tag)?
    };
    println!("bpe-apply: {} lines -> {}", entry.line_count, output.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// re-ranking and optimizer bench

pub fn rerank(
    nbest: &Path,
    r2l: &Path,
    n: usize,
    w_l2r: f64,
    w_r2l: f64,
    output: &Path,
    full: Option<&Path>,
) -> CliResult<()> {
    let config = RerankConfig { n, w_l2r, w_r2l };
    let mut groups = corpusforge_core::rerank::parse_nbest(nbest)?;
    let scores = corpusforge_core::rerank::read_r2l_scores(r2l)?;
    corpusforge_core::rerank::join_r2l(&mut groups, &scores)?;
    let ranked = corpusforge_core::rerank::rerank(&groups, &config)?;

    let best_groups: Vec<NBestGroup> = ranked
        .best
        .iter()
        .map(|e| NBestGroup {
            sent_id: e.sent_id,
            entries: vec![e.clone()],
        })
        .collect();
    corpusforge_core::rerank::write_nbest(output, &best_groups)?;
    if let Some(path) = full {
        corpusforge_core::rerank::write_nbest(path, &ranked.groups)?;
    }
    println!(
        "rerank: {} sentences -> {}",
        ranked.best.len(),
        output.display()
    );
    Ok(())
}

pub fn optim_bench(
    problem: &str,
    kind: &str,
    steps: u64,
    seed: u64,
    lr0: f64,
    warmup: u64,
    output: Option<&Path>,
) -> CliResult<()> {
    let prob = optim::Problem::bundled(problem).ok_or_else(|| {
        Failure::config(format!(
            "unknown problem `{problem}`, expected one of {}",
            optim::Problem::bundled_names().join(", ")
        ))
    })?;
    let kinds = parse_optim_kinds(kind)?;

    let mut reports = Vec::new();
    for k in kinds {
        let mut config = OptimizerConfig::new(k);
        config.lr0 = lr0;
        config.warmup = warmup;
        reports.push(optim::run_trial(&prob, &config, steps, seed)?);
    }

    println!(
        "{:<10} {:>13} {:>13} {:>10} {:>9}",
        "optimizer", "final_loss", "best_loss", "to_1e-6", "diverged"
    );
    for report in &reports {
        let name = match report.config.kind {
            OptimKind::Adam => "adam",
            OptimKind::Qhadam => "qhadam",
        };
        let to_threshold = report
            .steps_to_threshold
            .map_or_else(|| "-".to_string(), |s| s.to_string());
        println!(
            "{:<10} {:>13.6e} {:>13.6e} {:>10} {:>9}",
            name, report.final_loss, report.best_loss, to_threshold, report.diverged
        );
    }
    if let Some(path) = output {
        save_json(path, &reports)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// stats

pub fn stats(manifest_path: &Path, filter_report: Option<&Path>) -> CliResult<()> {
    let manifest = Manifest::load(manifest_path)?;
    manifest.verify()?;

    let single = manifest.entries.len() <= 1;
    let base = manifest.entries.first().map_or(0, |e| e.line_count);
    let width = manifest
        .entries
        .iter()
        .map(|e| e.path.len())
        .chain(["file".len()])
        .max()
        .unwrap_or(4);

    if single {
        println!("{:<width$}  {:>10}  created_by", "file", "lines");
    } else {
        println!(
            "{:<width$}  {:>10}  {:>9}  created_by",
            "file", "lines", "retention"
        );
    }
    for entry in &manifest.entries {
        if single {
            println!(
                "{:<width$}  {:>10}  {}",
                entry.path, entry.line_count, entry.created_by
            );
        } else {
            let retention = if base == 0 {
                0.0
            } else {
                entry.line_count as f64 / base as f64
            };
            println!(
                "{:<width$}  {:>10}  {:>9.3}  {}",
                entry.path, entry.line_count, retention, entry.created_by
            );
        }
    }

    if let Some(path) = filter_report {
        let report: filters::FilterReport = load_data_json(path, "filter report")?;
        println!();
        println!(
            "filter: kept {}/{} ({:.3})",
            report.kept, report.input, report.retention
        );
        if !report.rejected_by_rule.is_empty() {
            println!("rejected by rule:");
            for (rule, count) in &report.rejected_by_rule {
                println!("  {rule:<16} {count:>10}");
            }
        }
    }
    Ok(())
}
