//! Multi-stage pipeline runner. Stages execute in a fixed dependency order;
//! corpus stages (normalize, filter, dccef, mix, augment, bpe) each read the
//! previous corpus file and write the next one, side stages (lm, select,
//! rerank, optim) produce artifacts without advancing the chain. Every stage
//! writes its outputs, a manifest and a report under `workdir/<stage>/`;
//! reruns are byte-identical and independent of thread count. A stage
//! failure halts the chain, retaining the outputs of completed stages.
//!
//! Score files consumed by a stage (dccef `fwd`/`bwd`, mix `scores`) are
//! keyed by 0-based line numbers of the corpus file that stage reads.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use corpusforge_core::corpus::{self, FileRole, Manifest, ManifestEntry};
use corpusforge_core::filters::{self, FilterConfig, Lexicon};
use corpusforge_core::lm;
use corpusforge_core::optim::{self, OptimizerConfig};
use corpusforge_core::rerank::{self as rerank_core, NBestGroup, RerankConfig};
use corpusforge_core::segaug::{self, AugmentConfig, BoundarySet};
use corpusforge_core::select::{self, Keep, MixtureSpec, MonoStrategy};
use corpusforge_core::textnorm;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cmds;
use crate::fail::{io_fail, CliResult, Failure};
use crate::Side;

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CfgSide {
    Src,
    Tgt,
}

impl From<CfgSide> for Side {
    fn from(side: CfgSide) -> Self {
        match side {
            CfgSide::Src => Side::Src,
            CfgSide::Tgt => Side::Tgt,
        }
    }
}

fn default_side() -> CfgSide {
    CfgSide::Tgt
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Parallel corpus feeding the chain.
    input: PathBuf,
    #[serde(default)]
    workdir: Option<PathBuf>,
    /// Worker threads; informational only, never alters output bytes.
    #[serde(default)]
    threads: Option<usize>,
    /// Overrides per-stage seeds when set.
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    normalize: Option<NormalizeStage>,
    #[serde(default)]
    filter: Option<FilterStage>,
    #[serde(default)]
    lm: Option<LmStage>,
    #[serde(default)]
    dccef: Option<DccefStage>,
    #[serde(default)]
    select: Option<SelectStage>,
    #[serde(default)]
    mix: Option<MixStage>,
    #[serde(default)]
    augment: Option<AugmentStage>,
    #[serde(default)]
    bpe: Option<BpeStage>,
    #[serde(default)]
    rerank: Option<RerankStage>,
    #[serde(default)]
    optim: Option<OptimStage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormalizeStage {}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterStage {
    #[serde(default)]
    config: Option<FilterConfig>,
    #[serde(default)]
    lexicon: Option<PathBuf>,
    /// Language id training corpora, language -> text file.
    #[serde(default)]
    langid: BTreeMap<String, PathBuf>,
}

fn default_order() -> usize {
    4
}

fn default_min_count() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LmStage {
    #[serde(default = "default_order")]
    order: usize,
    #[serde(default = "default_min_count")]
    min_count: u64,
    /// Which side of the current corpus to train on.
    #[serde(default = "default_side")]
    side: CfgSide,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DccefStage {
    /// Forward cross-entropies keyed by current-corpus line number.
    fwd: PathBuf,
    /// Backward cross-entropies keyed by current-corpus line number.
    bwd: PathBuf,
    #[serde(default)]
    keep_fraction: Option<f64>,
    #[serde(default)]
    keep_threshold: Option<f64>,
    #[serde(default)]
    in_lm: Option<PathBuf>,
    #[serde(default)]
    out_lm: Option<PathBuf>,
    #[serde(default = "default_side")]
    lm_side: CfgSide,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SelectStage {
    /// Monolingual corpus to select from.
    input: PathBuf,
    in_lm: PathBuf,
    out_lm: PathBuf,
    /// `combined_threshold` or `in_domain_top`.
    strategy: String,
    #[serde(default)]
    threshold: f64,
    #[serde(default)]
    top: Option<usize>,
}

fn default_ratio() -> String {
    "1:1".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixStage {
    synthetic: PathBuf,
    /// `original_ratio`, `upsampled_1_1` or `cutoff`.
    strategy: String,
    #[serde(default = "default_ratio")]
    ratio: String,
    /// Synthetic pair scores keyed by synthetic line number (cutoff only).
    #[serde(default)]
    scores: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AugmentStage {
    #[serde(default)]
    config: AugmentConfig,
    /// Write originals followed by synthetic pairs (default) rather than
    /// synthetic pairs alone.
    #[serde(default = "default_true")]
    combined: bool,
}

fn default_vocab_threshold() -> u64 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BpeStage {
    num_merges: usize,
    #[serde(default = "default_vocab_threshold")]
    vocab_threshold: u64,
    #[serde(default)]
    boundaries: Option<PathBuf>,
}

fn default_n() -> usize {
    12
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RerankStage {
    nbest: PathBuf,
    r2l: PathBuf,
    #[serde(default = "default_n")]
    n: usize,
    #[serde(default = "default_weight")]
    w_l2r: f64,
    #[serde(default = "default_weight")]
    w_r2l: f64,
}

fn default_kind() -> String {
    "both".to_string()
}

fn default_steps() -> u64 {
    10_000
}

fn default_trial_seed() -> u64 {
    1
}

fn default_lr0() -> f64 {
    0.0005
}

fn default_warmup() -> u64 {
    1600
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimStage {
    /// `sphere`, `quadratic` or `rosenbrock`.
    problem: String,
    #[serde(default = "default_kind")]
    kind: String,
    #[serde(default = "default_steps")]
    steps: u64,
    #[serde(default = "default_trial_seed")]
    seed: u64,
    #[serde(default = "default_lr0")]
    lr0: f64,
    #[serde(default = "default_warmup")]
    warmup: u64,
}

// ---------------------------------------------------------------------------
// chain state and summary

#[derive(Debug, Clone, Serialize)]
struct ChainStep {
    step: String,
    path: String,
    lines: u64,
    sha256: String,
}

#[derive(Debug, Clone, Serialize)]
struct StageSummary {
    stage: String,
    outputs: Vec<String>,
    lines_out: Option<u64>,
}

#[derive(Debug, Serialize)]
struct RetentionRow {
    step: String,
    lines: u64,
    /// Fraction of the original input still present.
    retention: f64,
}

#[derive(Debug, Serialize)]
struct PipelineSummary {
    input: String,
    stages: Vec<StageSummary>,
    /// The corpus chain: input plus every corpus-stage output, with hashes.
    chain: Vec<ChainStep>,
    /// Line retention over the reduction stages, relative to the input.
    retention: Vec<RetentionRow>,
}

struct Chain {
    workdir: PathBuf,
    seed: Option<u64>,
    current: PathBuf,
    steps: Vec<ChainStep>,
    summaries: Vec<StageSummary>,
}

/// Stages that only ever drop lines; the retention table covers these.
const REDUCTION_STEPS: [&str; 4] = ["input", "normalize", "filter", "dccef"];

fn tag_of<T: Serialize>(stage: &str, section: &T) -> String {
    let json = serde_json::to_string(section).expect("stage config serializes");
    cmds::stage_tag(stage, &json)
}

fn stage_dir(chain: &Chain, name: &str) -> CliResult<PathBuf> {
    let dir = chain.workdir.join(name);
    std::fs::create_dir_all(&dir).map_err(io_fail(&dir))?;
    Ok(dir)
}

fn artifact_entry(path: &Path, created_by: &str) -> CliResult<ManifestEntry> {
    let (line_count, sha256) = corpus::hash_file(path)?;
    Ok(ManifestEntry {
        path: path.display().to_string(),
        role: FileRole::Artifact,
        line_count,
        sha256,
        created_by: created_by.to_string(),
    })
}

/// Write the stage's manifest and report; advance the chain when the first
/// entry is the next corpus.
fn finish_stage(
    chain: &mut Chain,
    name: &str,
    dir: &Path,
    entries: Vec<ManifestEntry>,
    report: serde_json::Value,
    chained: bool,
) -> CliResult<()> {
    cmds::save_json(&dir.join("report.json"), &report)?;
    Manifest {
        entries: entries.clone(),
    }
    .save(&dir.join("manifest.json"))?;
    let first = entries.first().cloned();
    chain.summaries.push(StageSummary {
        stage: name.to_string(),
        outputs: entries.iter().map(|e| e.path.clone()).collect(),
        lines_out: first.as_ref().map(|e| e.line_count),
    });
    if chained {
        let entry = first.expect("corpus stage writes a corpus");
        chain.current = PathBuf::from(&entry.path);
        chain.steps.push(ChainStep {
            step: name.to_string(),
            path: entry.path,
            lines: entry.line_count,
            sha256: entry.sha256,
        });
    }
    println!("stage {name}: done");
    Ok(())
}

// ---------------------------------------------------------------------------
// stages

fn stage_normalize(chain: &mut Chain, stage: &NormalizeStage) -> CliResult<()> {
    let dir = stage_dir(chain, "normalize")?;
    let mut pairs = corpus::read_parallel(&chain.current)?;
    let input_lines = pairs.len() as u64;
    for p in &mut pairs {
        p.src = textnorm::normalize(&p.src);
        p.tgt = textnorm::normalize(&p.tgt);
    }
    let entry = corpus::write_parallel(&pairs, &dir.join("corpus.tsv"), &tag_of("normalize", stage))?;
    let report = serde_json::json!({ "input": input_lines, "output": entry.line_count });
    finish_stage(chain, "normalize", &dir, vec![entry], report, true)
}

fn stage_filter(chain: &mut Chain, stage: &FilterStage) -> CliResult<()> {
    let dir = stage_dir(chain, "filter")?;
    let config = stage.config.clone().unwrap_or_default();
    config.validate()?;
    let lexicon = stage.lexicon.as_deref().map(Lexicon::load).transpose()?;
    let langid = if stage.langid.is_empty() {
        None
    } else {
        let specs: Vec<(String, PathBuf)> = stage
            .langid
            .iter()
            .map(|(lang, path)| (lang.clone(), path.clone()))
            .collect();
        Some(cmds::train_langid(&specs)?)
    };
    if (config.expected_src_lang.is_some() || config.expected_tgt_lang.is_some())
        && langid.is_none()
    {
        return Err(Failure::config(
            "filter: expected_src_lang/expected_tgt_lang set but no langid corpora configured",
        ));
    }
    let pairs = corpus::read_parallel(&chain.current)?;
    let (kept, report) =
        filters::run_filter_pipeline(&pairs, &config, langid.as_ref(), lexicon.as_ref());
    let entry = corpus::write_parallel(&kept, &dir.join("corpus.tsv"), &tag_of("filter", stage))?;
    let report = serde_json::to_value(&report).expect("report serializes");
    finish_stage(chain, "filter", &dir, vec![entry], report, true)
}

fn stage_lm(chain: &mut Chain, stage: &LmStage) -> CliResult<()> {
    let dir = stage_dir(chain, "lm")?;
    let tag = tag_of("lm", stage);
    let pairs = corpus::read_parallel(&chain.current)?;
    let sentences: Vec<Vec<String>> = pairs
        .iter()
        .map(|p| {
            cmds::split_tokens(match stage.side {
                CfgSide::Src => &p.src,
                CfgSide::Tgt => &p.tgt,
            })
        })
        .collect();
    let model = lm::lm_train(&sentences, stage.order, stage.min_count)?;
    let arpa = dir.join("model.arpa");
    lm::arpa_export(&model, &arpa)?;
    let entry = artifact_entry(&arpa, &tag)?;
    let report = serde_json::json!({
        "sentences": sentences.len(),
        "order": stage.order,
        "ngram_counts": (1..=stage.order).map(|o| model.ngram_count(o)).collect::<Vec<_>>(),
    });
    finish_stage(chain, "lm", &dir, vec![entry], report, false)
}

fn stage_dccef(chain: &mut Chain, stage: &DccefStage) -> CliResult<()> {
    let dir = stage_dir(chain, "dccef")?;
    let tag = tag_of("dccef", stage);
    let keep = match (stage.keep_fraction, stage.keep_threshold) {
        (Some(f), None) => Keep::Fraction(f),
        (None, Some(t)) => Keep::Threshold(t),
        _ => {
            return Err(Failure::config(
                "dccef: exactly one of keep_fraction and keep_threshold is required",
            ))
        }
    };
    let domain_lms = match (&stage.in_lm, &stage.out_lm) {
        (Some(in_path), Some(out_path)) => {
            Some((lm::arpa_import(in_path)?, lm::arpa_import(out_path)?))
        }
        (None, None) => None,
        _ => return Err(Failure::config("dccef: in_lm and out_lm must be given together")),
    };
    let pairs = corpus::read_parallel(&chain.current)?;
    let fwd = cmds::aligned_scores(&pairs, &cmds::score_map(&stage.fwd)?, "forward", &stage.fwd)?;
    let bwd = cmds::aligned_scores(&pairs, &cmds::score_map(&stage.bwd)?, "backward", &stage.bwd)?;
    let scored = cmds::dccef_scores(&pairs, &fwd, &bwd, domain_lms.as_ref(), stage.lm_side.into())?;
    let kept = select::dccef_filter(&pairs, &scored, keep)?;

    let entry = corpus::write_parallel(&kept, &dir.join("corpus.tsv"), &tag)?;
    let scores_path = dir.join("scores.tsv");
    select::write_score_file(
        &scores_path,
        pairs.iter().zip(&scored).map(|(p, s)| (p.id, s.final_score)),
    )?;
    let scores_entry = artifact_entry(&scores_path, &tag)?;
    let report = serde_json::json!({
        "input": pairs.len(),
        "kept": kept.len(),
        "retention": kept.len() as f64 / pairs.len().max(1) as f64,
    });
    finish_stage(chain, "dccef", &dir, vec![entry, scores_entry], report, true)
}

fn stage_select(chain: &mut Chain, stage: &SelectStage) -> CliResult<()> {
    let dir = stage_dir(chain, "select")?;
    let tag = tag_of("select", stage);
    let strategy = match stage.strategy.as_str() {
        "combined_threshold" => MonoStrategy::CombinedThreshold(stage.threshold),
        "in_domain_top" => MonoStrategy::InDomainTop(stage.top.ok_or_else(|| {
            Failure::config("select: `top` is required for the in_domain_top strategy")
        })?),
        other => {
            return Err(Failure::config(format!(
                "select: unknown strategy `{other}`, expected combined_threshold or in_domain_top"
            )))
        }
    };
    let lm_in = lm::arpa_import(&stage.in_lm)?;
    let lm_out = lm::arpa_import(&stage.out_lm)?;
    let sents = corpus::read_mono(&stage.input)?;
    let scored: Vec<select::MonoScore> = sents
        .par_iter()
        .map(|s| select::mono_score(&cmds::split_tokens(&s.text), &lm_in, &lm_out))
        .collect();
    let selection = select::select_mono(&sents, &scored, strategy)?;
    let entry = corpus::write_mono(&selection.sentences, &dir.join("selected.txt"), &tag)?;
    let report = serde_json::json!({
        "input": sents.len(),
        "kept": selection.sentences.len(),
        "capped": selection.capped,
    });
    finish_stage(chain, "select", &dir, vec![entry], report, false)
}

fn stage_mix(chain: &mut Chain, stage: &MixStage) -> CliResult<()> {
    let dir = stage_dir(chain, "mix")?;
    let spec = MixtureSpec {
        strategy: cmds::parse_mix_strategy(&stage.strategy)?,
        ratio: cmds::parse_ratio(&stage.ratio)?,
        seed: chain.seed.unwrap_or(stage.seed),
    };
    let bitext = corpus::read_parallel(&chain.current)?;
    let synthetic = corpus::read_parallel(&stage.synthetic)?;
    let syn_scores = match &stage.scores {
        Some(path) => Some(cmds::aligned_scores(
            &synthetic,
            &cmds::score_map(path)?,
            "synthetic",
            path,
        )?),
        None => None,
    };
    let mixture = select::build_mixture(&bitext, &synthetic, syn_scores.as_deref(), &spec)?;
    let entry = corpus::write_parallel(&mixture.pairs, &dir.join("corpus.tsv"), &tag_of("mix", stage))?;
    let report = serde_json::json!({
        "bitext": mixture.bitext_lines,
        "synthetic": mixture.synthetic_lines,
        "output": mixture.pairs.len(),
        "strategy": stage.strategy,
    });
    finish_stage(chain, "mix", &dir, vec![entry], report, true)
}

fn stage_augment(chain: &mut Chain, stage: &AugmentStage) -> CliResult<()> {
    let dir = stage_dir(chain, "augment")?;
    let mut config = stage.config.clone();
    if let Some(seed) = chain.seed {
        config.seed = seed;
    }
    let pairs = corpus::read_parallel(&chain.current)?;
    let augmented = segaug::unk_augment(&pairs, &config)?;
    let out = dir.join("corpus.tsv");
    let tag = tag_of("augment", stage);
    let entry = if stage.combined {
        corpus::write_parallel(pairs.iter().chain(&augmented.pairs), &out, &tag)?
    } else {
        corpus::write_parallel(&augmented.pairs, &out, &tag)?
    };
    let report = serde_json::json!({
        "input": pairs.len(),
        "synthetic": augmented.pairs.len(),
        "skipped": augmented.skipped,
        "output": entry.line_count,
    });
    finish_stage(chain, "augment", &dir, vec![entry], report, true)
}

fn stage_bpe(chain: &mut Chain, stage: &BpeStage) -> CliResult<()> {
    let dir = stage_dir(chain, "bpe")?;
    let tag = tag_of("bpe", stage);
    let bounds = stage.boundaries.as_deref().map(BoundarySet::load).transpose()?;
    let pairs = corpus::read_parallel(&chain.current)?;
    // merges are learned jointly over both sides of the current corpus
    let mut sentences: Vec<Vec<String>> = Vec::with_capacity(pairs.len() * 2);
    for p in &pairs {
        sentences.push(cmds::split_tokens(&p.src));
        sentences.push(cmds::split_tokens(&p.tgt));
    }
    let table =
        segaug::bpe_train_thresholded(&sentences, stage.num_merges, stage.vocab_threshold, bounds.as_ref())?;
    let merges_path = dir.join("merges.txt");
    table.save(&merges_path)?;

    let mut applier = segaug::BpeApplier::new(&table, bounds.as_ref());
    let mut segmented = pairs;
    for p in &mut segmented {
        p.src = applier.apply(&cmds::split_tokens(&p.src)).join(" ");
        p.tgt = applier.apply(&cmds::split_tokens(&p.tgt)).join(" ");
    }
    let entry = corpus::write_parallel(&segmented, &dir.join("corpus.tsv"), &tag)?;
    let merges_entry = artifact_entry(&merges_path, &tag)?;
    let report = serde_json::json!({
        "merges": table.merges.len(),
        "lines": entry.line_count,
    });
    finish_stage(chain, "bpe", &dir, vec![entry, merges_entry], report, true)
}

fn stage_rerank(chain: &mut Chain, stage: &RerankStage) -> CliResult<()> {
    let dir = stage_dir(chain, "rerank")?;
    let tag = tag_of("rerank", stage);
    let config = RerankConfig {
        n: stage.n,
        w_l2r: stage.w_l2r,
        w_r2l: stage.w_r2l,
    };
    let mut groups = rerank_core::parse_nbest(&stage.nbest)?;
    let scores = rerank_core::read_r2l_scores(&stage.r2l)?;
    rerank_core::join_r2l(&mut groups, &scores)?;
    let ranked = rerank_core::rerank(&groups, &config)?;
    let best: Vec<NBestGroup> = ranked
        .best
        .iter()
        .map(|e| NBestGroup {
            sent_id: e.sent_id,
            entries: vec![e.clone()],
        })
        .collect();
    let out = dir.join("best.nbest");
    rerank_core::write_nbest(&out, &best)?;
    let entry = artifact_entry(&out, &tag)?;
    let report = serde_json::json!({ "sentences": ranked.best.len() });
    finish_stage(chain, "rerank", &dir, vec![entry], report, false)
}

fn stage_optim(chain: &mut Chain, stage: &OptimStage) -> CliResult<()> {
    let dir = stage_dir(chain, "optim")?;
    let tag = tag_of("optim", stage);
    let problem = optim::Problem::bundled(&stage.problem).ok_or_else(|| {
        Failure::config(format!(
            "optim: unknown problem `{}`, expected one of {}",
            stage.problem,
            optim::Problem::bundled_names().join(", ")
        ))
    })?;
    let mut reports = Vec::new();
    for kind in cmds::parse_optim_kinds(&stage.kind)? {
        let mut config = OptimizerConfig::new(kind);
        config.lr0 = stage.lr0;
        config.warmup = stage.warmup;
        reports.push(optim::run_trial(&problem, &config, stage.steps, stage.seed)?);
    }
    let out = dir.join("trials.json");
    cmds::save_json(&out, &reports)?;
    let entry = artifact_entry(&out, &tag)?;
    let report = serde_json::json!({
        "problem": stage.problem,
        "trials": reports.len(),
        "final_losses": reports.iter().map(|r| r.final_loss).collect::<Vec<_>>(),
    });
    finish_stage(chain, "optim", &dir, vec![entry], report, false)
}

// ---------------------------------------------------------------------------
// runner

fn run_stages(config: &PipelineConfig, chain: &mut Chain) -> CliResult<()> {
    if let Some(stage) = &config.normalize {
        stage_normalize(chain, stage)?;
    }
    if let Some(stage) = &config.filter {
        stage_filter(chain, stage)?;
    }
    if let Some(stage) = &config.lm {
        stage_lm(chain, stage)?;
    }
    if let Some(stage) = &config.dccef {
        stage_dccef(chain, stage)?;
    }
    if let Some(stage) = &config.select {
        stage_select(chain, stage)?;
    }
    if let Some(stage) = &config.mix {
        stage_mix(chain, stage)?;
    }
    if let Some(stage) = &config.augment {
        stage_augment(chain, stage)?;
    }
    if let Some(stage) = &config.bpe {
        stage_bpe(chain, stage)?;
    }
    if let Some(stage) = &config.rerank {
        stage_rerank(chain, stage)?;
    }
    if let Some(stage) = &config.optim {
        stage_optim(chain, stage)?;
    }
    Ok(())
}

pub fn run_pipeline(config_path: &Path, cli_workdir: Option<&Path>) -> CliResult<()> {
    let config: PipelineConfig = cmds::load_config_json(config_path, "pipeline")?;
    let workdir = cli_workdir
        .map(Path::to_path_buf)
        .or_else(|| config.workdir.clone())
        .ok_or_else(|| {
            Failure::config("no workdir: pass --workdir or set `workdir` in the pipeline config")
        })?;
    if let Some(threads) = config.threads {
        if threads > 0 {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    }
    std::fs::create_dir_all(&workdir).map_err(io_fail(&workdir))?;

    let (lines, sha256) = corpus::hash_file(&config.input)?;
    let mut chain = Chain {
        workdir,
        seed: config.seed,
        current: config.input.clone(),
        steps: vec![ChainStep {
            step: "input".to_string(),
            path: config.input.display().to_string(),
            lines,
            sha256,
        }],
        summaries: Vec::new(),
    };

    run_stages(&config, &mut chain)?;

    let base = chain.steps[0].lines;
    let retention: Vec<RetentionRow> = chain
        .steps
        .iter()
        .filter(|s| REDUCTION_STEPS.contains(&s.step.as_str()))
        .map(|s| RetentionRow {
            step: s.step.clone(),
            lines: s.lines,
            retention: if base == 0 { 0.0 } else { s.lines as f64 / base as f64 },
        })
        .collect();
    let summary = PipelineSummary {
        input: config.input.display().to_string(),
        stages: chain.summaries.clone(),
        chain: chain.steps.clone(),
        retention,
    };
    cmds::save_json(&chain.workdir.join("summary.json"), &summary)?;

    println!(
        "pipeline: {} stages complete, workdir {}",
        summary.stages.len(),
        chain.workdir.display()
    );
    println!("{:<12} {:>12} {:>10}", "step", "lines", "retention");
    for row in &summary.retention {
        println!("{:<12} {:>12} {:>10.3}", row.step, row.lines, row.retention);
    }
    Ok(())
}
