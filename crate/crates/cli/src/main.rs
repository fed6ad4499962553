//! corpusforge: a corpus engineering toolkit for machine translation data
//! pipelines. Every command is deterministic given its inputs, config and
//! seed; thread count never changes output bytes.

mod cmds;
mod fail;
mod pipeline;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use fail::CliResult;

#[derive(Parser)]
#[command(
    name = "corpusforge",
    version,
    about = "Deterministic corpus cleaning, filtering, selection and augmentation for MT pipelines"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "CORPUSFORGE_THREADS", default_value_t = 0)]
    threads: usize,
    /// Directory for pipeline stage outputs.
    #[arg(long, global = true, env = "CORPUSFORGE_WORKDIR")]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Side {
    Src,
    Tgt,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ApplySide {
    Src,
    Tgt,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize punctuation, entities and whitespace.
    Normalize {
        /// Input pairs, `src<TAB>tgt` per line (one sentence per line with --mono).
        #[arg(long)]
        input: PathBuf,
        /// Normalized output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Treat the input as monolingual text (one sentence per line).
        #[arg(long)]
        mono: bool,
        /// Write a provenance manifest for the output file.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Replace emails, URLs and tags with numbered placeholder tokens.
    Mask {
        /// Input pairs, `src<TAB>tgt` per line (one sentence per line with --mono).
        #[arg(long)]
        input: PathBuf,
        /// Masked output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Sidecar JSONL file recording the original strings per line.
        #[arg(long)]
        map: PathBuf,
        /// Treat the input as monolingual text (one sentence per line).
        #[arg(long)]
        mono: bool,
    },
    /// Split text into tokens (space-joined output).
    Tokenize {
        /// Input pairs, `src<TAB>tgt` per line (one sentence per line with --mono).
        #[arg(long)]
        input: PathBuf,
        /// Tokenized output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Treat the input as monolingual text (one sentence per line).
        #[arg(long)]
        mono: bool,
    },
    /// Learn most-frequent casing from non-sentence-initial positions.
    TruecaseTrain {
        /// Tokenized input corpus.
        #[arg(long)]
        input: PathBuf,
        /// Where to write the learned casing table.
        #[arg(long)]
        model: PathBuf,
        /// Which side to train on (parallel input).
        #[arg(long, value_enum)]
        side: Option<Side>,
        /// Treat the input as monolingual text (one sentence per line).
        #[arg(long)]
        mono: bool,
    },
    /// Restore learned casing on sentence-initial tokens.
    TruecaseApply {
        /// Input pairs, `src<TAB>tgt` per line (one sentence per line with --mono).
        #[arg(long)]
        input: PathBuf,
        /// Truecased output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Casing table from truecase-train.
        #[arg(long)]
        model: PathBuf,
        /// Which side(s) to truecase.
        #[arg(long, value_enum, default_value = "both")]
        side: ApplySide,
        /// Treat the input as monolingual text (one sentence per line).
        #[arg(long)]
        mono: bool,
    },
    /// Apply the rule cascade that drops noisy sentence pairs.
    Filter {
        /// Input pairs, `src<TAB>tgt` per line.
        #[arg(long)]
        input: PathBuf,
        /// Kept pairs.
        #[arg(long)]
        output: PathBuf,
        /// Filter configuration (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Translation lexicon for the content-overlap rule.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Language id training corpus, `lang=path`; repeatable.
        #[arg(long = "langid")]
        langid: Vec<String>,
        /// Write the aggregate report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write rejected pairs with their failed rule.
        #[arg(long)]
        rejected: Option<PathBuf>,
        /// Write a provenance manifest for the output file.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Drop exact duplicate pairs, keeping first occurrences.
    Dedupe {
        /// Input pairs, `src<TAB>tgt` per line.
        #[arg(long)]
        input: PathBuf,
        /// Deduplicated output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Write a provenance manifest for the output file.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Train an n-gram language model and export it as ARPA.
    LmTrain {
        /// Tokenized monolingual text, one sentence per line.
        #[arg(long)]
        input: PathBuf,
        /// Model order (max n-gram length).
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Drop n-grams seen fewer times than this.
        #[arg(long, default_value_t = 1)]
        min_count: u64,
        /// Where to write the ARPA model.
        #[arg(long)]
        arpa: PathBuf,
    },
    /// Score sentences with an ARPA model (per-word cross-entropy).
    LmScore {
        /// ARPA model from lm-train.
        #[arg(long)]
        arpa: PathBuf,
        /// Tokenized sentences to score, one per line.
        #[arg(long)]
        input: PathBuf,
        /// Per-sentence scores, `id<TAB>cross_entropy`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Dual conditional cross-entropy filtering of a parallel corpus.
    Dccef {
        /// The corpus being filtered.
        #[arg(long)]
        pairs: PathBuf,
        /// Forward cross-entropies, `id<TAB>value`.
        #[arg(long)]
        fwd: PathBuf,
        /// Backward cross-entropies, `id<TAB>value`.
        #[arg(long)]
        bwd: PathBuf,
        /// In-domain ARPA model for domain weighting.
        #[arg(long)]
        in_lm: Option<PathBuf>,
        /// Out-of-domain ARPA model for domain weighting.
        #[arg(long)]
        out_lm: Option<PathBuf>,
        /// Which side the domain models score.
        #[arg(long, value_enum, default_value = "tgt")]
        lm_side: Side,
        /// Keep the top-scoring fraction (0, 1].
        #[arg(long)]
        keep_fraction: Option<f64>,
        /// Keep pairs scoring at least this threshold [0, 1].
        #[arg(long)]
        keep_threshold: Option<f64>,
        /// Kept pairs.
        #[arg(long)]
        output: PathBuf,
        /// Write final scores for all pairs, `id<TAB>score`.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Write a provenance manifest for the output file.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Select in-domain monolingual sentences by cross-entropy difference.
    SelectMono {
        /// Tokenized candidate sentences, one per line.
        #[arg(long)]
        input: PathBuf,
        /// In-domain ARPA model.
        #[arg(long)]
        in_lm: PathBuf,
        /// Out-of-domain ARPA model.
        #[arg(long)]
        out_lm: PathBuf,
        /// `combined_threshold` or `in_domain_top`.
        #[arg(long)]
        strategy: String,
        /// Minimum combined score for combined_threshold.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        /// Sentence budget for in_domain_top.
        #[arg(long)]
        top: Option<usize>,
        /// Selected sentences.
        #[arg(long)]
        output: PathBuf,
        /// Write combined scores, `id<TAB>score`.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Combine bitext with synthetic data under a mixture strategy.
    Mix {
        /// Genuine parallel pairs, `src<TAB>tgt` per line.
        #[arg(long)]
        bitext: PathBuf,
        /// Synthetic pairs, `src<TAB>tgt` per line.
        #[arg(long)]
        synthetic: PathBuf,
        /// `original_ratio`, `upsampled_1_1` or `cutoff`.
        #[arg(long)]
        strategy: String,
        /// bitext:synthetic parts for cutoff, e.g. `1:2`.
        #[arg(long)]
        ratio: Option<String>,
        /// Synthetic pair scores for cutoff, `id<TAB>value`.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// RNG seed for the upsampling remainder.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Mixed output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Write a provenance manifest for the output file.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Emit synthetic pairs with content words replaced by an UNK token.
    AugmentUnk {
        /// Input pairs, `src<TAB>tgt` per line.
        #[arg(long)]
        input: PathBuf,
        /// Synthetic pairs (originals first with --combined).
        #[arg(long)]
        output: PathBuf,
        /// Augmentation config (JSON); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// RNG seed (overrides the config file's seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Synthetic copies per input pair.
        #[arg(long)]
        ratio: Option<u32>,
        /// Source-side stopwords, one per line.
        #[arg(long)]
        src_stopwords: Option<PathBuf>,
        /// Target-side stopwords, one per line.
        #[arg(long)]
        tgt_stopwords: Option<PathBuf>,
        /// Write originals followed by synthetic pairs.
        #[arg(long)]
        combined: bool,
        /// Write a provenance manifest for the output file.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Learn byte-pair merges, optionally constrained by morpheme boundaries.
    BpeTrain {
        /// Tokenized monolingual text, one sentence per line.
        #[arg(long)]
        input: PathBuf,
        /// Number of merges to learn.
        #[arg(long)]
        num_merges: usize,
        /// Minimum pair frequency for a merge.
        #[arg(long, default_value_t = 1)]
        vocab_threshold: u64,
        /// Boundary file, `word<TAB>pos1,pos2,...`.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        /// Where to write the learned merges, one per line.
        #[arg(long)]
        merges_out: PathBuf,
    },
    /// Apply learned merges, producing `@@`-marked subwords.
    BpeApply {
        /// Input pairs, `src<TAB>tgt` per line (one sentence per line with --mono).
        #[arg(long)]
        input: PathBuf,
        /// Segmented output corpus.
        #[arg(long)]
        output: PathBuf,
        /// Merges file from bpe-train.
        #[arg(long)]
        merges: PathBuf,
        /// Boundary file, `word<TAB>pos1,pos2,...`.
        #[arg(long)]
        boundaries: Option<PathBuf>,
        /// Treat the input as monolingual text (one sentence per line).
        #[arg(long)]
        mono: bool,
    },
    /// Re-rank n-best lists with reverse-model scores.
    Rerank {
        /// Moses-format n-best file.
        #[arg(long)]
        nbest: PathBuf,
        /// Reverse scores, `id<TAB>logprob<TAB>tokens`.
        #[arg(long)]
        r2l: PathBuf,
        /// Hypotheses considered per sentence.
        #[arg(long, default_value_t = 12)]
        n: usize,
        /// Weight on the forward model score.
        #[arg(long, default_value_t = 1.0)]
        w_l2r: f64,
        /// Weight on the reverse model score.
        #[arg(long, default_value_t = 1.0)]
        w_r2l: f64,
        /// Winning hypothesis per sentence, Moses format.
        #[arg(long)]
        output: PathBuf,
        /// Also write fully re-sorted lists.
        #[arg(long)]
        full: Option<PathBuf>,
    },
    /// Compare optimizers on bundled test problems.
    OptimBench {
        /// `sphere`, `quadratic` or `rosenbrock`.
        #[arg(long)]
        problem: String,
        /// `adam`, `qhadam` or `both`.
        #[arg(long, default_value = "both")]
        kind: String,
        /// Optimization steps per trial.
        #[arg(long, default_value_t = 10_000)]
        steps: u64,
        /// Seed for the starting point.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Peak learning rate.
        #[arg(long, default_value_t = 0.0005)]
        lr0: f64,
        /// Linear warmup steps.
        #[arg(long, default_value_t = 1600)]
        warmup: u64,
        /// Write the trial reports as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Verify a manifest and print a line-count/retention summary.
    Stats {
        /// Manifest written by --manifest or a pipeline stage.
        #[arg(long)]
        manifest: PathBuf,
        /// Include a filter report's per-rule rejection breakdown.
        #[arg(long)]
        filter_report: Option<PathBuf>,
    },
    /// Run configured stages in dependency order under the workdir.
    Pipeline {
        /// Pipeline configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_threads(threads: usize) {
    if threads > 0 {
        // a second call (e.g. in tests) is harmless: the pool is process-wide
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Normalize { input, output, mono, manifest } => {
            cmds::normalize(&input, &output, mono, manifest.as_deref())
        }
        Command::Mask { input, output, map, mono } => cmds::mask(&input, &output, &map, mono),
        Command::Tokenize { input, output, mono } => cmds::tokenize(&input, &output, mono),
        Command::TruecaseTrain { input, model, side, mono } => {
            cmds::truecase_train(&input, &model, side, mono)
        }
        Command::TruecaseApply { input, output, model, side, mono } => {
            cmds::truecase_apply(&input, &output, &model, side, mono)
        }
        Command::Filter {
            input,
            output,
            config,
            lexicon,
            langid,
            report,
            rejected,
            manifest,
        } => cmds::filter(
            &input,
            &output,
            config.as_deref(),
            lexicon.as_deref(),
            &langid,
            report.as_deref(),
            rejected.as_deref(),
            manifest.as_deref(),
        ),
        Command::Dedupe { input, output, manifest } => {
            cmds::dedupe(&input, &output, manifest.as_deref())
        }
        Command::LmTrain { input, order, min_count, arpa } => {
            cmds::lm_train(&input, order, min_count, &arpa)
        }
        Command::LmScore { arpa, input, output } => cmds::lm_score(&arpa, &input, output.as_deref()),
        Command::Dccef {
            pairs,
            fwd,
            bwd,
            in_lm,
            out_lm,
            lm_side,
            keep_fraction,
            keep_threshold,
            output,
            scores,
            manifest,
        } => cmds::dccef(cmds::DccefArgs {
            pairs: &pairs,
            fwd: &fwd,
            bwd: &bwd,
            in_lm: in_lm.as_deref(),
            out_lm: out_lm.as_deref(),
            lm_side,
            keep_fraction,
            keep_threshold,
            output: &output,
            scores: scores.as_deref(),
            manifest: manifest.as_deref(),
        }),
        Command::SelectMono {
            input,
            in_lm,
            out_lm,
            strategy,
            threshold,
            top,
            output,
            scores,
        } => cmds::select_mono(
            &input,
            &in_lm,
            &out_lm,
            &strategy,
            threshold,
            top,
            &output,
            scores.as_deref(),
        ),
        Command::Mix {
            bitext,
            synthetic,
            strategy,
            ratio,
            scores,
            seed,
            output,
            manifest,
        } => cmds::mix(
            &bitext,
            &synthetic,
            &strategy,
            ratio.as_deref(),
            scores.as_deref(),
            seed,
            &output,
            manifest.as_deref(),
        ),
        Command::AugmentUnk {
            input,
            output,
            config,
            seed,
            ratio,
            src_stopwords,
            tgt_stopwords,
            combined,
            manifest,
        } => cmds::augment_unk(cmds::AugmentArgs {
            input: &input,
            output: &output,
            config: config.as_deref(),
            seed,
            ratio,
            src_stopwords: src_stopwords.as_deref(),
            tgt_stopwords: tgt_stopwords.as_deref(),
            combined,
            manifest: manifest.as_deref(),
        }),
        Command::BpeTrain {
            input,
            num_merges,
            vocab_threshold,
            boundaries,
            merges_out,
        } => cmds::bpe_train(&input, num_merges, vocab_threshold, boundaries.as_deref(), &merges_out),
        Command::BpeApply { input, output, merges, boundaries, mono } => {
            cmds::bpe_apply(&input, &output, &merges, boundaries.as_deref(), mono)
        }
        Command::Rerank { nbest, r2l, n, w_l2r, w_r2l, output, full } => {
            cmds::rerank(&nbest, &r2l, n, w_l2r, w_r2l, &output, full.as_deref())
        }
        Command::OptimBench {
            problem,
            kind,
            steps,
            seed,
            lr0,
            warmup,
            output,
        } => cmds::optim_bench(&problem, &kind, steps, seed, lr0, warmup, output.as_deref()),
        Command::Stats { manifest, filter_report } => {
            cmds::stats(&manifest, filter_report.as_deref())
        }
        Command::Pipeline { config } => pipeline::run_pipeline(&config, cli.workdir.as_deref()),
    }
}

fn main() {
    // Restore default SIGPIPE handling so piping into `head` ends the
    // process quietly instead of panicking on EPIPE inside println!.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    init_threads(cli.threads);
    if let Err(failure) = run(cli) {
        eprintln!("{} error: {}", failure.category(), failure.inner());
        std::process::exit(failure.exit_code());
    }
}
