//! End-to-end tests of the command-line interface: exit codes, file
//! formats, manifest behavior and pipeline determinism.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_corpusforge"));
    cmd.env_remove("CORPUSFORGE_THREADS");
    cmd.env_remove("CORPUSFORGE_WORKDIR");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

fn assert_exit(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

const CLEAN_CORPUS: &str = "The cat sat on the mat.\tKot siedział na macie.\n\
A dog runs fast!\tPies biegnie szybko!\n\
Rain falls in the north.\tDeszcz pada na północy.\n\
We watch old films often.\tCzęsto oglądamy stare filmy.\n";

// ---------------------------------------------------------------------------
// text commands

#[test]
fn normalize_then_tokenize() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "raw.tsv", "It\u{2019}s  a \u{201C}test\u{201D}.\tTo   jest test.\n");
    assert_exit(
        &run_in(dir.path(), &["normalize", "--input", "raw.tsv", "--output", "norm.tsv"]),
        0,
    );
    let norm = read(&dir.path().join("norm.tsv"));
    assert!(!norm.contains('\u{2019}') && !norm.contains("  "), "{norm}");

    assert_exit(
        &run_in(dir.path(), &["tokenize", "--input", "norm.tsv", "--output", "tok.tsv"]),
        0,
    );
    let tok = read(&dir.path().join("tok.tsv"));
    assert!(tok.contains("test \" ."), "punctuation split off: {tok}");
    assert!(tok.contains("It's"), "word-internal apostrophe kept: {tok}");
}

#[test]
fn truecase_train_and_apply() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "mono.txt",
        "We saw Paris in spring .\nthe trip to Paris was short .\nParis has many parks .\n",
    );
    assert_exit(
        &run_in(
            dir.path(),
            &["truecase-train", "--input", "mono.txt", "--model", "tc.tsv", "--mono"],
        ),
        0,
    );
    write(dir.path(), "test.txt", "paris is large .\n");
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "truecase-apply",
                "--input",
                "test.txt",
                "--output",
                "out.txt",
                "--model",
                "tc.tsv",
                "--mono",
            ],
        ),
        0,
    );
    assert_eq!(read(&dir.path().join("out.txt")), "Paris is large .\n");
}

#[test]
fn mask_writes_jsonl_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "in.tsv",
        "Write to test@example.com now\tNapisz na test@example.com\n",
    );
    assert_exit(
        &run_in(
            dir.path(),
            &["mask", "--input", "in.tsv", "--output", "masked.tsv", "--map", "map.jsonl"],
        ),
        0,
    );
    let masked = read(&dir.path().join("masked.tsv"));
    assert!(masked.contains("__EMAIL_1__"), "{masked}");
    assert!(!masked.contains("test@example.com"));
    let sidecar = read(&dir.path().join("map.jsonl"));
    let record: serde_json::Value = serde_json::from_str(sidecar.lines().next().unwrap()).unwrap();
    assert_eq!(record["src"][0]["original"], "test@example.com");
}

// ---------------------------------------------------------------------------
// filtering and exit codes

#[test]
fn filter_writes_report_and_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = String::from(CLEAN_CORPUS);
    corpus.push_str("same text\tsame text\n");
    corpus.push_str("\tempty source\n");
    write(dir.path(), "in.tsv", &corpus);
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "filter",
                "--input",
                "in.tsv",
                "--output",
                "kept.tsv",
                "--report",
                "report.json",
                "--rejected",
                "rejected.tsv",
            ],
        ),
        0,
    );
    assert_eq!(read(&dir.path().join("kept.tsv")), CLEAN_CORPUS);

    let report: serde_json::Value = serde_json::from_str(&read(&dir.path().join("report.json"))).unwrap();
    assert_eq!(report["input"], 6);
    assert_eq!(report["kept"], 4);
    assert_eq!(report["rejected_by_rule"]["identical"], 1);
    assert_eq!(report["rejected_by_rule"]["empty_side"], 1);

    let rejected = read(&dir.path().join("rejected.tsv"));
    assert!(rejected.contains("same text\tsame text\tidentical"), "{rejected}");
    assert!(rejected.contains("\tempty source\tempty_side"), "{rejected}");
}

#[test]
fn unknown_config_key_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "in.tsv", CLEAN_CORPUS);
    write(dir.path(), "config.json", "{\"max_tokens\": 50, \"max_tokns\": 3}");
    let out = run_in(
        dir.path(),
        &["filter", "--input", "in.tsv", "--output", "out.tsv", "--config", "config.json"],
    );
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("max_tokns"), "{}", stderr(&out));
}

#[test]
fn missing_input_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["normalize", "--input", "absent.tsv", "--output", "out.tsv"]);
    assert_exit(&out, 4);
}

#[test]
fn malformed_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.tsv", "no tab on this line\n");
    let out = run_in(dir.path(), &["dedupe", "--input", "bad.tsv", "--output", "out.tsv"]);
    assert_exit(&out, 3);
    assert!(stderr(&out).contains("bad.tsv:1"), "{}", stderr(&out));
}

#[test]
fn clap_usage_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["no-such-command"]);
    assert_exit(&out, 2);
}

#[test]
fn dedupe_keeps_first_occurrence() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "in.tsv", "a\tb\nc\td\na\tb\n");
    assert_exit(&run_in(dir.path(), &["dedupe", "--input", "in.tsv", "--output", "out.tsv"]), 0);
    assert_eq!(read(&dir.path().join("out.tsv")), "a\tb\nc\td\n");
}

// ---------------------------------------------------------------------------
// scoring, selection, mixing

#[test]
fn lm_train_and_score_produce_score_file() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "mono.txt",
        "the cat sat\nthe dog ran\nthe cat ran\na dog sat\n",
    );
    assert_exit(
        &run_in(
            dir.path(),
            &["lm-train", "--input", "mono.txt", "--order", "3", "--arpa", "lm.arpa"],
        ),
        0,
    );
    assert!(read(&dir.path().join("lm.arpa")).starts_with("\\data\\"));
    assert_exit(
        &run_in(
            dir.path(),
            &["lm-score", "--arpa", "lm.arpa", "--input", "mono.txt", "--output", "scores.tsv"],
        ),
        0,
    );
    let scores = read(&dir.path().join("scores.tsv"));
    let lines: Vec<&str> = scores.lines().collect();
    assert_eq!(lines.len(), 4);
    for (i, line) in lines.iter().enumerate() {
        let (id, value) = line.split_once('\t').unwrap();
        assert_eq!(id.parse::<usize>().unwrap(), i);
        assert!(value.parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn dccef_keep_fraction_takes_top_scores() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "pairs.tsv", "p0\tq0\np1\tq1\np2\tq2\np3\tq3\n");
    // pair 1 scores best (low, agreeing entropies), pair 3 worst
    write(dir.path(), "fwd.tsv", "0\t2.0\n1\t0.5\n2\t1.0\n3\t4.0\n");
    write(dir.path(), "bwd.tsv", "0\t2.0\n1\t0.5\n2\t1.0\n3\t4.5\n");
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "dccef",
                "--pairs",
                "pairs.tsv",
                "--fwd",
                "fwd.tsv",
                "--bwd",
                "bwd.tsv",
                "--keep-fraction",
                "0.5",
                "--output",
                "kept.tsv",
                "--scores",
                "scores.tsv",
            ],
        ),
        0,
    );
    assert_eq!(read(&dir.path().join("kept.tsv")), "p1\tq1\np2\tq2\n");
    assert_eq!(read(&dir.path().join("scores.tsv")).lines().count(), 4);
}

#[test]
fn dccef_requires_exactly_one_keep_flag() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "pairs.tsv", "a\tb\n");
    write(dir.path(), "s.tsv", "0\t1.0\n");
    let none = run_in(
        dir.path(),
        &["dccef", "--pairs", "pairs.tsv", "--fwd", "s.tsv", "--bwd", "s.tsv", "--output", "o.tsv"],
    );
    assert_exit(&none, 2);
    let both = run_in(
        dir.path(),
        &[
            "dccef",
            "--pairs",
            "pairs.tsv",
            "--fwd",
            "s.tsv",
            "--bwd",
            "s.tsv",
            "--keep-fraction",
            "0.5",
            "--keep-threshold",
            "0.5",
            "--output",
            "o.tsv",
        ],
    );
    assert_exit(&both, 2);
}

#[test]
fn dccef_missing_score_id_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "pairs.tsv", "a\tb\nc\td\n");
    write(dir.path(), "short.tsv", "0\t1.0\n");
    let out = run_in(
        dir.path(),
        &[
            "dccef",
            "--pairs",
            "pairs.tsv",
            "--fwd",
            "short.tsv",
            "--bwd",
            "short.tsv",
            "--keep-fraction",
            "1.0",
            "--output",
            "o.tsv",
        ],
    );
    assert_exit(&out, 3);
    assert!(stderr(&out).contains("pair 1"), "{}", stderr(&out));
}

#[test]
fn mix_cutoff_takes_all_bitext_plus_budgeted_synthetic() {
    let dir = tempfile::tempdir().unwrap();
    let bitext: String = (0..100).map(|i| format!("bs{i}\tbt{i}\n")).collect();
    let synthetic: String = (0..1000).map(|i| format!("ss{i}\tst{i}\n")).collect();
    // ascending scores: the budgeted 200 synthetic pairs are ids 800..999
    let scores: String = (0..1000).map(|i| format!("{i}\t{}\n", i as f64 / 1000.0)).collect();
    write(dir.path(), "bitext.tsv", &bitext);
    write(dir.path(), "synthetic.tsv", &synthetic);
    write(dir.path(), "scores.tsv", &scores);
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "mix",
                "--bitext",
                "bitext.tsv",
                "--synthetic",
                "synthetic.tsv",
                "--strategy",
                "cutoff",
                "--ratio",
                "1:2",
                "--scores",
                "scores.tsv",
                "--seed",
                "9",
                "--output",
                "mixed.tsv",
            ],
        ),
        0,
    );
    let mixed = read(&dir.path().join("mixed.tsv"));
    let lines: Vec<&str> = mixed.lines().collect();
    assert_eq!(lines.len(), 300);
    let bitext_kept = lines.iter().filter(|l| l.starts_with("bs")).count();
    assert_eq!(bitext_kept, 100, "all bitext is kept");
    for line in &lines {
        if let Some(rest) = line.strip_prefix("ss") {
            let id: usize = rest.split('\t').next().unwrap().parse().unwrap();
            assert!(id >= 800, "only top-scoring synthetic pairs: got ss{id}");
        }
    }
}

#[test]
fn mix_cutoff_without_scores_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "b.tsv", "a\tb\n");
    write(dir.path(), "s.tsv", "c\td\n");
    let out = run_in(
        dir.path(),
        &[
            "mix",
            "--bitext",
            "b.tsv",
            "--synthetic",
            "s.tsv",
            "--strategy",
            "cutoff",
            "--ratio",
            "1:2",
            "--output",
            "o.tsv",
        ],
    );
    assert_exit(&out, 2);
}

#[test]
fn select_mono_top_budget() {
    let dir = tempfile::tempdir().unwrap();
    // in-domain text repeats medical-ish tokens, out-domain legal-ish
    let in_domain: String = (0..30)
        .map(|i| format!("dose of medicine number {} helps patients\n", i % 5))
        .collect();
    let out_domain: String = (0..30)
        .map(|i| format!("court ruling number {} cites the statute\n", i % 5))
        .collect();
    write(dir.path(), "in.txt", &in_domain);
    write(dir.path(), "out.txt", &out_domain);
    assert_exit(
        &run_in(dir.path(), &["lm-train", "--input", "in.txt", "--order", "3", "--arpa", "in.arpa"]),
        0,
    );
    assert_exit(
        &run_in(dir.path(), &["lm-train", "--input", "out.txt", "--order", "3", "--arpa", "out.arpa"]),
        0,
    );
    write(
        dir.path(),
        "pool.txt",
        "dose of medicine helps\ncourt ruling cites\nmedicine helps patients\n",
    );
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "select-mono",
                "--input",
                "pool.txt",
                "--in-lm",
                "in.arpa",
                "--out-lm",
                "out.arpa",
                "--strategy",
                "in_domain_top",
                "--top",
                "2",
                "--output",
                "picked.txt",
            ],
        ),
        0,
    );
    let picked = read(&dir.path().join("picked.txt"));
    assert_eq!(picked.lines().count(), 2);
    assert!(!picked.contains("court"), "out-domain line not picked: {picked}");
}

// ---------------------------------------------------------------------------
// augmentation, subwords, re-ranking, bench

#[test]
fn augment_unk_combined_doubles_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus: String = (0..50)
        .map(|i| format!("alpha beta gamma {i}\tdelta epsilon zeta {i}\n"))
        .collect();
    write(dir.path(), "in.tsv", &corpus);
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "augment-unk",
                "--input",
                "in.tsv",
                "--seed",
                "4",
                "--combined",
                "--output",
                "out.tsv",
            ],
        ),
        0,
    );
    let out = read(&dir.path().join("out.tsv"));
    assert_eq!(out.lines().count(), 100);
    assert!(out.contains("<unk>"));
    // originals come first, unchanged
    assert!(out.starts_with("alpha beta gamma 0\tdelta epsilon zeta 0\n"));
}

#[test]
fn bpe_train_apply_respects_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let mono: String = "playing playing playing played played play\n".to_string();
    write(dir.path(), "mono.txt", &mono);
    // a boundary after "play" in "playing" (4 chars in)
    write(dir.path(), "bounds.tsv", "playing\t4\n");
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "bpe-train",
                "--input",
                "mono.txt",
                "--num-merges",
                "40",
                "--boundaries",
                "bounds.tsv",
                "--merges-out",
                "merges.txt",
            ],
        ),
        0,
    );
    write(dir.path(), "apply.txt", "playing played\n");
    assert_exit(
        &run_in(
            dir.path(),
            &[
                "bpe-apply",
                "--input",
                "apply.txt",
                "--output",
                "seg.txt",
                "--merges",
                "merges.txt",
                "--boundaries",
                "bounds.tsv",
                "--mono",
            ],
        ),
        0,
    );
    let seg = read(&dir.path().join("seg.txt"));
    let first_word: Vec<&str> = seg.split_whitespace().take_while(|t| t.ends_with("@@")).collect();
    // "playing" must be cut at the boundary: first piece is exactly "play@@"
    assert!(seg.starts_with("play@@ "), "boundary respected: {seg}");
    assert!(!first_word.is_empty());
}

#[test]
fn rerank_picks_combined_argmax() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "nbest.txt",
        "0 ||| good one ||| lm= -1.0 ||| -1.0\n0 ||| bad one ||| lm= -0.5 ||| -0.5\n",
    );
    // reverse model strongly prefers "good one"
    write(dir.path(), "r2l.tsv", "0\t-0.1\tgood one\n0\t-9.0\tbad one\n");
    assert_exit(
        &run_in(
            dir.path(),
            &["rerank", "--nbest", "nbest.txt", "--r2l", "r2l.tsv", "--output", "best.txt"],
        ),
        0,
    );
    let best = read(&dir.path().join("best.txt"));
    assert!(best.contains("good one"), "{best}");
    assert_eq!(best.lines().count(), 1);
}

#[test]
fn optim_bench_writes_trial_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "optim-bench",
            "--problem",
            "sphere",
            "--kind",
            "both",
            "--steps",
            "500",
            "--lr0",
            "0.01",
            "--warmup",
            "50",
            "--output",
            "trials.json",
        ],
    );
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("optimizer") && stdout.contains("qhadam"), "{stdout}");
    let trials: serde_json::Value = serde_json::from_str(&read(&dir.path().join("trials.json"))).unwrap();
    assert_eq!(trials.as_array().unwrap().len(), 2);
    assert_eq!(trials[0]["problem"], "sphere");
}

// ---------------------------------------------------------------------------
// stats

#[test]
fn stats_prints_retention_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let big: String = (0..1080).map(|i| format!("s{i}\tt{i}\n")).collect();
    write(dir.path(), "big.tsv", &big);
    assert_exit(
        &run_in(
            dir.path(),
            &["normalize", "--input", "big.tsv", "--output", "n.tsv", "--manifest", "m1.json"],
        ),
        0,
    );
    // build a two-entry manifest: original and a filtered version
    let small: String = (0..650).map(|i| format!("s{i}\tt{i}\n")).collect();
    write(dir.path(), "small.tsv", &small);
    assert_exit(
        &run_in(
            dir.path(),
            &["normalize", "--input", "small.tsv", "--output", "ns.tsv", "--manifest", "m2.json"],
        ),
        0,
    );
    let m1: serde_json::Value = serde_json::from_str(&read(&dir.path().join("m1.json"))).unwrap();
    let m2: serde_json::Value = serde_json::from_str(&read(&dir.path().join("m2.json"))).unwrap();
    let merged = serde_json::json!({
        "entries": [m1["entries"][0], m2["entries"][0]]
    });
    write(dir.path(), "merged.json", &merged.to_string());

    let out = run_in(dir.path(), &["stats", "--manifest", "merged.json"]);
    assert_exit(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("0.602"), "650/1080 rounds to 0.602: {stdout}");
    assert!(stdout.contains("retention"));

    // single entry: no retention column
    let single = run_in(dir.path(), &["stats", "--manifest", "m1.json"]);
    assert_exit(&single, 0);
    assert!(!String::from_utf8_lossy(&single.stdout).contains("retention"));

    // tampering flips the hash: data error
    std::fs::write(dir.path().join("n.tsv"), "changed\tcontent\n").unwrap();
    let tampered = run_in(dir.path(), &["stats", "--manifest", "m1.json"]);
    assert_exit(&tampered, 3);

    // removing the file entirely: I/O error
    std::fs::remove_file(dir.path().join("n.tsv")).unwrap();
    let missing = run_in(dir.path(), &["stats", "--manifest", "m1.json"]);
    assert_exit(&missing, 4);
}

// ---------------------------------------------------------------------------
// pipeline

fn pipeline_fixture(dir: &Path) {
    let corpus: String = (0..40)
        .map(|i| {
            if i % 10 == 9 {
                "dup line\tdup line\n".to_string() // identical sides: filtered
            } else {
                format!("source sentence number {i} here\tzdanie docelowe numer {i} tutaj\n")
            }
        })
        .collect();
    write(dir, "input.tsv", &corpus);
    let synthetic: String = (0..20)
        .map(|i| format!("syn source {i}\tsyn target {i}\n"))
        .collect();
    write(dir, "synthetic.tsv", &synthetic);
    // 36 lines survive the filter; score files keyed by line number
    let fwd: String = (0..36).map(|i| format!("{i}\t{}\n", 1.0 + (i % 7) as f64 * 0.3)).collect();
    let bwd: String = (0..36).map(|i| format!("{i}\t{}\n", 1.1 + (i % 5) as f64 * 0.25)).collect();
    write(dir, "fwd.tsv", &fwd);
    write(dir, "bwd.tsv", &bwd);
    write(
        dir,
        "pipe.json",
        r#"{
  "input": "input.tsv",
  "seed": 17,
  "normalize": {},
  "filter": {},
  "lm": { "order": 3, "side": "tgt" },
  "dccef": { "fwd": "fwd.tsv", "bwd": "bwd.tsv", "keep_fraction": 0.75 },
  "mix": { "synthetic": "synthetic.tsv", "strategy": "original_ratio" },
  "augment": { "config": { "k_min": 1, "k_max": 2 } },
  "bpe": { "num_merges": 30 }
}"#,
    );
}

fn snapshot(workdir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![workdir.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(workdir).unwrap().display().to_string();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

#[test]
fn pipeline_rerun_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    pipeline_fixture(dir.path());

    let run = |threads: &str| -> BTreeMap<String, Vec<u8>> {
        let workdir = dir.path().join("work");
        if workdir.exists() {
            std::fs::remove_dir_all(&workdir).unwrap();
        }
        let out = run_in(
            dir.path(),
            &["--threads", threads, "--workdir", "work", "pipeline", "--config", "pipe.json"],
        );
        assert_exit(&out, 0);
        snapshot(&workdir)
    };

    let first = run("1");
    let second = run("4");
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert_eq!(bytes, &second[name], "file {name} differs between runs");
    }
    assert!(first.contains_key("summary.json"));
}

#[test]
fn pipeline_chain_counts_and_unique_manifest_entries() {
    let dir = tempfile::tempdir().unwrap();
    pipeline_fixture(dir.path());
    let out = run_in(
        dir.path(),
        &["--workdir", "work", "pipeline", "--config", "pipe.json"],
    );
    assert_exit(&out, 0);
    let workdir = dir.path().join("work");

    let summary: serde_json::Value =
        serde_json::from_str(&read(&workdir.join("summary.json"))).unwrap();
    let chain = summary["chain"].as_array().unwrap();
    let counts: Vec<u64> = chain.iter().map(|s| s["lines"].as_u64().unwrap()).collect();
    // input 40, normalize 40, filter 36, dccef ceil(0.75*36)=27, mix 27+20=47,
    // augment 2*47=94, bpe 94
    assert_eq!(counts, vec![40, 40, 36, 27, 47, 94, 94]);

    let retention = summary["retention"].as_array().unwrap();
    let fractions: Vec<f64> = retention.iter().map(|r| r["retention"].as_f64().unwrap()).collect();
    assert!(fractions.windows(2).all(|w| w[1] <= w[0]), "nonincreasing: {fractions:?}");

    // every non-metadata file under the workdir is referenced by exactly one
    // manifest entry
    let mut referenced: Vec<String> = Vec::new();
    for stage_dir in std::fs::read_dir(&workdir).unwrap() {
        let stage_dir = stage_dir.unwrap().path();
        if !stage_dir.is_dir() {
            continue;
        }
        let manifest: serde_json::Value =
            serde_json::from_str(&read(&stage_dir.join("manifest.json"))).unwrap();
        for entry in manifest["entries"].as_array().unwrap() {
            referenced.push(entry["path"].as_str().unwrap().to_string());
        }
    }
    let mut sorted = referenced.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), referenced.len(), "no file referenced twice");

    let metadata = ["manifest.json", "report.json", "summary.json"];
    let mut on_disk: Vec<String> = snapshot(&workdir)
        .keys()
        .filter(|k| !metadata.iter().any(|m| k.ends_with(m)))
        .map(|k| format!("work/{k}"))
        .collect();
    on_disk.sort();
    sorted.sort();
    assert_eq!(sorted, on_disk, "manifest entries cover exactly the output files");
}

#[test]
fn pipeline_empty_stage_list_is_noop_success() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "input.tsv", "a\tb\n");
    write(dir.path(), "pipe.json", r#"{ "input": "input.tsv" }"#);
    let out = run_in(
        dir.path(),
        &["--workdir", "work", "pipeline", "--config", "pipe.json"],
    );
    assert_exit(&out, 0);
    let summary: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("work/summary.json"))).unwrap();
    assert_eq!(summary["stages"].as_array().unwrap().len(), 0);
}

#[test]
fn pipeline_failure_halts_chain_retaining_partials() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "input.tsv", "left text\tright words\n");
    // dccef references score files that do not exist
    write(
        dir.path(),
        "pipe.json",
        r#"{
  "input": "input.tsv",
  "normalize": {},
  "dccef": { "fwd": "absent.tsv", "bwd": "absent.tsv", "keep_fraction": 0.5 },
  "bpe": { "num_merges": 5 }
}"#,
    );
    let out = run_in(
        dir.path(),
        &["--workdir", "work", "pipeline", "--config", "pipe.json"],
    );
    assert_exit(&out, 4);
    let workdir = dir.path().join("work");
    assert!(workdir.join("normalize/corpus.tsv").exists(), "completed stage retained");
    assert!(!workdir.join("dccef/corpus.tsv").exists(), "failed stage has no corpus");
    assert!(!workdir.join("bpe").exists(), "later stages never ran");
    assert!(!workdir.join("summary.json").exists(), "no summary for a failed run");
}

#[test]
fn pipeline_unknown_stage_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "input.tsv", "a\tb\n");
    write(dir.path(), "pipe.json", r#"{ "input": "input.tsv", "normalise": {} }"#);
    let out = run_in(
        dir.path(),
        &["--workdir", "work", "pipeline", "--config", "pipe.json"],
    );
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("normalise"), "{}", stderr(&out));
}

#[test]
fn pipeline_without_workdir_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "input.tsv", "a\tb\n");
    write(dir.path(), "pipe.json", r#"{ "input": "input.tsv" }"#);
    let out = run_in(dir.path(), &["pipeline", "--config", "pipe.json"]);
    assert_exit(&out, 2);
}
