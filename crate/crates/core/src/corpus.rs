//! Canonical record types and deterministic corpus I/O.
//!
//! Wire formats:
//! - parallel corpus: `src<TAB>tgt<LF>`, one pair per line, UTF-8, no BOM;
//! - monolingual corpus: one sentence per line;
//! - manifest: JSON, one [`Manifest`] object per pipeline stage.
//!
//! Every operation here is a pure function of its input bytes (plus seed),
//! so identical inputs always produce byte-identical outputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// An aligned source/target sentence pair.
///
/// `src` and `tgt` must not contain tab, CR or LF: tab is the field
/// separator and LF the record separator of the wire format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub id: u64,
    pub src: String,
    pub tgt: String,
    /// Free-form provenance tag, e.g. the source dataset name.
    pub origin: String,
}

impl SentencePair {
    pub fn new(id: u64, src: impl Into<String>, tgt: impl Into<String>) -> Self {
        Self {
            id,
            src: src.into(),
            tgt: tgt.into(),
            origin: String::new(),
        }
    }
}

/// A monolingual sentence. `text` must not contain tab, CR or LF.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoSentence {
    pub id: u64,
    pub text: String,
    pub origin: String,
}

impl MonoSentence {
    pub fn new(id: u64, text: impl Into<String>) -> Self {
        Self {
            id,
            text: text.into(),
            origin: String::new(),
        }
    }
}

/// Role of a corpus file within the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileRole {
    Bitext,
    Synthetic,
    Mono,
    /// Non-corpus output such as a model file or report.
    Artifact,
}

/// Provenance record for one produced file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub role: FileRole,
    pub line_count: u64,
    pub sha256: String,
    /// Stage name plus config hash, `"<stage>:<hash>"`.
    pub created_by: String,
}

/// Provenance manifest emitted by every pipeline stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn single(entry: ManifestEntry) -> Self {
        Self {
            entries: vec![entry],
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json.as_bytes()).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_slice(&bytes).map_err(|e| CorpusError::ManifestFormat {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Recompute each entry's hash and line count; error on first mismatch.
    pub fn verify(&self) -> Result<(), CorpusError> {
        for entry in &self.entries {
            let path = Path::new(&entry.path);
            let (count, hash) = hash_file(path)?;
            if hash != entry.sha256 || count != entry.line_count {
                return Err(CorpusError::IntegrityMismatch {
                    path: path.to_path_buf(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {kind}")]
    Record {
        path: PathBuf,
        line: u64,
        kind: RecordErrorKind,
    },
    #[error("record {id}: field contains {what}; tab/CR/LF are reserved by the wire format")]
    InvalidField { id: u64, what: &'static str },
    #[error("shard count must be at least 1")]
    ZeroShards,
    #[error("merge requires at least one input file")]
    NoMergeInputs,
    #[error("{path}: manifest is not valid JSON: {message}")]
    ManifestFormat { path: PathBuf, message: String },
    #[error("{path}: content does not match manifest entry (hash or line count differs)")]
    IntegrityMismatch { path: PathBuf },
}

/// What went wrong with a single input line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordErrorKind {
    InvalidUtf8,
    /// Parallel line did not contain exactly one tab.
    BadFieldCount,
}

impl std::fmt::Display for RecordErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordErrorKind::InvalidUtf8 => write!(f, "line is not valid UTF-8"),
            RecordErrorKind::BadFieldCount => {
                write!(f, "expected exactly one tab separating src and tgt")
            }
        }
    }
}

/// Counts of records skipped by a lenient reader.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipStats {
    pub bad_utf8: u64,
    pub bad_field_count: u64,
}

impl SkipStats {
    pub fn total(&self) -> u64 {
        self.bad_utf8 + self.bad_field_count
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn origin_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Iterator over the lines of a parallel corpus file.
///
/// Yields one result per input line. Ids are assigned `0..N-1` in file order
/// to successfully parsed pairs; malformed lines surface as record errors and
/// do not consume an id, so the caller can skip-with-count or abort.
pub struct ParallelReader {
    reader: BufReader<File>,
    path: PathBuf,
    origin: String,
    line: u64,
    next_id: u64,
    buf: Vec<u8>,
}

impl ParallelReader {
    pub fn open(path: &Path) -> Result<Self, CorpusError> {
        Ok(Self {
            reader: open(path)?,
            path: path.to_path_buf(),
            origin: origin_of(path),
            line: 0,
            next_id: 0,
            buf: Vec::new(),
        })
    }
}

impl Iterator for ParallelReader {
    type Item = Result<SentencePair, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => return None,
            Ok(_) => {}
            Err(source) => {
                return Some(Err(CorpusError::Io {
                    path: self.path.clone(),
                    source,
                }))
            }
        }
        self.line += 1;
        if self.buf.last() == Some(&b'\n') {
            self.buf.pop();
        }
        if self.buf.last() == Some(&b'\r') {
            self.buf.pop();
        }
        let text = match std::str::from_utf8(&self.buf) {
            Ok(t) => t,
            Err(_) => {
                return Some(Err(CorpusError::Record {
                    path: self.path.clone(),
                    line: self.line,
                    kind: RecordErrorKind::InvalidUtf8,
                }))
            }
        };
        let mut fields = text.split('\t');
        let (src, tgt) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(t), None) => (s, t),
            _ => {
                return Some(Err(CorpusError::Record {
                    path: self.path.clone(),
                    line: self.line,
                    kind: RecordErrorKind::BadFieldCount,
                }))
            }
        };
        let id = self.next_id;
        self.next_id += 1;
        Some(Ok(SentencePair {
            id,
            src: src.to_string(),
            tgt: tgt.to_string(),
            origin: self.origin.clone(),
        }))
    }
}

/// Read a parallel corpus, aborting on the first malformed line.
pub fn read_parallel(path: &Path) -> Result<Vec<SentencePair>, CorpusError> {
    ParallelReader::open(path)?.collect()
}

/// Read a parallel corpus, skipping malformed lines and counting them.
pub fn read_parallel_skipping(path: &Path) -> Result<(Vec<SentencePair>, SkipStats), CorpusError> {
    let mut pairs = Vec::new();
    let mut skipped = SkipStats::default();
    for item in ParallelReader::open(path)? {
        match item {
            Ok(pair) => pairs.push(pair),
            Err(CorpusError::Record { kind, .. }) => match kind {
                RecordErrorKind::InvalidUtf8 => skipped.bad_utf8 += 1,
                RecordErrorKind::BadFieldCount => skipped.bad_field_count += 1,
            },
            Err(other) => return Err(other),
        }
    }
    Ok((pairs, skipped))
}

/// Read a monolingual corpus, one sentence per line.
pub fn read_mono(path: &Path) -> Result<Vec<MonoSentence>, CorpusError> {
    let origin = origin_of(path);
    let mut out = Vec::new();
    let reader = open(path)?;
    for (idx, raw) in reader.split(b'\n').enumerate() {
        let mut raw = raw.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let line = idx as u64 + 1;
        if raw.last() == Some(&b'\r') {
            raw.pop();
        }
        let text = String::from_utf8(raw).map_err(|_| CorpusError::Record {
            path: path.to_path_buf(),
            line,
            kind: RecordErrorKind::InvalidUtf8,
        })?;
        if text.contains('\t') {
            return Err(CorpusError::Record {
                path: path.to_path_buf(),
                line,
                kind: RecordErrorKind::BadFieldCount,
            });
        }
        out.push(MonoSentence {
            id: out.len() as u64,
            text,
            origin: origin.clone(),
        });
    }
    Ok(out)
}

fn check_clean(id: u64, field: &str) -> Result<(), CorpusError> {
    for ch in field.chars() {
        let what = match ch {
            '\t' => "a tab",
            '\n' => "a line feed",
            '\r' => "a carriage return",
            _ => continue,
        };
        return Err(CorpusError::InvalidField { id, what });
    }
    Ok(())
}

/// Writer that hashes and counts everything it emits.
struct CountingHashWriter<W: Write> {
    inner: W,
    hasher: Sha256,
    lines: u64,
}

impl<W: Write> CountingHashWriter<W> {
    fn new(inner: W) -> Self {
        Self {
            inner,
            hasher: Sha256::new(),
            lines: 0,
        }
    }

    fn write_line(&mut self, line: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(line)?;
        self.inner.write_all(b"\n")?;
        self.hasher.update(line);
        self.hasher.update(b"\n");
        self.lines += 1;
        Ok(())
    }

    fn finish(mut self) -> std::io::Result<(u64, String)> {
        self.inner.flush()?;
        Ok((self.lines, to_hex(&self.hasher.finalize())))
    }
}

fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Line count and sha256 of a file's bytes.
pub fn hash_file(path: &Path) -> Result<(u64, String), CorpusError> {
    let mut reader = open(path)?;
    let mut hasher = Sha256::new();
    let mut lines = 0u64;
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        lines += buf[..n].iter().filter(|&&b| b == b'\n').count() as u64;
    }
    Ok((lines, to_hex(&hasher.finalize())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CorpusError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write a parallel corpus as `src<TAB>tgt<LF>` and return its manifest entry.
///
/// Aborts with the offending record id if a field contains tab, CR or LF.
pub fn write_parallel<'a, I>(
    records: I,
    path: &Path,
    created_by: &str,
) -> Result<ManifestEntry, CorpusError>
where
    I: IntoIterator<Item = &'a SentencePair>,
{
    let mut w = CountingHashWriter::new(create(path)?);
    let mut line = Vec::new();
    for pair in records {
        check_clean(pair.id, &pair.src)?;
        check_clean(pair.id, &pair.tgt)?;
        line.clear();
        line.extend_from_slice(pair.src.as_bytes());
        line.push(b'\t');
        line.extend_from_slice(pair.tgt.as_bytes());
        w.write_line(&line).map_err(io_err(path))?;
    }
    let (line_count, sha256) = w.finish().map_err(io_err(path))?;
    Ok(ManifestEntry {
        path: path.to_string_lossy().into_owned(),
        role: FileRole::Bitext,
        line_count,
        sha256,
        created_by: created_by.to_string(),
    })
}

/// Write a monolingual corpus, one sentence per line.
pub fn write_mono<'a, I>(
    records: I,
    path: &Path,
    created_by: &str,
) -> Result<ManifestEntry, CorpusError>
where
    I: IntoIterator<Item = &'a MonoSentence>,
{
    let mut w = CountingHashWriter::new(create(path)?);
    for sent in records {
        check_clean(sent.id, &sent.text)?;
        w.write_line(sent.text.as_bytes()).map_err(io_err(path))?;
    }
    let (line_count, sha256) = w.finish().map_err(io_err(path))?;
    Ok(ManifestEntry {
        path: path.to_string_lossy().into_owned(),
        role: FileRole::Mono,
        line_count,
        sha256,
        created_by: created_by.to_string(),
    })
}

fn read_lines(path: &Path) -> Result<Vec<Vec<u8>>, CorpusError> {
    let reader = open(path)?;
    let mut lines = Vec::new();
    for raw in reader.split(b'\n') {
        lines.push(raw.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(lines)
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = impl AsRef<[u8]>>) -> Result<(), CorpusError> {
    let mut w = create(path)?;
    for line in lines {
        w.write_all(line.as_ref()).map_err(io_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Seeded Fisher–Yates permutation of indices `0..n`.
///
/// Sampling uses `next_u64() % bound` on a ChaCha8 stream, so the permutation
/// depends only on `(n, seed)` and stays stable across dependency upgrades.
fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Shuffle a corpus file line-wise with a seeded permutation.
///
/// The whole file plus a line-offset index is held in memory, so peak memory
/// is roughly the file size; fine at desk scale, not for multi-gigabyte input.
/// Identical `(input bytes, seed)` always produce identical output bytes.
pub fn shuffle(input: &Path, output: &Path, seed: u64) -> Result<(), CorpusError> {
    let lines = read_lines(input)?;
    let perm = permutation(lines.len(), seed);
    write_lines(output, perm.iter().map(|&i| &lines[i]))
}

/// In-memory variant of [`shuffle`] used by mixture construction.
pub fn shuffle_lines<T>(items: &mut Vec<T>, seed: u64) {
    let perm = permutation(items.len(), seed);
    let mut taken: Vec<Option<T>> = items.drain(..).map(Some).collect();
    items.extend(perm.into_iter().map(|i| taken[i].take().expect("permutation is a bijection")));
}

/// Split a corpus round-robin by line into `k` shard files `<name>.<i>`.
pub fn shard(input: &Path, k: usize) -> Result<Vec<PathBuf>, CorpusError> {
    if k == 0 {
        return Err(CorpusError::ZeroShards);
    }
    let mut writers = Vec::with_capacity(k);
    let mut paths = Vec::with_capacity(k);
    for i in 0..k {
        let mut name = input.file_name().unwrap_or_default().to_os_string();
        name.push(format!(".{i}"));
        let path = input.with_file_name(name);
        writers.push(create(&path)?);
        paths.push(path);
    }
    let reader = open(input)?;
    for (i, raw) in reader.split(b'\n').enumerate() {
        let line = raw.map_err(io_err(input))?;
        let w = &mut writers[i % k];
        w.write_all(&line).map_err(io_err(&paths[i % k]))?;
        w.write_all(b"\n").map_err(io_err(&paths[i % k]))?;
    }
    for (w, p) in writers.iter_mut().zip(&paths) {
        w.flush().map_err(io_err(p))?;
    }
    Ok(paths)
}

/// Interleave shard files round-robin into one output file.
///
/// Applied to the output of [`shard`], this restores the original line order
/// exactly; for arbitrary inputs it preserves the line multiset.
pub fn merge(shards: &[PathBuf], output: &Path) -> Result<(), CorpusError> {
    if shards.is_empty() {
        return Err(CorpusError::NoMergeInputs);
    }
    let mut readers = shards
        .iter()
        .map(|p| Ok(open(p)?.split(b'\n')))
        .collect::<Result<Vec<_>, CorpusError>>()?;
    let mut out = create(output)?;
    let mut live = vec![true; readers.len()];
    let mut remaining = readers.len();
    while remaining > 0 {
        for (i, reader) in readers.iter_mut().enumerate() {
            if !live[i] {
                continue;
            }
            match reader.next() {
                Some(raw) => {
                    let line = raw.map_err(io_err(&shards[i]))?;
                    out.write_all(&line).map_err(io_err(output))?;
                    out.write_all(b"\n").map_err(io_err(output))?;
                }
                None => {
                    live[i] = false;
                    remaining -= 1;
                }
            }
        }
    }
    out.flush().map_err(io_err(output))
}
