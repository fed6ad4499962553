//! Error classification for stable exit codes: 2 = configuration,
//! 3 = data, 4 = I/O.

use std::path::Path;

use corpusforge_core::corpus::CorpusError;
use corpusforge_core::filters::FilterError;
use corpusforge_core::lm::LmError;
use corpusforge_core::optim::OptimError;
use corpusforge_core::rerank::RerankError;
use corpusforge_core::segaug::SegAugError;
use corpusforge_core::select::SelectError;
use corpusforge_core::textnorm::TextNormError;

#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    Io(anyhow::Error),
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Data(_) => "data",
            Failure::Io(_) => "i/o",
        }
    }

    pub fn inner(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Data(e) | Failure::Io(e) => e,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::Config(anyhow::anyhow!(message.into()))
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure::Data(anyhow::anyhow!(message.into()))
    }
}

/// Map a raw filesystem error on `path` to an I/O failure.
pub fn io_fail(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(anyhow::anyhow!("{}: {e}", path.display()))
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => Failure::Io(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<TextNormError> for Failure {
    fn from(e: TextNormError) -> Self {
        match e {
            TextNormError::Io { .. } => Failure::Io(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<FilterError> for Failure {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::Io { .. } => Failure::Io(e.into()),
            FilterError::BadConfig { .. } => Failure::Config(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<LmError> for Failure {
    fn from(e: LmError) -> Self {
        match e {
            LmError::Io { .. } => Failure::Io(e.into()),
            LmError::BadOrder { .. } => Failure::Config(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<SelectError> for Failure {
    fn from(e: SelectError) -> Self {
        match e {
            SelectError::Io { .. } => Failure::Io(e.into()),
            SelectError::BadFraction(_)
            | SelectError::BadThreshold(_)
            | SelectError::BadRatio
            | SelectError::CutoffNeedsScores => Failure::Config(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<SegAugError> for Failure {
    fn from(e: SegAugError) -> Self {
        match e {
            SegAugError::Io { .. } => Failure::Io(e.into()),
            SegAugError::BadConfig { .. } | SegAugError::BadMergeCount => Failure::Config(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<RerankError> for Failure {
    fn from(e: RerankError) -> Self {
        match e {
            RerankError::Io { .. } => Failure::Io(e.into()),
            RerankError::BadConfig { .. } => Failure::Config(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<OptimError> for Failure {
    fn from(e: OptimError) -> Self {
        match e {
            OptimError::BadConfig { .. } | OptimError::BadStep => Failure::Config(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}
