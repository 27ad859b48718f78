use thiserror::Error;

/// Coarse error category used for the process exit-code contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Provider,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 3,
            ErrorClass::Data => 4,
            ErrorClass::Provider => 5,
            ErrorClass::Internal => 1,
        }
    }
}

/// Top-level error for pipeline stages.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("corpus error: {0}")]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("lexicon error: {0}")]
    Lexicon(#[from] crate::lexicon::LexiconError),
    #[error("dynamics error: {0}")]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error("stats error: {0}")]
    Stats(#[from] crate::stats::StatsError),
    #[error("stance error: {0}")]
    Stance(#[from] crate::stance::StanceError),
    #[error("report error: {0}")]
    Report(#[from] crate::report::ReportError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            PipelineError::Config(_) => ErrorClass::Config,
            PipelineError::Corpus(e) => e.class(),
            PipelineError::Lexicon(_) => ErrorClass::Data,
            PipelineError::Dynamics(_) => ErrorClass::Data,
            PipelineError::Stats(_) => ErrorClass::Data,
            PipelineError::Stance(e) => e.class(),
            PipelineError::Report(_) => ErrorClass::Data,
            PipelineError::Io(_) => ErrorClass::Internal,
        }
    }
}
