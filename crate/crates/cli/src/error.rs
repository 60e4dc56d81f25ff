//! Pipeline error taxonomy, mapped onto process exit codes by the
//! binary: 2 config, 3 missing upstream artifact, 4 data error.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing upstream artifact for stage {stage}: {path}")]
    MissingArtifact { stage: String, path: String },
    #[error("data error: {0}")]
    Data(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::MissingArtifact { .. } => 3,
            PipelineError::Data(_) => 4,
        }
    }
}

impl From<lexlink_core::graph::GraphError> for PipelineError {
    fn from(e: lexlink_core::graph::GraphError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<lexlink_core::walk::WalkError> for PipelineError {
    fn from(e: lexlink_core::walk::WalkError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<lexlink_core::embedding::EmbedError> for PipelineError {
    fn from(e: lexlink_core::embedding::EmbedError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<lexlink_core::dataset::DatasetError> for PipelineError {
    fn from(e: lexlink_core::dataset::DatasetError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<lexlink_core::forest::ForestError> for PipelineError {
    fn from(e: lexlink_core::forest::ForestError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<lexlink_core::eval::EvalError> for PipelineError {
    fn from(e: lexlink_core::eval::EvalError) -> Self {
        PipelineError::Data(e.to_string())
    }
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Data(format!("io: {e}"))
    }
}
