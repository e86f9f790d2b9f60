//! Pipeline wiring for the pose-regression and trajectory-classification
//! library: synthetic dataset generation, per-condition model training,
//! streaming classification of held-out trajectories, velocity prediction
//! reports, and an evaluation gate with exit-code semantics.
//!
//! Every stage works inside one output directory with fixed file names:
//!
//! ```text
//! out/
//!   manifest.json          dataset listing (paths + condition labels)
//!   data/<label>_<rep>.csv trajectories
//!   split.json             train/test file split
//!   models/<label>.json    fitted per-condition models
//!   reports/train.json     hyperparameters and optimizer bookkeeping
//!   reports/classify.json  per-trajectory classification + aggregates
//!   reports/traces/*.csv   per-step probability traces
//!   reports/predict.json   post-nomination velocity error report
//!   summary.json           merged evaluation summary
//! ```

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};
use thiserror::Error;

pub use commands::{cmd_classify, cmd_eval, cmd_predict, cmd_synth, cmd_train};
pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] dqgp::data::DataError),
    #[error(transparent)]
    Gp(#[from] dqgp::gp::GpError),
    #[error(transparent)]
    Classifier(#[from] dqgp::classifier::ClassifierError),
    #[error("missing report {0} (run the earlier pipeline stage first)")]
    MissingReport(PathBuf),
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Fixed file layout under the pipeline output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn model(&self, label: &str) -> PathBuf {
        self.models_dir().join(format!("{label}.json"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn train_report(&self) -> PathBuf {
        self.reports_dir().join("train.json")
    }

    pub fn classify_report(&self) -> PathBuf {
        self.reports_dir().join("classify.json")
    }

    pub fn traces_dir(&self) -> PathBuf {
        self.reports_dir().join("traces")
    }

    pub fn predict_report(&self) -> PathBuf {
        self.reports_dir().join("predict.json")
    }

    pub fn summary(&self) -> PathBuf {
        self.root.join("summary.json")
    }
}

/// Reads a JSON report, mapping a missing file to [`CliError::MissingReport`].
pub(crate) fn read_report<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::MissingReport(path.to_path_buf())
        } else {
            CliError::Io(e)
        }
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
