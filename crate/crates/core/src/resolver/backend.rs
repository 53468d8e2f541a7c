//! External text-to-text prediction backends keyed by sample id.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{align_diff, Resolution};
use crate::io::read_tsv_pairs;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("prediction backend unavailable: {0}")]
    Unavailable(String),
    #[error("no prediction for sample `{0}`")]
    MissingPrediction(String),
}

/// Anything that maps a sample to a predicted morph-free text.
pub trait PredictionBackend: Send + Sync {
    fn predict(&self, id: &str, text: &str) -> Result<String, BackendError>;
}

/// Precomputed predictions from an `id<TAB>text` file.
#[derive(Debug, Clone, Default)]
pub struct FileBackend {
    predictions: HashMap<String, String>,
}

impl FileBackend {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let pairs = read_tsv_pairs(path).map_err(|e| BackendError::Unavailable(format!("{}: {e}", path.display())))?;
        Ok(Self::from_pairs(pairs))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        FileBackend { predictions: pairs.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }
}

impl PredictionBackend for FileBackend {
    fn predict(&self, id: &str, _text: &str) -> Result<String, BackendError> {
        self.predictions.get(id).cloned().ok_or_else(|| BackendError::MissingPrediction(id.to_string()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Exchange {
    id: String,
    text: String,
}

/// JSON endpoint: POST `{id, text}`, expects `{id, text}` back.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    url: String,
    client: reqwest::blocking::Client,
    retries: u32,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, timeout: Duration, retries: u32) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| BackendError::Unavailable(e.to_string()))?;
        Ok(HttpBackend { url: url.into(), client, retries })
    }

    fn attempt(&self, id: &str, text: &str) -> Result<String, String> {
        let resp = self
            .client
            .post(&self.url)
            .json(&Exchange { id: id.to_string(), text: text.to_string() })
            .send()
            .map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let body: Exchange = resp.json().map_err(|e| e.to_string())?;
        if body.id != id {
            return Err(format!("response id `{}` does not match request `{id}`", body.id));
        }
        Ok(body.text)
    }
}

impl PredictionBackend for HttpBackend {
    fn predict(&self, id: &str, text: &str) -> Result<String, BackendError> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            match self.attempt(id, text) {
                Ok(t) => return Ok(t),
                Err(e) => {
                    log::warn!("backend request for {id} failed (attempt {}): {e}", attempt + 1);
                    last = e;
                }
            }
        }
        Err(BackendError::Unavailable(format!("{}: {last}", self.url)))
    }
}

pub fn resolve_with_backend(id: &str, text: &str, backend: &dyn PredictionBackend) -> Result<Resolution, BackendError> {
    let output = backend.predict(id, text)?;
    let spans = align_diff(text, &output);
    Ok(Resolution { input: text.to_string(), output, spans })
}

/// Queries the backend for every `(id, text)` with at most `parallelism`
/// requests in flight. Results come back in input order.
pub fn resolve_batch(
    samples: &[(String, String)],
    backend: &dyn PredictionBackend,
    parallelism: usize,
) -> Result<Vec<Resolution>, BackendError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| BackendError::Unavailable(e.to_string()))?;
    pool.install(|| samples.par_iter().map(|(id, text)| resolve_with_backend(id, text, backend)).collect())
}
