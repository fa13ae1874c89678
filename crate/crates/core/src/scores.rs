//! Score files: CSV with header `doc_id,score` sorted by doc_id, plus a JSON
//! metadata sidecar at `<file>.meta.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::accessibility::{AccessScores, ConvenienceSpec, Metric};
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;
use crate::retrieval::RetrievalModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMetadata {
    pub metric: Metric,
    pub model: RetrievalModel,
    pub cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convenience: Option<ConvenienceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub query_source: String,
    pub index_fingerprint: String,
    pub config_fingerprint: String,
    pub num_queries: usize,
    pub n_docs: usize,
    pub skipped: Vec<String>,
    /// Hash of the CSV bytes this sidecar describes.
    pub scores_fingerprint: String,
}

/// Render scores as CSV. Values use the shortest representation that
/// round-trips, so output is locale independent and exact.
pub fn to_csv(scores: &BTreeMap<String, f64>) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(["doc_id", "score"]).expect("in-memory write");
    for (doc_id, score) in scores {
        writer
            .write_record([doc_id.as_str(), &score.to_string()])
            .expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn read_csv<R: Read>(reader: R) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut scores = BTreeMap::new();
    let mut saw_header = false;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let parse_err = |message: String| Error::Parse { line, message };
        if !saw_header {
            if record.len() != 2 || &record[0] != "doc_id" || &record[1] != "score" {
                return Err(parse_err("expected header doc_id,score".into()));
            }
            saw_header = true;
            continue;
        }
        if record.len() != 2 {
            return Err(parse_err(format!("expected 2 fields, got {}", record.len())));
        }
        let doc_id = &record[0];
        if doc_id.is_empty() {
            return Err(parse_err("empty doc_id".into()));
        }
        let score: f64 = record[1]
            .parse()
            .map_err(|_| parse_err(format!("invalid score {:?}", &record[1])))?;
        if !score.is_finite() {
            return Err(parse_err(format!("non-finite score {score}")));
        }
        if scores.insert(doc_id.to_owned(), score).is_some() {
            return Err(Error::Integrity(format!("duplicate doc_id {doc_id:?} at line {line}")));
        }
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(scores)
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    name.into()
}

/// A score CSV together with its sidecar, if one exists.
#[derive(Debug, Clone)]
pub struct ScoreFile {
    pub path: PathBuf,
    pub scores: BTreeMap<String, f64>,
    pub metadata: Option<ScoreMetadata>,
    /// Hash of the CSV bytes as read.
    pub fingerprint: String,
}

impl ScoreFile {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let scores = read_csv(&bytes[..])?;
        let meta = meta_path(path);
        let metadata = if meta.exists() {
            let text = fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
            Some(serde_json::from_str(&text).map_err(|e| {
                Error::Config(format!("{}: {e}", meta.display()))
            })?)
        } else {
            None
        };
        Ok(ScoreFile {
            path: path.to_owned(),
            scores,
            metadata,
            fingerprint: sha256_hex(&bytes),
        })
    }

    /// Check the sidecar exists and describes these exact CSV bytes.
    pub fn verify(&self) -> Result<&ScoreMetadata> {
        let meta = self.metadata.as_ref().ok_or_else(|| {
            Error::Config(format!(
                "missing metadata sidecar {}",
                meta_path(&self.path).display()
            ))
        })?;
        if meta.scores_fingerprint != self.fingerprint {
            return Err(Error::FingerprintMismatch {
                key: "scores_fingerprint".into(),
                left: meta.scores_fingerprint.clone(),
                right: self.fingerprint.clone(),
            });
        }
        Ok(meta)
    }
}

/// Write `scores` as CSV and its sidecar. Returns the CSV fingerprint.
pub fn write_score_file(
    path: &Path,
    scores: &AccessScores,
    provenance: Provenance,
) -> Result<String> {
    let csv = to_csv(&scores.scores);
    let fingerprint = sha256_hex(&csv);
    let meta = ScoreMetadata {
        metric: scores.metric,
        model: scores.model,
        cutoff: scores.cutoff,
        convenience: scores.convenience,
        seed: provenance.seed,
        query_source: provenance.query_source,
        index_fingerprint: provenance.index_fingerprint,
        config_fingerprint: provenance.config_fingerprint,
        num_queries: scores.num_queries,
        n_docs: scores.scores.len(),
        skipped: scores.skipped.clone(),
        scores_fingerprint: fingerprint.clone(),
    };
    fs::write(path, &csv).map_err(|e| Error::io(path, e))?;
    let meta_file = meta_path(path);
    let mut json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    json.push('\n');
    fs::write(&meta_file, json).map_err(|e| Error::io(meta_file, e))?;
    Ok(fingerprint)
}

/// Where a score file's inputs came from.
#[derive(Debug, Clone, Default)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub query_source: String,
    pub index_fingerprint: String,
    pub config_fingerprint: String,
}
