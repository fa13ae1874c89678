//! Text analysis shared by indexing, query generation and query parsing.
//!
//! The pipeline is: lowercase (optional), split on non-alphanumeric
//! boundaries, drop stopwords and short tokens, then stem (optional). The
//! same [`AnalysisConfig`] must be used for documents and queries; its
//! [`fingerprint`](AnalysisConfig::fingerprint) is stored in every index so a
//! mismatch can be detected downstream.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub min_token_length: usize,
    pub stemming: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            lowercase: true,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            min_token_length: 2,
            stemming: false,
        }
    }
}

impl AnalysisConfig {
    /// No stopwords, no stemming, every non-empty token kept.
    pub fn minimal() -> Self {
        AnalysisConfig {
            lowercase: true,
            stopwords: BTreeSet::new(),
            min_token_length: 1,
            stemming: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_token_length < 1 {
            return Err(Error::param("min_token_length", "must be >= 1"));
        }
        Ok(())
    }

    /// Stable hash of the full configuration, stopword list included.
    pub fn fingerprint(&self) -> String {
        // BTreeSet serializes in sorted order, so this is canonical.
        let json = serde_json::to_string(self).expect("config serializes");
        sha256_hex(json.as_bytes())
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        analyze(text, self)
    }
}

/// Parse a stopword list: one term per line, blank lines ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty())
        .map(str::to_owned)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopwords(&text))
}

pub fn analyze(text: &str, config: &AnalysisConfig) -> Vec<String> {
    let lowered;
    let text = if config.lowercase {
        lowered = text.to_lowercase();
        lowered.as_str()
    } else {
        text
    };

    let stemmer = config.stemming.then(|| Stemmer::create(Algorithm::English));
    let keep = |token: &str| {
        token.chars().count() >= config.min_token_length && !config.stopwords.contains(token)
    };

    let mut tokens = Vec::new();
    for raw in text.split(|c: char| !c.is_alphanumeric()) {
        if raw.is_empty() || !keep(raw) {
            continue;
        }
        match &stemmer {
            Some(stemmer) => {
                let stemmed = stemmer.stem(raw);
                if keep(&stemmed) {
                    tokens.push(stemmed.into_owned());
                }
            }
            None => tokens.push(raw.to_owned()),
        }
    }
    tokens
}
