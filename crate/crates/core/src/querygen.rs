//! Simulated known-item queries.
//!
//! For each document a number of queries proportional to its distinct-term
//! count is drawn. Each query has a Poisson-distributed length and its terms
//! are sampled without replacement from a selection distribution over the
//! document's terms, optionally mixed with the collection unigram model.
//! Every document gets its own RNG stream derived from the global seed and
//! its doc_id, so output does not depend on generation order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::for_each_line;
use crate::error::{Error, Result};
use crate::fingerprint::hash64;
use crate::index::Index;

/// A query as a list of analyzed tokens.
pub type Query = Vec<String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Weight by within-document term frequency.
    Popular,
    /// Weight by document probability over collection probability.
    Discriminative,
    /// Weight by term frequency over collection frequency.
    PopularDiscriminative,
}

impl SelectionStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionStrategy::Popular => "popular",
            SelectionStrategy::Discriminative => "discriminative",
            SelectionStrategy::PopularDiscriminative => "popular_discriminative",
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "popular" | "pop" => Ok(SelectionStrategy::Popular),
            "discriminative" | "disc" => Ok(SelectionStrategy::Discriminative),
            "popular_discriminative" | "popdisc" | "popular+discriminative" => {
                Ok(SelectionStrategy::PopularDiscriminative)
            }
            other => Err(Error::param(
                "strategy",
                format!("expected popular, disc or popdisc, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryGenConfig {
    pub avg_query_length: f64,
    pub lambda: f64,
    pub fraction: f64,
    pub cap: usize,
    pub floor: usize,
    pub strategy: SelectionStrategy,
    pub seed: u64,
}

impl Default for QueryGenConfig {
    fn default() -> Self {
        QueryGenConfig {
            avg_query_length: 4.0,
            lambda: 0.0,
            fraction: 0.10,
            cap: 50,
            floor: 1,
            strategy: SelectionStrategy::PopularDiscriminative,
            seed: 1,
        }
    }
}

impl QueryGenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.avg_query_length.is_finite() && self.avg_query_length > 0.0) {
            return Err(Error::param("k", "average query length must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", "must be in [0,1]"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::param("fraction", "must be in (0,1]"));
        }
        if self.floor < 1 {
            return Err(Error::param("floor", "must be >= 1"));
        }
        if self.floor > self.cap {
            return Err(Error::param("cap", "must be >= floor"));
        }
        Ok(())
    }

    /// Number of queries for a document with `distinct_terms` distinct terms.
    pub fn query_count(&self, distinct_terms: usize) -> usize {
        ceil_tolerant(self.fraction * distinct_terms as f64).clamp(self.floor, self.cap)
    }
}

/// `ceil`, except that products like `0.1 * 70 = 7.000000000000001` are
/// treated as the integer they represent.
fn ceil_tolerant(x: f64) -> usize {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.abs().max(1.0) {
        nearest as usize
    } else {
        x.ceil() as usize
    }
}

/// A probability distribution over term ids, sorted by term id.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDistribution {
    pub entries: Vec<(u32, f64)>,
}

impl TermDistribution {
    pub fn probability(&self, term_id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&term_id, |&(id, _)| id)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }
}

fn strategy_weights(index: &Index, doc_ord: u32, strategy: SelectionStrategy) -> Vec<(u32, f64)> {
    let dl = f64::from(index.doc_length(doc_ord));
    let total = index.total_tokens() as f64;
    index
        .doc_terms(doc_ord)
        .iter()
        .map(|&(id, tf)| {
            let tf = f64::from(tf);
            let cf = index.collection_freq_by_id(id) as f64;
            let w = match strategy {
                SelectionStrategy::Popular => tf,
                SelectionStrategy::Discriminative => (tf / dl) / (cf / total),
                SelectionStrategy::PopularDiscriminative => tf / cf,
            };
            (id, w)
        })
        .collect()
}

fn check_doc(index: &Index, doc_ord: u32) -> Result<()> {
    if doc_ord as usize >= index.num_docs() {
        return Err(Error::InvalidOrdinal {
            ordinal: doc_ord as usize,
            num_docs: index.num_docs(),
        });
    }
    if index.doc_terms(doc_ord).is_empty() {
        return Err(Error::EmptyDocument(index.doc_id(doc_ord).to_owned()));
    }
    Ok(())
}

/// Selection probabilities for a document's query terms:
/// `(1 - lambda) * strategy distribution + lambda * collection unigram`.
pub fn term_selection_distribution(
    index: &Index,
    doc_ord: u32,
    strategy: SelectionStrategy,
    lambda: f64,
) -> Result<TermDistribution> {
    check_doc(index, doc_ord)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::param("lambda", "must be in [0,1]"));
    }
    let weights = strategy_weights(index, doc_ord, strategy);
    let sum: f64 = weights.iter().map(|&(_, w)| w).sum();
    let doc_probs = weights.into_iter().map(|(id, w)| (id, w / sum));
    if lambda == 0.0 {
        return Ok(TermDistribution {
            entries: doc_probs.collect(),
        });
    }
    let total = index.total_tokens() as f64;
    let mut entries: Vec<(u32, f64)> = (0..index.num_terms() as u32)
        .map(|id| (id, lambda * index.collection_freq_by_id(id) as f64 / total))
        .collect();
    for (id, p) in doc_probs {
        entries[id as usize].1 += (1.0 - lambda) * p;
    }
    Ok(TermDistribution { entries })
}

/// Cumulative collection unigram table, shared by all documents when
/// `lambda > 0`.
struct Background {
    cumulative: Vec<f64>,
}

impl Background {
    fn new(index: &Index) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..index.num_terms() as u32)
            .map(|id| {
                acc += index.collection_freq_by_id(id) as f64;
                acc
            })
            .collect();
        Background { cumulative }
    }

    fn sample(&self, rng: &mut impl Rng) -> u32 {
        let total = *self.cumulative.last().expect("non-empty vocabulary");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u32
    }
}

/// Draw one index from `weights` proportionally, skipping zero entries.
fn weighted_pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        if u < w {
            return i;
        }
        u -= w;
        last = i;
    }
    last
}

fn doc_rng(seed: u64, doc_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash64(seed, doc_id))
}

fn generate_with(
    index: &Index,
    doc_ord: u32,
    config: &QueryGenConfig,
    background: Option<&Background>,
) -> Result<Vec<Query>> {
    check_doc(index, doc_ord)?;
    let terms = strategy_weights(index, doc_ord, config.strategy);
    let distinct = terms.len();
    let count = config.query_count(distinct);
    let length_dist = Poisson::new(config.avg_query_length)
        .map_err(|e| Error::param("k", e.to_string()))?;
    let mut rng = doc_rng(config.seed, index.doc_id(doc_ord));

    let mut queries = Vec::with_capacity(count);
    for _ in 0..count {
        let length = (length_dist.sample(&mut rng) as usize).clamp(1, distinct);
        let mut weights: Vec<f64> = terms.iter().map(|&(_, w)| w).collect();
        let mut chosen: Vec<u32> = Vec::with_capacity(length);
        while chosen.len() < length {
            let from_background = config.lambda > 0.0 && rng.random::<f64>() < config.lambda;
            let term = match (from_background, background) {
                (true, Some(bg)) => {
                    let id = bg.sample(&mut rng);
                    if chosen.contains(&id) {
                        continue;
                    }
                    if let Ok(pos) = terms.binary_search_by_key(&id, |&(t, _)| t) {
                        weights[pos] = 0.0;
                    }
                    id
                }
                _ => {
                    if weights.iter().all(|&w| w <= 0.0) {
                        // every document term already used by background draws
                        break;
                    }
                    let pos = weighted_pick(&weights, &mut rng);
                    weights[pos] = 0.0;
                    terms[pos].0
                }
            };
            chosen.push(term);
        }
        queries.push(chosen.iter().map(|&id| index.term(id).to_owned()).collect());
    }
    Ok(queries)
}

/// Generate the relevant-query sample for one document.
pub fn generate_queries_for_doc(index: &Index, doc_ord: u32, config: &QueryGenConfig) -> Result<Vec<Query>> {
    config.validate()?;
    let background = (config.lambda > 0.0).then(|| Background::new(index));
    generate_with(index, doc_ord, config, background.as_ref())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySetSummary {
    pub skipped: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<QueryGenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_fingerprint: Option<String>,
}

/// Per-document query lists keyed (and ordered) by doc_id.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub entries: BTreeMap<String, Vec<Query>>,
    pub summary: QuerySetSummary,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_queries(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for (doc_id, queries) in &self.entries {
            let line = serde_json::to_string(&DocRecordRef { doc_id, queries })
                .expect("records serialize");
            writeln!(out, "{line}")?;
        }
        let line = serde_json::to_string(&SummaryRecord {
            summary: self.summary.clone(),
        })
        .expect("summary serializes");
        writeln!(out, "{line}")?;
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_jsonl(BufWriter::new(file))
    }

    /// Parse a query-set file. The trailing summary record is optional, but
    /// when present it must be the last non-blank line.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut summary: Option<QuerySetSummary> = None;
        for_each_line(reader, |line_no, line| {
            if line.trim().is_empty() {
                return Ok(());
            }
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            if summary.is_some() {
                return Err(parse_err("record after summary".into()));
            }
            match serde_json::from_str::<Record>(line).map_err(|e| parse_err(e.to_string()))? {
                Record::Doc(DocRecord { doc_id, queries }) => {
                    if doc_id.is_empty() {
                        return Err(parse_err("empty doc_id".into()));
                    }
                    if queries.iter().any(|q| q.is_empty() || q.iter().any(String::is_empty)) {
                        return Err(parse_err(format!("empty query or token for {doc_id:?}")));
                    }
                    if entries.insert(doc_id.clone(), queries).is_some() {
                        return Err(Error::Integrity(format!(
                            "duplicate doc_id {doc_id:?} at line {line_no}"
                        )));
                    }
                }
                Record::Summary(s) => summary = Some(s.summary),
            }
            Ok(())
        })?;
        Ok(QuerySet {
            entries,
            summary: summary.unwrap_or(QuerySetSummary {
                skipped: Vec::new(),
                config: None,
                analysis_fingerprint: None,
                index_fingerprint: None,
            }),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(BufReader::new(file))
    }
}

#[derive(Serialize)]
struct DocRecordRef<'a> {
    doc_id: &'a str,
    queries: &'a [Query],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    doc_id: String,
    queries: Vec<Query>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryRecord {
    summary: QuerySetSummary,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Record {
    Doc(DocRecord),
    Summary(SummaryRecord),
}

/// Generate queries for every document, in parallel on the current rayon
/// pool. Documents without terms are listed in the summary's `skipped`.
pub fn generate_all(index: &Index, config: &QueryGenConfig) -> Result<QuerySet> {
    config.validate()?;
    let background = (config.lambda > 0.0).then(|| Background::new(index));
    let results: Vec<(u32, Result<Vec<Query>>)> = (0..index.num_docs() as u32)
        .into_par_iter()
        .map(|ord| (ord, generate_with(index, ord, config, background.as_ref())))
        .collect();

    let mut entries = BTreeMap::new();
    let mut skipped = Vec::new();
    for (ord, result) in results {
        let doc_id = index.doc_id(ord).to_owned();
        match result {
            Ok(queries) => {
                entries.insert(doc_id, queries);
            }
            Err(Error::EmptyDocument(_)) => skipped.push(doc_id),
            Err(e) => return Err(e),
        }
    }
    skipped.sort();
    Ok(QuerySet {
        entries,
        summary: QuerySetSummary {
            skipped,
            config: Some(config.clone()),
            analysis_fingerprint: Some(index.analysis_config().fingerprint()),
            index_fingerprint: Some(index.fingerprint().to_owned()),
        },
    })
}
