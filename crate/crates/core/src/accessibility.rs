//! Per-document accessibility scores.
//!
//! Findability of a document is the mean user convenience of the ranks it
//! reaches over its relevant queries; a rank beyond the cutoff `c` counts as
//! zero. Retrievability (cumulative form) counts the queries of a broad query
//! set for which the document reaches the top `c`.
//!
//! Batch evaluation ranks each query once and reduces the per-query results
//! in a fixed order, so scores do not depend on the number of worker threads.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;
use crate::querygen::{Query, QuerySet};
use crate::retrieval::{PreparedQuery, RetrievalModel, Searcher};

pub const MAX_CUTOFF: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvenienceForm {
    /// `exp(-(p - 1) / decay)` up to the cutoff.
    Exponential,
    /// `1 / p` up to the cutoff.
    Inverse,
}

impl ConvenienceForm {
    pub fn as_str(self) -> &'static str {
        match self {
            ConvenienceForm::Exponential => "exponential",
            ConvenienceForm::Inverse => "inverse",
        }
    }
}

impl fmt::Display for ConvenienceForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConvenienceForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(ConvenienceForm::Inverse),
            "exponential" | "exp" => Ok(ConvenienceForm::Exponential),
            other => Err(Error::param(
                "xi",
                format!("expected inverse or exponential, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvenienceSpec {
    pub form: ConvenienceForm,
    pub cutoff: usize,
    pub decay: f64,
}

impl Default for ConvenienceSpec {
    fn default() -> Self {
        ConvenienceSpec {
            form: ConvenienceForm::Inverse,
            cutoff: 100,
            decay: 3.0,
        }
    }
}

impl ConvenienceSpec {
    pub fn new(form: ConvenienceForm, cutoff: usize) -> Self {
        ConvenienceSpec {
            form,
            cutoff,
            ..ConvenienceSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_cutoff(self.cutoff)?;
        if !(self.decay.is_finite() && self.decay > 0.0) {
            return Err(Error::param("decay", "must be > 0"));
        }
        Ok(())
    }

    /// Convenience of finding the document at `rank` (1-based).
    pub fn value(&self, rank: usize) -> Result<f64> {
        if rank < 1 {
            return Err(Error::param("rank", "must be >= 1"));
        }
        Ok(self.value_unchecked(rank))
    }

    fn value_unchecked(&self, rank: usize) -> f64 {
        if rank > self.cutoff {
            return 0.0;
        }
        match self.form {
            ConvenienceForm::Inverse => 1.0 / rank as f64,
            ConvenienceForm::Exponential => (-((rank - 1) as f64) / self.decay).exp(),
        }
    }

    /// Convenience of an optional rank; `None` (not retrieved) counts as 0.
    pub fn value_of(&self, rank: Option<usize>) -> f64 {
        rank.map_or(0.0, |r| self.value_unchecked(r.max(1)))
    }
}

pub fn validate_cutoff(cutoff: usize) -> Result<()> {
    if !(1..=MAX_CUTOFF).contains(&cutoff) {
        return Err(Error::param(
            "c",
            format!("cutoff must be in 1..={MAX_CUTOFF}, got {cutoff}"),
        ));
    }
    Ok(())
}

pub fn convenience(spec: &ConvenienceSpec, rank: usize) -> Result<f64> {
    spec.value(rank)
}

/// Mean convenience over a document's per-query ranks.
pub fn findability_from_ranks(ranks: &[Option<usize>], spec: &ConvenienceSpec) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::NoRelevantQueries);
    }
    let total: f64 = ranks.iter().map(|&r| spec.value_of(r)).sum();
    Ok(total / ranks.len() as f64)
}

pub fn findability_of_doc(
    model: &RetrievalModel,
    index: &Index,
    queries: &[Query],
    target: &str,
    spec: &ConvenienceSpec,
) -> Result<f64> {
    spec.validate()?;
    if queries.is_empty() {
        return Err(Error::NoRelevantQueries);
    }
    let target = index
        .ordinal(target)
        .ok_or_else(|| Error::UnknownDocument(target.to_owned()))?;
    let mut searcher = Searcher::new(index, *model)?;
    let ranks = queries
        .iter()
        .map(|q| {
            let prepared = PreparedQuery::new(index, q)?;
            Ok(searcher.rank_in(&prepared, target))
        })
        .collect::<Result<Vec<_>>>()?;
    findability_from_ranks(&ranks, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Findability,
    Retrievability,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Findability => "findability",
            Metric::Retrievability => "retrievability",
        })
    }
}

/// Per-document scores plus a description of how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessScores {
    pub metric: Metric,
    pub scores: BTreeMap<String, f64>,
    pub model: RetrievalModel,
    pub convenience: Option<ConvenienceSpec>,
    pub cutoff: usize,
    /// Documents that had no queries to score.
    pub skipped: Vec<String>,
    pub num_queries: usize,
}

impl AccessScores {
    pub fn values(&self) -> Vec<f64> {
        self.scores.values().copied().collect()
    }
}

/// Counts evaluated queries and reports every 1000th to stderr.
#[derive(Debug, Default)]
pub struct Progress {
    enabled: bool,
    label: &'static str,
    done: AtomicUsize,
}

impl Progress {
    pub fn silent() -> Self {
        Progress::default()
    }

    pub fn stderr(label: &'static str) -> Self {
        Progress {
            enabled: true,
            label,
            done: AtomicUsize::new(0),
        }
    }

    fn tick(&self, total: usize) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        if self.enabled && done.is_multiple_of(1000) {
            eprintln!("{}: {done}/{total} queries", self.label);
        }
    }
}

pub fn findability_all(
    model: &RetrievalModel,
    index: &Index,
    query_set: &QuerySet,
    spec: &ConvenienceSpec,
    progress: &Progress,
) -> Result<AccessScores> {
    spec.validate()?;
    model.validate()?;
    if let Some(fp) = &query_set.summary.analysis_fingerprint {
        let expected = index.analysis_config().fingerprint();
        if *fp != expected {
            return Err(Error::FingerprintMismatch {
                key: "analysis_fingerprint".into(),
                left: fp.clone(),
                right: expected,
            });
        }
    }

    let mut skipped: Vec<String> = query_set.summary.skipped.clone();
    let mut work: Vec<(u32, &Query)> = Vec::with_capacity(query_set.total_queries());
    let mut docs: Vec<(u32, usize)> = Vec::new();
    for (doc_id, queries) in &query_set.entries {
        let ord = index
            .ordinal(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.clone()))?;
        if queries.is_empty() {
            skipped.push(doc_id.clone());
            continue;
        }
        docs.push((ord, queries.len()));
        work.extend(queries.iter().map(|q| (ord, q)));
    }
    skipped.sort();
    skipped.dedup();

    let total = work.len();
    let values: Vec<f64> = work
        .par_iter()
        .map_init(
            || Searcher::new(index, *model).expect("validated model"),
            |searcher, &(ord, query)| {
                let prepared = PreparedQuery::new(index, query)?;
                let rank = searcher.rank_in(&prepared, ord);
                progress.tick(total);
                Ok(spec.value_of(rank))
            },
        )
        .collect::<Result<_>>()?;

    let mut scores = BTreeMap::new();
    let mut offset = 0;
    for (ord, count) in docs {
        let sum: f64 = values[offset..offset + count].iter().sum();
        offset += count;
        scores.insert(index.doc_id(ord).to_owned(), sum / count as f64);
    }

    Ok(AccessScores {
        metric: Metric::Findability,
        scores,
        model: *model,
        convenience: Some(*spec),
        cutoff: spec.cutoff,
        skipped,
        num_queries: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievabilityQueryConfig {
    pub unigram_min_cf: u64,
    pub bigram_min_cf: u64,
    pub max_queries: usize,
}

impl Default for RetrievabilityQueryConfig {
    fn default() -> Self {
        RetrievabilityQueryConfig {
            unigram_min_cf: 5,
            bigram_min_cf: 5,
            max_queries: 200_000,
        }
    }
}

/// Unigrams and adjacent-token bigrams above their frequency thresholds,
/// most frequent first (ties by token order), capped at `max_queries`.
pub fn retrievability_query_set(
    index: &Index,
    unigram_min_cf: u64,
    bigram_min_cf: u64,
    max_queries: usize,
) -> Result<Vec<Query>> {
    if unigram_min_cf < 1 {
        return Err(Error::param("unigram_min_cf", "must be >= 1"));
    }
    if bigram_min_cf < 1 {
        return Err(Error::param("bigram_min_cf", "must be >= 1"));
    }
    let mut candidates: Vec<(u64, Query)> = Vec::new();
    for (id, term) in index.terms().iter().enumerate() {
        let cf = index.collection_freq_by_id(id as u32);
        if cf >= unigram_min_cf {
            candidates.push((cf, vec![term.clone()]));
        }
    }
    for bigram in index.bigrams() {
        if bigram.count >= bigram_min_cf {
            candidates.push((
                bigram.count,
                vec![
                    index.term(bigram.first).to_owned(),
                    index.term(bigram.second).to_owned(),
                ],
            ));
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    candidates.dedup_by(|a, b| a.1 == b.1);
    candidates.truncate(max_queries);
    Ok(candidates.into_iter().map(|(_, q)| q).collect())
}

pub fn retrievability_all(
    model: &RetrievalModel,
    index: &Index,
    queries: &[Query],
    cutoff: usize,
    progress: &Progress,
) -> Result<AccessScores> {
    validate_cutoff(cutoff)?;
    model.validate()?;
    if queries.is_empty() {
        return Err(Error::param("queries", "retrievability needs at least one query"));
    }
    let total = queries.len();
    let retrieved: Vec<Vec<u32>> = queries
        .par_iter()
        .map_init(
            || Searcher::new(index, *model).expect("validated model"),
            |searcher, query| {
                let prepared = PreparedQuery::new(index, query)?;
                let hits = searcher.top_k(&prepared, cutoff);
                progress.tick(total);
                Ok(hits.into_iter().map(|h| h.doc_ord).collect())
            },
        )
        .collect::<Result<_>>()?;

    let mut counts = vec![0u64; index.num_docs()];
    for docs in &retrieved {
        for &d in docs {
            counts[d as usize] += 1;
        }
    }
    let scores = counts
        .into_iter()
        .enumerate()
        .map(|(ord, n)| (index.doc_id(ord as u32).to_owned(), n as f64))
        .collect();

    Ok(AccessScores {
        metric: Metric::Retrievability,
        scores,
        model: *model,
        convenience: None,
        cutoff,
        skipped: Vec::new(),
        num_queries: total,
    })
}

/// Join two score maps on their shared doc_ids, ordered by doc_id.
pub fn paired_scores(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> (Vec<f64>, Vec<f64>) {
    let b_lookup: HashMap<&str, f64> = b.iter().map(|(k, &v)| (k.as_str(), v)).collect();
    a.iter()
        .filter_map(|(k, &x)| b_lookup.get(k.as_str()).map(|&y| (x, y)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::AnalysisConfig;
    use crate::corpus::Corpus;
    use crate::querygen::QuerySetSummary;
    use proptest::prelude::*;

    const BM25: RetrievalModel = RetrievalModel::Bm25 { k1: 1.2, b: 0.75 };

    fn index_of(docs: &[(&str, &str)]) -> Index {
        Index::build(&Corpus::from_texts(docs.iter().copied(), AnalysisConfig::minimal()).unwrap()).unwrap()
    }

    fn q(tokens: &[&str]) -> Query {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    fn query_set(entries: &[(&str, Vec<Query>)]) -> QuerySet {
        QuerySet {
            entries: entries.iter().cloned().map(|(k, v)| (k.to_owned(), v)).collect(),
            summary: QuerySetSummary {
                skipped: vec![],
                config: None,
                analysis_fingerprint: None,
                index_fingerprint: None,
            },
        }
    }

    #[test]
    fn convenience_values() {
        let inverse = ConvenienceSpec::new(ConvenienceForm::Inverse, 100);
        let exp = ConvenienceSpec::new(ConvenienceForm::Exponential, 100);
        assert_eq!(convenience(&inverse, 1).unwrap(), 1.0);
        assert_eq!(convenience(&inverse, 4).unwrap(), 0.25);
        assert_eq!(convenience(&inverse, 101).unwrap(), 0.0);
        assert_eq!(convenience(&exp, 1).unwrap(), 1.0);
        assert!((convenience(&exp, 4).unwrap() - (-1.0f64).exp()).abs() < 1e-12);
        assert_eq!(convenience(&exp, 101).unwrap(), 0.0);
        assert!(convenience(&inverse, 0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(ConvenienceSpec::new(ConvenienceForm::Inverse, 0).validate().is_err());
        assert!(ConvenienceSpec::new(ConvenienceForm::Inverse, 10_001).validate().is_err());
        let spec = ConvenienceSpec {
            decay: 0.0,
            ..ConvenienceSpec::default()
        };
        assert!(spec.validate().is_err());
        assert!("exp".parse::<ConvenienceForm>().is_ok());
        assert!("linear".parse::<ConvenienceForm>().is_err());
    }

    #[test]
    fn findability_closed_form() {
        let spec = ConvenienceSpec::default();
        let f = findability_from_ranks(&[Some(1), Some(3), None], &spec).unwrap();
        assert!((f - 4.0 / 9.0).abs() < 1e-12);
        assert_eq!(findability_from_ranks(&[Some(1), Some(1)], &spec).unwrap(), 1.0);
        assert_eq!(findability_from_ranks(&[None, Some(101)], &spec).unwrap(), 0.0);
        assert!(matches!(findability_from_ranks(&[], &spec), Err(Error::NoRelevantQueries)));
    }

    #[test]
    fn findability_of_doc_against_index() {
        let index = index_of(&[("d1", "alpha beta"), ("d2", "beta gamma"), ("d3", "gamma")]);
        let spec = ConvenienceSpec::default();
        let f = findability_of_doc(&BM25, &index, &[q(&["alpha"]), q(&["delta"])], "d1", &spec).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
        assert!(matches!(
            findability_of_doc(&BM25, &index, &[], "d1", &spec),
            Err(Error::NoRelevantQueries)
        ));
        assert!(findability_of_doc(&BM25, &index, &[q(&["a"])], "zz", &spec).is_err());
    }

    #[test]
    fn unique_matches_score_one() {
        let index = index_of(&[("d1", "apple pear"), ("d2", "kiwi lime")]);
        let set = query_set(&[
            ("d1", vec![q(&["apple"]), q(&["pear", "apple"])]),
            ("d2", vec![q(&["lime"])]),
        ]);
        let scores = findability_all(&BM25, &index, &set, &ConvenienceSpec::default(), &Progress::silent()).unwrap();
        assert_eq!(scores.scores["d1"], 1.0);
        assert_eq!(scores.scores["d2"], 1.0);
        let again = findability_all(&BM25, &index, &set, &ConvenienceSpec::default(), &Progress::silent()).unwrap();
        assert_eq!(scores, again);
    }

    #[test]
    fn empty_query_lists_are_skipped() {
        let index = index_of(&[("d1", "apple"), ("d2", "kiwi")]);
        let set = query_set(&[("d1", vec![q(&["apple"])]), ("d2", vec![])]);
        let scores = findability_all(&BM25, &index, &set, &ConvenienceSpec::default(), &Progress::silent()).unwrap();
        assert!(!scores.scores.contains_key("d2"));
        assert_eq!(scores.skipped, ["d2"]);
    }

    #[test]
    fn analysis_mismatch_is_rejected() {
        let index = index_of(&[("d1", "apple")]);
        let mut set = query_set(&[("d1", vec![q(&["apple"])])]);
        set.summary.analysis_fingerprint = Some("0000".into());
        let err = findability_all(&BM25, &index, &set, &ConvenienceSpec::default(), &Progress::silent()).unwrap_err();
        assert!(matches!(err, Error::FingerprintMismatch { .. }));
    }

    #[test]
    fn retrievability_queries() {
        let index = index_of(&[("d1", "a b"), ("d2", "a c")]);
        assert_eq!(retrievability_query_set(&index, 2, 100, 10).unwrap(), [q(&["a"])]);
        let with_bigrams = retrievability_query_set(&index, 100, 1, 10).unwrap();
        assert!(with_bigrams.contains(&q(&["a", "b"])));
        let capped = retrievability_query_set(&index, 1, 1, 1).unwrap();
        assert_eq!(capped, [q(&["a"])]);
        assert!(retrievability_query_set(&index, 0, 1, 1).is_err());
    }

    #[test]
    fn retrievability_counts() {
        let index = index_of(&[("d1", "a x"), ("d2", "b")]);
        let r = retrievability_all(&BM25, &index, &[q(&["a"])], 100, &Progress::silent()).unwrap();
        assert_eq!(r.scores["d1"], 1.0);
        assert_eq!(r.scores["d2"], 0.0);
        let none = retrievability_all(&BM25, &index, &[q(&["zzz"])], 100, &Progress::silent()).unwrap();
        assert!(none.scores.values().all(|&v| v == 0.0));
        let five: Vec<Query> = (0..5).map(|_| q(&["x"])).collect();
        let r = retrievability_all(&BM25, &index, &five, 1, &Progress::silent()).unwrap();
        assert_eq!(r.scores["d1"], 5.0);
        assert!(retrievability_all(&BM25, &index, &[], 1, &Progress::silent()).is_err());
    }

    proptest! {
        #[test]
        fn convenience_bounds(rank in 1usize..300, c in 1usize..200, exp in any::<bool>()) {
            let form = if exp { ConvenienceForm::Exponential } else { ConvenienceForm::Inverse };
            let spec = ConvenienceSpec::new(form, c);
            let v = spec.value(rank).unwrap();
            if rank > c {
                prop_assert_eq!(v, 0.0);
            } else {
                prop_assert!(v > 0.0 && v <= 1.0);
            }
            prop_assert!(spec.value(rank + 1).unwrap() <= v);
        }

        #[test]
        fn findability_monotone_in_rank_and_cutoff(
            ranks in prop::collection::vec(prop::option::of(1usize..150), 1..20),
            pick in any::<prop::sample::Index>(),
            c1 in 1usize..120,
            extra in 0usize..50,
        ) {
            let spec = ConvenienceSpec::new(ConvenienceForm::Inverse, c1);
            let f = findability_from_ranks(&ranks, &spec).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            let mut improved = ranks.clone();
            let i = pick.index(ranks.len());
            improved[i] = Some(improved[i].map_or(1, |r| (r / 2).max(1)));
            prop_assert!(findability_from_ranks(&improved, &spec).unwrap() >= f);
            let wider = ConvenienceSpec::new(ConvenienceForm::Inverse, c1 + extra);
            prop_assert!(findability_from_ranks(&ranks, &wider).unwrap() >= f);
            let all_first = vec![Some(1); ranks.len()];
            prop_assert_eq!(findability_from_ranks(&all_first, &spec).unwrap(), 1.0);
        }
    }
}
