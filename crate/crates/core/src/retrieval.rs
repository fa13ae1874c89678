//! Ranking models over the inverted index.
//!
//! Each model is a sum of per-term contributions accumulated in query-term
//! order (distinct terms, first occurrence first). Only documents containing
//! at least one query term are ranked. Equal scores are ordered by doc_id
//! ascending.

use std::cmp::Ordering;
use std::f64::consts::{LOG2_E, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::Index;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RetrievalModel {
    Bm25 { k1: f64, b: f64 },
    LmDirichlet { mu: f64 },
    DfrPl2 { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Bm25,
    LmDirichlet,
    DfrPl2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Bm25, ModelKind::LmDirichlet, ModelKind::DfrPl2];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bm25 => "bm25",
            ModelKind::LmDirichlet => "lmdir",
            ModelKind::DfrPl2 => "pl2",
        }
    }

    pub fn default_model(self) -> RetrievalModel {
        match self {
            ModelKind::Bm25 => RetrievalModel::Bm25 { k1: 1.2, b: 0.75 },
            ModelKind::LmDirichlet => RetrievalModel::LmDirichlet { mu: 1000.0 },
            ModelKind::DfrPl2 => RetrievalModel::DfrPl2 { c: 1.0 },
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bm25" => Ok(ModelKind::Bm25),
            "lmdir" | "lm_dirichlet" | "lm-dir" => Ok(ModelKind::LmDirichlet),
            "pl2" | "dfr_pl2" | "dfr-pl2" => Ok(ModelKind::DfrPl2),
            other => Err(Error::param(
                "model",
                format!("expected bm25, lmdir or pl2, got {other:?}"),
            )),
        }
    }
}

impl Default for RetrievalModel {
    fn default() -> Self {
        ModelKind::Bm25.default_model()
    }
}

impl RetrievalModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            RetrievalModel::Bm25 { .. } => ModelKind::Bm25,
            RetrievalModel::LmDirichlet { .. } => ModelKind::LmDirichlet,
            RetrievalModel::DfrPl2 { .. } => ModelKind::DfrPl2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RetrievalModel::Bm25 { k1, b } => {
                if !(k1.is_finite() && k1 > 0.0) {
                    return Err(Error::param("bm25.k1", format!("must be > 0, got {k1}")));
                }
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::param("bm25.b", format!("must be in [0,1], got {b}")));
                }
            }
            RetrievalModel::LmDirichlet { mu } => {
                if !(mu.is_finite() && mu > 0.0) {
                    return Err(Error::param("lmdir.mu", format!("must be > 0, got {mu}")));
                }
            }
            RetrievalModel::DfrPl2 { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::param("pl2.c", format!("must be > 0, got {c}")));
                }
            }
        }
        Ok(())
    }

    /// Contribution of one query term to a document's score. `tf` may be zero
    /// only for the language model, which scores absent terms through the
    /// collection background.
    fn term_score(&self, term: &TermStats, tf: u32, doc_len: u32, coll: &CollectionView) -> f64 {
        let qtf = f64::from(term.qtf);
        let tf = f64::from(tf);
        let dl = f64::from(doc_len);
        match *self {
            RetrievalModel::Bm25 { k1, b } => {
                let df = term.df as f64;
                let idf = (1.0 + (coll.num_docs - df + 0.5) / (df + 0.5)).ln();
                let norm = k1 * (1.0 - b + b * dl / coll.avg_doc_length);
                qtf * idf * (tf * (k1 + 1.0)) / (tf + norm)
            }
            RetrievalModel::LmDirichlet { mu } => {
                let background = term.cf as f64 / coll.total_tokens;
                qtf * ((tf + mu * background) / (dl + mu)).ln()
            }
            RetrievalModel::DfrPl2 { c } => {
                let lambda = term.cf as f64 / coll.num_docs;
                let tfn = tf * (1.0 + c * coll.avg_doc_length / dl).log2();
                if tfn <= 0.0 || lambda >= tfn {
                    return 0.0;
                }
                let gain = tfn * (tfn / lambda).log2()
                    + (lambda - tfn) * LOG2_E
                    + 0.5 * (2.0 * PI * tfn).log2();
                (qtf * gain / (tfn + 1.0)).max(0.0)
            }
        }
    }

    fn scores_absent_terms(&self) -> bool {
        matches!(self, RetrievalModel::LmDirichlet { .. })
    }

    /// Score from per-term frequencies aligned with `terms`.
    fn doc_score(&self, terms: &[TermStats], tfs: &[u32], doc_len: u32, coll: &CollectionView) -> f64 {
        let absent_too = self.scores_absent_terms();
        let mut score = 0.0;
        for (term, &tf) in terms.iter().zip(tfs) {
            if tf > 0 || absent_too {
                score += self.term_score(term, tf, doc_len, coll);
            }
        }
        score
    }
}

impl fmt::Display for RetrievalModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RetrievalModel::Bm25 { k1, b } => write!(f, "bm25(k1={k1},b={b})"),
            RetrievalModel::LmDirichlet { mu } => write!(f, "lmdir(mu={mu})"),
            RetrievalModel::DfrPl2 { c } => write!(f, "pl2(c={c})"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct CollectionView {
    num_docs: f64,
    avg_doc_length: f64,
    total_tokens: f64,
}

impl CollectionView {
    fn of(index: &Index) -> Self {
        CollectionView {
            num_docs: index.num_docs() as f64,
            avg_doc_length: index.avg_doc_length(),
            total_tokens: index.total_tokens() as f64,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct TermStats {
    id: u32,
    qtf: u32,
    df: usize,
    cf: u64,
}

/// Query terms resolved against an index: distinct, in first-occurrence
/// order, with their query frequency. Terms unseen in the collection are
/// dropped since no model can score them.
#[derive(Debug, Clone)]
pub struct PreparedQuery {
    terms: Vec<TermStats>,
}

impl PreparedQuery {
    pub fn new(index: &Index, query: &[impl AsRef<str>]) -> Result<Self> {
        if query.is_empty() {
            return Err(Error::EmptyQuery);
        }
        let mut terms: Vec<TermStats> = Vec::new();
        for token in query {
            let Some(id) = index.term_id(token.as_ref()) else {
                continue;
            };
            match terms.iter_mut().find(|t| t.id == id) {
                Some(t) => t.qtf += 1,
                None => terms.push(TermStats {
                    id,
                    qtf: 1,
                    df: index.postings_by_id(id).len(),
                    cf: index.collection_freq_by_id(id),
                }),
            }
        }
        Ok(PreparedQuery { terms })
    }

    pub fn is_unmatched(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub doc_ord: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub entries: Vec<(String, f64)>,
    pub query: Vec<String>,
}

/// Reusable evaluator holding per-document scratch space. One per worker.
pub struct Searcher<'a> {
    index: &'a Index,
    model: RetrievalModel,
    coll: CollectionView,
    slot: Vec<u32>,
    touched: Vec<u32>,
    tfs: Vec<u32>,
}

const NO_SLOT: u32 = u32::MAX;

impl<'a> Searcher<'a> {
    pub fn new(index: &'a Index, model: RetrievalModel) -> Result<Self> {
        model.validate()?;
        Ok(Searcher {
            index,
            model,
            coll: CollectionView::of(index),
            slot: vec![NO_SLOT; index.num_docs()],
            touched: Vec::new(),
            tfs: Vec::new(),
        })
    }

    pub fn index(&self) -> &'a Index {
        self.index
    }

    pub fn model(&self) -> RetrievalModel {
        self.model
    }

    /// Scores of every document matching at least one query term, in no
    /// particular order.
    pub fn matches(&mut self, query: &PreparedQuery) -> Vec<Hit> {
        let width = query.terms.len();
        self.touched.clear();
        self.tfs.clear();
        for (j, term) in query.terms.iter().enumerate() {
            for p in self.index.postings_by_id(term.id) {
                let doc = p.doc_ord as usize;
                let row = if self.slot[doc] == NO_SLOT {
                    let row = self.touched.len() as u32;
                    self.slot[doc] = row;
                    self.touched.push(p.doc_ord);
                    self.tfs.resize(self.tfs.len() + width, 0);
                    row
                } else {
                    self.slot[doc]
                };
                self.tfs[row as usize * width + j] = p.term_freq;
            }
        }
        let mut hits = Vec::with_capacity(self.touched.len());
        for (row, &doc_ord) in self.touched.iter().enumerate() {
            let tfs = &self.tfs[row * width..(row + 1) * width];
            let score =
                self.model
                    .doc_score(&query.terms, tfs, self.index.doc_length(doc_ord), &self.coll);
            hits.push(Hit { doc_ord, score });
            self.slot[doc_ord as usize] = NO_SLOT;
        }
        hits
    }

    /// Top `k` hits, best first.
    pub fn top_k(&mut self, query: &PreparedQuery, k: usize) -> Vec<Hit> {
        let mut hits = self.matches(query);
        let index = self.index;
        let order = |a: &Hit, b: &Hit| compare_hits(index, a, b);
        if k < hits.len() {
            if k == 0 {
                hits.clear();
            } else {
                hits.select_nth_unstable_by(k - 1, order);
                hits.truncate(k);
            }
        }
        hits.sort_unstable_by(order);
        hits
    }

    /// 1-based rank of `target` among the matches, if it matches at all.
    pub fn rank_in(&mut self, query: &PreparedQuery, target: u32) -> Option<usize> {
        let hits = self.matches(query);
        rank_among(self.index, &hits, target)
    }
}

/// Ordering of hits in a ranked list: higher score first, then doc_id.
pub fn compare_hits(index: &Index, a: &Hit, b: &Hit) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| index.tie_rank(a.doc_ord).cmp(&index.tie_rank(b.doc_ord)))
}

/// 1-based position `target` would take if `hits` were sorted.
pub fn rank_among(index: &Index, hits: &[Hit], target: u32) -> Option<usize> {
    let target_hit = hits.iter().find(|h| h.doc_ord == target)?;
    let ahead = hits
        .iter()
        .filter(|h| compare_hits(index, h, target_hit) == Ordering::Less)
        .count();
    Some(ahead + 1)
}

pub fn score(model: &RetrievalModel, index: &Index, query: &[impl AsRef<str>], doc_ord: u32) -> Result<f64> {
    model.validate()?;
    if doc_ord as usize >= index.num_docs() {
        return Err(Error::InvalidOrdinal {
            ordinal: doc_ord as usize,
            num_docs: index.num_docs(),
        });
    }
    let query = PreparedQuery::new(index, query)?;
    let tfs: Vec<u32> = query
        .terms
        .iter()
        .map(|t| {
            let list = index.postings_by_id(t.id);
            list.binary_search_by_key(&doc_ord, |p| p.doc_ord)
                .map(|i| list[i].term_freq)
                .unwrap_or(0)
        })
        .collect();
    if tfs.iter().all(|&tf| tf == 0) {
        return Ok(0.0);
    }
    Ok(model.doc_score(
        &query.terms,
        &tfs,
        index.doc_length(doc_ord),
        &CollectionView::of(index),
    ))
}

pub fn search(model: &RetrievalModel, index: &Index, query: &[impl AsRef<str>], k: usize) -> Result<RankedList> {
    if k < 1 {
        return Err(Error::param("k", "must be >= 1"));
    }
    let prepared = PreparedQuery::new(index, query)?;
    let mut searcher = Searcher::new(index, *model)?;
    let entries = searcher
        .top_k(&prepared, k)
        .into_iter()
        .map(|h| (index.doc_id(h.doc_ord).to_owned(), h.score))
        .collect();
    Ok(RankedList {
        entries,
        query: query.iter().map(|t| t.as_ref().to_owned()).collect(),
    })
}

/// Rank of `target` for `query`, or `None` when it is not within the top
/// `cutoff`.
pub fn rank_of(
    model: &RetrievalModel,
    index: &Index,
    query: &[impl AsRef<str>],
    target: &str,
    cutoff: usize,
) -> Result<Option<usize>> {
    if cutoff < 1 {
        return Err(Error::param("cutoff", "must be >= 1"));
    }
    let target = index
        .ordinal(target)
        .ok_or_else(|| Error::UnknownDocument(target.to_owned()))?;
    let prepared = PreparedQuery::new(index, query)?;
    let mut searcher = Searcher::new(index, *model)?;
    Ok(searcher
        .rank_in(&prepared, target)
        .filter(|&rank| rank <= cutoff))
}
