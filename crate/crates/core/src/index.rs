//! Immutable inverted index with the collection statistics the ranking
//! models and the query generator need.
//!
//! # File layout
//!
//! All integers are unsigned LEB128 varints unless stated otherwise.
//!
//! ```text
//! magic        8 bytes  "FINDIDX1"
//! version      u32 little-endian (currently 1)
//! config       len, UTF-8 JSON of the AnalysisConfig
//! doc table    N, then N × (len, UTF-8 doc_id)            ordinal order
//! lengths      N × doc length in tokens
//! terms        T, then T × (len, UTF-8 term, df,
//!                           df × (ordinal delta, tf))     terms sorted bytewise
//! bigrams      B, then B × (first term id, second term id, count)
//!                                                         sorted by (first, second)
//! ```
//!
//! The first ordinal of a postings list is stored as-is, later ones as the
//! gap to the previous ordinal. Decoding rejects trailing bytes and any
//! record that breaks an index invariant.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fingerprint::sha256_hex;

pub const MAGIC: &[u8; 8] = b"FINDIDX1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc_ord: u32,
    pub term_freq: u32,
}

/// Count of an adjacent token pair across the collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bigram {
    pub first: u32,
    pub second: u32,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    pub num_docs: usize,
    pub num_distinct_terms: usize,
    pub total_tokens: u64,
    pub avg_doc_length: f64,
}

#[derive(Debug)]
pub struct Index {
    analysis_config: AnalysisConfig,
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    terms: Vec<String>,
    term_lookup: HashMap<String, u32>,
    postings: Vec<Vec<Posting>>,
    collection_freq: Vec<u64>,
    bigrams: Vec<Bigram>,
    // derived, not serialized
    forward: Vec<Vec<(u32, u32)>>,
    tie_rank: Vec<u32>,
    total_tokens: u64,
    avg_doc_length: f64,
    fingerprint: OnceLock<String>,
}

impl Index {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut term_docs: BTreeMap<&str, Vec<Posting>> = BTreeMap::new();
        let mut pair_counts: BTreeMap<(&str, &str), u64> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lengths = Vec::with_capacity(corpus.len());

        for (ord, doc) in corpus.iter().enumerate() {
            let ord = u32::try_from(ord).map_err(|_| Error::Integrity("too many documents".into()))?;
            doc_ids.push(doc.doc_id.clone());
            doc_lengths.push(
                u32::try_from(doc.tokens.len())
                    .map_err(|_| Error::Integrity(format!("document {} too long", doc.doc_id)))?,
            );
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for token in &doc.tokens {
                *counts.entry(token.as_str()).or_default() += 1;
            }
            for (term, tf) in counts {
                term_docs.entry(term).or_default().push(Posting {
                    doc_ord: ord,
                    term_freq: tf,
                });
            }
            for pair in doc.tokens.windows(2) {
                *pair_counts.entry((pair[0].as_str(), pair[1].as_str())).or_default() += 1;
            }
        }

        let terms: Vec<String> = term_docs.keys().map(|t| t.to_string()).collect();
        let term_lookup: HashMap<&str, u32> = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i as u32))
            .collect();
        let bigrams = pair_counts
            .into_iter()
            .map(|((a, b), count)| Bigram {
                first: term_lookup[a],
                second: term_lookup[b],
                count,
            })
            .collect::<Vec<_>>();
        // (first, second) ids follow the same bytewise order as the terms,
        // so the BTreeMap order is already sorted by id pair.
        let postings = term_docs.into_values().collect();

        Self::assemble(
            corpus.analysis_config.clone(),
            doc_ids,
            doc_lengths,
            terms,
            postings,
            bigrams,
        )
    }

    fn assemble(
        analysis_config: AnalysisConfig,
        doc_ids: Vec<String>,
        doc_lengths: Vec<u32>,
        terms: Vec<String>,
        postings: Vec<Vec<Posting>>,
        bigrams: Vec<Bigram>,
    ) -> Result<Self> {
        let num_docs = doc_ids.len();
        if num_docs == 0 {
            return Err(Error::EmptyCorpus);
        }
        let mut doc_lookup = HashMap::with_capacity(num_docs);
        for (ord, id) in doc_ids.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::Integrity("empty doc_id".into()));
            }
            if doc_lookup.insert(id.clone(), ord as u32).is_some() {
                return Err(Error::Integrity(format!("duplicate doc_id {id:?}")));
            }
        }
        let term_lookup = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();

        let mut forward: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_docs];
        let mut collection_freq = Vec::with_capacity(terms.len());
        for (term_id, list) in postings.iter().enumerate() {
            let mut cf = 0u64;
            for p in list {
                cf += u64::from(p.term_freq);
                forward[p.doc_ord as usize].push((term_id as u32, p.term_freq));
            }
            collection_freq.push(cf);
        }

        let mut by_id: Vec<u32> = (0..num_docs as u32).collect();
        by_id.sort_by(|&a, &b| doc_ids[a as usize].cmp(&doc_ids[b as usize]));
        let mut tie_rank = vec![0u32; num_docs];
        for (rank, ord) in by_id.into_iter().enumerate() {
            tie_rank[ord as usize] = rank as u32;
        }

        let total_tokens: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = total_tokens as f64 / num_docs as f64;

        Ok(Index {
            analysis_config,
            doc_ids,
            doc_lookup,
            doc_lengths,
            terms,
            term_lookup,
            postings,
            collection_freq,
            bigrams,
            forward,
            tie_rank,
            total_tokens,
            avg_doc_length,
            fingerprint: OnceLock::new(),
        })
    }

    pub fn stats(&self) -> CollectionStats {
        CollectionStats {
            num_docs: self.num_docs(),
            num_distinct_terms: self.terms.len(),
            total_tokens: self.total_tokens,
            avg_doc_length: self.avg_doc_length,
        }
    }

    pub fn analysis_config(&self) -> &AnalysisConfig {
        &self.analysis_config
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_id(&self, ord: u32) -> &str {
        &self.doc_ids[ord as usize]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub fn doc_length(&self, ord: u32) -> u32 {
        self.doc_lengths[ord as usize]
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    /// Position of the document in ascending doc_id order; used as the
    /// tie-break key when scores are equal.
    pub fn tie_rank(&self, ord: u32) -> u32 {
        self.tie_rank[ord as usize]
    }

    pub fn term_id(&self, term: &str) -> Option<u32> {
        self.term_lookup.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Sorted postings of `term`; empty for unseen terms.
    pub fn postings(&self, term: &str) -> &[Posting] {
        self.term_id(term)
            .map(|id| self.postings_by_id(id))
            .unwrap_or(&[])
    }

    pub fn postings_by_id(&self, id: u32) -> &[Posting] {
        &self.postings[id as usize]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn collection_term_freq(&self, term: &str) -> u64 {
        self.term_id(term)
            .map(|id| self.collection_freq[id as usize])
            .unwrap_or(0)
    }

    pub fn collection_freq_by_id(&self, id: u32) -> u64 {
        self.collection_freq[id as usize]
    }

    /// `(term id, term frequency)` for every distinct term of a document,
    /// in ascending term id order.
    pub fn doc_terms(&self, ord: u32) -> &[(u32, u32)] {
        &self.forward[ord as usize]
    }

    pub fn bigrams(&self) -> &[Bigram] {
        &self.bigrams
    }

    /// Hash of the serialized index.
    pub fn fingerprint(&self) -> &str {
        self.fingerprint
            .get_or_init(|| sha256_hex(&self.to_bytes()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let config = serde_json::to_vec(&self.analysis_config).expect("config serializes");
        put_bytes(&mut out, &config);
        put_varint(&mut out, self.doc_ids.len() as u64);
        for id in &self.doc_ids {
            put_bytes(&mut out, id.as_bytes());
        }
        for &len in &self.doc_lengths {
            put_varint(&mut out, u64::from(len));
        }
        put_varint(&mut out, self.terms.len() as u64);
        for (term, list) in self.terms.iter().zip(&self.postings) {
            put_bytes(&mut out, term.as_bytes());
            put_varint(&mut out, list.len() as u64);
            let mut prev = 0u32;
            for (i, p) in list.iter().enumerate() {
                let delta = if i == 0 { p.doc_ord } else { p.doc_ord - prev };
                put_varint(&mut out, u64::from(delta));
                put_varint(&mut out, u64::from(p.term_freq));
                prev = p.doc_ord;
            }
        }
        put_varint(&mut out, self.bigrams.len() as u64);
        for b in &self.bigrams {
            put_varint(&mut out, u64::from(b.first));
            put_varint(&mut out, u64::from(b.second));
            put_varint(&mut out, b.count);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(format_err("bad magic"));
        }
        let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }

        let analysis_config: AnalysisConfig = serde_json::from_slice(r.bytes_field()?)
            .map_err(|e| format_err(format!("analysis config: {e}")))?;
        analysis_config
            .validate()
            .map_err(|e| format_err(e.to_string()))?;

        let num_docs = r.count(u32::MAX as u64)?;
        if num_docs == 0 {
            return Err(format_err("no documents"));
        }
        let mut doc_ids = Vec::with_capacity(num_docs.min(r.remaining()));
        for _ in 0..num_docs {
            doc_ids.push(r.string()?);
        }
        let mut doc_lengths = Vec::with_capacity(num_docs);
        for _ in 0..num_docs {
            doc_lengths.push(r.u32()?);
        }

        let num_terms = r.count(u32::MAX as u64)?;
        let mut terms: Vec<String> = Vec::with_capacity(num_terms.min(r.remaining()));
        let mut postings = Vec::with_capacity(num_terms.min(r.remaining()));
        let mut token_sums = vec![0u64; num_docs];
        for _ in 0..num_terms {
            let term = r.string()?;
            if term.is_empty() {
                return Err(format_err("empty term"));
            }
            if let Some(prev) = terms.last() {
                if prev.as_bytes() >= term.as_bytes() {
                    return Err(format_err(format!("terms out of order at {term:?}")));
                }
            }
            let df = r.count(num_docs as u64)?;
            if df == 0 {
                return Err(format_err(format!("term {term:?} has no postings")));
            }
            let mut list = Vec::with_capacity(df);
            let mut prev: Option<u32> = None;
            for _ in 0..df {
                let delta = r.u32()?;
                let doc_ord = match prev {
                    None => delta,
                    Some(p) => {
                        if delta == 0 {
                            return Err(format_err(format!("duplicate posting for {term:?}")));
                        }
                        p.checked_add(delta)
                            .ok_or_else(|| format_err("ordinal overflow"))?
                    }
                };
                if doc_ord as usize >= num_docs {
                    return Err(format_err(format!("ordinal {doc_ord} out of range")));
                }
                let term_freq = r.u32()?;
                if term_freq == 0 {
                    return Err(format_err(format!("zero term frequency for {term:?}")));
                }
                token_sums[doc_ord as usize] += u64::from(term_freq);
                list.push(Posting { doc_ord, term_freq });
                prev = Some(doc_ord);
            }
            terms.push(term);
            postings.push(list);
        }
        for (ord, (&sum, &len)) in token_sums.iter().zip(&doc_lengths).enumerate() {
            if sum != u64::from(len) {
                return Err(format_err(format!(
                    "document {ord} length {len} disagrees with postings total {sum}"
                )));
            }
        }

        let num_bigrams = r.count(u64::MAX)?;
        let mut bigrams: Vec<Bigram> = Vec::with_capacity(num_bigrams.min(r.remaining()));
        let mut pair_total = 0u64;
        for _ in 0..num_bigrams {
            let first = r.u32()?;
            let second = r.u32()?;
            let count = r.varint()?;
            if first as usize >= num_terms || second as usize >= num_terms || count == 0 {
                return Err(format_err("invalid bigram record"));
            }
            if let Some(prev) = bigrams.last() {
                if (prev.first, prev.second) >= (first, second) {
                    return Err(format_err("bigrams out of order"));
                }
            }
            pair_total = pair_total
                .checked_add(count)
                .ok_or_else(|| format_err("bigram count overflow"))?;
            bigrams.push(Bigram {
                first,
                second,
                count,
            });
        }
        let expected_pairs: u64 = doc_lengths
            .iter()
            .map(|&l| u64::from(l.saturating_sub(1)))
            .sum();
        if pair_total != expected_pairs {
            return Err(format_err(format!(
                "bigram total {pair_total} does not match document lengths ({expected_pairs})"
            )));
        }
        if r.remaining() != 0 {
            return Err(format_err(format!("{} trailing bytes", r.remaining())));
        }

        Self::assemble(
            analysis_config,
            doc_ids,
            doc_lengths,
            terms,
            postings,
            bigrams,
        )
        .map_err(|e| format_err(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Path of the JSON stats sidecar written next to an index file.
pub fn stats_sidecar_path(index_path: &Path) -> std::path::PathBuf {
    let mut name = index_path.as_os_str().to_owned();
    name.push(".stats.json");
    name.into()
}

pub fn write_stats_sidecar(index: &Index, index_path: &Path) -> Result<()> {
    let path = stats_sidecar_path(index_path);
    let mut json = serde_json::to_string_pretty(&index.stats()).expect("stats serialize");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(path, e))
}

fn format_err(message: impl Into<String>) -> Error {
    Error::IndexFormat(message.into())
}

fn put_varint(out: &mut Vec<u8>, mut value: u64) {
    while value >= 0x80 {
        out.push((value as u8) | 0x80);
        value >>= 7;
    }
    out.push(value as u8);
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_varint(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(format_err("unexpected end of file"));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn varint(&mut self) -> Result<u64> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let byte = self.take(1)?[0];
            let bits = u64::from(byte & 0x7f);
            if shift == 63 && bits > 1 {
                return Err(format_err("varint overflow"));
            }
            value |= bits << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(format_err("varint overflow"))
    }

    fn u32(&mut self) -> Result<u32> {
        u32::try_from(self.varint()?).map_err(|_| format_err("value exceeds u32"))
    }

    fn count(&mut self, max: u64) -> Result<usize> {
        let n = self.varint()?;
        if n > max {
            return Err(format_err(format!("count {n} exceeds limit {max}")));
        }
        usize::try_from(n).map_err(|_| format_err("count exceeds usize"))
    }

    fn bytes_field(&mut self) -> Result<&'a [u8]> {
        let len = self.count(self.remaining() as u64)?;
        self.take(len)
    }

    fn string(&mut self) -> Result<String> {
        let bytes = self.bytes_field()?;
        std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|_| format_err("invalid UTF-8 string"))
    }
}
