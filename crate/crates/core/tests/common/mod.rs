#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{LOG2_E, PI};
use std::io::Write;

use findability::corpus::Corpus;
use findability::retrieval::RetrievalModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

/// Writes straight to the stderr handle so the line survives test capture.
pub fn verdict(criterion: u32, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "criterion {criterion:>2}: {status}  {detail}").unwrap();
}

/// Small random corpus for oracle checks: up to `max_docs` documents over a
/// vocabulary of at most `max_vocab` terms.
pub fn random_small_corpus(rng: &mut impl Rng, max_docs: usize, max_vocab: usize) -> Vec<(String, String)> {
    let n_docs = rng.random_range(2..=max_docs);
    let vocab = rng.random_range(2..=max_vocab);
    (0..n_docs)
        .map(|i| {
            let len = rng.random_range(1..=30);
            let text: Vec<String> = (0..len)
                // squaring skews toward low ids so some terms are common
                .map(|_| {
                    let u: f64 = rng.random();
                    format!("t{}", ((u * u) * vocab as f64) as usize)
                })
                .collect();
            (format!("d{i:04}"), text.join(" "))
        })
        .collect()
}

/// Topic-mixture corpus with Zipfian term frequencies. Documents are drawn
/// sequentially from one stream, so a smaller corpus from the same seed is a
/// prefix of a larger one.
pub fn topical_corpus(seed: u64, n_docs: usize) -> Vec<(String, String)> {
    const VOCAB: usize = 30_000;
    const TOPICS: usize = 100;
    const TOPIC_WORDS: usize = 300;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let global = Zipf::new(VOCAB as f64, 1.1).unwrap();
    let topics: Vec<Vec<usize>> = (0..TOPICS)
        .map(|_| (0..TOPIC_WORDS).map(|_| rng.random_range(0..VOCAB)).collect())
        .collect();
    let in_topic = Zipf::new(TOPIC_WORDS as f64, 1.0).unwrap();

    (0..n_docs)
        .map(|i| {
            let topic = &topics[rng.random_range(0..TOPICS)];
            let len = rng.random_range(40..400);
            let words: Vec<String> = (0..len)
                .map(|_| {
                    let id = if rng.random_bool(0.6) {
                        topic[in_topic.sample(&mut rng) as usize - 1]
                    } else {
                        global.sample(&mut rng) as usize - 1
                    };
                    format!("w{id}")
                })
                .collect();
            (format!("doc{i:06}"), words.join(" "))
        })
        .collect()
}

pub fn write_jsonl(path: &std::path::Path, docs: &[(String, String)]) {
    let mut out = String::new();
    for (id, text) in docs {
        out.push_str(&serde_json::json!({"id": id, "text": text}).to_string());
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

/// Full-scan scorer computed from the analyzed token streams, independent of
/// the inverted index.
pub struct BruteForce {
    ids: Vec<String>,
    tfs: Vec<HashMap<String, u32>>,
    lens: Vec<u32>,
    df: HashMap<String, usize>,
    cf: HashMap<String, u64>,
    n: f64,
    avgdl: f64,
    total: f64,
}

impl BruteForce {
    pub fn new(corpus: &Corpus) -> Self {
        let mut ids = Vec::new();
        let mut tfs = Vec::new();
        let mut lens = Vec::new();
        let mut df = HashMap::new();
        let mut cf = HashMap::new();
        for doc in corpus.iter() {
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in &doc.tokens {
                *tf.entry(t.clone()).or_default() += 1;
                *cf.entry(t.clone()).or_default() += 1;
            }
            for t in tf.keys() {
                *df.entry(t.clone()).or_default() += 1;
            }
            ids.push(doc.doc_id.clone());
            lens.push(doc.tokens.len() as u32);
            tfs.push(tf);
        }
        let total: u64 = lens.iter().map(|&l| u64::from(l)).sum();
        let n = ids.len() as f64;
        BruteForce {
            ids,
            tfs,
            lens,
            df,
            cf,
            n,
            avgdl: total as f64 / n,
            total: total as f64,
        }
    }

    fn score(&self, model: &RetrievalModel, query: &[(String, u32)], d: usize) -> Option<f64> {
        let dl = f64::from(self.lens[d]);
        if !query.iter().any(|(t, _)| self.tfs[d].contains_key(t)) {
            return None;
        }
        let mut s = 0.0;
        for (t, qtf) in query {
            let qtf = f64::from(*qtf);
            let tf = f64::from(self.tfs[d].get(t).copied().unwrap_or(0));
            let cf = self.cf[t] as f64;
            match *model {
                RetrievalModel::Bm25 { k1, b } => {
                    if tf == 0.0 {
                        continue;
                    }
                    let df = self.df[t] as f64;
                    let idf = (1.0 + (self.n - df + 0.5) / (df + 0.5)).ln();
                    s += qtf * idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / self.avgdl));
                }
                RetrievalModel::LmDirichlet { mu } => {
                    s += qtf * ((tf + mu * cf / self.total) / (dl + mu)).ln();
                }
                RetrievalModel::DfrPl2 { c } => {
                    if tf == 0.0 {
                        continue;
                    }
                    let lambda = cf / self.n;
                    let tfn = tf * (1.0 + c * self.avgdl / dl).log2();
                    if tfn <= 0.0 || lambda >= tfn {
                        continue;
                    }
                    let gain = tfn * (tfn / lambda).log2() + (lambda - tfn) * LOG2_E + 0.5 * (2.0 * PI * tfn).log2();
                    s += (qtf * gain / (tfn + 1.0)).max(0.0);
                }
            }
        }
        Some(s)
    }

    /// Every matching document, best first, ties broken by doc_id.
    pub fn ranking(&self, model: &RetrievalModel, query: &[String]) -> Vec<(String, f64)> {
        let mut terms: Vec<(String, u32)> = Vec::new();
        for t in query {
            if !self.cf.contains_key(t) {
                continue;
            }
            match terms.iter_mut().find(|(u, _)| u == t) {
                Some(entry) => entry.1 += 1,
                None => terms.push((t.clone(), 1)),
            }
        }
        let mut hits: Vec<(String, f64)> = (0..self.ids.len())
            .filter_map(|d| self.score(model, &terms, d).map(|s| (self.ids[d].clone(), s)))
            .collect();
        hits.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        hits
    }

    pub fn rank(&self, model: &RetrievalModel, query: &[String], target: &str) -> Option<usize> {
        self.ranking(model, query)
            .iter()
            .position(|(id, _)| id == target)
            .map(|p| p + 1)
    }
}

/// O(n^2) tau-b by direct pair counting.
pub fn kendall_pairs(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let num = (concordant - discordant) as f64;
    let denom = (((concordant + discordant + tie_x) as f64) * ((concordant + discordant + tie_y) as f64)).sqrt();
    num / denom
}

pub fn counts_by_doc(set: &findability::querygen::QuerySet) -> BTreeMap<String, usize> {
    set.entries.iter().map(|(k, v)| (k.clone(), v.len())).collect()
}
