#![no_main]

use findability::analysis::AnalysisConfig;
use findability::corpus::{read_corpus, CorpusFormat};
use findability::index::Index;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = read_corpus(data, CorpusFormat::Tsv, &AnalysisConfig::default()) {
        if let Ok(index) = Index::build(&corpus) {
            assert_eq!(index.num_docs(), corpus.len());
        }
    }
});
