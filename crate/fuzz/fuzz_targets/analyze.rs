#![no_main]

use findability::analysis::{parse_stopwords, AnalysisConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let config = AnalysisConfig {
        stemming: data.first().is_some_and(|b| b & 1 == 1),
        ..AnalysisConfig::default()
    };
    for token in config.analyze(text) {
        assert!(token.chars().count() >= config.min_token_length);
        assert!(!config.stopwords.contains(&token));
    }
    let _ = parse_stopwords(text);
});
