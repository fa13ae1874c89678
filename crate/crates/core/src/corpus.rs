//! Document collections read from JSONL (`{"id": …, "text": …}`) or
//! two-column TSV (`doc_id<TAB>text`, no header).

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::analysis::AnalysisConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub source_path: String,
    pub analysis_config: AnalysisConfig,
}

impl Corpus {
    /// Build a corpus from `(id, text)` pairs, analyzing each text.
    pub fn from_texts<I, S, T>(texts: I, config: AnalysisConfig) -> Result<Self>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut builder = CorpusBuilder::new(config);
        for (i, (id, text)) in texts.into_iter().enumerate() {
            builder.push(i + 1, id.into(), text.into())?;
        }
        Ok(builder.finish(String::new()))
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::param(
                "format",
                format!("expected jsonl or tsv, got {other:?}"),
            )),
        }
    }
}

impl CorpusFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            CorpusFormat::Jsonl => "jsonl",
            CorpusFormat::Tsv => "tsv",
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat, config: &AnalysisConfig) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut corpus = read_corpus(BufReader::new(file), format, config)?;
    corpus.source_path = path.display().to_string();
    Ok(corpus)
}

pub fn read_corpus<R: BufRead>(
    reader: R,
    format: CorpusFormat,
    config: &AnalysisConfig,
) -> Result<Corpus> {
    config.validate()?;
    let mut builder = CorpusBuilder::new(config.clone());
    for_each_line(reader, |line_no, line| {
        if line.trim().is_empty() {
            return Ok(());
        }
        let (id, text) = match format {
            CorpusFormat::Jsonl => parse_jsonl_record(line_no, line)?,
            CorpusFormat::Tsv => parse_tsv_record(line_no, line)?,
        };
        builder.push(line_no, id, text)
    })?;
    Ok(builder.finish(String::new()))
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    text: String,
}

fn parse_jsonl_record(line_no: usize, line: &str) -> Result<(String, String)> {
    let record: JsonRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    Ok((record.id, record.text))
}

fn parse_tsv_record(line_no: usize, line: &str) -> Result<(String, String)> {
    let (id, text) = line.split_once('\t').ok_or_else(|| Error::Parse {
        line: line_no,
        message: "expected doc_id<TAB>text".into(),
    })?;
    Ok((id.to_owned(), text.to_owned()))
}

/// Calls `f` with each line (1-based number, without its line terminator).
pub(crate) fn for_each_line<R, F>(mut reader: R, mut f: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(usize, &str) -> Result<()>,
{
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
            if buf.last() == Some(&b'\r') {
                buf.pop();
            }
        }
        let line = std::str::from_utf8(&buf).map_err(|e| Error::Parse {
            line: line_no,
            message: format!("invalid UTF-8: {e}"),
        })?;
        f(line_no, line)?;
    }
}

struct CorpusBuilder {
    config: AnalysisConfig,
    seen: HashSet<String>,
    documents: Vec<Document>,
}

impl CorpusBuilder {
    fn new(config: AnalysisConfig) -> Self {
        CorpusBuilder {
            config,
            seen: HashSet::new(),
            documents: Vec::new(),
        }
    }

    fn push(&mut self, line_no: usize, doc_id: String, raw_text: String) -> Result<()> {
        if doc_id.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty document id".into(),
            });
        }
        if !self.seen.insert(doc_id.clone()) {
            return Err(Error::Integrity(format!(
                "duplicate doc_id {doc_id:?} at line {line_no}"
            )));
        }
        let tokens = self.config.analyze(&raw_text);
        self.documents.push(Document {
            doc_id,
            raw_text,
            tokens,
        });
        Ok(())
    }

    fn finish(self, source_path: String) -> Corpus {
        Corpus {
            documents: self.documents,
            source_path,
            analysis_config: self.config,
        }
    }
}
