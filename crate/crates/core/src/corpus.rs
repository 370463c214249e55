//! Corpus, query, and relevance-judgment loading.
//!
//! Input formats follow the BEIR conventions used by reasoning retrieval
//! benchmarks: JSONL corpora with `_id`/`title`/`text`, JSONL or TSV query
//! files, and TREC 4-column or TSV 3-column qrels.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed line: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: expected {expected} tab-separated columns, found {found}")]
    ColumnCount {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("duplicate doc_id \"{doc_id}\"")]
    DuplicateDocId { doc_id: String },
    #[error("duplicate query_id \"{query_id}\"")]
    DuplicateQueryId { query_id: String },
    #[error("reformulation references unknown query_id \"{query_id}\"")]
    UnknownQueryId { query_id: String },
    #[error("empty reformulation text for query_id \"{query_id}\"")]
    EmptyReformulation { query_id: String },
    #[error("{path}:{line}: grade must be a non-negative integer, got \"{value}\"")]
    BadGrade {
        path: String,
        line: usize,
        value: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// A corpus unit: one retrievable passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: Option<String>,
    pub text: String,
}

impl Document {
    /// Text used for indexing and prompting: `"title\ntext"` when a title
    /// is present, the body alone otherwise.
    pub fn full_text(&self) -> String {
        match &self.title {
            Some(title) => format!("{title}\n{}", self.text),
            None => self.text.clone(),
        }
    }
}

/// A search request, optionally carrying a reformulated (CoT or HyDE) text
/// that replaces the original for retrieval and reranking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub text: String,
    pub reformulated: Option<String>,
}

impl Query {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            text: text.into(),
            reformulated: None,
        }
    }

    /// The text used for retrieval and reranking: the reformulation when
    /// present, the original otherwise.
    pub fn retrieval_text(&self) -> &str {
        self.reformulated.as_deref().unwrap_or(&self.text)
    }
}

/// Graded relevance judgments. Lookup is total: unjudged pairs grade 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    by_query: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a judgment, returning the previous grade if the pair was
    /// already judged.
    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u32) -> Option<u32> {
        self.by_query
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade)
    }

    /// Grade for a (query, document) pair; 0 when unjudged.
    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.by_query
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    /// All judged documents for a query, if any.
    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.by_query.get(query_id)
    }

    /// Query ids in sorted order.
    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.by_query.keys().map(|s| s.as_str())
    }

    pub fn num_queries(&self) -> usize {
        self.by_query.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_query.is_empty()
    }
}

/// Documents in ingestion order with doc_id lookup.
#[derive(Debug, Clone, Default)]
pub struct CorpusStore {
    docs: Vec<Document>,
    positions: HashMap<String, usize>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a document, rejecting duplicate ids.
    pub fn push(&mut self, doc: Document) -> Result<(), CorpusError> {
        if self.positions.contains_key(&doc.doc_id) {
            return Err(CorpusError::DuplicateDocId { doc_id: doc.doc_id });
        }
        self.positions.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, position: usize) -> Option<&Document> {
        self.docs.get(position)
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.positions.get(doc_id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.docs.iter()
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    _id: String,
    title: Option<String>,
    text: String,
}

/// Load a BEIR-style JSONL corpus: one object per line with `_id`, `text`,
/// and optional `title`. Empty titles are treated as absent.
pub fn load_corpus(path: &Path) -> Result<CorpusStore, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut store = CorpusStore::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parsed: CorpusLine =
            serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
                path: path.display().to_string(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        if parsed._id.is_empty() {
            return Err(CorpusError::MalformedLine {
                path: path.display().to_string(),
                line: idx + 1,
                message: "empty \"_id\"".to_string(),
            });
        }
        store.push(Document {
            doc_id: parsed._id,
            title: parsed.title.filter(|t| !t.is_empty()),
            text: parsed.text,
        })?;
    }
    Ok(store)
}

/// Serialize a store back to JSONL with `_id`/`title`/`text` keys.
pub fn write_corpus(store: &CorpusStore, path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in store.iter() {
        let mut obj = serde_json::Map::new();
        obj.insert("_id".into(), doc.doc_id.clone().into());
        if let Some(title) = &doc.title {
            obj.insert("title".into(), title.clone().into());
        }
        obj.insert("text".into(), doc.text.clone().into());
        serde_json::to_writer(&mut out, &serde_json::Value::Object(obj))
            .map_err(|e| io_err(path, std::io::Error::other(e)))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Query file encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryFormat {
    /// One JSON object per line with `_id` and `text`.
    Jsonl,
    /// Two tab-separated columns: `query_id<TAB>text`.
    Tsv,
}

#[derive(Deserialize)]
struct QueryLine {
    _id: String,
    text: String,
}

/// Load queries in file order; reformulations start unset.
pub fn load_queries(path: &Path, format: QueryFormat) -> Result<Vec<Query>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut queries = Vec::new();
    let mut seen = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let query = match format {
            QueryFormat::Jsonl => {
                let parsed: QueryLine =
                    serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine {
                        path: path.display().to_string(),
                        line: idx + 1,
                        message: e.to_string(),
                    })?;
                Query::new(parsed._id, parsed.text)
            }
            QueryFormat::Tsv => {
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() != 2 {
                    return Err(CorpusError::ColumnCount {
                        path: path.display().to_string(),
                        line: idx + 1,
                        expected: 2,
                        found: cols.len(),
                    });
                }
                Query::new(cols[0], cols[1])
            }
        };
        if seen.insert(query.query_id.clone(), ()).is_some() {
            return Err(CorpusError::DuplicateQueryId {
                query_id: query.query_id,
            });
        }
        queries.push(query);
    }
    Ok(queries)
}

/// Attach reformulated query texts from a two-column TSV
/// (`query_id<TAB>reformulated_text`; the text itself may contain tabs).
/// Every referenced query_id must exist; untouched queries keep their
/// reformulation unset. Idempotent for a fixed file.
pub fn attach_reformulations(queries: &mut [Query], path: &Path) -> Result<(), CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let by_id: HashMap<String, usize> = queries
        .iter()
        .enumerate()
        .map(|(i, q)| (q.query_id.clone(), i))
        .collect();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let (query_id, text) = match line.split_once('\t') {
            Some(pair) => pair,
            None => {
                return Err(CorpusError::ColumnCount {
                    path: path.display().to_string(),
                    line: idx + 1,
                    expected: 2,
                    found: 1,
                })
            }
        };
        let pos = *by_id
            .get(query_id)
            .ok_or_else(|| CorpusError::UnknownQueryId {
                query_id: query_id.to_string(),
            })?;
        if text.is_empty() {
            return Err(CorpusError::EmptyReformulation {
                query_id: query_id.to_string(),
            });
        }
        queries[pos].reformulated = Some(text.to_string());
    }
    Ok(())
}

/// Qrels file encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QrelsFormat {
    /// TREC 4-column: `qid 0 docid grade`, whitespace-separated.
    Trec4Col,
    /// Three tab-separated columns: `qid<TAB>docid<TAB>grade`.
    Tsv3Col,
}

/// Load graded judgments. Later duplicates of a (qid, docid) pair overwrite
/// earlier ones; each overwrite is reported in the returned warnings.
pub fn load_qrels(
    path: &Path,
    format: QrelsFormat,
) -> Result<(Qrels, Vec<String>), CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut qrels = Qrels::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (qid, docid, grade_str) = match format {
            QrelsFormat::Trec4Col => {
                let cols: Vec<&str> = line.split_whitespace().collect();
                if cols.len() != 4 {
                    return Err(CorpusError::ColumnCount {
                        path: path.display().to_string(),
                        line: idx + 1,
                        expected: 4,
                        found: cols.len(),
                    });
                }
                (cols[0], cols[2], cols[3])
            }
            QrelsFormat::Tsv3Col => {
                let cols: Vec<&str> = line.split('\t').collect();
                if cols.len() != 3 {
                    return Err(CorpusError::ColumnCount {
                        path: path.display().to_string(),
                        line: idx + 1,
                        expected: 3,
                        found: cols.len(),
                    });
                }
                (cols[0], cols[1], cols[2])
            }
        };
        let grade: u32 = grade_str
            .parse()
            .map_err(|_| CorpusError::BadGrade {
                path: path.display().to_string(),
                line: idx + 1,
                value: grade_str.to_string(),
            })?;
        if qrels.insert(qid, docid, grade).is_some() {
            warnings.push(format!(
                "{}:{}: duplicate judgment for ({qid}, {docid}); keeping the later grade {grade}",
                path.display(),
                idx + 1
            ));
        }
    }
    Ok((qrels, warnings))
}

/// Guess a qrels format from the first non-empty line.
pub fn sniff_qrels_format(path: &Path) -> Result<QrelsFormat, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    for line in reader.lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if line.split('\t').count() == 3 {
            return Ok(QrelsFormat::Tsv3Col);
        }
        return Ok(QrelsFormat::Trec4Col);
    }
    Ok(QrelsFormat::Trec4Col)
}
