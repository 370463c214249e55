//! Okapi BM25 first-stage retrieval over an inverted index.
//!
//! Scoring uses the non-negative idf variant
//! `idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))`, so a document scores 0
//! exactly when it shares no term with the query. Duplicate query tokens
//! contribute once per occurrence. Ties are broken by ascending doc_id so
//! output is reproducible across platforms.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::{CorpusStore, Query};

/// Magic header of the binary index file; loaders reject anything else.
pub const INDEX_MAGIC: &[u8; 5] = b"BMIX1";

#[derive(Debug, Error)]
pub enum Bm25Error {
    #[error("k1 must be >= 0 and b must be in [0, 1], got k1={k1}, b={b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("document position {position} out of range (corpus has {count} documents)")]
    InvalidPosition { position: usize, count: usize },
    #[error("k must be >= 1")]
    InvalidK,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported index version in {path}: expected magic \"BMIX1\"")]
    UnsupportedVersion { path: String },
    #[error("corrupt index file {path}: {message}")]
    Corrupt { path: String, message: String },
}

fn io_err(path: &Path, source: std::io::Error) -> Bm25Error {
    Bm25Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Okapi BM25 parameters. Defaults follow the Anserini-style setup common
/// to the reasoning retrieval benchmarks: k1=0.9, b=0.4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self, Bm25Error> {
        if !(k1 >= 0.0 && k1.is_finite() && (0.0..=1.0).contains(&b)) {
            return Err(Bm25Error::InvalidParams { k1, b });
        }
        Ok(Self { k1, b })
    }
}

/// Lowercase and split on every non-alphanumeric codepoint, dropping empty
/// pieces. No stemming, no stopword removal.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}

/// One (document position, term frequency) pair in a postings list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// A first-stage retrieval result: the raw BM25 score and 1-based rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub doc_id: String,
    pub score: f64,
    pub first_stage_rank: usize,
}

/// Inverted index plus the document store needed downstream (ids for run
/// files, texts for reranking prompts).
#[derive(Debug, Clone)]
pub struct Bm25Index {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_ids: Vec<String>,
    doc_texts: Vec<String>,
    doc_lengths: Vec<u32>,
    positions: HashMap<String, u32>,
    avgdl: f64,
    params: Bm25Params,
}

fn position_lookup(doc_ids: &[String]) -> HashMap<String, u32> {
    doc_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as u32))
        .collect()
}

/// Build an index over a corpus. Indexed text is `Document::full_text()`,
/// i.e. title and body when a title is present.
pub fn build_index(corpus: &CorpusStore, params: Bm25Params) -> Bm25Index {
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut doc_ids = Vec::with_capacity(corpus.len());
    let mut doc_texts = Vec::with_capacity(corpus.len());
    let mut doc_lengths = Vec::with_capacity(corpus.len());
    let mut total_len: u64 = 0;

    for (position, doc) in corpus.iter().enumerate() {
        let text = doc.full_text();
        let tokens = tokenize(&text);
        let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
        for token in &tokens {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
        for (term, tf) in counts {
            postings.entry(term.to_string()).or_default().push(Posting {
                doc: position as u32,
                tf,
            });
        }
        total_len += tokens.len() as u64;
        doc_lengths.push(tokens.len() as u32);
        doc_ids.push(doc.doc_id.clone());
        doc_texts.push(text);
    }

    let avgdl = if doc_ids.is_empty() {
        0.0
    } else {
        total_len as f64 / doc_ids.len() as f64
    };

    Bm25Index {
        postings,
        positions: position_lookup(&doc_ids),
        doc_ids,
        doc_texts,
        doc_lengths,
        avgdl,
        params,
    }
}

/// Candidate ordering: higher score first, ties by ascending doc_id.
fn better(score_a: f64, id_a: &str, score_b: f64, id_b: &str) -> Ordering {
    score_a
        .total_cmp(&score_b)
        .then_with(|| id_b.cmp(id_a))
}

struct HeapEntry<'a> {
    score: f64,
    doc_id: &'a str,
    position: u32,
}

impl PartialEq for HeapEntry<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry<'_> {}
impl PartialOrd for HeapEntry<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed so BinaryHeap keeps the worst entry on top.
        better(other.score, other.doc_id, self.score, self.doc_id)
    }
}

impl Bm25Index {
    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_id(&self, position: usize) -> Option<&str> {
        self.doc_ids.get(position).map(|s| s.as_str())
    }

    pub fn doc_text(&self, position: usize) -> Option<&str> {
        self.doc_texts.get(position).map(|s| s.as_str())
    }

    pub fn doc_position(&self, doc_id: &str) -> Option<usize> {
        self.positions.get(doc_id).map(|&p| p as usize)
    }

    pub fn doc_text_by_id(&self, doc_id: &str) -> Option<&str> {
        self.doc_texts.get(self.doc_position(doc_id)?).map(|s| s.as_str())
    }

    pub fn doc_length(&self, position: usize) -> Option<u32> {
        self.doc_lengths.get(position).copied()
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(|p| p.as_slice())
    }

    pub fn num_terms(&self) -> usize {
        self.postings.len()
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_ids.len() as f64;
        (1.0 + (n - df as f64 + 0.5) / (df as f64 + 0.5)).ln()
    }

    fn term_weight(&self, tf: u32, doc_length: u32, df: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = 1.0 - b + b * doc_length as f64 / self.avgdl;
        self.idf(df) * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one document against a token sequence. Duplicate
    /// tokens contribute once per occurrence.
    pub fn score(&self, query_tokens: &[String], position: usize) -> Result<f64, Bm25Error> {
        if position >= self.doc_ids.len() {
            return Err(Bm25Error::InvalidPosition {
                position,
                count: self.doc_ids.len(),
            });
        }
        let mut total = 0.0;
        for token in query_tokens {
            if let Some(list) = self.postings.get(token) {
                if let Ok(idx) = list.binary_search_by_key(&(position as u32), |p| p.doc) {
                    total += self.term_weight(list[idx].tf, self.doc_lengths[position], list.len());
                }
            }
        }
        Ok(total)
    }

    /// Top-k retrieval over pre-tokenized query terms. Only documents with
    /// score > 0 qualify; output is sorted by (score desc, doc_id asc) with
    /// first_stage_rank 1..n.
    pub fn retrieve_topk_tokens(
        &self,
        query_tokens: &[String],
        k: usize,
    ) -> Result<Vec<ScoredCandidate>, Bm25Error> {
        if k < 1 {
            return Err(Bm25Error::InvalidK);
        }
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for token in query_tokens {
            if let Some(list) = self.postings.get(token) {
                let df = list.len();
                for posting in list {
                    let w = self.term_weight(posting.tf, self.doc_lengths[posting.doc as usize], df);
                    *scores.entry(posting.doc).or_insert(0.0) += w;
                }
            }
        }

        // Bounded-size selection: min-heap of the k best seen so far.
        let mut heap = std::collections::BinaryHeap::with_capacity(k + 1);
        for (position, score) in scores {
            if score > 0.0 {
                heap.push(HeapEntry {
                    score,
                    doc_id: &self.doc_ids[position as usize],
                    position,
                });
                if heap.len() > k {
                    heap.pop();
                }
            }
        }

        let mut kept: Vec<HeapEntry> = heap.into_vec();
        kept.sort_by(|a, b| better(a.score, a.doc_id, b.score, b.doc_id).reverse());
        Ok(kept
            .into_iter()
            .enumerate()
            .map(|(i, e)| ScoredCandidate {
                doc_id: self.doc_ids[e.position as usize].clone(),
                score: e.score,
                first_stage_rank: i + 1,
            })
            .collect())
    }

    /// Top-k retrieval for a query, tokenizing the reformulated text when
    /// present and the original otherwise.
    pub fn retrieve_topk(&self, query: &Query, k: usize) -> Result<Vec<ScoredCandidate>, Bm25Error> {
        self.retrieve_topk_tokens(&tokenize(query.retrieval_text()), k)
    }

    /// Persist to the versioned binary format (magic "BMIX1").
    pub fn save(&self, path: &Path) -> Result<(), Bm25Error> {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        let mut w = BufWriter::new(file);
        let werr = |e| io_err(path, e);

        w.write_all(INDEX_MAGIC).map_err(werr)?;
        w.write_all(&self.params.k1.to_le_bytes()).map_err(werr)?;
        w.write_all(&self.params.b.to_le_bytes()).map_err(werr)?;
        w.write_all(&self.avgdl.to_le_bytes()).map_err(werr)?;
        w.write_all(&(self.doc_ids.len() as u64).to_le_bytes()).map_err(werr)?;
        for i in 0..self.doc_ids.len() {
            write_str(&mut w, &self.doc_ids[i]).map_err(werr)?;
            write_str(&mut w, &self.doc_texts[i]).map_err(werr)?;
            w.write_all(&self.doc_lengths[i].to_le_bytes()).map_err(werr)?;
        }
        w.write_all(&(self.postings.len() as u64).to_le_bytes()).map_err(werr)?;
        for (term, list) in &self.postings {
            write_str(&mut w, term).map_err(werr)?;
            w.write_all(&(list.len() as u64).to_le_bytes()).map_err(werr)?;
            for posting in list {
                w.write_all(&posting.doc.to_le_bytes()).map_err(werr)?;
                w.write_all(&posting.tf.to_le_bytes()).map_err(werr)?;
            }
        }
        w.flush().map_err(werr)
    }

    /// Load an index written by [`Bm25Index::save`].
    pub fn load(path: &Path) -> Result<Self, Bm25Error> {
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut r = BufReader::new(file);
        let rerr = |e| io_err(path, e);
        let corrupt = |message: &str| Bm25Error::Corrupt {
            path: path.display().to_string(),
            message: message.to_string(),
        };

        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(rerr)?;
        if &magic != INDEX_MAGIC {
            return Err(Bm25Error::UnsupportedVersion {
                path: path.display().to_string(),
            });
        }
        let k1 = read_f64(&mut r).map_err(rerr)?;
        let b = read_f64(&mut r).map_err(rerr)?;
        let params = Bm25Params::new(k1, b)
            .map_err(|_| corrupt("parameters out of range"))?;
        let avgdl = read_f64(&mut r).map_err(rerr)?;
        let n_docs = read_u64(&mut r).map_err(rerr)? as usize;

        let mut doc_ids = Vec::with_capacity(n_docs);
        let mut doc_texts = Vec::with_capacity(n_docs);
        let mut doc_lengths = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            doc_ids.push(read_str(&mut r).map_err(rerr)?);
            doc_texts.push(read_str(&mut r).map_err(rerr)?);
            doc_lengths.push(read_u32(&mut r).map_err(rerr)?);
        }

        let n_terms = read_u64(&mut r).map_err(rerr)? as usize;
        let mut postings = BTreeMap::new();
        for _ in 0..n_terms {
            let term = read_str(&mut r).map_err(rerr)?;
            let n = read_u64(&mut r).map_err(rerr)? as usize;
            let mut list = Vec::with_capacity(n);
            let mut prev: Option<u32> = None;
            for _ in 0..n {
                let doc = read_u32(&mut r).map_err(rerr)?;
                let tf = read_u32(&mut r).map_err(rerr)?;
                if doc as usize >= n_docs {
                    return Err(corrupt("posting references a document out of range"));
                }
                if prev.is_some_and(|p| p >= doc) {
                    return Err(corrupt("postings not sorted by document position"));
                }
                prev = Some(doc);
                list.push(Posting { doc, tf });
            }
            postings.insert(term, list);
        }

        Ok(Self {
            postings,
            positions: position_lookup(&doc_ids),
            doc_ids,
            doc_texts,
            doc_lengths,
            avgdl,
            params,
        })
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_str<R: Read>(r: &mut R) -> std::io::Result<String> {
    let len = read_u64(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;

    fn store(texts: &[(&str, &str)]) -> CorpusStore {
        let mut s = CorpusStore::new();
        for (id, text) in texts {
            s.push(Document {
                doc_id: id.to_string(),
                title: None,
                text: text.to_string(),
            })
            .unwrap();
        }
        s
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    /// Direct-formula evaluator over raw token lists: no postings, no index.
    /// Used as the independent oracle for the index path.
    fn brute_force_score(
        docs: &[Vec<String>],
        query: &[String],
        target: usize,
        params: Bm25Params,
    ) -> f64 {
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
        let dl = docs[target].len() as f64;
        let mut total = 0.0;
        for term in query {
            let tf = docs[target].iter().filter(|t| *t == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let norm = 1.0 - params.b + params.b * dl / avgdl;
            total += idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
        }
        total
    }

    #[test]
    fn tokenize_splits_on_non_alphanumeric() {
        assert_eq!(
            tokenize("Counting reads, per-interval!"),
            toks(&["counting", "reads", "per", "interval"])
        );
    }

    #[test]
    fn tokenize_empty_text() {
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn tokenize_keeps_duplicates_and_digits() {
        assert_eq!(tokenize("BM25 BM25"), toks(&["bm25", "bm25"]));
    }

    #[test]
    fn build_index_counts() {
        let idx = build_index(&store(&[("d1", "a b a"), ("d2", "b c")]), Bm25Params::default());
        assert_eq!(idx.num_docs(), 2);
        assert!((idx.avgdl() - 2.5).abs() < 1e-12);
        assert_eq!(idx.postings("a").unwrap(), &[Posting { doc: 0, tf: 2 }]);
        assert_eq!(
            idx.postings("b").unwrap(),
            &[Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 1 }]
        );
    }

    #[test]
    fn build_index_empty_corpus() {
        let idx = build_index(&store(&[]), Bm25Params::default());
        assert_eq!(idx.num_docs(), 0);
        assert_eq!(idx.avgdl(), 0.0);
    }

    #[test]
    fn build_index_empty_document() {
        let idx = build_index(&store(&[("d1", ""), ("d2", "a b")]), Bm25Params::default());
        assert_eq!(idx.num_docs(), 2);
        assert_eq!(idx.doc_length(0), Some(0));
        assert!((idx.avgdl() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tf_sums_match_doc_lengths() {
        let idx = build_index(
            &store(&[("d1", "a b a c"), ("d2", "b c c"), ("d3", "")]),
            Bm25Params::default(),
        );
        for position in 0..idx.num_docs() {
            let mut sum = 0u32;
            for term in idx.postings.keys() {
                if let Ok(i) = idx.postings[term].binary_search_by_key(&(position as u32), |p| p.doc)
                {
                    sum += idx.postings[term][i].tf;
                }
            }
            assert_eq!(sum, idx.doc_length(position).unwrap());
        }
    }

    #[test]
    fn score_zero_without_overlap() {
        let idx = build_index(&store(&[("d1", "a b a"), ("d2", "b c")]), Bm25Params::default());
        assert_eq!(idx.score(&toks(&["z"]), 0).unwrap(), 0.0);
    }

    #[test]
    fn score_matches_direct_formula() {
        // Frozen from the brute-force evaluator below: d1="a b a", d2="b c",
        // query ["a"], k1=0.9, b=0.4: idf = ln 2, denominator 2.972,
        // score = ln 2 * 3.8 / 2.972 = 0.88625...
        let params = Bm25Params::default();
        let idx = build_index(&store(&[("d1", "a b a"), ("d2", "b c")]), params);
        let docs = vec![toks(&["a", "b", "a"]), toks(&["b", "c"])];
        let query = toks(&["a"]);

        let expected = brute_force_score(&docs, &query, 0, params);
        let got = idx.score(&query, 0).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, oracle {expected}");
        assert!((got - 0.8862).abs() < 1e-4, "got {got}");
    }

    #[test]
    fn duplicate_query_tokens_double_the_score() {
        let idx = build_index(&store(&[("d1", "a b a"), ("d2", "b c")]), Bm25Params::default());
        let single = idx.score(&toks(&["a"]), 0).unwrap();
        let double = idx.score(&toks(&["a", "a"]), 0).unwrap();
        assert!((double - 2.0 * single).abs() < 1e-12);
    }

    #[test]
    fn score_invalid_position() {
        let idx = build_index(&store(&[("d1", "a")]), Bm25Params::default());
        assert!(matches!(
            idx.score(&toks(&["a"]), 5),
            Err(Bm25Error::InvalidPosition { .. })
        ));
    }

    #[test]
    fn retrieve_orders_by_score() {
        let idx = build_index(
            &store(&[("d1", "a a a"), ("d2", "a b c"), ("d3", "x y")]),
            Bm25Params::default(),
        );
        let hits = idx
            .retrieve_topk(&Query::new("q", "a"), 10)
            .unwrap();
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].doc_id, "d1");
        assert_eq!(hits[1].doc_id, "d2");
        assert_eq!(hits[0].first_stage_rank, 1);
        assert_eq!(hits[1].first_stage_rank, 2);
        assert!(hits[0].score > hits[1].score);
    }

    #[test]
    fn retrieve_breaks_ties_by_doc_id() {
        // Identical documents score identically; "d10" < "d2" lexicographically.
        let idx = build_index(&store(&[("d2", "a b"), ("d10", "a b")]), Bm25Params::default());
        let hits = idx.retrieve_topk(&Query::new("q", "a"), 10).unwrap();
        assert_eq!(hits[0].doc_id, "d10");
        assert_eq!(hits[1].doc_id, "d2");
    }

    #[test]
    fn retrieve_no_overlap_is_empty() {
        let idx = build_index(&store(&[("d1", "a b")]), Bm25Params::default());
        let hits = idx.retrieve_topk(&Query::new("q", "zz"), 5).unwrap();
        assert!(hits.is_empty());
    }

    #[test]
    fn retrieve_rejects_k_zero() {
        let idx = build_index(&store(&[("d1", "a")]), Bm25Params::default());
        assert!(matches!(
            idx.retrieve_topk(&Query::new("q", "a"), 0),
            Err(Bm25Error::InvalidK)
        ));
    }

    #[test]
    fn retrieve_uses_reformulated_text() {
        let idx = build_index(&store(&[("d1", "kinase pathway")]), Bm25Params::default());
        let mut q = Query::new("q", "unrelated words");
        q.reformulated = Some("kinase".to_string());
        let hits = idx.retrieve_topk(&q, 5).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d1");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.bmix");
        let idx = build_index(
            &store(&[("d1", "a b a"), ("d2", "b c"), ("d3", "")]),
            Bm25Params::new(1.2, 0.75).unwrap(),
        );
        idx.save(&path).unwrap();
        let loaded = Bm25Index::load(&path).unwrap();
        assert_eq!(loaded.num_docs(), 3);
        assert_eq!(loaded.params(), idx.params());
        assert_eq!(loaded.avgdl(), idx.avgdl());
        assert_eq!(loaded.doc_id(1), Some("d2"));
        assert_eq!(loaded.doc_text(0), Some("a b a"));
        let q = toks(&["a", "b"]);
        assert_eq!(loaded.score(&q, 0).unwrap(), idx.score(&q, 0).unwrap());
    }

    #[test]
    fn load_rejects_unknown_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bmix");
        std::fs::write(&path, b"BMIX9rest").unwrap();
        let err = Bm25Index::load(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported index version"), "{err}");
    }

    #[test]
    fn save_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let idx = build_index(&store(&[("d1", "a b"), ("d2", "c")]), Bm25Params::default());
        let p1 = dir.path().join("a.bmix");
        let p2 = dir.path().join("b.bmix");
        idx.save(&p1).unwrap();
        idx.save(&p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    proptest! {
        /// Non-negative idf for every df in [0, N].
        #[test]
        fn idf_is_non_negative(n in 1usize..200, df_frac in 0.0f64..=1.0) {
            let corpus = store(&[("d0", "a")]);
            let mut idx = build_index(&corpus, Bm25Params::default());
            idx.doc_ids = (0..n).map(|i| format!("d{i}")).collect();
            let df = (df_frac * n as f64).round() as usize;
            prop_assert!(idx.idf(df.min(n)) >= 0.0);
        }

        /// Adding one occurrence of the term (tf+1, dl+1) with corpus stats
        /// held fixed never decreases the per-term weight.
        #[test]
        fn term_weight_monotone_in_tf(
            tf in 1u32..50,
            extra_len in 0u32..50,
            df in 1usize..20,
            n_docs in 20usize..100,
            avgdl in 1.0f64..40.0,
            k1 in 0.0f64..3.0,
            b in 0.0f64..=1.0,
        ) {
            let corpus = store(&[("d0", "a")]);
            let mut idx = build_index(&corpus, Bm25Params::new(k1, b).unwrap());
            idx.doc_ids = (0..n_docs).map(|i| format!("d{i}")).collect();
            idx.avgdl = avgdl;
            let dl = tf + extra_len;
            let before = idx.term_weight(tf, dl, df);
            let after = idx.term_weight(tf + 1, dl + 1, df);
            prop_assert!(after >= before - 1e-12, "before={before}, after={after}");
        }

        /// retrieve_topk agrees with the direct-formula oracle in both
        /// order and score on random small corpora.
        #[test]
        fn retrieval_matches_brute_force(
            seed in 0u64..500,
            n_docs in 1usize..20,
            k in 1usize..25,
        ) {
            let mut rng = crate::rerank::rng::SplitMix64::new(seed);
            let vocab: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
            let docs: Vec<Vec<String>> = (0..n_docs)
                .map(|_| {
                    let len = (rng.next_u64() % 12) as usize;
                    (0..len)
                        .map(|_| vocab[(rng.next_u64() % vocab.len() as u64) as usize].clone())
                        .collect()
                })
                .collect();
            let params = Bm25Params::default();
            let mut corpus = CorpusStore::new();
            for (i, tokens) in docs.iter().enumerate() {
                corpus
                    .push(Document {
                        doc_id: format!("d{i}"),
                        title: None,
                        text: tokens.join(" "),
                    })
                    .unwrap();
            }
            let idx = build_index(&corpus, params);
            let qlen = 1 + (rng.next_u64() % 4) as usize;
            let query: Vec<String> = (0..qlen)
                .map(|_| vocab[(rng.next_u64() % vocab.len() as u64) as usize].clone())
                .collect();

            let got = idx.retrieve_topk_tokens(&query, k).unwrap();

            let mut expected: Vec<(String, f64)> = (0..n_docs)
                .map(|i| (format!("d{i}"), brute_force_score(&docs, &query, i, params)))
                .filter(|(_, s)| *s > 0.0)
                .collect();
            expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            expected.truncate(k);

            prop_assert_eq!(got.len(), expected.len());
            for (g, e) in got.iter().zip(&expected) {
                prop_assert_eq!(&g.doc_id, &e.0);
                prop_assert!((g.score - e.1).abs() <= 1e-9);
            }
        }
    }
}
