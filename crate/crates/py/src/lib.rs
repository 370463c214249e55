//! Python bindings for the core retrieval/reranking operations.
//!
//! Exposes tokenization, BM25 indexing and retrieval, score display,
//! prompt construction, ranking parsing/repair, and NDCG evaluation.

use std::collections::HashMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use insertrank_core::bm25;
use insertrank_core::corpus::{CorpusStore, Document, Qrels, Query};
use insertrank_core::eval;
use insertrank_core::rerank;

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Lowercase and split on non-alphanumeric codepoints.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    bm25::tokenize(text)
}

/// Keep the first `max_tokens` whitespace tokens, rejoined with spaces.
#[pyfunction]
fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    rerank::truncate_tokens(text, max_tokens)
}

/// Format scores for prompt injection. `mode` is one of none / raw /
/// norm01 / norm0100; returns None for mode "none".
#[pyfunction]
fn display_scores(scores: Vec<f64>, mode: &str) -> PyResult<Option<Vec<String>>> {
    let mode: rerank::ScoreMode = mode.parse().map_err(value_err)?;
    rerank::display_scores(&scores, mode).map_err(value_err)
}

/// Deterministically shuffle (doc_id, score) pairs with the given seed.
#[pyfunction]
fn shuffle_pairs(pairs: Vec<(String, f64)>, seed: u64) -> Vec<(String, f64)> {
    rerank::order_candidates(pairs, rerank::OrderMode::Shuffle { seed })
}

/// Build the full listwise reranking prompt. `template` is "bright" or
/// "r2med"; `scores` carries pre-formatted score strings or None to omit
/// score injection entirely.
#[pyfunction]
#[pyo3(signature = (query, docs, scores, template, topk))]
fn build_prompt(
    query: &str,
    docs: Vec<String>,
    scores: Option<Vec<String>>,
    template: &str,
    topk: usize,
) -> PyResult<String> {
    let template: rerank::PromptTemplate = template.parse().map_err(value_err)?;
    rerank::build_prompt(query, &docs, scores.as_deref(), template, topk).map_err(value_err)
}

/// Parse model output into a valid ranking of 1-based prompt indices.
/// Returns (ranking, repair_tags).
#[pyfunction]
#[pyo3(signature = (raw, n, topk, fallback_order=None))]
fn parse_ranking(
    raw: &str,
    n: usize,
    topk: usize,
    fallback_order: Option<Vec<usize>>,
) -> PyResult<(Vec<usize>, Vec<String>)> {
    if n < 1 {
        return Err(PyValueError::new_err("n must be >= 1"));
    }
    let fallback = fallback_order.unwrap_or_else(|| (1..=n).collect());
    if fallback.len() != n {
        return Err(PyValueError::new_err("fallback_order must have length n"));
    }
    let (ranking, repairs) = rerank::parse_ranking(raw, n, topk, &fallback);
    Ok((ranking, repairs.iter().map(|r| r.to_string()).collect()))
}

/// NDCG@k of a ranked doc_id list against one query's graded judgments.
#[pyfunction]
#[pyo3(signature = (ranking, judgments, k, gain="linear"))]
fn ndcg_at_k(
    ranking: Vec<String>,
    judgments: HashMap<String, u32>,
    k: usize,
    gain: &str,
) -> PyResult<f64> {
    let gain: eval::Gain = gain.parse().map_err(value_err)?;
    let mut qrels = Qrels::new();
    for (doc_id, grade) in &judgments {
        qrels.insert("q", doc_id, *grade);
    }
    Ok(eval::ndcg_at_k(&ranking, &qrels, "q", k, gain))
}

/// Mean and per-query NDCG@k of a TREC run file against a qrels file.
#[pyfunction]
#[pyo3(signature = (run_path, qrels_path, k, gain="linear"))]
fn evaluate_run_files(
    run_path: PathBuf,
    qrels_path: PathBuf,
    k: usize,
    gain: &str,
) -> PyResult<(f64, HashMap<String, f64>)> {
    let gain: eval::Gain = gain.parse().map_err(value_err)?;
    let (run, _) = eval::read_run(&run_path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    let format = insertrank_core::corpus::sniff_qrels_format(&qrels_path)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    let (qrels, _) = insertrank_core::corpus::load_qrels(&qrels_path, format)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    let report = eval::evaluate_run(&run, &qrels, k, gain, "py");
    Ok((report.mean, report.per_query.into_iter().collect()))
}

/// BM25 inverted index over an in-memory or on-disk corpus.
#[pyclass(name = "Bm25Index")]
struct PyBm25Index {
    inner: bm25::Bm25Index,
}

#[pymethods]
impl PyBm25Index {
    /// Build from (doc_id, text) pairs.
    #[staticmethod]
    #[pyo3(signature = (docs, k1=0.9, b=0.4))]
    fn build(docs: Vec<(String, String)>, k1: f64, b: f64) -> PyResult<Self> {
        let params = bm25::Bm25Params::new(k1, b).map_err(value_err)?;
        let mut store = CorpusStore::new();
        for (doc_id, text) in docs {
            store
                .push(Document {
                    doc_id,
                    title: None,
                    text,
                })
                .map_err(value_err)?;
        }
        Ok(Self {
            inner: bm25::build_index(&store, params),
        })
    }

    /// Build from a BEIR-style JSONL corpus file.
    #[staticmethod]
    #[pyo3(signature = (path, k1=0.9, b=0.4))]
    fn from_corpus_file(path: PathBuf, k1: f64, b: f64) -> PyResult<Self> {
        let params = bm25::Bm25Params::new(k1, b).map_err(value_err)?;
        let store = insertrank_core::corpus::load_corpus(&path)
            .map_err(|e| PyIOError::new_err(e.to_string()))?;
        Ok(Self {
            inner: bm25::build_index(&store, params),
        })
    }

    /// Load a saved index (binary, "BMIX1" header).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: bm25::Bm25Index::load(&path).map_err(|e| PyIOError::new_err(e.to_string()))?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    /// Top-k retrieval: (doc_id, score, first_stage_rank) tuples, best
    /// first, only score > 0.
    fn retrieve(&self, query: &str, k: usize) -> PyResult<Vec<(String, f64, usize)>> {
        let hits = self
            .inner
            .retrieve_topk(&Query::new("q", query), k)
            .map_err(value_err)?;
        Ok(hits
            .into_iter()
            .map(|h| (h.doc_id, h.score, h.first_stage_rank))
            .collect())
    }

    /// BM25 score of one document (by position) for the given tokens.
    fn score(&self, query_tokens: Vec<String>, position: usize) -> PyResult<f64> {
        self.inner.score(&query_tokens, position).map_err(value_err)
    }

    fn doc_text(&self, doc_id: &str) -> Option<String> {
        self.inner.doc_text_by_id(doc_id).map(|s| s.to_string())
    }

    #[getter]
    fn num_docs(&self) -> usize {
        self.inner.num_docs()
    }

    #[getter]
    fn avgdl(&self) -> f64 {
        self.inner.avgdl()
    }

    fn __len__(&self) -> usize {
        self.inner.num_docs()
    }

    fn __repr__(&self) -> String {
        format!(
            "Bm25Index(num_docs={}, avgdl={:.2}, k1={}, b={})",
            self.inner.num_docs(),
            self.inner.avgdl(),
            self.inner.params().k1,
            self.inner.params().b
        )
    }
}

#[pymodule]
fn insertrank_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(truncate_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(display_scores, m)?)?;
    m.add_function(wrap_pyfunction!(shuffle_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(build_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(parse_ranking, m)?)?;
    m.add_function(wrap_pyfunction!(ndcg_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_run_files, m)?)?;
    m.add_class::<PyBm25Index>()?;
    m.add("RETRIEVER_SENTENCE", rerank::RETRIEVER_SENTENCE)?;
    m.add("DEFAULT_HYDE_TEMPLATE", rerank::DEFAULT_HYDE_TEMPLATE)?;
    Ok(())
}
