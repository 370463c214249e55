//! Listwise LLM reranking with injected BM25 scores.
//!
//! The pipeline: load a corpus and queries ([`corpus`]), retrieve top-k
//! candidates with Okapi BM25 ([`bm25`]), render listwise reranking prompts
//! that annotate each candidate with its retrieval score and send them to a
//! chat model ([`rerank`], [`llm`]), then score runs with NDCG@k ([`eval`]).

pub mod bm25;
pub mod corpus;
pub mod eval;
pub mod llm;
pub mod rerank;
