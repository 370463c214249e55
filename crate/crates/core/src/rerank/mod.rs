//! Listwise reranking with first-stage score injection.
//!
//! The pipeline per query: truncate candidate texts, order the
//! (document, score) tuples, format the scores under the chosen
//! normalization, render the prompt, call the model through the cache, and
//! parse/repair the returned ranking back into run entries.

pub mod parse;
pub mod prompt;
pub mod rng;

use std::path::Path;

use thiserror::Error;

use crate::bm25::ScoredCandidate;
use crate::corpus::Query;
use crate::llm::{CallContext, ChatMessage, ChatRequest, DisplayedDoc, LlmClient, LlmError};

pub use parse::{extract_last_int_array, parse_ranking, Repair};
pub use prompt::{build_prompt, PromptError, PromptTemplate, RETRIEVER_SENTENCE};

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("scores must be non-empty for score mode {mode}")]
    EmptyScores { mode: ScoreMode },
    #[error("score at position {position} is not finite")]
    NonFiniteScore { position: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("query {query_id}: {source}")]
    Provider {
        query_id: String,
        #[source]
        source: LlmError,
    },
    #[error("empty reformulation for query {query_id}")]
    EmptyReformulation { query_id: String },
}

/// How first-stage scores appear in the prompt.
///
/// `None` is the vanilla listwise baseline: no score sentence, no
/// per-document annotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    None,
    Raw,
    Norm01,
    Norm0100,
}

impl ScoreMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreMode::None => "none",
            ScoreMode::Raw => "raw",
            ScoreMode::Norm01 => "norm01",
            ScoreMode::Norm0100 => "norm0100",
        }
    }

    pub const ALL: [ScoreMode; 4] = [
        ScoreMode::None,
        ScoreMode::Raw,
        ScoreMode::Norm01,
        ScoreMode::Norm0100,
    ];
}

impl std::fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ScoreMode::None),
            "raw" => Ok(ScoreMode::Raw),
            "norm01" => Ok(ScoreMode::Norm01),
            "norm0100" => Ok(ScoreMode::Norm0100),
            other => Err(format!(
                "unknown score mode \"{other}\" (expected none, raw, norm01 or norm0100)"
            )),
        }
    }
}

/// How candidates are ordered in the prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderMode {
    /// First-stage order: decreasing BM25 score.
    Bm25Desc,
    /// Deterministic Fisher-Yates permutation of the (document, score)
    /// tuples, driven by SplitMix64 seeded exactly by `seed`.
    Shuffle { seed: u64 },
}

impl OrderMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OrderMode::Bm25Desc => "bm25_desc",
            OrderMode::Shuffle { .. } => "shuffle",
        }
    }
}

impl std::fmt::Display for OrderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Settings for one reranking pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    pub score_mode: ScoreMode,
    pub order_mode: OrderMode,
    /// Number of ids the model is asked for; output length is min(topk, n).
    pub topk: usize,
    /// Per-document whitespace-token budget; unset keeps full texts.
    pub max_doc_tokens: Option<usize>,
    pub template: PromptTemplate,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self {
            score_mode: ScoreMode::Raw,
            order_mode: OrderMode::Bm25Desc,
            topk: 10,
            max_doc_tokens: None,
            template: PromptTemplate::Bright,
        }
    }
}

/// A candidate as the reranker consumes it: first-stage result plus text.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateDoc {
    pub doc_id: String,
    pub text: String,
    pub score: f64,
    pub first_stage_rank: usize,
}

impl CandidateDoc {
    pub fn from_scored(candidate: &ScoredCandidate, text: impl Into<String>) -> Self {
        Self {
            doc_id: candidate.doc_id.clone(),
            text: text.into(),
            score: candidate.score,
            first_stage_rank: candidate.first_stage_rank,
        }
    }
}

/// Parsed and repaired model ranking with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankOutcome {
    pub query_id: String,
    /// 1-based prompt indices in final relevance order; duplicate-free,
    /// length min(topk, n).
    pub ranking: Vec<usize>,
    pub raw_response: String,
    pub repairs: Vec<Repair>,
    pub prompt_digest: String,
}

/// One reranked run entry: doc_id with its synthetic descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankedEntry {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankResult {
    pub outcome: RerankOutcome,
    pub entries: Vec<RerankedEntry>,
}

/// Numeric stage of score display. `None` mode yields no values; raw keeps
/// scores as-is; norm01 min-max rescales per query; norm0100 is exactly
/// 100 x the 0-1 value. An all-equal list maps to 1.0 (resp. 100.0).
pub fn normalize_scores(scores: &[f64], mode: ScoreMode) -> Result<Option<Vec<f64>>, RerankError> {
    if mode == ScoreMode::None {
        return Ok(None);
    }
    if scores.is_empty() {
        return Err(RerankError::EmptyScores { mode });
    }
    if let Some(position) = scores.iter().position(|s| !s.is_finite()) {
        return Err(RerankError::NonFiniteScore { position });
    }
    let values = match mode {
        ScoreMode::None => unreachable!(),
        ScoreMode::Raw => scores.to_vec(),
        ScoreMode::Norm01 | ScoreMode::Norm0100 => {
            let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let norm01: Vec<f64> = if max == min {
                vec![1.0; scores.len()]
            } else {
                scores.iter().map(|s| (s - min) / (max - min)).collect()
            };
            if mode == ScoreMode::Norm01 {
                norm01
            } else {
                norm01.into_iter().map(|v| 100.0 * v).collect()
            }
        }
    };
    Ok(Some(values))
}

/// Format values with a fixed number of decimals.
pub fn format_scores(values: &[f64], decimals: usize) -> Vec<String> {
    values.iter().map(|v| format!("{v:.decimals$}")).collect()
}

fn mode_decimals(mode: ScoreMode) -> usize {
    match mode {
        ScoreMode::None => 0,
        ScoreMode::Raw => 2,
        ScoreMode::Norm01 => 3,
        ScoreMode::Norm0100 => 1,
    }
}

/// Prompt-ready score strings: raw at 2 decimals, 0-1 at 3, 0-100 at 1;
/// absent for mode `none`.
pub fn display_scores(scores: &[f64], mode: ScoreMode) -> Result<Option<Vec<String>>, RerankError> {
    Ok(normalize_scores(scores, mode)?
        .map(|values| format_scores(&values, mode_decimals(mode))))
}

/// Order candidates for display. `Bm25Desc` preserves the input order;
/// `Shuffle` applies a Fisher-Yates permutation of whole items, so every
/// document keeps its own score.
pub fn order_candidates<T>(candidates: Vec<T>, mode: OrderMode) -> Vec<T> {
    match mode {
        OrderMode::Bm25Desc => candidates,
        OrderMode::Shuffle { seed } => {
            let mut items = candidates;
            let mut generator = rng::SplitMix64::new(seed);
            rng::fisher_yates(&mut items, &mut generator);
            items
        }
    }
}

/// Keep the first `max_tokens` whitespace-delimited tokens, rejoined with
/// single spaces; shorter texts pass through unchanged.
pub fn truncate_tokens(text: &str, max_tokens: usize) -> String {
    let count = text.split_whitespace().count();
    if count <= max_tokens {
        return text.to_string();
    }
    text.split_whitespace()
        .take(max_tokens)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Everything needed to rerank queries against one provider/model pair.
pub struct Reranker<'a> {
    pub client: &'a LlmClient,
    pub cache_dir: Option<&'a Path>,
    pub provider: String,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
    pub config: RerankConfig,
    /// Use the reformulated query text in the prompt when present.
    pub prefer_reformulated: bool,
}

impl Reranker<'_> {
    fn request_for(&self, prompt: String) -> ChatRequest {
        ChatRequest {
            provider: self.provider.clone(),
            model: self.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
        }
    }

    fn send(&self, request: &ChatRequest, ctx: &CallContext, query_id: &str) -> Result<crate::llm::ChatResponse, RerankError> {
        let result = match self.cache_dir {
            Some(dir) => self.client.cached_complete(dir, request, ctx),
            None => self.client.complete(request, ctx),
        };
        result.map_err(|source| RerankError::Provider {
            query_id: query_id.to_string(),
            source,
        })
    }

    /// Rerank one query's candidates: truncate, order, inject scores,
    /// prompt, complete, parse. Returns the outcome plus run entries whose
    /// synthetic scores (n - position + 1) preserve the final order.
    pub fn rerank_query(
        &self,
        query: &Query,
        candidates: &[CandidateDoc],
    ) -> Result<RerankResult, RerankError> {
        let truncated: Vec<CandidateDoc> = match self.config.max_doc_tokens {
            Some(max) => candidates
                .iter()
                .map(|c| CandidateDoc {
                    text: truncate_tokens(&c.text, max),
                    ..c.clone()
                })
                .collect(),
            None => candidates.to_vec(),
        };

        // Per-query shuffle seed, so one run seed yields independent yet
        // reproducible permutations across queries.
        let effective_order = match self.config.order_mode {
            OrderMode::Bm25Desc => OrderMode::Bm25Desc,
            OrderMode::Shuffle { seed } => OrderMode::Shuffle {
                seed: rng::per_query_seed(seed, &query.query_id),
            },
        };
        let ordered = order_candidates(truncated, effective_order);
        let n = ordered.len();

        let raw_scores: Vec<f64> = ordered.iter().map(|c| c.score).collect();
        let shown = display_scores(&raw_scores, self.config.score_mode)?;
        let doc_texts: Vec<String> = ordered.iter().map(|c| c.text.clone()).collect();
        let query_text = if self.prefer_reformulated {
            query.retrieval_text()
        } else {
            &query.text
        };
        let prompt = build_prompt(
            query_text,
            &doc_texts,
            shown.as_deref(),
            self.config.template,
            self.config.topk,
        )?;

        let request = self.request_for(prompt);
        let prompt_digest = request.cache_key().0;
        let ctx = CallContext {
            query_id: query.query_id.clone(),
            displayed: ordered
                .iter()
                .map(|c| DisplayedDoc {
                    doc_id: c.doc_id.clone(),
                    first_stage_rank: c.first_stage_rank,
                })
                .collect(),
        };
        let response = self.send(&request, &ctx, &query.query_id)?;

        let fallback: Vec<usize> = (1..=n).collect();
        let (ranking, repairs) =
            parse_ranking(&response.text, n, self.config.topk, &fallback);

        let entries = ranking
            .iter()
            .enumerate()
            .map(|(position, &index)| RerankedEntry {
                doc_id: ordered[index - 1].doc_id.clone(),
                score: (n - position) as f64,
            })
            .collect();

        Ok(RerankResult {
            outcome: RerankOutcome {
                query_id: query.query_id.clone(),
                ranking,
                repairs,
                raw_response: response.text,
                prompt_digest,
            },
            entries,
        })
    }
}

/// Default prompt for hypothetical-document query reformulation.
pub const DEFAULT_HYDE_TEMPLATE: &str =
    "Write a passage that answers the following question. Question: {query}. Passage:";

/// Generate a hypothetical passage answering the query, for use as the
/// retrieval/reranking query text. The passage is returned verbatim.
#[allow(clippy::too_many_arguments)]
pub fn hyde_reformulate(
    client: &LlmClient,
    cache_dir: Option<&Path>,
    provider: &str,
    model: &str,
    temperature: f64,
    max_output_tokens: Option<u32>,
    template: &str,
    query: &Query,
) -> Result<String, RerankError> {
    let request = ChatRequest {
        provider: provider.to_string(),
        model: model.to_string(),
        messages: vec![ChatMessage::user(template.replace("{query}", &query.text))],
        temperature,
        max_output_tokens,
    };
    let ctx = CallContext::for_query(query.query_id.clone());
    let result = match cache_dir {
        Some(dir) => client.cached_complete(dir, &request, &ctx),
        None => client.complete(&request, &ctx),
    };
    let response = result.map_err(|source| RerankError::Provider {
        query_id: query.query_id.clone(),
        source,
    })?;
    if response.text.is_empty() {
        return Err(RerankError::EmptyReformulation {
            query_id: query.query_id.clone(),
        });
    }
    Ok(response.text)
}
