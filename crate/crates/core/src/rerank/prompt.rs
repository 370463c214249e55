//! Listwise reranking prompt templates.
//!
//! Two template families are supported, differing only in phrasing details
//! (query quoting, instruction wording, a final "output a ranked list"
//! line). The document block lists passages as `[i]. {text}`, annotated
//! with `BM25 score: {score}` when score injection is active; the sentence
//! introducing the scores appears exactly when the annotations do.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("got {scores} scores for {docs} documents")]
    ScoreCountMismatch { docs: usize, scores: usize },
}

/// The sentence that introduces injected scores.
pub const RETRIEVER_SENTENCE: &str =
    "You are also given the BM25 scores from a lexical retriever for each document.";

/// Prompt family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptTemplate {
    Bright,
    R2med,
}

impl PromptTemplate {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptTemplate::Bright => "bright",
            PromptTemplate::R2med => "r2med",
        }
    }
}

impl std::str::FromStr for PromptTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bright" => Ok(PromptTemplate::Bright),
            "r2med" => Ok(PromptTemplate::R2med),
            other => Err(format!("unknown template \"{other}\" (expected bright or r2med)")),
        }
    }
}

/// Render the document block: one `[i]. {text}` line per candidate, with
/// `BM25 score:` annotations when display scores are given.
fn doc_block(doc_texts: &[String], display_scores: Option<&[String]>) -> String {
    let mut lines = Vec::with_capacity(doc_texts.len());
    for (i, text) in doc_texts.iter().enumerate() {
        match display_scores {
            Some(scores) => lines.push(format!("[{}]. {} BM25 score: {}", i + 1, text, scores[i])),
            None => lines.push(format!("[{}]. {}", i + 1, text)),
        }
    }
    lines.join("\n")
}

/// Build the full reranking prompt. Document indices are 1-based positions
/// in the given (already ordered) list, so under shuffling the index a
/// document carries differs from its first-stage rank.
pub fn build_prompt(
    query_text: &str,
    doc_texts: &[String],
    display_scores: Option<&[String]>,
    template: PromptTemplate,
    topk: usize,
) -> Result<String, PromptError> {
    if doc_texts.is_empty() {
        return Err(PromptError::EmptyCandidates);
    }
    if let Some(scores) = display_scores {
        if scores.len() != doc_texts.len() {
            return Err(PromptError::ScoreCountMismatch {
                docs: doc_texts.len(),
                scores: scores.len(),
            });
        }
    }

    let docs = doc_block(doc_texts, display_scores);
    let prompt = match template {
        PromptTemplate::Bright => {
            let retriever = match display_scores {
                Some(_) => format!("{RETRIEVER_SENTENCE}\n"),
                None => String::new(),
            };
            format!(
                "The following passages are related to query: {query_text}\n\
                 \n\
                 {retriever}{docs}\n\
                 First identify the essential problem in the query.\n\
                 Think step by step to reason about why each document is relevant or irrelevant.\n\
                 Rank these passages based on their relevance to the query.\n\
                 Please output the ranking result of passages as a list, where the first element is the id of the most relevant passage, the second element is the id of the second most element, etc.\n\
                 Please strictly follow the format to output a list of {topk} ids corresponding to the most relevant {topk} passages:\n\
                 ```json\n\
                 [...]"
            )
        }
        PromptTemplate::R2med => {
            let retriever = match display_scores {
                Some(_) => format!("{RETRIEVER_SENTENCE}\n\n"),
                None => String::new(),
            };
            format!(
                "The following passages are related to the query: \"{query_text}\".\n\
                 \n\
                 {retriever}{docs}\n\
                 First, identify the essential problem or topic in the query.\n\
                 Think step by step to reason about why each document is relevant or irrelevant..\n\
                 Rank these passages based on their relevance to the query.\n\
                 Please output the ranking result of passages as a list, where the first element is the id of the most relevant passage, the second element is the id of the second most element, etc.\n\
                 Finally, output a ranked list of the top {topk} most relevant passages by their index number.\n\
                 Please strictly follow the format to output a list of {topk} ids corresponding to the most relevant {topk} passages:\n\
                 ```json\n\
                 [...]"
            )
        }
    };
    Ok(prompt)
}
