//! Deterministic providers for tests and offline pipeline runs.
//!
//! All mocks answer from the call context and their configuration alone,
//! so repeated calls with the same inputs agree. Each provider counts its
//! calls, which lets tests assert that cache hits never reach a provider.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::corpus::Qrels;

use super::{CallContext, ChatProvider, ChatRequest, ChatResponse, LlmError};

/// One step of a scripted mock: a canned reply or an injected failure.
#[derive(Debug, Clone)]
pub enum ScriptStep {
    Text(String),
    TransientFailure(String),
    AuthFailure(String),
}

enum MockSpec {
    /// Ranks documents 1..n in prompt order.
    Identity,
    /// Ranks documents n..1.
    Reverse,
    /// Ranks by (grade desc, first_stage_rank asc) against the qrels.
    Oracle { qrels: Qrels },
    /// Replays a fixed response sequence; errors once exhausted.
    Scripted { steps: Mutex<VecDeque<ScriptStep>> },
}

pub struct MockProvider {
    spec: MockSpec,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn identity() -> Arc<Self> {
        Arc::new(Self {
            spec: MockSpec::Identity,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn reverse() -> Arc<Self> {
        Arc::new(Self {
            spec: MockSpec::Reverse,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn oracle(qrels: Qrels) -> Arc<Self> {
        Arc::new(Self {
            spec: MockSpec::Oracle { qrels },
            calls: AtomicUsize::new(0),
        })
    }

    pub fn scripted(steps: Vec<ScriptStep>) -> Arc<Self> {
        Arc::new(Self {
            spec: MockSpec::Scripted {
                steps: Mutex::new(steps.into()),
            },
            calls: AtomicUsize::new(0),
        })
    }

    /// Number of send attempts this provider has served.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Format a ranking the way the reranking prompt asks for it.
pub fn fenced_json_list(indices: &[usize]) -> String {
    let inner = indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    format!("```json\n[{inner}]\n```")
}

fn text_response(text: String) -> ChatResponse {
    ChatResponse {
        text,
        usage: None,
        cached: false,
        provider_latency_ms: Some(0),
    }
}

impl ChatProvider for MockProvider {
    fn send_once(&self, _request: &ChatRequest, ctx: &CallContext) -> Result<ChatResponse, LlmError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        let n = ctx.displayed.len();
        match &self.spec {
            MockSpec::Identity => {
                let indices: Vec<usize> = (1..=n).collect();
                Ok(text_response(fenced_json_list(&indices)))
            }
            MockSpec::Reverse => {
                let indices: Vec<usize> = (1..=n).rev().collect();
                Ok(text_response(fenced_json_list(&indices)))
            }
            MockSpec::Oracle { qrels } => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    let doc_a = &ctx.displayed[a];
                    let doc_b = &ctx.displayed[b];
                    let grade_a = qrels.grade(&ctx.query_id, &doc_a.doc_id);
                    let grade_b = qrels.grade(&ctx.query_id, &doc_b.doc_id);
                    grade_b
                        .cmp(&grade_a)
                        .then(doc_a.first_stage_rank.cmp(&doc_b.first_stage_rank))
                });
                let indices: Vec<usize> = order.into_iter().map(|i| i + 1).collect();
                Ok(text_response(fenced_json_list(&indices)))
            }
            MockSpec::Scripted { steps } => {
                let step = steps.lock().expect("script mutex").pop_front();
                match step {
                    Some(ScriptStep::Text(text)) => Ok(text_response(text)),
                    Some(ScriptStep::TransientFailure(message)) => {
                        Err(LlmError::Transport { message })
                    }
                    Some(ScriptStep::AuthFailure(message)) => Err(LlmError::Auth { message }),
                    None => Err(LlmError::ScriptExhausted { calls: call }),
                }
            }
        }
    }
}
