//! Subcommand implementations.

pub mod ablate;
pub mod eval;
pub mod index;
pub mod rerank;
pub mod retrieve;

use std::path::Path;

use anyhow::Context;
use insertrank_core::corpus::{
    attach_reformulations, load_queries, sniff_qrels_format, QrelsFormat, Query, QueryFormat,
};

use crate::CmdError;

/// Pick a query format: explicit flag wins, otherwise the file extension
/// (.tsv/.txt mean TSV, anything else JSONL).
pub fn resolve_query_format(path: &Path, flag: Option<&str>) -> Result<QueryFormat, CmdError> {
    match flag {
        Some("jsonl") => Ok(QueryFormat::Jsonl),
        Some("tsv") => Ok(QueryFormat::Tsv),
        Some(other) => Err(CmdError::Usage(format!(
            "unknown queries format \"{other}\" (expected jsonl or tsv)"
        ))),
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("txt") => Ok(QueryFormat::Tsv),
            _ => Ok(QueryFormat::Jsonl),
        },
    }
}

/// Pick a qrels format: explicit flag wins, otherwise sniff the first line.
pub fn resolve_qrels_format(path: &Path, flag: Option<&str>) -> Result<QrelsFormat, CmdError> {
    match flag {
        Some("trec4col") => Ok(QrelsFormat::Trec4Col),
        Some("tsv3col") => Ok(QrelsFormat::Tsv3Col),
        Some(other) => Err(CmdError::Usage(format!(
            "unknown qrels format \"{other}\" (expected trec4col or tsv3col)"
        ))),
        None => Ok(sniff_qrels_format(path).map_err(anyhow::Error::from)?),
    }
}

/// Load queries and attach reformulations when a file is given.
pub fn load_query_set(
    queries: &Path,
    format_flag: Option<&str>,
    reformulations: Option<&Path>,
) -> Result<Vec<Query>, CmdError> {
    let format = resolve_query_format(queries, format_flag)?;
    let mut list = load_queries(queries, format)
        .with_context(|| format!("loading queries from {}", queries.display()))?;
    if let Some(path) = reformulations {
        attach_reformulations(&mut list, path)
            .with_context(|| format!("attaching reformulations from {}", path.display()))?;
    }
    Ok(list)
}

pub fn print_warnings(warnings: &[String]) {
    for warning in warnings {
        eprintln!("warning: {warning}");
    }
}

/// Run `f` over items with a fixed-size worker pool; results come back in
/// input order regardless of completion order.
pub(crate) fn run_pool<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Mutex;

    let n = items.len();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = f(&items[i]);
                results.lock().expect("results mutex")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("results mutex")
        .into_iter()
        .map(|slot| slot.expect("worker filled every slot"))
        .collect()
}
