use anyhow::Context;
use insertrank_core::bm25::Bm25Index;
use insertrank_core::eval::{write_run, Run, RunEntry};

use crate::{CmdError, CmdResult, RetrieveArgs};

pub fn run(args: RetrieveArgs) -> CmdResult {
    if args.k < 1 {
        return Err(CmdError::Usage("--k must be >= 1".to_string()));
    }
    let index = Bm25Index::load(&args.index).map_err(anyhow::Error::from)?;
    let queries = super::load_query_set(
        &args.queries,
        args.queries_format.as_deref(),
        args.reformulations.as_deref(),
    )?;

    let mut run = Run::new();
    let mut total_entries = 0usize;
    for query in &queries {
        let hits = index.retrieve_topk(query, args.k).map_err(anyhow::Error::from)?;
        total_entries += hits.len();
        let entries: Vec<RunEntry> = hits
            .into_iter()
            .map(|hit| RunEntry {
                doc_id: hit.doc_id,
                score: hit.score,
            })
            .collect();
        run.set_query(&query.query_id, entries).map_err(anyhow::Error::from)?;
    }

    let header = vec![
        "command = retrieve".to_string(),
        format!("index = {}", args.index.display()),
        format!("queries = {}", args.queries.display()),
        format!(
            "reformulations = {}",
            args.reformulations
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "unset".to_string())
        ),
        format!("k = {}", args.k),
        format!("bm25 = k1 {} b {}", index.params().k1, index.params().b),
    ];
    write_run(&run, &args.out, "bm25", &header)
        .with_context(|| format!("writing run to {}", args.out.display()))?;
    println!(
        "retrieved {} entries for {} queries -> {}",
        total_entries,
        queries.len(),
        args.out.display()
    );
    Ok(())
}
