use std::time::Instant;

use anyhow::Context;
use insertrank_core::bm25::{build_index, Bm25Params};
use insertrank_core::corpus::load_corpus;

use crate::{CmdResult, IndexArgs};

pub fn run(args: IndexArgs) -> CmdResult {
    let params = Bm25Params::new(args.k1, args.b).map_err(anyhow::Error::from)?;
    let started = Instant::now();
    let corpus = load_corpus(&args.corpus)
        .with_context(|| format!("loading corpus from {}", args.corpus.display()))?;
    let index = build_index(&corpus, params);
    index.save(&args.out).map_err(anyhow::Error::from)?;
    println!(
        "indexed {} documents ({} terms, avgdl {:.2}) in {:.3}s -> {}",
        index.num_docs(),
        index.num_terms(),
        index.avgdl(),
        started.elapsed().as_secs_f64(),
        args.out.display()
    );
    Ok(())
}
