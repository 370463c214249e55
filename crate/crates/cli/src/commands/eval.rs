use std::io::Write;

use anyhow::Context;
use insertrank_core::corpus::load_qrels;
use insertrank_core::eval::{evaluate_run, read_run, Gain};

use crate::{CmdError, CmdResult, EvalArgs};

pub fn run(args: EvalArgs) -> CmdResult {
    if args.k < 1 {
        return Err(CmdError::Usage("--k must be >= 1".to_string()));
    }
    let gain: Gain = args.gain.parse().map_err(CmdError::Usage)?;
    let (run, run_warnings) = read_run(&args.run).map_err(anyhow::Error::from)?;
    super::print_warnings(&run_warnings);
    let format = super::resolve_qrels_format(&args.qrels, args.qrels_format.as_deref())?;
    let (qrels, qrels_warnings) = load_qrels(&args.qrels, format).map_err(anyhow::Error::from)?;
    super::print_warnings(&qrels_warnings);

    let tag = args
        .run
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| args.run.display().to_string());
    let report = evaluate_run(&run, &qrels, args.k, gain, &tag);
    for query_id in &report.missing_queries {
        eprintln!("warning: query {query_id} judged in qrels but absent from the run; scored 0");
    }

    if let Some(path) = &args.per_query {
        let mut out = std::fs::File::create(path)
            .with_context(|| format!("creating {}", path.display()))?;
        writeln!(out, "# command = eval").with_context(|| path.display().to_string())?;
        writeln!(out, "# run = {}", args.run.display()).with_context(|| path.display().to_string())?;
        writeln!(out, "# qrels = {}", args.qrels.display()).with_context(|| path.display().to_string())?;
        writeln!(out, "# k = {}", args.k).with_context(|| path.display().to_string())?;
        writeln!(out, "query_id\tndcg@{}", args.k).with_context(|| path.display().to_string())?;
        for (query_id, value) in &report.per_query {
            writeln!(out, "{query_id}\t{value:.4}").with_context(|| path.display().to_string())?;
        }
    }

    println!("ndcg@{} {:.4}", args.k, report.mean);
    Ok(())
}
