use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context};
use insertrank_core::bm25::Bm25Index;
use insertrank_core::corpus::{load_qrels, Qrels, Query};
use insertrank_core::eval::{read_run, write_run, Run, RunEntry};
use insertrank_core::rerank::{
    CandidateDoc, OrderMode, PromptTemplate, RerankConfig, RerankResult, Reranker, ScoreMode,
};

use super::run_pool;
use crate::{CmdError, CmdResult, RerankArgs};

fn effective_config_header(args: &RerankArgs, order_mode: OrderMode) -> Vec<String> {
    let mut header = vec![
        "command = rerank".to_string(),
        format!("index = {}", args.index.display()),
        format!("queries = {}", args.queries.display()),
        format!("run = {}", args.run.display()),
        format!("provider = {}", args.provider),
        format!("model = {}", args.model),
        format!("score_mode = {}", args.score_mode),
        format!("order = {}", args.order),
    ];
    if let OrderMode::Shuffle { seed } = order_mode {
        header.push(format!("seed = {seed}"));
    }
    header.push(format!("topk = {}", args.topk));
    header.push(format!("candidates = {}", args.candidates));
    header.push(format!(
        "max_doc_tokens = {}",
        args.max_doc_tokens.map_or("unset".to_string(), |v| v.to_string())
    ));
    header.push(format!("template = {}", args.template));
    header.push(format!("temperature = {}", args.temperature));
    header.push(format!(
        "query_text = {}",
        if args.use_original_query { "original" } else { "reformulated" }
    ));
    header
}

pub fn run(args: RerankArgs) -> CmdResult {
    let score_mode: ScoreMode = args.score_mode.parse().map_err(CmdError::Usage)?;
    let template: PromptTemplate = args.template.parse().map_err(CmdError::Usage)?;
    let order_mode = match args.order.as_str() {
        "bm25_desc" => OrderMode::Bm25Desc,
        "shuffle" => match args.seed {
            Some(seed) => OrderMode::Shuffle { seed },
            None => {
                return Err(CmdError::Usage(
                    "--seed is required with --order shuffle".to_string(),
                ))
            }
        },
        other => {
            return Err(CmdError::Usage(format!(
                "unknown order \"{other}\" (expected bm25_desc or shuffle)"
            )))
        }
    };
    if args.topk < 1 || args.candidates < 1 || args.concurrency < 1 {
        return Err(CmdError::Usage(
            "--topk, --candidates and --concurrency must be >= 1".to_string(),
        ));
    }
    if args.max_doc_tokens == Some(0) {
        return Err(CmdError::Usage("--max-doc-tokens must be >= 1".to_string()));
    }

    let index = Bm25Index::load(&args.index).map_err(anyhow::Error::from)?;
    let queries = super::load_query_set(
        &args.queries,
        args.queries_format.as_deref(),
        args.reformulations.as_deref(),
    )?;
    let (first_stage, run_warnings) = read_run(&args.run).map_err(anyhow::Error::from)?;
    super::print_warnings(&run_warnings);

    let qrels: Option<Qrels> = match &args.qrels {
        Some(path) => {
            let format = super::resolve_qrels_format(path, None)?;
            let (qrels, warnings) = load_qrels(path, format).map_err(anyhow::Error::from)?;
            super::print_warnings(&warnings);
            Some(qrels)
        }
        None => None,
    };
    let client = crate::provider::build_client(
        &args.provider,
        args.providers_config.as_deref(),
        qrels.as_ref(),
        args.script.as_deref(),
    )?;

    let config = RerankConfig {
        score_mode,
        order_mode,
        topk: args.topk,
        max_doc_tokens: args.max_doc_tokens,
        template,
    };
    let reranker = Reranker {
        client: &client,
        cache_dir: Some(&args.cache_dir),
        provider: args.provider.clone(),
        model: args.model.clone(),
        temperature: args.temperature,
        max_output_tokens: args.max_output_tokens,
        config,
        prefer_reformulated: !args.use_original_query,
    };

    // Candidate pools come from the first-stage run; texts from the index.
    let mut items: Vec<(&Query, Vec<CandidateDoc>)> = Vec::new();
    for query in &queries {
        let entries = first_stage.entries(&query.query_id).unwrap_or(&[]);
        if entries.is_empty() {
            eprintln!(
                "warning: query {} has no first-stage candidates; skipped",
                query.query_id
            );
            continue;
        }
        let mut candidates = Vec::new();
        for (i, entry) in entries.iter().take(args.candidates).enumerate() {
            let text = index.doc_text_by_id(&entry.doc_id).ok_or_else(|| {
                anyhow!(
                    "document \"{}\" from run not found in index {}",
                    entry.doc_id,
                    args.index.display()
                )
            })?;
            candidates.push(CandidateDoc {
                doc_id: entry.doc_id.clone(),
                text: text.to_string(),
                score: entry.score,
                first_stage_rank: i + 1,
            });
        }
        items.push((query, candidates));
    }

    let results = run_pool(&items, args.concurrency, |(query, candidates)| {
        reranker.rerank_query(query, candidates)
    });

    let mut out_run = Run::new();
    let mut outcomes: Vec<RerankResult> = Vec::new();
    let mut failures = 0usize;
    for ((query, _), result) in items.iter().zip(results) {
        match result {
            Ok(result) => {
                let entries: Vec<RunEntry> = result
                    .entries
                    .iter()
                    .map(|e| RunEntry {
                        doc_id: e.doc_id.clone(),
                        score: e.score,
                    })
                    .collect();
                out_run
                    .set_query(&query.query_id, entries)
                    .map_err(anyhow::Error::from)?;
                outcomes.push(result);
            }
            Err(err) => {
                failures += 1;
                eprintln!("error: {err}");
            }
        }
    }

    let header = effective_config_header(&args, order_mode);
    let tag = format!("insertrank:{score_mode}:{}", order_mode.as_str());
    write_run(&out_run, &args.out, &tag, &header)
        .with_context(|| format!("writing run to {}", args.out.display()))?;

    // Raw responses land beside the cache; the outcome log points at them.
    let raw_dir = args.cache_dir.join("raw");
    fs::create_dir_all(&raw_dir)
        .with_context(|| format!("creating {}", raw_dir.display()))?;
    let log_path: PathBuf = args
        .outcome_log
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.outcomes.jsonl", args.out.display())));
    let mut log = fs::File::create(&log_path)
        .with_context(|| format!("creating {}", log_path.display()))?;
    for line in &header {
        writeln!(log, "# {line}").with_context(|| log_path.display().to_string())?;
    }
    for result in &outcomes {
        let outcome = &result.outcome;
        let raw_path = raw_dir.join(format!("{}.txt", outcome.prompt_digest));
        fs::write(&raw_path, &outcome.raw_response)
            .with_context(|| format!("writing {}", raw_path.display()))?;
        let record = serde_json::json!({
            "query_id": outcome.query_id,
            "prompt_digest": outcome.prompt_digest,
            "repairs": outcome.repairs,
            "raw_response_path": raw_path.display().to_string(),
        });
        writeln!(log, "{record}").with_context(|| log_path.display().to_string())?;
    }

    println!(
        "reranked {} queries ({} failed) -> {}",
        items.len(),
        failures,
        args.out.display()
    );
    if failures > 0 {
        return Err(CmdError::Runtime(anyhow!(
            "{failures} of {} queries failed",
            items.len()
        )));
    }
    Ok(())
}
