use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use insertrank_core::bm25::{build_index, Bm25Index, Bm25Params};
use insertrank_core::corpus::{load_corpus, load_qrels, Qrels, Query};
use insertrank_core::eval::{ablation_table, evaluate_run, write_run, EvalReport, Gain, Run, RunEntry};
use insertrank_core::rerank::{CandidateDoc, PromptTemplate, RerankConfig, Reranker};

use super::run_pool;
use crate::config::{AblateConfig, Setting};
use crate::{AblateArgs, CmdError, CmdResult};

struct Dataset {
    name: String,
    index: Bm25Index,
    queries: Vec<Query>,
    qrels: Qrels,
    /// Per-query candidate pools, aligned with `queries`.
    pools: Vec<Vec<CandidateDoc>>,
}

fn prepare_dataset(
    spec: &crate::config::DatasetConfig,
    params: Bm25Params,
    candidates: usize,
) -> Result<Dataset, CmdError> {
    let corpus = load_corpus(&spec.corpus)
        .with_context(|| format!("dataset {}: loading corpus", spec.name))?;
    let index = build_index(&corpus, params);
    let queries = super::load_query_set(
        &spec.queries,
        spec.queries_format.as_deref(),
        spec.reformulations.as_deref(),
    )?;
    let format = super::resolve_qrels_format(&spec.qrels, spec.qrels_format.as_deref())?;
    let (qrels, warnings) =
        load_qrels(&spec.qrels, format).with_context(|| format!("dataset {}: loading qrels", spec.name))?;
    super::print_warnings(&warnings);

    let mut pools = Vec::with_capacity(queries.len());
    for query in &queries {
        let hits = index
            .retrieve_topk(query, candidates)
            .map_err(anyhow::Error::from)?;
        let pool = hits
            .iter()
            .map(|hit| {
                let text = index
                    .doc_text_by_id(&hit.doc_id)
                    .expect("retrieved doc exists in index");
                CandidateDoc::from_scored(hit, text)
            })
            .collect();
        pools.push(pool);
    }
    Ok(Dataset {
        name: spec.name.clone(),
        index,
        queries,
        qrels,
        pools,
    })
}

/// Rerank every query of a dataset under one setting and evaluate it.
fn run_cell(
    config: &AblateConfig,
    dataset: &Dataset,
    setting: &Setting,
    template: PromptTemplate,
    gain: Gain,
    runs_dir: &Path,
) -> Result<EvalReport, CmdError> {
    let client = crate::provider::build_client(
        &config.provider,
        config.providers_config.as_deref(),
        Some(&dataset.qrels),
        config.script.as_deref(),
    )?;
    let rerank_config = RerankConfig {
        score_mode: setting.score_mode,
        order_mode: setting.order_mode.to_order_mode(),
        topk: config.topk,
        max_doc_tokens: config.max_doc_tokens,
        template,
    };
    let reranker = Reranker {
        client: &client,
        cache_dir: Some(&config.cache_dir),
        provider: config.provider.clone(),
        model: config.model.clone(),
        temperature: config.temperature,
        max_output_tokens: config.max_output_tokens,
        config: rerank_config,
        prefer_reformulated: !config.use_original_query,
    };

    let items: Vec<(&Query, &Vec<CandidateDoc>)> = dataset
        .queries
        .iter()
        .zip(&dataset.pools)
        .filter(|(_, pool)| !pool.is_empty())
        .collect();
    let results = run_pool(&items, config.concurrency, |(query, pool)| {
        reranker.rerank_query(query, pool)
    });

    let mut run = Run::new();
    for ((query, _), result) in items.iter().zip(results) {
        let result = result.map_err(anyhow::Error::from)?;
        let entries: Vec<RunEntry> = result
            .entries
            .iter()
            .map(|e| RunEntry {
                doc_id: e.doc_id.clone(),
                score: e.score,
            })
            .collect();
        run.set_query(&query.query_id, entries).map_err(anyhow::Error::from)?;
    }

    let tag = format!("insertrank:{}:{}", setting.score_mode, setting.order_mode.to_order_mode().as_str());
    let run_path = runs_dir.join(format!("{}__{}.txt", dataset.name, setting.slug));
    let header = vec![
        "command = ablate".to_string(),
        format!("dataset = {}", dataset.name),
        format!("setting = {}", setting.label),
        format!("provider = {}", config.provider),
        format!("model = {}", config.model),
        format!("topk = {}", config.topk),
        format!("candidates = {}", config.candidates),
        format!("documents = {}", dataset.index.num_docs()),
    ];
    write_run(&run, &run_path, &tag, &header)
        .with_context(|| format!("writing {}", run_path.display()))?;

    Ok(evaluate_run(&run, &dataset.qrels, config.k, gain, &tag))
}

pub fn run(args: AblateArgs) -> CmdResult {
    let mut config = AblateConfig::load(&args.config)?;
    if let Some(out_dir) = args.out_dir {
        config.out_dir = out_dir;
    }
    let settings = config.validate_and_expand()?;
    let template: PromptTemplate = config.template.parse().map_err(CmdError::Usage)?;
    let gain: Gain = config.gain.parse().map_err(CmdError::Usage)?;
    let params = Bm25Params::new(config.k1, config.b).map_err(anyhow::Error::from)?;

    let runs_dir = config.out_dir.join("runs");
    fs::create_dir_all(&runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;

    let mut cells: Vec<(String, String, Option<EvalReport>)> = Vec::new();
    let mut failures = 0usize;
    for dataset_spec in &config.datasets {
        let dataset = prepare_dataset(dataset_spec, params, config.candidates)?;
        for setting in &settings {
            match run_cell(&config, &dataset, setting, template, gain, &runs_dir) {
                Ok(report) => {
                    cells.push((setting.label.clone(), dataset.name.clone(), Some(report)))
                }
                Err(CmdError::Usage(message)) => return Err(CmdError::Usage(message)),
                Err(CmdError::Runtime(err)) => {
                    failures += 1;
                    eprintln!(
                        "error: dataset {} setting \"{}\": {err:#}",
                        dataset.name, setting.label
                    );
                    cells.push((setting.label.clone(), dataset.name.clone(), None));
                }
            }
        }
    }

    let table = ablation_table(&cells).map_err(anyhow::Error::from)?;
    let text = table.to_aligned_text();
    print!("{text}");

    let tsv_path = config.out_dir.join("ablation.tsv");
    fs::write(&tsv_path, table.to_tsv())
        .with_context(|| format!("writing {}", tsv_path.display()))?;
    let text_path = config.out_dir.join("ablation.txt");
    fs::write(&text_path, &text)
        .with_context(|| format!("writing {}", text_path.display()))?;
    eprintln!("ablation table -> {} and {}", text_path.display(), tsv_path.display());

    if failures > 0 {
        return Err(CmdError::Runtime(anyhow!("{failures} ablation cells failed")));
    }
    Ok(())
}
