//! NDCG@k evaluation, TREC run-file I/O, and ablation tables.
//!
//! NDCG uses trec_eval-style linear gain (`grade / log2(i+1)`) by default,
//! with exponential gain (`2^grade - 1`) behind a flag for sensitivity
//! checks. The ideal DCG comes from all judged documents for the query,
//! not just retrieved ones, so first-stage recall losses stay visible.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::corpus::Qrels;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed run line: {message}")]
    MalformedLine {
        path: String,
        line: usize,
        message: String,
    },
    #[error("duplicate doc_id \"{doc_id}\" for query \"{query_id}\"")]
    DuplicateDoc { query_id: String, doc_id: String },
    #[error("reports mix different k values: {first} and {second}")]
    MixedK { first: usize, second: usize },
    #[error("no reports given")]
    NoReports,
}

fn io_err(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One run entry: a retrieved document with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub score: f64,
}

/// A ranked run: per query, documents in descending score order (ties by
/// ascending doc_id). Query insertion order is preserved so output files
/// keep the input query order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Run {
    order: Vec<String>,
    by_query: HashMap<String, Vec<RunEntry>>,
}

impl Run {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert one query's entries, enforcing the sort invariant and
    /// rejecting duplicate documents. Replaces any previous entries for
    /// the query.
    pub fn set_query(
        &mut self,
        query_id: &str,
        mut entries: Vec<RunEntry>,
    ) -> Result<(), EvalError> {
        let mut seen = HashSet::new();
        for entry in &entries {
            if !seen.insert(entry.doc_id.clone()) {
                return Err(EvalError::DuplicateDoc {
                    query_id: query_id.to_string(),
                    doc_id: entry.doc_id.clone(),
                });
            }
        }
        entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        if !self.by_query.contains_key(query_id) {
            self.order.push(query_id.to_string());
        }
        self.by_query.insert(query_id.to_string(), entries);
        Ok(())
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(|s| s.as_str())
    }

    pub fn entries(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.by_query.get(query_id).map(|v| v.as_slice())
    }

    pub fn num_queries(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Ranked doc_ids for a query (empty when absent).
    pub fn ranking(&self, query_id: &str) -> Vec<&str> {
        self.by_query
            .get(query_id)
            .map(|entries| entries.iter().map(|e| e.doc_id.as_str()).collect())
            .unwrap_or_default()
    }
}

/// Read a TREC 6-column run file (`qid Q0 docid rank score tag`). Lines
/// starting with `#` are provenance comments and are skipped. Entries are
/// re-sorted per the Run invariant; a warning is returned for every query
/// whose file order disagrees with its score order.
pub fn read_run(path: &Path) -> Result<(Run, Vec<String>), EvalError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut per_query: Vec<(String, Vec<RunEntry>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();

    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 6 {
            return Err(EvalError::MalformedLine {
                path: path.display().to_string(),
                line: idx + 1,
                message: format!("expected 6 columns, found {}", cols.len()),
            });
        }
        let score: f64 = cols[4].parse().map_err(|_| EvalError::MalformedLine {
            path: path.display().to_string(),
            line: idx + 1,
            message: format!("score \"{}\" is not a number", cols[4]),
        })?;
        let entry = RunEntry {
            doc_id: cols[2].to_string(),
            score,
        };
        match index.get(cols[0]) {
            Some(&i) => per_query[i].1.push(entry),
            None => {
                index.insert(cols[0].to_string(), per_query.len());
                per_query.push((cols[0].to_string(), vec![entry]));
            }
        }
    }

    let mut run = Run::new();
    let mut warnings = Vec::new();
    for (query_id, entries) in per_query {
        let file_order: Vec<String> = entries.iter().map(|e| e.doc_id.clone()).collect();
        run.set_query(&query_id, entries)?;
        let sorted_order: Vec<String> = run
            .entries(&query_id)
            .unwrap()
            .iter()
            .map(|e| e.doc_id.clone())
            .collect();
        if file_order != sorted_order {
            warnings.push(format!(
                "{}: query {query_id}: file rank order disagrees with score order; re-sorted",
                path.display()
            ));
        }
    }
    Ok((run, warnings))
}

/// Write a run in TREC 6-column format with the given tag. Scores print
/// with 6 decimal places; ranks are 1-based. `header` lines, if any, are
/// emitted first as `#`-prefixed comments.
pub fn write_run(run: &Run, path: &Path, tag: &str, header: &[String]) -> Result<(), EvalError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    for line in header {
        writeln!(out, "# {line}").map_err(|e| io_err(path, e))?;
    }
    for query_id in run.query_ids() {
        for (i, entry) in run.entries(query_id).unwrap().iter().enumerate() {
            writeln!(
                out,
                "{query_id} Q0 {} {} {:.6} {tag}",
                entry.doc_id,
                i + 1,
                entry.score
            )
            .map_err(|e| io_err(path, e))?;
        }
    }
    out.flush().map_err(|e| io_err(path, e))
}

/// Gain function for DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    /// trec_eval-style: gain = grade.
    #[default]
    Linear,
    /// Burges-style: gain = 2^grade - 1.
    Exponential,
}

impl Gain {
    fn of(&self, grade: u32) -> f64 {
        match self {
            Gain::Linear => grade as f64,
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

impl std::str::FromStr for Gain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(Gain::Linear),
            "exp" | "exponential" => Ok(Gain::Exponential),
            other => Err(format!("unknown gain \"{other}\" (expected linear or exp)")),
        }
    }
}

fn dcg<'a>(grades: impl Iterator<Item = &'a u32>, k: usize, gain: Gain) -> f64 {
    grades
        .take(k)
        .enumerate()
        .map(|(i, &grade)| gain.of(grade) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k of a ranking for one query. The ideal DCG is computed from the
/// grade-sorted full qrels for the query; a query with no relevant
/// documents scores 0 by convention.
pub fn ndcg_at_k<S: AsRef<str>>(
    ranking: &[S],
    qrels: &Qrels,
    query_id: &str,
    k: usize,
    gain: Gain,
) -> f64 {
    let Some(judged) = qrels.judged(query_id) else {
        return 0.0;
    };
    let mut ideal: Vec<u32> = judged.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.iter(), k, gain);
    if idcg == 0.0 {
        return 0.0;
    }
    let grades: Vec<u32> = ranking
        .iter()
        .map(|doc_id| qrels.grade(query_id, doc_id.as_ref()))
        .collect();
    dcg(grades.iter(), k, gain) / idcg
}

/// Per-query and averaged NDCG@k over the qrels query set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
    pub k: usize,
    pub run_tag: String,
    /// Qrels queries with no run entries; they score 0 and count in the mean.
    pub missing_queries: Vec<String>,
}

/// Evaluate a run against qrels at cutoff k. Every query present in qrels
/// counts; queries missing from the run score 0 and are listed in
/// `missing_queries` for the caller to warn about.
pub fn evaluate_run(run: &Run, qrels: &Qrels, k: usize, gain: Gain, run_tag: &str) -> EvalReport {
    let mut per_query = BTreeMap::new();
    let mut missing = Vec::new();
    for query_id in qrels.query_ids() {
        let ranking = run.ranking(query_id);
        if ranking.is_empty() {
            missing.push(query_id.to_string());
        }
        per_query.insert(
            query_id.to_string(),
            ndcg_at_k(&ranking, qrels, query_id, k, gain),
        );
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    EvalReport {
        per_query,
        mean,
        k,
        run_tag: run_tag.to_string(),
        missing_queries: missing,
    }
}

/// Paper-style cell rendering: three decimals with the leading zero
/// stripped (".334"); failed cells show an em-dash placeholder.
fn render_cell(value: Option<f64>) -> String {
    match value {
        Some(v) => {
            let s = format!("{v:.3}");
            match s.strip_prefix("0.") {
                Some(rest) => format!(".{rest}"),
                None => s,
            }
        }
        None => "—".to_string(),
    }
}

/// Settings x splits grid of mean NDCG@k values.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub k: usize,
    /// Row labels in first-appearance order.
    pub settings: Vec<String>,
    /// Column labels in first-appearance order (excluding the final Avg).
    pub splits: Vec<String>,
    cells: HashMap<(String, String), Option<f64>>,
}

impl AblationTable {
    /// Cell value for (setting, split), if present and successful.
    pub fn cell(&self, setting: &str, split: &str) -> Option<f64> {
        self.cells
            .get(&(setting.to_string(), split.to_string()))
            .copied()
            .flatten()
    }

    /// Unweighted mean over splits; None when any cell is missing.
    pub fn row_avg(&self, setting: &str) -> Option<f64> {
        let mut total = 0.0;
        for split in &self.splits {
            total += self.cell(setting, split)?;
        }
        Some(total / self.splits.len() as f64)
    }

    /// Aligned text table, one row per setting, one column per split plus Avg.
    pub fn to_aligned_text(&self) -> String {
        let mut columns: Vec<String> = vec!["Setting".to_string()];
        columns.extend(self.splits.clone());
        columns.push("Avg".to_string());

        let mut rows: Vec<Vec<String>> = vec![columns];
        for setting in &self.settings {
            let mut row = vec![setting.clone()];
            for split in &self.splits {
                row.push(render_cell(self.cell(setting, split)));
            }
            row.push(render_cell(self.row_avg(setting)));
            rows.push(row);
        }

        let n_cols = rows[0].len();
        let widths: Vec<usize> = (0..n_cols)
            .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &rows {
            let mut line = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                line.push_str(cell);
                let pad = widths[c].saturating_sub(cell.chars().count());
                if c + 1 < n_cols {
                    line.extend(std::iter::repeat_n(' ', pad));
                }
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }

    /// Machine-readable TSV with the same layout.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str("setting");
        for split in &self.splits {
            out.push('\t');
            out.push_str(split);
        }
        out.push_str("\tavg\n");
        for setting in &self.settings {
            out.push_str(setting);
            for split in &self.splits {
                out.push('\t');
                out.push_str(&render_cell(self.cell(setting, split)));
            }
            out.push('\t');
            out.push_str(&render_cell(self.row_avg(setting)));
            out.push('\n');
        }
        out
    }
}

/// Assemble an ablation table from (setting, split) report cells. A `None`
/// report marks a failed cell. All reports must share the same k.
pub fn ablation_table(
    cells: &[(String, String, Option<EvalReport>)],
) -> Result<AblationTable, EvalError> {
    let mut k: Option<usize> = None;
    for (_, _, report) in cells {
        if let Some(report) = report {
            match k {
                None => k = Some(report.k),
                Some(existing) if existing != report.k => {
                    return Err(EvalError::MixedK {
                        first: existing,
                        second: report.k,
                    })
                }
                _ => {}
            }
        }
    }
    let k = k.ok_or(EvalError::NoReports)?;

    let mut settings = Vec::new();
    let mut splits = Vec::new();
    let mut grid = HashMap::new();
    for (setting, split, report) in cells {
        if !settings.contains(setting) {
            settings.push(setting.clone());
        }
        if !splits.contains(split) {
            splits.push(split.clone());
        }
        grid.insert(
            (setting.clone(), split.clone()),
            report.as_ref().map(|r| r.mean),
        );
    }
    Ok(AblationTable {
        k,
        settings,
        splits,
        cells: grid,
    })
}
