//! Ablation sweep configuration.
//!
//! The config is TOML; relative paths resolve against the config file's
//! directory so fixture trees stay portable. CLI flags (`--out-dir`)
//! override file values.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use insertrank_core::rerank::{OrderMode, ScoreMode};
use serde::Deserialize;

use crate::CmdError;

fn default_k() -> usize {
    10
}
fn default_candidates() -> usize {
    100
}
fn default_topk() -> usize {
    10
}
fn default_k1() -> f64 {
    0.9
}
fn default_b() -> f64 {
    0.4
}
fn default_template() -> String {
    "bright".to_string()
}
fn default_gain() -> String {
    "linear".to_string()
}
fn default_concurrency() -> usize {
    4
}
fn default_cache_dir() -> PathBuf {
    PathBuf::from(".insertrank_cache")
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("ablation_out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblateConfig {
    /// NDCG cutoff shared by every cell.
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_candidates")]
    pub candidates: usize,
    #[serde(default = "default_topk")]
    pub topk: usize,
    pub provider: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Subset of {none, raw, norm01, norm0100}.
    pub score_modes: Vec<String>,
    /// Subset of {bm25_desc, shuffle}.
    pub orders: Vec<String>,
    /// Shuffle seeds; required when "shuffle" is among the orders.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub max_doc_tokens: Option<usize>,
    #[serde(default = "default_template")]
    pub template: String,
    #[serde(default = "default_gain")]
    pub gain: String,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub use_original_query: bool,
    #[serde(default)]
    pub providers_config: Option<PathBuf>,
    #[serde(default)]
    pub script: Option<PathBuf>,
    pub datasets: Vec<DatasetConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    #[serde(default)]
    pub queries_format: Option<String>,
    pub qrels: PathBuf,
    #[serde(default)]
    pub qrels_format: Option<String>,
    #[serde(default)]
    pub reformulations: Option<PathBuf>,
}

/// One (score mode, order) cell of the sweep, with its table row label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Setting {
    pub label: String,
    pub slug: String,
    pub score_mode: ScoreMode,
    pub order_mode: OrderModeSpec,
}

/// Order plus the seed it runs with (resolved per setting).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderModeSpec {
    Bm25Desc,
    Shuffle { seed: u64 },
}

impl OrderModeSpec {
    pub fn to_order_mode(self) -> OrderMode {
        match self {
            OrderModeSpec::Bm25Desc => OrderMode::Bm25Desc,
            OrderModeSpec::Shuffle { seed } => OrderMode::Shuffle { seed },
        }
    }
}

fn setting_label(score_mode: ScoreMode, shuffled: bool) -> &'static str {
    match (score_mode, shuffled) {
        (ScoreMode::None, false) => "Vanilla (no scores)",
        (ScoreMode::Raw, false) => "Raw BM25 scores",
        (ScoreMode::Norm01, false) => "0-1 scale",
        (ScoreMode::Norm0100, false) => "0-100 scale",
        (ScoreMode::None, true) => "Shuffled",
        (ScoreMode::Raw, true) => "Shuffled w/ BM25",
        (ScoreMode::Norm01, true) => "Shuffled 0-1 scale",
        (ScoreMode::Norm0100, true) => "Shuffled 0-100 scale",
    }
}

impl AblateConfig {
    pub fn load(path: &Path) -> Result<Self, CmdError> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut config: AblateConfig = toml::from_str(&text)
            .map_err(|e| anyhow!("parsing config {}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.cache_dir);
        resolve(&mut self.out_dir);
        if let Some(p) = self.providers_config.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.script.as_mut() {
            resolve(p);
        }
        for dataset in &mut self.datasets {
            resolve(&mut dataset.corpus);
            resolve(&mut dataset.queries);
            resolve(&mut dataset.qrels);
            if let Some(p) = dataset.reformulations.as_mut() {
                resolve(p);
            }
        }
    }

    /// Expand score_modes x orders (x seeds for shuffle) into settings.
    /// Empty settings or a shuffle order without seeds are usage errors;
    /// referenced dataset paths must exist.
    pub fn validate_and_expand(&self) -> Result<Vec<Setting>, CmdError> {
        if self.score_modes.is_empty() || self.orders.is_empty() {
            return Err(CmdError::Usage(
                "config must list at least one score mode and one order".to_string(),
            ));
        }
        if self.datasets.is_empty() {
            return Err(CmdError::Usage("config must list at least one dataset".to_string()));
        }
        if self.topk < 1 || self.candidates < 1 || self.k < 1 || self.concurrency < 1 {
            return Err(CmdError::Usage(
                "k, topk, candidates and concurrency must be >= 1".to_string(),
            ));
        }
        if self.max_doc_tokens == Some(0) {
            return Err(CmdError::Usage("max_doc_tokens must be >= 1".to_string()));
        }
        for dataset in &self.datasets {
            for (what, path) in [
                ("corpus", Some(&dataset.corpus)),
                ("queries", Some(&dataset.queries)),
                ("qrels", Some(&dataset.qrels)),
                ("reformulations", dataset.reformulations.as_ref()),
            ] {
                if let Some(path) = path {
                    if !path.exists() {
                        return Err(CmdError::Runtime(anyhow!(
                            "dataset {}: {what} file {} does not exist",
                            dataset.name,
                            path.display()
                        )));
                    }
                }
            }
        }

        let mut settings = Vec::new();
        for order in &self.orders {
            match order.as_str() {
                "bm25_desc" => {
                    for mode_str in &self.score_modes {
                        let score_mode: ScoreMode =
                            mode_str.parse().map_err(CmdError::Usage)?;
                        settings.push(Setting {
                            label: setting_label(score_mode, false).to_string(),
                            slug: format!("{score_mode}_bm25_desc"),
                            score_mode,
                            order_mode: OrderModeSpec::Bm25Desc,
                        });
                    }
                }
                "shuffle" => {
                    if self.seeds.is_empty() {
                        return Err(CmdError::Usage(
                            "orders include \"shuffle\" but no seeds are configured".to_string(),
                        ));
                    }
                    for &seed in &self.seeds {
                        for mode_str in &self.score_modes {
                            let score_mode: ScoreMode =
                                mode_str.parse().map_err(CmdError::Usage)?;
                            let mut label = setting_label(score_mode, true).to_string();
                            if self.seeds.len() > 1 {
                                label.push_str(&format!(" (seed {seed})"));
                            }
                            settings.push(Setting {
                                label,
                                slug: format!("{score_mode}_shuffle_{seed}"),
                                score_mode,
                                order_mode: OrderModeSpec::Shuffle { seed },
                            });
                        }
                    }
                }
                other => {
                    return Err(CmdError::Usage(format!(
                        "unknown order \"{other}\" (expected bm25_desc or shuffle)"
                    )))
                }
            }
        }
        Ok(settings)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(score_modes: &str, orders: &str, seeds: &str) -> String {
        format!(
            "provider = \"mock-identity\"\nmodel = \"mock\"\nscore_modes = {score_modes}\norders = {orders}\nseeds = {seeds}\n\n[[datasets]]\nname = \"toy\"\ncorpus = \"corpus.jsonl\"\nqueries = \"queries.jsonl\"\nqrels = \"qrels.tsv\"\n"
        )
    }

    fn write_fixture(dir: &Path) {
        std::fs::write(dir.join("corpus.jsonl"), "{\"_id\":\"d1\",\"text\":\"a\"}\n").unwrap();
        std::fs::write(dir.join("queries.jsonl"), "{\"_id\":\"q1\",\"text\":\"a\"}\n").unwrap();
        std::fs::write(dir.join("qrels.tsv"), "q1\td1\t1\n").unwrap();
    }

    #[test]
    fn expands_table3_style_rows() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let path = dir.path().join("config.toml");
        std::fs::write(
            &path,
            minimal("[\"none\", \"raw\", \"norm01\", \"norm0100\"]", "[\"bm25_desc\"]", "[]"),
        )
        .unwrap();
        let config = AblateConfig::load(&path).unwrap();
        let settings = config.validate_and_expand().unwrap();
        let labels: Vec<&str> = settings.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(
            labels,
            ["Vanilla (no scores)", "Raw BM25 scores", "0-1 scale", "0-100 scale"]
        );
    }

    #[test]
    fn shuffle_without_seeds_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let path = dir.path().join("config.toml");
        std::fs::write(&path, minimal("[\"raw\"]", "[\"shuffle\"]", "[]")).unwrap();
        let config = AblateConfig::load(&path).unwrap();
        assert!(matches!(config.validate_and_expand(), Err(CmdError::Usage(_))));
    }

    #[test]
    fn empty_settings_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let path = dir.path().join("config.toml");
        std::fs::write(&path, minimal("[]", "[\"bm25_desc\"]", "[]")).unwrap();
        let config = AblateConfig::load(&path).unwrap();
        assert!(matches!(config.validate_and_expand(), Err(CmdError::Usage(_))));
    }

    #[test]
    fn missing_dataset_file_is_runtime_error() {
        let dir = tempfile::tempdir().unwrap();
        // No fixture files written.
        let path = dir.path().join("config.toml");
        std::fs::write(&path, minimal("[\"raw\"]", "[\"bm25_desc\"]", "[]")).unwrap();
        let config = AblateConfig::load(&path).unwrap();
        assert!(matches!(config.validate_and_expand(), Err(CmdError::Runtime(_))));
    }

    #[test]
    fn paths_resolve_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let path = dir.path().join("config.toml");
        std::fs::write(&path, minimal("[\"raw\"]", "[\"bm25_desc\"]", "[]")).unwrap();
        let config = AblateConfig::load(&path).unwrap();
        assert_eq!(config.datasets[0].corpus, dir.path().join("corpus.jsonl"));
        assert!(config.cache_dir.starts_with(dir.path()));
    }

    #[test]
    fn multiple_seeds_disambiguate_labels() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let path = dir.path().join("config.toml");
        std::fs::write(&path, minimal("[\"raw\"]", "[\"shuffle\"]", "[1, 2]")).unwrap();
        let config = AblateConfig::load(&path).unwrap();
        let settings = config.validate_and_expand().unwrap();
        let labels: Vec<&str> = settings.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["Shuffled w/ BM25 (seed 1)", "Shuffled w/ BM25 (seed 2)"]);
    }
}
