//! Provider resolution: mock names for offline runs, registry entries for
//! real OpenAI-compatible endpoints.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use insertrank_core::corpus::Qrels;
use insertrank_core::llm::http::{HttpProvider, ProviderConfig, ProviderRegistry};
use insertrank_core::llm::mock::{MockProvider, ScriptStep};
use insertrank_core::llm::{LlmClient, RetryPolicy};
use serde::Deserialize;

use crate::CmdError;

#[derive(Deserialize)]
struct ProvidersFile {
    #[serde(default)]
    providers: Vec<ProviderConfig>,
}

/// Registry of known providers: built-in defaults plus entries from an
/// optional TOML file with `[[providers]]` tables.
pub fn load_registry(extra: Option<&Path>) -> Result<ProviderRegistry, CmdError> {
    let mut registry = ProviderRegistry::with_defaults();
    if let Some(path) = extra {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading providers config {}", path.display()))?;
        let file: ProvidersFile = toml::from_str(&text)
            .map_err(|e| anyhow!("parsing providers config {}: {e}", path.display()))?;
        for config in file.providers {
            registry.insert(config);
        }
    }
    Ok(registry)
}

fn load_script(path: &Path) -> Result<Vec<ScriptStep>, CmdError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading script {}", path.display()))?;
    let responses: Vec<String> = serde_json::from_str(&text)
        .map_err(|e| anyhow!("script {} must be a JSON array of strings: {e}", path.display()))?;
    Ok(responses.into_iter().map(ScriptStep::Text).collect())
}

/// Build the completion client for a provider name.
///
/// `qrels` backs `mock-oracle`; `script` backs `mock-scripted`. Anything
/// that is not a mock name must resolve in the registry and have its
/// credential in the environment.
pub fn build_client(
    name: &str,
    providers_config: Option<&Path>,
    qrels: Option<&Qrels>,
    script: Option<&Path>,
) -> Result<LlmClient, CmdError> {
    match name {
        "mock-identity" => Ok(LlmClient::new(MockProvider::identity())),
        "mock-reverse" => Ok(LlmClient::new(MockProvider::reverse())),
        "mock-oracle" => {
            let qrels = qrels.ok_or_else(|| {
                CmdError::Usage("--qrels is required with --provider mock-oracle".to_string())
            })?;
            Ok(LlmClient::new(MockProvider::oracle(qrels.clone())))
        }
        "mock-scripted" => {
            let path = script.ok_or_else(|| {
                CmdError::Usage("--script is required with --provider mock-scripted".to_string())
            })?;
            Ok(LlmClient::new(MockProvider::scripted(load_script(path)?))
                .with_retry(RetryPolicy::immediate(5)))
        }
        other => {
            let registry = load_registry(providers_config)?;
            let config = registry.get(other).ok_or_else(|| {
                CmdError::Usage(format!(
                    "unknown provider \"{other}\" (known: {}, or mock-identity / mock-reverse / mock-oracle / mock-scripted)",
                    registry.names().collect::<Vec<_>>().join(", ")
                ))
            })?;
            let provider =
                HttpProvider::from_env(config.clone()).map_err(|e| anyhow!(e.to_string()))?;
            Ok(LlmClient::new(Arc::new(provider)))
        }
    }
}
