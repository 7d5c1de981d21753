use std::sync::Arc;
use std::time::Duration;

use kennel_core::providers::{MockProvider, MockReply};
use kennel_core::{
    BarkError, HttpProvider, PromptParameters, Provider, ProviderConfig, ProviderKind,
};
use serde::Deserialize;

use crate::args::{ProviderArgs, SamplingArgs};
use crate::error::{CliError, CliResult};

pub const API_KEY_ENV: &str = "KENNEL_API_KEY";

/// A resolved provider plus the configuration it was built from.
pub struct Resolved {
    pub kind: ProviderKind,
    pub config: ProviderConfig,
    pub provider: Arc<dyn Provider>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptEntry {
    Text(String),
    Fail {
        status: u16,
        #[serde(default)]
        body: String,
    },
}

fn load_script(path: &std::path::Path) -> CliResult<MockProvider> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("mock script {}: {e}", path.display())))?;
    let entries: Vec<ScriptEntry> = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("mock script {}: {e}", path.display())))?;
    Ok(MockProvider::scripted(entries.into_iter().map(
        |e| match e {
            ScriptEntry::Text(t) => MockReply::Text(t),
            ScriptEntry::Fail { status, body } => {
                MockReply::Fail(BarkError::provider(status, body))
            }
        },
    )))
}

fn parse_header(raw: &str) -> CliResult<(String, String)> {
    match raw.split_once(':') {
        Some((name, value)) if !name.trim().is_empty() => {
            Ok((name.trim().to_string(), value.trim().to_string()))
        }
        _ => Err(CliError::config(format!(
            "header {raw:?} is not `Name: value`"
        ))),
    }
}

pub fn resolve(args: &ProviderArgs) -> CliResult<Resolved> {
    let kind: ProviderKind = if args.mock_script.is_some() {
        ProviderKind::Mock
    } else {
        args.provider.parse()?
    };
    let model = match (&args.model, kind) {
        (Some(m), _) => m.clone(),
        (None, ProviderKind::Mock) => "mock".to_string(),
        (None, _) => return Err(CliError::config("--model (or KENNEL_MODEL) is required")),
    };
    let base_url = args
        .base_url
        .clone()
        .unwrap_or_else(|| kind.default_base_url().to_string());
    let mut config =
        ProviderConfig::new(base_url, model).with_timeout(Duration::from_secs(args.timeout.max(1)));
    let key_var = args.api_key_env.as_deref().unwrap_or(API_KEY_ENV);
    match std::env::var(key_var) {
        Ok(key) if !key.is_empty() => config = config.with_api_key(key),
        _ if args.api_key_env.is_some() => {
            return Err(CliError::config(format!(
                "environment variable {key_var} is not set"
            )))
        }
        _ => {}
    }
    for raw in &args.headers {
        let (name, value) = parse_header(raw)?;
        config = config.with_header(name, value);
    }

    let provider: Arc<dyn Provider> = match kind {
        ProviderKind::Mock => Arc::new(match &args.mock_script {
            Some(path) => load_script(path)?,
            None => MockProvider::echo(),
        }),
        _ => Arc::new(HttpProvider::new(kind, config.clone())?),
    };
    Ok(Resolved {
        kind,
        config,
        provider,
    })
}

pub fn params(model: &str, sampling: &SamplingArgs) -> CliResult<PromptParameters> {
    let mut p = PromptParameters::new(model);
    p.temperature = sampling.temperature;
    p.max_tokens = sampling.max_tokens;
    p.top_p = sampling.top_p;
    p.system_prompt = sampling.system.clone();
    p.validate()?;
    Ok(p)
}
