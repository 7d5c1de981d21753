//! Code review: rules + sources in, one validated JSON report out.

use std::collections::BTreeMap;
use std::path::Path;

use kennel_core::{Chatter, PromptParameters, SessionId};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCORE_MIN: f64 = 0.0;
pub const SCORE_MAX: f64 = 10.0;

const SOURCES_DELIMITER: &str = "===== SOURCES UNDER REVIEW =====";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewReport {
    pub scores: BTreeMap<String, f64>,
    pub findings: Vec<Finding>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub comment: String,
}

impl ReviewReport {
    /// At least one score, all within `[0, 10]`; when `metrics` is given the
    /// score names must be exactly those metrics.
    pub fn validate(&self, metrics: Option<&[String]>) -> Result<(), String> {
        if self.scores.is_empty() {
            return Err("scores must contain at least one metric".into());
        }
        for (name, score) in &self.scores {
            if !(SCORE_MIN..=SCORE_MAX).contains(score) {
                return Err(format!("score {name} = {score} is outside [0, 10]"));
            }
        }
        if let Some(metrics) = metrics {
            let missing: Vec<_> = metrics
                .iter()
                .filter(|m| !self.scores.contains_key(*m))
                .collect();
            if !missing.is_empty() {
                return Err(format!("missing scores for {missing:?}"));
            }
            let unknown: Vec<_> = self
                .scores
                .keys()
                .filter(|k| !metrics.contains(k))
                .collect();
            if !unknown.is_empty() {
                return Err(format!("unexpected score names {unknown:?}"));
            }
        }
        for f in &self.findings {
            if f.rule.trim().is_empty() || f.comment.trim().is_empty() {
                return Err("every finding needs a rule and a comment".into());
            }
        }
        Ok(())
    }
}

/// Metric names from a `metrics: a, b, c` line, if the rules file has one.
pub fn rules_metrics(rules: &str) -> Option<Vec<String>> {
    rules.lines().find_map(|line| {
        let (key, rest) = line.trim().split_once(':')?;
        if !key.trim().eq_ignore_ascii_case("metrics") {
            return None;
        }
        let names: Vec<String> = rest
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        (!names.is_empty()).then_some(names)
    })
}

fn schema_text(metrics: Option<&[String]>) -> String {
    let scores = match metrics {
        Some(names) => names
            .iter()
            .map(|n| format!("\"{n}\": <number 0-10>"))
            .collect::<Vec<_>>()
            .join(", "),
        None => "\"<metric name>\": <number 0-10>, ...".to_string(),
    };
    format!(
        "{{\"scores\": {{{scores}}}, \"findings\": [{{\"rule\": <string>, \"location\": <string, optional>, \"comment\": <string>}}], \"summary\": <string>}}"
    )
}

/// `rules + delimiter + FILE-prefixed sources + format instruction`.
pub fn build_prompt(rules: &str, sources: &[(String, String)]) -> String {
    let metrics = rules_metrics(rules);
    let mut prompt = String::new();
    prompt.push_str(rules.trim_end());
    prompt.push_str("\n\n");
    prompt.push_str(SOURCES_DELIMITER);
    prompt.push('\n');
    for (path, text) in sources {
        prompt.push_str(&format!("\nFILE: {path}\n{}\n", text.trim_end()));
    }
    prompt.push_str(&format!(
        "\nRespond ONLY with JSON matching the given schema, with no prose and no code fences:\n{}\n",
        schema_text(metrics.as_deref())
    ));
    prompt
}

fn correction_prompt(problem: &str) -> String {
    format!(
        "Your previous reply could not be used: {problem}. Respond again with ONLY the JSON object matching the schema, nothing else."
    )
}

/// Accepts a bare JSON object, optionally inside one Markdown code fence.
pub fn parse_reply(text: &str, metrics: Option<&[String]>) -> Result<ReviewReport, String> {
    let mut body = text.trim();
    if let Some(rest) = body.strip_prefix("```") {
        let rest = rest.strip_prefix("json").unwrap_or(rest);
        body = rest.strip_suffix("```").unwrap_or(rest).trim();
    }
    let report: ReviewReport =
        serde_json::from_str(body).map_err(|e| format!("not valid report JSON ({e})"))?;
    report.validate(metrics)?;
    Ok(report)
}

/// Outcome of a review run.
#[derive(Debug)]
pub struct ReviewOutcome {
    pub report: ReviewReport,
    pub attempts: usize,
}

pub fn read_sources(paths: &[impl AsRef<Path>]) -> CliResult<Vec<(String, String)>> {
    paths
        .iter()
        .map(|p| {
            let p = p.as_ref();
            std::fs::read_to_string(p)
                .map(|t| (p.display().to_string(), t))
                .map_err(|e| CliError::config(format!("reading {}: {e}", p.display())))
        })
        .collect()
}

/// Sends the review, retrying once with a correction when the first reply
/// does not validate. Both turns share one session so the model sees its
/// first answer.
pub fn run(
    chatter: &dyn Chatter,
    session: &SessionId,
    params: &PromptParameters,
    rules: &str,
    sources: &[(String, String)],
) -> CliResult<ReviewOutcome> {
    if sources.is_empty() {
        return Err(CliError::config("at least one source file is required"));
    }
    let metrics = rules_metrics(rules);
    let first = chatter.bark(session, &build_prompt(rules, sources), Some(params))?;
    let problem = match parse_reply(&first.text, metrics.as_deref()) {
        Ok(report) => {
            return Ok(ReviewOutcome {
                report,
                attempts: 1,
            })
        }
        Err(problem) => problem,
    };
    tracing::warn!(%problem, "review reply rejected; retrying once");
    let second = chatter.bark(session, &correction_prompt(&problem), Some(params))?;
    match parse_reply(&second.text, metrics.as_deref()) {
        Ok(report) => Ok(ReviewOutcome {
            report,
            attempts: 2,
        }),
        Err(again) => Err(CliError::validation(format!(
            "model did not return a valid review after 2 attempts: {again}"
        ))),
    }
}
