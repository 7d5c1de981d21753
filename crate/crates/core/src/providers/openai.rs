//! Chat-completions wire format, shared by OpenAI-compatible endpoints and
//! model routers.

use serde_json::{Map, Value};

use crate::error::{BarkError, Result};
use crate::types::{ChatResponse, FinishReason, Message, PromptParameters, RawJson, Usage};

pub(crate) fn check_inputs(messages: &[Message], params: &PromptParameters) -> Result<()> {
    if messages.is_empty() {
        return Err(BarkError::invalid("request needs at least one message"));
    }
    if params.model.is_empty() {
        return Err(BarkError::invalid("model must not be empty"));
    }
    if let Some(key) = params.colliding_extra_key() {
        return Err(BarkError::serialization(format!(
            "extra parameter {key:?} collides with a named request field"
        )));
    }
    Ok(())
}

pub(crate) fn wire_messages(messages: &[Message]) -> Value {
    Value::Array(
        messages
            .iter()
            .map(|m| {
                let mut obj = Map::new();
                obj.insert("role".into(), Value::from(m.role.as_str()));
                obj.insert("content".into(), Value::from(m.content.as_str()));
                Value::Object(obj)
            })
            .collect(),
    )
}

pub(crate) fn number(x: f64) -> Result<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| BarkError::serialization(format!("{x} is not a finite number")))
}

/// Builds a non-streaming `/chat/completions` body. Named fields come first,
/// then `extra` in insertion order.
pub fn build_request(messages: &[Message], params: &PromptParameters) -> Result<Value> {
    check_inputs(messages, params)?;
    let mut body = Map::new();
    body.insert("model".into(), Value::from(params.model.as_str()));
    body.insert("messages".into(), wire_messages(messages));
    if let Some(t) = params.temperature {
        body.insert("temperature".into(), number(t)?);
    }
    if let Some(n) = params.max_tokens {
        body.insert("max_tokens".into(), Value::from(n));
    }
    if let Some(p) = params.top_p {
        body.insert("top_p".into(), number(p)?);
    }
    for (k, v) in &params.extra {
        body.insert(k.clone(), v.clone());
    }
    Ok(Value::Object(body))
}

pub fn parse_response(body: &str) -> Result<ChatResponse> {
    let raw = RawJson::parse(body)?;
    let doc: Value = raw.value();
    let choice = doc
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
        .ok_or_else(|| BarkError::serialization("response has no choices"))?;
    let text = choice
        .get("message")
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .ok_or_else(|| BarkError::serialization("choices[0].message.content missing"))?
        .to_string();
    let finish_reason = choice
        .get("finish_reason")
        .and_then(Value::as_str)
        .map(FinishReason::from_wire)
        .unwrap_or_else(|| FinishReason::Other(String::new()));
    let usage = doc.get("usage").and_then(|u| {
        let prompt = u.get("prompt_tokens").and_then(Value::as_u64);
        let completion = u.get("completion_tokens").and_then(Value::as_u64);
        (prompt.is_some() || completion.is_some()).then(|| Usage {
            prompt_tokens: prompt.unwrap_or(0),
            completion_tokens: completion.unwrap_or(0),
        })
    });
    let model = doc
        .get("model")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    Ok(ChatResponse {
        text,
        finish_reason,
        usage,
        model,
        raw,
    })
}
