//! Ollama `/api/chat` wire format (non-streaming).

use serde_json::{Map, Value};

use super::openai::{check_inputs, number, wire_messages};
use crate::error::{BarkError, Result};
use crate::types::{ChatResponse, FinishReason, Message, PromptParameters, RawJson, Usage};

pub fn build_request(messages: &[Message], params: &PromptParameters) -> Result<Value> {
    check_inputs(messages, params)?;
    let mut body = Map::new();
    body.insert("model".into(), Value::from(params.model.as_str()));
    body.insert("messages".into(), wire_messages(messages));
    body.insert("stream".into(), Value::Bool(false));

    let mut options = Map::new();
    if let Some(t) = params.temperature {
        options.insert("temperature".into(), number(t)?);
    }
    if let Some(p) = params.top_p {
        options.insert("top_p".into(), number(p)?);
    }
    if let Some(n) = params.max_tokens {
        options.insert("num_predict".into(), Value::from(n));
    }
    if !options.is_empty() {
        body.insert("options".into(), Value::Object(options));
    }
    for (k, v) in &params.extra {
        body.insert(k.clone(), v.clone());
    }
    Ok(Value::Object(body))
}

pub fn parse_response(body: &str) -> Result<ChatResponse> {
    let raw = RawJson::parse(body)?;
    let doc: Value = raw.value();
    let text = doc
        .get("message")
        .and_then(|m| m.get("content"))
        .and_then(Value::as_str)
        .ok_or_else(|| BarkError::serialization("message.content missing"))?
        .to_string();
    let done = doc.get("done").and_then(Value::as_bool).unwrap_or(false);
    let finish_reason = match doc.get("done_reason").and_then(Value::as_str) {
        Some(reason) => FinishReason::from_wire(reason),
        // older servers omit done_reason on a normal finish
        None if done => FinishReason::Stop,
        None => FinishReason::Other("incomplete".into()),
    };
    let prompt = doc.get("prompt_eval_count").and_then(Value::as_u64);
    let completion = doc.get("eval_count").and_then(Value::as_u64);
    let usage = (prompt.is_some() || completion.is_some()).then(|| Usage {
        prompt_tokens: prompt.unwrap_or(0),
        completion_tokens: completion.unwrap_or(0),
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
