use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BarkError, Result};

pub const DEFAULT_TEMPLATE: &str =
    "Use the following context to answer.\n\nContext:\n{context}\n\nQuestion: {question}";

const CONTEXT: &str = "{context}";
const QUESTION: &str = "{question}";

/// Prompt template holding `{context}` and `{question}` exactly once each.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate(String);

impl PromptTemplate {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        for placeholder in [CONTEXT, QUESTION] {
            let n = text.matches(placeholder).count();
            if n != 1 {
                return Err(BarkError::invalid(format!(
                    "template must contain {placeholder} exactly once (found {n})"
                )));
            }
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Substitutes both placeholders in one pass, so placeholder-looking text
    /// inside the context or question is left alone.
    pub fn render(&self, context: &str, question: &str) -> String {
        let t = &self.0;
        let c = t.find(CONTEXT).expect("validated");
        let q = t.find(QUESTION).expect("validated");
        let (first, first_len, first_val, second, second_len, second_val) = if c < q {
            (c, CONTEXT.len(), context, q, QUESTION.len(), question)
        } else {
            (q, QUESTION.len(), question, c, CONTEXT.len(), context)
        };
        let mut out = String::with_capacity(t.len() + context.len() + question.len());
        out.push_str(&t[..first]);
        out.push_str(first_val);
        out.push_str(&t[first + first_len..second]);
        out.push_str(second_val);
        out.push_str(&t[second + second_len..]);
        out
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self(DEFAULT_TEMPLATE.to_string())
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = BarkError;

    fn try_from(value: String) -> Result<Self> {
        PromptTemplate::new(value)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> Self {
        t.0
    }
}

impl fmt::Debug for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PromptTemplate({:?})", self.0)
    }
}
