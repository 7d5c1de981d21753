//! Editable prompt templates offered to clients as starting points for a
//! knowledge source. Each contains `{context}` and `{question}` once.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Preset {
    pub name: &'static str,
    pub title: &'static str,
    pub template: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "default",
        title: "Answer from context",
        template: kennel_core::rag::DEFAULT_TEMPLATE,
    },
    Preset {
        name: "learning_outline",
        title: "Learning outline",
        template: "You are a teaching assistant. Using only the material below, write a \
learning outline for the topic: a short overview, then numbered sections with 2-4 key \
points each, and finish with prerequisites the learner should review.\n\n\
Material:\n{context}\n\nTopic: {question}",
    },
    Preset {
        name: "sequential_steps",
        title: "Sequential steps",
        template: "You are a teaching assistant. Using the material below, explain how to \
accomplish the task as a numbered sequence of small steps. Name the source in brackets \
after any step that relies on it.\n\n\
Material:\n{context}\n\nTask: {question}",
    },
];

#[cfg(test)]
mod tests {
    use super::*;
    use kennel_core::rag::PromptTemplate;

    #[test]
    fn presets_are_valid_templates() {
        for p in PRESETS {
            PromptTemplate::new(p.template).unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }
}
