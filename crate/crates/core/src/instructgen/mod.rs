//! Multi-turn instruction data generation: exemplar pool, in-context
//! generation through a pluggable completion backend, and filtering.

pub mod backend;
pub mod conversation;
pub mod generate;
pub mod template;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{BackendError, GenerationBackend, HttpBackend, StubBackend, StubMode, TOKEN_ENV};
pub use conversation::{
    filter_conversations, parse_conversation, serialize_conversation, Conversation, FilterOutcome, RejectReason, Rejection,
};
pub use generate::{generate_dataset, to_jsonl, GenerateConfig, GenerationOutput, GenerationStats};
pub use template::{build_prompt, build_prompt_named, render, TemplateId, CAPTION_IUPAC_TEMPLATE, CAPTION_TEMPLATE};

#[derive(Debug, Error, PartialEq)]
pub enum InstructError {
    #[error("context is missing `{0}`")]
    MissingField(&'static str),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("block {block}: expected `Question:` or `Answer:`, found `{found}`")]
    MalformedBlock { block: usize, found: String },
    #[error("line {line}: {message}")]
    BadContext { line: usize, message: String },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoleculeContext {
    pub smiles: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iupac: Option<String>,
}

/// One context per non-blank JSONL line; SMILES must parse.
pub fn parse_contexts(text: &str) -> Result<Vec<MoleculeContext>, InstructError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ctx: MoleculeContext =
            serde_json::from_str(line).map_err(|e| InstructError::BadContext { line: i + 1, message: e.to_string() })?;
        if let Err(e) = crate::chem::parse_smiles(&ctx.smiles) {
            return Err(InstructError::BadContext { line: i + 1, message: format!("invalid SMILES: {e}") });
        }
        out.push(ctx);
    }
    Ok(out)
}

pub fn load_contexts(path: &Path) -> Result<Vec<MoleculeContext>, InstructError> {
    parse_contexts(&std::fs::read_to_string(path).map_err(|e| InstructError::Io(e.to_string()))?)
}
