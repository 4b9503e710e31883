//! Character tokenizer, multimodal sequence fusion, a small causal decoder,
//! low-rank adapters and greedy generation.

pub mod decoder;
pub mod fuse;
pub mod lora;
pub mod vocab;

use thiserror::Error;

use crate::numerics::NumericsError;

pub use decoder::{batch_loss, embed, forward_logits, forward_loss, generate, LmConfig};
pub use fuse::{FusedSequence, Segment, SegmentKind, Slot};
pub use lora::{lora_attach, lora_merge};
pub use vocab::{Vocabulary, BOS, EOS, GRAPH_SLOT, PAD, SEP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmError {
    #[error("graph tokens have width {got}, model width is {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("sequence reserves {expected} graph rows, graph has {got}")]
    GraphRowMismatch { expected: usize, got: usize },
    #[error("sequence has graph slots but no graph tokens were given")]
    MissingGraph,
    #[error("sequence has no response positions")]
    EmptyResponse,
    #[error("sequence length {len} exceeds {max} positions")]
    SequenceTooLong { len: usize, max: usize },
    #[error("adapter target `{0}` not found")]
    TargetNotFound(String),
    #[error("`{0}` already has an adapter")]
    AlreadyAdapted(String),
    #[error("adapter rank must be at least 1")]
    InvalidRank,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
