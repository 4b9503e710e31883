//! Molecular graph-language modeling at desk scale.
//!
//! The pipeline runs SMILES text through a parser ([`chem`]), a GIN message
//! passing encoder ([`encoder`]), a multi-level graph projector
//! ([`projector`]) that also consumes functional-group motifs ([`motif`]),
//! and a small causal decoder ([`lm`]) that reads SMILES, graph and
//! instruction tokens and writes a response. [`pipeline`] holds the two-stage
//! training procedure and checkpoint format, [`instructgen`] the multi-turn
//! instruction data generator, and [`metrics`] the text metrics used for
//! evaluation. Everything numeric sits on the small reverse-mode autodiff in
//! [`numerics`].
//!
//! The `examples/` directory of this crate has one runnable program per
//! capability; the `molgraph` binary exposes the same operations from the
//! command line.

pub mod chem;
pub mod encoder;
pub mod instructgen;
pub mod lm;
pub mod metrics;
pub mod model;
pub mod motif;
pub mod numerics;
pub mod pipeline;
pub mod projector;

pub use chem::{parse_smiles, validate, MolecularGraph};
pub use model::{ModelConfig, MolGraphModel, Molecule};
pub use numerics::{ParameterStore, Tape, Tensor, Var};
