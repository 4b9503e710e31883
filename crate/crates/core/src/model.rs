//! Encoder, projector and decoder assembled into one parameter store.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{parse_smiles, MolecularGraph, SmilesError};
use crate::encoder::{self, EncoderError, GinConfig, GraphInputs};
use crate::lm::{self, FusedSequence, LmConfig, LmError, Vocabulary};
use crate::motif::{motif_matrix, MotifMatrix};
use crate::numerics::{NumericsError, ParameterStore, Tape, Tensor, Var};
use crate::projector::{self, ProjectorConfig, ProjectorError, ProjectorVariant};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid SMILES: {0}")]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Projector(#[from] ProjectorError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gnn: GinConfig,
    pub projector: ProjectorConfig,
    pub lm: LmConfig,
    pub vocab: Vocabulary,
    pub seed: u64,
}

impl ModelConfig {
    /// Shared width `d` for encoder, projector and decoder.
    pub fn new(vocab: Vocabulary, layers: usize, tokens: usize, width: usize, seed: u64) -> Self {
        let gnn = GinConfig::with_width(layers, width);
        let projector = ProjectorConfig::for_encoder(&gnn, tokens, width);
        let lm = LmConfig::new(vocab.len(), width);
        ModelConfig { gnn, projector, lm, vocab, seed }
    }

    pub fn with_variant(mut self, variant: ProjectorVariant) -> Self {
        self.projector.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.gnn.validate()?;
        if self.projector.width != self.lm.width {
            return Err(ModelError::InvalidConfig(format!(
                "projector width {} differs from decoder width {}",
                self.projector.width, self.lm.width
            )));
        }
        if self.lm.vocab_size != self.vocab.len() {
            return Err(ModelError::InvalidConfig("decoder vocabulary size differs from vocabulary".into()));
        }
        let dims: Vec<usize> = (0..=self.gnn.layers).map(|l| self.gnn.level_dim(l)).collect();
        if dims != self.projector.level_dims {
            return Err(ModelError::InvalidConfig("projector level widths do not match the encoder".into()));
        }
        Ok(())
    }
}

/// A parsed molecule with its motif matrix.
#[derive(Clone, Debug)]
pub struct Molecule {
    pub graph: MolecularGraph,
    pub motifs: MotifMatrix,
}

impl Molecule {
    pub fn parse(smiles: &str) -> Result<Self, ModelError> {
        let graph = parse_smiles(smiles)?;
        let motifs = motif_matrix(&graph);
        Ok(Molecule { graph, motifs })
    }
}

#[derive(Clone, Debug)]
pub struct MolGraphModel {
    pub config: ModelConfig,
    pub store: ParameterStore,
    /// Highest training stage completed (0 when freshly initialized).
    pub completed_stage: u8,
}

impl MolGraphModel {
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParameterStore::new();
        encoder::init_params(&config.gnn, &mut store, &mut rng)?;
        projector::init_params(&config.projector, &mut store, &mut rng)?;
        lm::decoder::init_params(&config.lm, &mut store, &mut rng)?;
        Ok(MolGraphModel { config, store, completed_stage: 0 })
    }

    /// Records the molecule's graph tokens on `tape`.
    pub fn graph_tokens_tape(&self, tape: &mut Tape, molecule: &Molecule) -> Result<Var, ModelError> {
        let inputs = GraphInputs::new(tape, &molecule.graph, &self.config.gnn)?;
        let levels = encoder::encode_tape(tape, &self.store, &self.config.gnn, &inputs)?;
        let out = projector::project_tape(tape, &self.store, &self.config.projector, &levels, &molecule.motifs.rows)?;
        Ok(out.tokens)
    }

    pub fn graph_tokens(&self, molecule: &Molecule) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let v = self.graph_tokens_tape(&mut tape, molecule)?;
        Ok(tape.value(v).clone())
    }

    pub fn graph_rows(&self, molecule: &Molecule) -> usize {
        self.config.projector.output_rows(molecule.graph.atom_count())
    }

    /// Training sequence for `(instruction, response)` turns; each response
    /// is terminated by EOS.
    pub fn sequence(&self, smiles: &str, molecule: &Molecule, turns: &[(String, String)]) -> FusedSequence {
        let vocab = &self.config.vocab;
        let ids: Vec<(Vec<usize>, Vec<usize>)> = turns
            .iter()
            .map(|(q, a)| (vocab.tokenize(q), vocab.encode_response(a)))
            .collect();
        FusedSequence::with_turns(&vocab.tokenize(smiles), self.graph_rows(molecule), &ids)
    }

    /// Like [`sequence`](Self::sequence) with an empty graph segment.
    pub fn text_sequence(&self, smiles: &str, turns: &[(String, String)]) -> FusedSequence {
        let vocab = &self.config.vocab;
        let ids: Vec<(Vec<usize>, Vec<usize>)> = turns
            .iter()
            .map(|(q, a)| (vocab.tokenize(q), vocab.encode_response(a)))
            .collect();
        FusedSequence::with_turns(&vocab.tokenize(smiles), 0, &ids)
    }

    /// Generation prefix ending in the SEP before the response.
    pub fn prompt(&self, smiles: &str, molecule: &Molecule, instruction: &str) -> FusedSequence {
        let vocab = &self.config.vocab;
        FusedSequence::new(&vocab.tokenize(smiles), self.graph_rows(molecule), &vocab.tokenize(instruction), &[])
    }

    pub fn loss_tape(&self, tape: &mut Tape, molecule: &Molecule, seq: &FusedSequence) -> Result<Var, ModelError> {
        let g = self.graph_tokens_tape(tape, molecule)?;
        Ok(lm::forward_loss(tape, &self.store, &self.config.lm, seq, Some(g))?)
    }

    pub fn loss(&self, smiles: &str, turns: &[(String, String)]) -> Result<f64, ModelError> {
        let molecule = Molecule::parse(smiles)?;
        let seq = self.sequence(smiles, &molecule, turns);
        let mut tape = Tape::new();
        let l = self.loss_tape(&mut tape, &molecule, &seq)?;
        Ok(tape.value(l).item())
    }

    pub fn generate_ids(&self, smiles: &str, instruction: &str, max_len: usize) -> Result<Vec<usize>, ModelError> {
        let molecule = Molecule::parse(smiles)?;
        let graph = self.graph_tokens(&molecule)?;
        let prefix = self.prompt(smiles, &molecule, instruction);
        Ok(lm::generate(&self.store, &self.config.lm, &prefix, Some(&graph), max_len)?)
    }

    pub fn generate(&self, smiles: &str, instruction: &str, max_len: usize) -> Result<String, ModelError> {
        let ids = self.generate_ids(smiles, instruction, max_len)?;
        Ok(self.config.vocab.detokenize(&ids))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(variant: ProjectorVariant) -> MolGraphModel {
        let vocab = Vocabulary::from_corpus(["CCO describe ethanol"]);
        MolGraphModel::new(ModelConfig::new(vocab, 2, 2, 16, 7).with_variant(variant)).unwrap()
    }

    #[test]
    fn every_variant_produces_a_loss() {
        for v in ProjectorVariant::ALL {
            let m = toy(v);
            let l = m.loss("CCO", &[("describe".into(), "ethanol".into())]).unwrap();
            assert!(l.is_finite() && l > 0.0, "{v}");
        }
    }

    #[test]
    fn graph_tokens_shape() {
        let m = toy(ProjectorVariant::MgProj);
        let mol = Molecule::parse("CC(=O)O").unwrap();
        assert_eq!(m.graph_tokens(&mol).unwrap().shape(), (8, 16));
    }

    #[test]
    fn generation_is_deterministic() {
        let m = toy(ProjectorVariant::MgProj);
        let a = m.generate_ids("CCO", "describe", 6).unwrap();
        let b = m.generate_ids("CCO", "describe", 6).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 6);
    }

    #[test]
    fn width_checked() {
        let vocab = Vocabulary::from_corpus(["x"]);
        let mut c = ModelConfig::new(vocab, 1, 1, 8, 0);
        c.projector.width = 4;
        assert!(matches!(MolGraphModel::new(c), Err(ModelError::InvalidConfig(_))));
    }
}
