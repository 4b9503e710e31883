//! Multi-level graph projector.
//!
//! Every encoder level and the motif matrix is pooled into `b` learnable
//! tokens by single-head cross-attention; the pooled blocks are stacked along
//! the token axis and passed row-wise through a two-layer fusion MLP, giving
//! `b·(L+2) × d` graph tokens. Baseline variants used for ablations live here
//! as well.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoder::{GinConfig, LayerStack};
use crate::motif::{MotifMatrix, MOTIF_DIM};
use crate::numerics::{NumericsError, ParameterStore, Tape, Tensor, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectorError {
    #[error("cannot pool an empty node set")]
    EmptyGraph,
    #[error("projector expects {expected} levels, stack has {got}")]
    LevelCountMismatch { expected: usize, got: usize },
    #[error("unknown projector variant `{0}`")]
    UnknownVariant(String),
    #[error("variant {0} is not handled by this entry point")]
    WrongEntryPoint(ProjectorVariant),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectorVariant {
    /// Pooled levels 0..=L plus motifs, fused.
    #[serde(rename = "mgproj")]
    MgProj,
    /// Pooled levels 0..=L, no motif block.
    NoMotif,
    /// Row-wise MLP over the first GNN layer's node rows.
    Low,
    /// Row-wise MLP over the last GNN layer's node rows.
    High,
    /// Row-wise MLP over all levels concatenated feature-wise.
    Concat,
    /// One cross-attention pool over the last level.
    Resampler,
}

impl ProjectorVariant {
    pub const ALL: [ProjectorVariant; 6] = [
        ProjectorVariant::MgProj,
        ProjectorVariant::NoMotif,
        ProjectorVariant::Low,
        ProjectorVariant::High,
        ProjectorVariant::Concat,
        ProjectorVariant::Resampler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProjectorVariant::MgProj => "mgproj",
            ProjectorVariant::NoMotif => "no-motif",
            ProjectorVariant::Low => "low",
            ProjectorVariant::High => "high",
            ProjectorVariant::Concat => "concat",
            ProjectorVariant::Resampler => "resampler",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(
            self,
            ProjectorVariant::Low | ProjectorVariant::High | ProjectorVariant::Concat | ProjectorVariant::Resampler
        )
    }
}

impl fmt::Display for ProjectorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectorVariant {
    type Err = ProjectorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProjectorVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| ProjectorError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorConfig {
    /// Learnable tokens per pooled block (`b`).
    pub tokens: usize,
    /// Output width (`d`).
    pub width: usize,
    /// Widths of encoder levels 0..=L.
    pub level_dims: Vec<usize>,
    pub motif_dim: usize,
    pub variant: ProjectorVariant,
    /// Use `Q = P`, `K = V = Z·W_in` with no query/output maps.
    pub parameter_free: bool,
}

impl ProjectorConfig {
    pub fn for_encoder(gin: &GinConfig, tokens: usize, width: usize) -> Self {
        ProjectorConfig {
            tokens,
            width,
            level_dims: (0..=gin.layers).map(|l| gin.level_dim(l)).collect(),
            motif_dim: MOTIF_DIM,
            variant: ProjectorVariant::MgProj,
            parameter_free: false,
        }
    }

    /// Encoder depth `L`.
    pub fn layers(&self) -> usize {
        self.level_dims.len() - 1
    }

    /// Output rows for a graph of `nodes` atoms.
    pub fn output_rows(&self, nodes: usize) -> usize {
        let b = self.tokens;
        match self.variant {
            ProjectorVariant::MgProj => b * (self.layers() + 2),
            ProjectorVariant::NoMotif => b * (self.layers() + 1),
            ProjectorVariant::Resampler => b,
            ProjectorVariant::Low | ProjectorVariant::High | ProjectorVariant::Concat => nodes,
        }
    }

    fn baseline_input_dim(&self) -> usize {
        match self.variant {
            ProjectorVariant::Low => self.level_dims[1.min(self.layers())],
            ProjectorVariant::High => self.level_dims[self.layers()],
            ProjectorVariant::Concat => self.level_dims.iter().sum(),
            _ => 0,
        }
    }

    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json)[..8])
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn level_prefix(l: usize) -> String {
    format!("proj.level{l}")
}

pub const MOTIF_PREFIX: &str = "proj.motif";
pub const RESAMPLER_PREFIX: &str = "proj.resampler";
pub const NULL_MOTIF: &str = "proj.motif.null";

fn insert_block<R: Rng>(
    store: &mut ParameterStore,
    prefix: &str,
    config: &ProjectorConfig,
    d_in: usize,
    rng: &mut R,
) -> Result<(), NumericsError> {
    let (b, d) = (config.tokens, config.width);
    let bound_d = (d as f64).powf(-0.5);
    let bound_in = (d_in as f64).powf(-0.5);
    store.insert(format!("{prefix}.tokens"), Tensor::uniform(b, d, 1.0, rng), true)?;
    if config.parameter_free {
        if d_in != d {
            store.insert(format!("{prefix}.win"), Tensor::uniform(d_in, d, bound_in, rng), true)?;
        }
        return Ok(());
    }
    store.insert(format!("{prefix}.wq"), Tensor::uniform(d, d, bound_d, rng), true)?;
    store.insert(format!("{prefix}.wk"), Tensor::uniform(d_in, d, bound_in, rng), true)?;
    store.insert(format!("{prefix}.wv"), Tensor::uniform(d_in, d, bound_in, rng), true)?;
    store.insert(format!("{prefix}.wo"), Tensor::uniform(d, d, bound_d, rng), true)?;
    Ok(())
}

fn insert_mlp<R: Rng>(store: &mut ParameterStore, prefix: &str, d_in: usize, d: usize, rng: &mut R) -> Result<(), NumericsError> {
    store.insert(format!("{prefix}.w1"), Tensor::uniform(d_in, d, (d_in as f64).powf(-0.5), rng), true)?;
    store.insert(format!("{prefix}.b1"), Tensor::zeros(1, d), true)?;
    store.insert(format!("{prefix}.w2"), Tensor::uniform(d, d, (d as f64).powf(-0.5), rng), true)?;
    store.insert(format!("{prefix}.b2"), Tensor::zeros(1, d), true)?;
    Ok(())
}

/// Adds the parameters the configured variant needs under `proj.*`.
pub fn init_params<R: Rng>(config: &ProjectorConfig, store: &mut ParameterStore, rng: &mut R) -> Result<(), ProjectorError> {
    match config.variant {
        ProjectorVariant::MgProj | ProjectorVariant::NoMotif => {
            for (l, &d_in) in config.level_dims.iter().enumerate() {
                insert_block(store, &level_prefix(l), config, d_in, rng)?;
            }
            if config.variant == ProjectorVariant::MgProj {
                insert_block(store, MOTIF_PREFIX, config, config.motif_dim, rng)?;
                store.insert(NULL_MOTIF, Tensor::uniform(1, config.motif_dim, 1.0, rng), true)?;
            }
            insert_mlp(store, "proj.fuse", config.width, config.width, rng)?;
        }
        ProjectorVariant::Resampler => {
            insert_block(store, RESAMPLER_PREFIX, config, config.level_dims[config.layers()], rng)?;
        }
        _ => insert_mlp(store, "proj.mlp", config.baseline_input_dim(), config.width, rng)?,
    }
    Ok(())
}

/// Handles for one attention block's weights.
#[derive(Clone, Copy, Debug)]
pub struct BlockVars {
    pub tokens: Var,
    pub wq: Option<Var>,
    pub wk: Option<Var>,
    pub wv: Option<Var>,
    pub wo: Option<Var>,
}

impl BlockVars {
    pub fn bind(tape: &mut Tape, store: &ParameterStore, prefix: &str, parameter_free: bool) -> Result<Self, NumericsError> {
        let tokens = tape.param(store, &format!("{prefix}.tokens"))?;
        if parameter_free {
            let win = format!("{prefix}.win");
            let win = if store.contains(&win) { Some(tape.param(store, &win)?) } else { None };
            return Ok(BlockVars { tokens, wq: None, wk: win, wv: win, wo: None });
        }
        let mut get = |part: &str| tape.param(store, &format!("{prefix}.{part}")).map(Some);
        Ok(BlockVars { tokens, wq: get("wq")?, wk: get("wk")?, wv: get("wv")?, wo: get("wo")? })
    }
}

fn maybe_matmul(tape: &mut Tape, x: Var, w: Option<Var>) -> Result<Var, NumericsError> {
    match w {
        Some(w) => tape.matmul(x, w),
        None => Ok(x),
    }
}

/// `softmax(Q Kᵀ/√d) V` followed by the output map. Returns the pooled rows
/// and the `b × n` attention weights.
pub fn attend(tape: &mut Tape, block: &BlockVars, input: Var) -> Result<(Var, Var), ProjectorError> {
    if tape.value(input).rows() == 0 {
        return Err(ProjectorError::EmptyGraph);
    }
    let q = maybe_matmul(tape, block.tokens, block.wq)?;
    let k = maybe_matmul(tape, input, block.wk)?;
    let v = maybe_matmul(tape, input, block.wv)?;
    let d = tape.value(q).cols() as f64;
    let kt = tape.transpose(k);
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, d.powf(-0.5));
    let weights = tape.row_softmax(scores);
    let pooled = tape.matmul(weights, v)?;
    let out = maybe_matmul(tape, pooled, block.wo)?;
    Ok((out, weights))
}

fn row_mlp(tape: &mut Tape, store: &ParameterStore, prefix: &str, x: Var) -> Result<Var, NumericsError> {
    let w1 = tape.param(store, &format!("{prefix}.w1"))?;
    let b1 = tape.param(store, &format!("{prefix}.b1"))?;
    let w2 = tape.param(store, &format!("{prefix}.w2"))?;
    let b2 = tape.param(store, &format!("{prefix}.b2"))?;
    let h = tape.matmul(x, w1)?;
    let h = tape.add_row(h, b1)?;
    let h = tape.silu(h);
    let h = tape.matmul(h, w2)?;
    tape.add_row(h, b2)
}

/// Output of [`project_tape`]: graph tokens plus each block's attention weights.
pub struct ProjectedVars {
    pub tokens: Var,
    pub attention: Vec<(String, Var)>,
}

/// Runs the configured variant. `levels` are the encoder outputs 0..=L;
/// `motifs` is the `M × d_motif` motif matrix (ignored by variants without a
/// motif block).
pub fn project_tape(
    tape: &mut Tape,
    store: &ParameterStore,
    config: &ProjectorConfig,
    levels: &[Var],
    motifs: &Tensor,
) -> Result<ProjectedVars, ProjectorError> {
    let expected = config.level_dims.len();
    if levels.len() != expected {
        return Err(ProjectorError::LevelCountMismatch { expected, got: levels.len() });
    }
    let last = levels[config.layers()];
    let mut attention = Vec::new();
    let tokens = match config.variant {
        ProjectorVariant::MgProj | ProjectorVariant::NoMotif => {
            let mut pooled = Vec::with_capacity(levels.len() + 1);
            for (l, &z) in levels.iter().enumerate() {
                let prefix = level_prefix(l);
                let block = BlockVars::bind(tape, store, &prefix, config.parameter_free)?;
                let (out, w) = attend(tape, &block, z)?;
                pooled.push(out);
                attention.push((prefix, w));
            }
            if config.variant == ProjectorVariant::MgProj {
                let block = BlockVars::bind(tape, store, MOTIF_PREFIX, config.parameter_free)?;
                let input = if motifs.rows() == 0 {
                    tape.param(store, NULL_MOTIF)?
                } else {
                    tape.leaf(motifs.clone())
                };
                let (out, w) = attend(tape, &block, input)?;
                pooled.push(out);
                attention.push((MOTIF_PREFIX.to_string(), w));
            }
            let stacked = tape.concat_rows(&pooled)?;
            row_mlp(tape, store, "proj.fuse", stacked)?
        }
        ProjectorVariant::Resampler => {
            let block = BlockVars::bind(tape, store, RESAMPLER_PREFIX, config.parameter_free)?;
            let (out, w) = attend(tape, &block, last)?;
            attention.push((RESAMPLER_PREFIX.to_string(), w));
            out
        }
        ProjectorVariant::Low => row_mlp(tape, store, "proj.mlp", levels[1.min(config.layers())])?,
        ProjectorVariant::High => row_mlp(tape, store, "proj.mlp", last)?,
        ProjectorVariant::Concat => {
            let cat = tape.concat_cols(levels)?;
            row_mlp(tape, store, "proj.mlp", cat)?
        }
    };
    Ok(ProjectedVars { tokens, attention })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub molecule: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphTokens {
    pub matrix: Tensor,
    pub provenance: Provenance,
}

impl GraphTokens {
    /// Short SHA-256 digest of the little-endian matrix payload.
    pub fn content_hash(&self) -> String {
        hex(&Sha256::digest(self.matrix.to_le_bytes())[..16])
    }
}

fn run(
    stack: &LayerStack,
    motifs: &Tensor,
    config: &ProjectorConfig,
    store: &ParameterStore,
) -> Result<(Tensor, Vec<(String, Tensor)>), ProjectorError> {
    let mut tape = Tape::new();
    let levels: Vec<Var> = stack.levels.iter().map(|z| tape.leaf(z.clone())).collect();
    let out = project_tape(&mut tape, store, config, &levels, motifs)?;
    let attention = out
        .attention
        .iter()
        .map(|(name, w)| (name.clone(), tape.value(*w).clone()))
        .collect();
    Ok((tape.value(out.tokens).clone(), attention))
}

/// Multi-level projection (`mgproj` or `no-motif`).
pub fn project(
    stack: &LayerStack,
    motifs: &MotifMatrix,
    config: &ProjectorConfig,
    store: &ParameterStore,
    molecule: &str,
) -> Result<GraphTokens, ProjectorError> {
    if config.variant.is_baseline() {
        return Err(ProjectorError::WrongEntryPoint(config.variant));
    }
    let (matrix, _) = run(stack, &motifs.rows, config, store)?;
    Ok(GraphTokens { matrix, provenance: Provenance { molecule: molecule.to_string(), config_hash: config.hash() } })
}

/// Ablation baselines (`low`, `high`, `concat`, `resampler`).
pub fn project_baseline(stack: &LayerStack, config: &ProjectorConfig, store: &ParameterStore) -> Result<Tensor, ProjectorError> {
    if !config.variant.is_baseline() {
        return Err(ProjectorError::WrongEntryPoint(config.variant));
    }
    let empty = Tensor::zeros(0, config.motif_dim);
    Ok(run(stack, &empty, config, store)?.0)
}

/// Attention weights of every pooling block, keyed by parameter prefix.
pub fn attention_maps(
    stack: &LayerStack,
    motifs: &MotifMatrix,
    config: &ProjectorConfig,
    store: &ParameterStore,
) -> Result<Vec<(String, Tensor)>, ProjectorError> {
    Ok(run(stack, &motifs.rows, config, store)?.1)
}

/// Plain-tensor weights of one attention block.
#[derive(Clone, Debug)]
pub struct AttnBlock {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
}

impl AttnBlock {
    pub fn identity(d: usize) -> Self {
        let i = Tensor::identity(d);
        AttnBlock { wq: i.clone(), wk: i.clone(), wv: i.clone(), wo: i }
    }

    pub fn from_store(store: &ParameterStore, prefix: &str) -> Result<Self, NumericsError> {
        let get = |p: &str| store.get(&format!("{prefix}.{p}")).cloned();
        Ok(AttnBlock { wq: get("wq")?, wk: get("wk")?, wv: get("wv")?, wo: get("wo")? })
    }

    fn bind(&self, tape: &mut Tape, tokens: &Tensor) -> BlockVars {
        BlockVars {
            tokens: tape.leaf(tokens.clone()),
            wq: Some(tape.leaf(self.wq.clone())),
            wk: Some(tape.leaf(self.wk.clone())),
            wv: Some(tape.leaf(self.wv.clone())),
            wo: Some(tape.leaf(self.wo.clone())),
        }
    }
}

/// Pools one level's node rows into `tokens.rows()` rows.
pub fn level_pool(tokens: &Tensor, level: &Tensor, block: &AttnBlock) -> Result<Tensor, ProjectorError> {
    let mut tape = Tape::new();
    let vars = block.bind(&mut tape, tokens);
    let input = tape.leaf(level.clone());
    let (out, _) = attend(&mut tape, &vars, input)?;
    Ok(tape.value(out).clone())
}

/// Pools motif rows; an empty motif matrix is replaced by `null_row`.
pub fn motif_pool(tokens: &Tensor, motifs: &MotifMatrix, block: &AttnBlock, null_row: &Tensor) -> Result<Tensor, ProjectorError> {
    let input = if motifs.is_empty() { null_row } else { &motifs.rows };
    level_pool(tokens, input, block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::encoder::{self, encode};
    use crate::motif::motif_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(variant: ProjectorVariant, layers: usize, b: usize, d: usize) -> (GinConfig, ProjectorConfig, ParameterStore) {
        let gin = GinConfig::with_width(layers, d);
        let mut cfg = ProjectorConfig::for_encoder(&gin, b, d);
        cfg.variant = variant;
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        encoder::init_params(&gin, &mut store, &mut rng).unwrap();
        init_params(&cfg, &mut store, &mut rng).unwrap();
        (gin, cfg, store)
    }

    #[test]
    fn identical_values_pool_to_output_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block = AttnBlock {
            wq: Tensor::uniform(3, 3, 1.0, &mut rng),
            wk: Tensor::uniform(3, 3, 1.0, &mut rng),
            wv: Tensor::uniform(3, 3, 1.0, &mut rng),
            wo: Tensor::uniform(3, 3, 1.0, &mut rng),
        };
        let r = vec![0.5, -1.0, 2.0];
        let level = Tensor::from_rows(&[r.clone(), r.clone(), r.clone(), r.clone()]).unwrap();
        let tokens = Tensor::uniform(2, 3, 1.0, &mut rng);
        let out = level_pool(&tokens, &level, &block).unwrap();
        let expect = Tensor::from_rows(&[r]).unwrap().matmul(&block.wv).unwrap().matmul(&block.wo).unwrap();
        for row in 0..2 {
            for c in 0..3 {
                assert!((out.get(row, c) - expect.get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_key_identity_maps() {
        let level = Tensor::from_rows(&[vec![1.5, -2.0]]).unwrap();
        let out = level_pool(&Tensor::zeros(1, 2), &level, &AttnBlock::identity(2)).unwrap();
        assert_eq!(out, level);
    }

    #[test]
    fn empty_level_is_an_error() {
        let err = level_pool(&Tensor::zeros(1, 2), &Tensor::zeros(0, 2), &AttnBlock::identity(2));
        assert_eq!(err, Err(ProjectorError::EmptyGraph));
    }

    #[test]
    fn motif_pool_null_and_tie() {
        let g = parse_smiles("CC").unwrap();
        let m = motif_matrix(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block = AttnBlock {
            wq: Tensor::uniform(4, 4, 1.0, &mut rng),
            wk: Tensor::uniform(MOTIF_DIM, 4, 0.2, &mut rng),
            wv: Tensor::uniform(MOTIF_DIM, 4, 0.2, &mut rng),
            wo: Tensor::uniform(4, 4, 1.0, &mut rng),
        };
        let tokens = Tensor::uniform(3, 4, 1.0, &mut rng);
        let null = Tensor::uniform(1, MOTIF_DIM, 1.0, &mut rng);
        let a = motif_pool(&tokens, &m, &block, &null).unwrap();
        let b = motif_pool(&tokens, &m, &block, &null).unwrap();
        assert_eq!(a, b);
        let expect = null.matmul(&block.wv).unwrap().matmul(&block.wo).unwrap();
        assert!(a.slice_rows(0, 1).unwrap().max_abs_diff(&expect) < 1e-12);

        // duplicating a motif row ties the logits and leaves the output alone
        let diol = motif_matrix(&parse_smiles("OCCO").unwrap());
        let single = motif_matrix(&parse_smiles("CCO").unwrap());
        assert_eq!(diol.rows.row(0), diol.rows.row(1));
        let mut one = diol.clone();
        one.rows = diol.rows.slice_rows(0, 1).unwrap();
        one.group_refs.truncate(1);
        let x = motif_pool(&tokens, &diol, &block, &null).unwrap();
        let y = motif_pool(&tokens, &one, &block, &null).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-12);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn project_shape_and_zero_values() {
        let (gin, cfg, mut store) = setup(ProjectorVariant::MgProj, 5, 4, 32);
        let g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O").unwrap();
        let stack = encode(&g, &gin, &store).unwrap();
        let m = motif_matrix(&g);
        let h = project(&stack, &m, &cfg, &store, "aspirin").unwrap();
        assert_eq!(h.matrix.shape(), (28, 32));

        for l in 0..=5 {
            let name = format!("{}.wv", level_prefix(l));
            let shape = store.get(&name).unwrap().shape();
            store.set(&name, Tensor::zeros(shape.0, shape.1)).unwrap();
        }
        store.set("proj.motif.wv", Tensor::zeros(MOTIF_DIM, 32)).unwrap();
        let a = project(&stack, &m, &cfg, &store, "a").unwrap().matrix;
        let other = parse_smiles("CCN").unwrap();
        let b = project(&encode(&other, &gin, &store).unwrap(), &motif_matrix(&other), &cfg, &store, "b")
            .unwrap()
            .matrix;
        assert_eq!(a, b);
    }

    #[test]
    fn level_count_checked() {
        let (gin, cfg, store) = setup(ProjectorVariant::MgProj, 2, 2, 8);
        let g = parse_smiles("CO").unwrap();
        let mut stack = encode(&g, &gin, &store).unwrap();
        stack.levels.pop();
        assert!(matches!(
            project(&stack, &motif_matrix(&g), &cfg, &store, ""),
            Err(ProjectorError::LevelCountMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn baseline_shapes() {
        let g = parse_smiles("CCOC(=O)C").unwrap();
        for v in [ProjectorVariant::Low, ProjectorVariant::High, ProjectorVariant::Concat, ProjectorVariant::Resampler] {
            let (gin, cfg, store) = setup(v, 3, 2, 8);
            let stack = encode(&g, &gin, &store).unwrap();
            let out = project_baseline(&stack, &cfg, &store).unwrap();
            assert_eq!(out.rows(), cfg.output_rows(g.atom_count()));
            assert_eq!(out.cols(), 8);
        }
    }

    #[test]
    fn resampler_is_level_pool_on_last_level() {
        let (gin, cfg, store) = setup(ProjectorVariant::Resampler, 3, 2, 8);
        let g = parse_smiles("CCOC").unwrap();
        let stack = encode(&g, &gin, &store).unwrap();
        let out = project_baseline(&stack, &cfg, &store).unwrap();
        let block = AttnBlock::from_store(&store, RESAMPLER_PREFIX).unwrap();
        let tokens = store.get("proj.resampler.tokens").unwrap();
        assert_eq!(out, level_pool(tokens, &stack.levels[3], &block).unwrap());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in ProjectorVariant::ALL {
            assert_eq!(v.name().parse::<ProjectorVariant>().unwrap(), v);
        }
        assert!(matches!("bogus".parse::<ProjectorVariant>(), Err(ProjectorError::UnknownVariant(_))));
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let (gin, cfg, store) = setup(ProjectorVariant::MgProj, 2, 3, 8);
        let g = parse_smiles("OCC(N)C(=O)O").unwrap();
        let stack = encode(&g, &gin, &store).unwrap();
        for (_, w) in attention_maps(&stack, &motif_matrix(&g), &cfg, &store).unwrap() {
            for r in 0..w.rows() {
                assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameter_free_variant_runs() {
        let gin = GinConfig::with_width(2, 8);
        let mut cfg = ProjectorConfig::for_encoder(&gin, 2, 8);
        cfg.parameter_free = true;
        let mut store = ParameterStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        encoder::init_params(&gin, &mut store, &mut rng).unwrap();
        init_params(&cfg, &mut store, &mut rng).unwrap();
        assert!(!store.contains("proj.level1.win"));
        assert!(store.contains("proj.level0.win"));
        let g = parse_smiles("CCO").unwrap();
        let h = project(&encode(&g, &gin, &store).unwrap(), &motif_matrix(&g), &cfg, &store, "").unwrap();
        assert_eq!(h.matrix.shape(), (8, 8));
    }
}
