use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use molgraph::chem::GraphSummary;
use molgraph::encoder::{self, GinConfig, LayerStack};
use molgraph::instructgen::{self, GenerateConfig, GenerationBackend, HttpBackend, StubBackend, StubMode, TemplateId};
use molgraph::metrics::{self, Metric};
use molgraph::motif::{detect_with_catalog, motif_matrix, Catalog};
use molgraph::pipeline::{self, Dataset, TrainingConfig};
use molgraph::projector::{self, GraphTokens, ProjectorConfig, ProjectorVariant, Provenance};
use molgraph::{parse_smiles, ModelConfig, MolGraphModel, ParameterStore};

#[derive(Parser)]
#[command(name = "molgraph", version, about = "Molecular graph-language toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Random encoder shape, used when no checkpoint is given.
#[derive(clap::Args, Clone)]
struct Arch {
    #[arg(long, default_value_t = 5)]
    layers: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 8)]
    tokens: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a SMILES string.
    Parse {
        smiles: String,
        #[arg(long)]
        json: bool,
    },
    /// Detect functional groups.
    Motifs {
        smiles: String,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Run the encoder and write every level as CSV.
    Encode {
        smiles: String,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        dump_stack: PathBuf,
        #[command(flatten)]
        arch: Arch,
    },
    /// Mean pairwise cosine distance of node rows per encoder layer, as CSV.
    Oversmooth {
        smiles: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,5")]
        layers: Vec<usize>,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Project a molecule into graph tokens.
    Project {
        smiles: String,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        variant: Option<ProjectorVariant>,
        #[arg(long)]
        dump_attn: Option<PathBuf>,
        #[command(flatten)]
        arch: Arch,
    },
    /// Greedy response generation.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        smiles: String,
        #[arg(long)]
        instruction: String,
        #[arg(long, default_value_t = 128)]
        max_len: usize,
    },
    /// Stage 1 or stage 2 training.
    Train {
        #[arg(long)]
        stage: u8,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        ckpt_out: PathBuf,
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Text-only decoder steps before stage 1 (fresh models only).
        #[arg(long, default_value_t = 0)]
        pretrain_steps: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 4)]
        tokens: usize,
        #[arg(long)]
        variant: Option<ProjectorVariant>,
    },
    /// Generate multi-turn instruction data.
    Instructgen {
        #[arg(long)]
        contexts: PathBuf,
        #[arg(long, default_value = "stub")]
        backend: String,
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long, default_value = "caption")]
        template: String,
        #[arg(long, default_value_t = 8)]
        max_turns: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        pool: usize,
        #[arg(long, default_value_t = 3)]
        exemplars: usize,
        #[arg(long, default_value_t = 4)]
        concurrency: usize,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Score predictions against references.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "bleu,meteor,exact,lev")]
        metrics: String,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        per_sample: bool,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Parse { smiles, json } => parse(&smiles, json),
        Command::Motifs { smiles, catalog } => motifs(&smiles, catalog.as_deref()),
        Command::Encode { smiles, ckpt, dump_stack, arch } => encode(&smiles, ckpt.as_deref(), &dump_stack, &arch),
        Command::Oversmooth { smiles, layers, ckpt, width, seed } => oversmooth(&smiles, &layers, ckpt.as_deref(), width, seed),
        Command::Project { smiles, ckpt, variant, dump_attn, arch } => {
            project(&smiles, ckpt.as_deref(), variant, dump_attn.as_deref(), &arch)
        }
        Command::Generate { ckpt, smiles, instruction, max_len } => {
            let model = pipeline::load_model(&ckpt)?;
            println!("{}", model.generate(&smiles, &instruction, max_len)?);
            Ok(())
        }
        Command::Train { stage, data, config, ckpt_out, resume, pretrain_steps, layers, width, tokens, variant } => train(
            TrainArgs { stage, data, config, ckpt_out, resume, pretrain_steps, layers, width, tokens, variant },
        ),
        Command::Instructgen {
            contexts,
            backend,
            endpoint,
            template,
            max_turns,
            seed,
            out,
            pool,
            exemplars,
            concurrency,
            stats,
        } => {
            let template: TemplateId = template.parse()?;
            let config = GenerateConfig {
                template,
                exemplar_pool: pool,
                exemplars_per_prompt: exemplars,
                max_turns,
                concurrency,
                seed,
                ..Default::default()
            };
            let backend: Box<dyn GenerationBackend> = match backend.as_str() {
                "stub" => Box::new(StubBackend::new(StubMode::TwoTurn)),
                "stub-dangling" => Box::new(StubBackend::new(StubMode::Dangling)),
                "http" => Box::new(HttpBackend::from_env(endpoint.context("--endpoint is required for the http backend")?)),
                other => bail!("unknown backend `{other}` (expected stub or http)"),
            };
            let ctxs = instructgen::load_contexts(&contexts)?;
            let result = instructgen::generate_dataset(&ctxs, backend.as_ref(), &config)?;
            fs::write(&out, instructgen::to_jsonl(&result.records)).with_context(|| format!("writing {}", out.display()))?;
            let report = serde_json::to_string_pretty(&result.stats)?;
            if let Some(p) = stats {
                fs::write(p, &report)?;
            }
            println!("{report}");
            Ok(())
        }
        Command::Eval { pred, gold, metrics, report, per_sample } => eval(&pred, &gold, &metrics, report.as_deref(), per_sample),
    }
}

fn parse(smiles: &str, json: bool) -> Result<()> {
    match parse_smiles(smiles) {
        Ok(g) => {
            if json {
                let s = GraphSummary {
                    smiles,
                    valid: true,
                    error: None,
                    atoms: &g.atoms,
                    bonds: &g.bonds,
                    fragments: g.fragment_count,
                    rings: g.ring_count(),
                };
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                println!("atoms {} bonds {} rings {}", g.atom_count(), g.bond_count(), g.ring_count());
            }
            Ok(())
        }
        Err(e) => {
            if json {
                let s = GraphSummary { smiles, valid: false, error: Some(e.to_string()), atoms: &[], bonds: &[], fragments: 0, rings: 0 };
                println!("{}", serde_json::to_string_pretty(&s)?);
            }
            Err(e).context(format!("cannot parse `{smiles}`"))
        }
    }
}

fn motifs(smiles: &str, catalog: Option<&Path>) -> Result<()> {
    let g = parse_smiles(smiles)?;
    let catalog = match catalog {
        Some(p) => Catalog::from_json(&fs::read_to_string(p)?)?,
        None => Catalog::default(),
    };
    println!("{}", serde_json::to_string_pretty(&detect_with_catalog(&g, &catalog))?);
    Ok(())
}

fn random_gin(layers: usize, width: usize, seed: u64) -> Result<(GinConfig, ParameterStore)> {
    let config = GinConfig::with_width(layers, width);
    let mut store = ParameterStore::new();
    encoder::init_params(&config, &mut store, &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok((config, store))
}

fn encoder_for(ckpt: Option<&Path>, layers: usize, width: usize, seed: u64) -> Result<(GinConfig, ParameterStore)> {
    match ckpt {
        Some(p) => {
            let m = pipeline::load_model(p)?;
            Ok((m.config.gnn.clone(), m.store))
        }
        None => random_gin(layers, width, seed),
    }
}

fn stack_for(smiles: &str, config: &GinConfig, store: &ParameterStore) -> Result<LayerStack> {
    Ok(encoder::encode(&parse_smiles(smiles)?, config, store)?)
}

fn encode(smiles: &str, ckpt: Option<&Path>, dir: &Path, arch: &Arch) -> Result<()> {
    let (config, store) = encoder_for(ckpt, arch.layers, arch.width, arch.seed)?;
    let stack = stack_for(smiles, &config, &store)?;
    fs::create_dir_all(dir)?;
    for (l, level) in stack.levels.iter().enumerate() {
        fs::write(dir.join(format!("level{l}.csv")), encoder::level_csv(level))?;
    }
    println!("wrote {} levels of {} nodes to {}", stack.levels.len(), stack.node_count(), dir.display());
    Ok(())
}

fn oversmooth(smiles: &str, layers: &[usize], ckpt: Option<&Path>, width: usize, seed: u64) -> Result<()> {
    let depth = layers.iter().copied().max().unwrap_or(0);
    let (config, store) = encoder_for(ckpt, depth.max(1), width, seed)?;
    if depth > config.layers {
        bail!("checkpoint encoder has {} layers, asked for layer {depth}", config.layers);
    }
    let stats = encoder::oversmoothing_stats(&stack_for(smiles, &config, &store)?)?;
    print!("{}", encoder::oversmoothing_csv(&stats, layers));
    Ok(())
}

fn project(smiles: &str, ckpt: Option<&Path>, variant: Option<ProjectorVariant>, dump: Option<&Path>, arch: &Arch) -> Result<()> {
    let (gin, pcfg, store) = match ckpt {
        Some(p) => {
            let m = pipeline::load_model(p)?;
            if let Some(v) = variant.filter(|v| *v != m.config.projector.variant) {
                bail!("checkpoint was trained with the {} projector, not {v}", m.config.projector.variant);
            }
            (m.config.gnn.clone(), m.config.projector.clone(), m.store)
        }
        None => {
            let (gin, mut store) = random_gin(arch.layers, arch.width, arch.seed)?;
            let mut pcfg = ProjectorConfig::for_encoder(&gin, arch.tokens, arch.width);
            pcfg.variant = variant.unwrap_or(ProjectorVariant::MgProj);
            projector::init_params(&pcfg, &mut store, &mut ChaCha8Rng::seed_from_u64(arch.seed ^ 1))?;
            (gin, pcfg, store)
        }
    };
    let graph = parse_smiles(smiles)?;
    let stack = encoder::encode(&graph, &gin, &store)?;
    let motifs = motif_matrix(&graph);
    let tokens = if pcfg.variant.is_baseline() {
        let matrix = projector::project_baseline(&stack, &pcfg, &store)?;
        GraphTokens { matrix, provenance: Provenance { molecule: smiles.to_string(), config_hash: pcfg.hash() } }
    } else {
        projector::project(&stack, &motifs, &pcfg, &store, smiles)?
    };
    let (r, c) = tokens.matrix.shape();
    println!("variant {}", pcfg.variant);
    println!("shape {r}x{c}");
    println!("hash {}", tokens.content_hash());
    if let Some(dir) = dump {
        fs::create_dir_all(dir)?;
        let maps = projector::attention_maps(&stack, &motifs, &pcfg, &store)?;
        for (name, w) in &maps {
            fs::write(dir.join(format!("{name}.csv")), encoder::level_csv(w))?;
        }
        println!("wrote {} attention maps to {}", maps.len(), dir.display());
    }
    Ok(())
}

struct TrainArgs {
    stage: u8,
    data: PathBuf,
    config: Option<PathBuf>,
    ckpt_out: PathBuf,
    resume: Option<PathBuf>,
    pretrain_steps: usize,
    layers: usize,
    width: usize,
    tokens: usize,
    variant: Option<ProjectorVariant>,
}

fn train(a: TrainArgs) -> Result<()> {
    let data = Dataset::load_jsonl(&a.data)?;
    for q in &data.quarantined {
        eprintln!("quarantined line {}: {} ({})", q.line, q.smiles, q.reason);
    }
    let mut config = match &a.config {
        Some(p) => TrainingConfig::from_json(&fs::read_to_string(p)?, a.stage)?,
        None => TrainingConfig::for_stage(a.stage)?,
    };
    if config.stage != a.stage {
        bail!("config says stage {}, command line says {}", config.stage, a.stage);
    }
    config.apply_env()?;
    let mut model = match &a.resume {
        Some(p) => pipeline::load_model(p)?,
        None => {
            let mut mc = ModelConfig::new(data.vocabulary(), a.layers, a.tokens, a.width, config.seed);
            if let Some(v) = a.variant {
                mc = mc.with_variant(v);
            }
            MolGraphModel::new(mc)?
        }
    };
    let mut log = |l: &pipeline::StepLog| println!("{}", json!({"step": l.step, "lr": l.lr, "loss": l.loss}));
    if a.pretrain_steps > 0 {
        if a.resume.is_some() {
            bail!("--pretrain-steps applies to fresh models only");
        }
        let mut pc = TrainingConfig::decoder_pretraining(a.pretrain_steps);
        pc.seed = config.seed;
        pipeline::pretrain_decoder_with(&data, &mut model, &pc, &mut |l| eprintln!("pretrain {} {:.6}", l.step, l.loss))?;
    }
    let report = match a.stage {
        1 => pipeline::train_stage1_with(&data, &mut model, &config, &mut log)?,
        _ => pipeline::train_stage2_with(&data, &mut model, &config, &mut log)?,
    };
    pipeline::save_model(&model, &a.ckpt_out)?;
    eprintln!(
        "stage {} done: {} steps, loss {:.6} -> {:.6}, saved {}",
        a.stage,
        report.steps.len(),
        report.initial_loss().unwrap_or(f64::NAN),
        report.final_loss().unwrap_or(f64::NAN),
        a.ckpt_out.display()
    );
    Ok(())
}

/// Each line is a JSON string or an object carrying the text under one of
/// `prediction`, `response`, `text` or `answer`.
fn read_texts(path: &Path) -> Result<Vec<String>> {
    let body = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        let text = match &v {
            Value::String(s) => s.clone(),
            Value::Object(o) => ["prediction", "response", "text", "answer"]
                .iter()
                .find_map(|k| o.get(*k).and_then(Value::as_str))
                .with_context(|| format!("{}:{}: no text field", path.display(), i + 1))?
                .to_string(),
            _ => bail!("{}:{}: expected a string or an object", path.display(), i + 1),
        };
        out.push(text);
    }
    Ok(out)
}

fn eval(pred: &Path, gold: &Path, names: &str, report: Option<&Path>, per_sample: bool) -> Result<()> {
    let metrics: Vec<Metric> = Metric::parse_list(names)?;
    let r = metrics::evaluate(&read_texts(pred)?, &read_texts(gold)?, &metrics, per_sample)?;
    let text = serde_json::to_string_pretty(&r)?;
    if let Some(p) = report {
        fs::write(p, &text)?;
    }
    println!("{text}");
    Ok(())
}
