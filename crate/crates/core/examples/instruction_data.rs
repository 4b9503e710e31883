//! Generate multi-turn instruction data with the offline stub backend.
//!
//! Point `--endpoint` style code at `HttpBackend::from_env` to use a real
//! completion service.

use molgraph::instructgen::{
    build_prompt, generate_dataset, parse_conversation, to_jsonl, GenerateConfig, MoleculeContext, StubBackend,
    TemplateId,
};

fn main() {
    let contexts: Vec<MoleculeContext> = [("CCO", "Ethanol is a primary alcohol."), ("CC(=O)O", "Acetic acid is a simple carboxylic acid."), ("c1ccccc1", "Benzene is an aromatic hydrocarbon.")]
        .iter()
        .map(|(s, c)| MoleculeContext { smiles: s.to_string(), caption: c.to_string(), iupac: None })
        .collect();

    println!("{}", build_prompt(&contexts[0], &[], TemplateId::Caption).unwrap());

    let config = GenerateConfig { exemplar_pool: 2, exemplars_per_prompt: 1, seed: 4, ..Default::default() };
    let out = generate_dataset(&contexts, &StubBackend::default(), &config).unwrap();
    print!("{}", to_jsonl(&out.records));
    println!("{}", serde_json::to_string_pretty(&out.stats).unwrap());

    let conv = parse_conversation("Question:\nIs it polar?\n===\nAnswer:\nYes.").unwrap();
    println!("parsed {} turn(s), complete: {}", conv.turns.len(), conv.is_complete());
}
