use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, GenerationBackend};
use super::conversation::{filter_conversations, parse_conversation, Conversation, RejectReason};
use super::template::{build_prompt, TemplateId};
use super::{InstructError, MoleculeContext};
use crate::pipeline::ConversationRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub template: TemplateId,
    /// Contexts prompted without exemplars to seed the pool.
    pub exemplar_pool: usize,
    pub exemplars_per_prompt: usize,
    pub max_turns: usize,
    /// Maximum in-flight backend requests.
    pub concurrency: usize,
    pub seed: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            template: TemplateId::Caption,
            exemplar_pool: 50,
            exemplars_per_prompt: 3,
            max_turns: 8,
            concurrency: 4,
            seed: 0,
            max_retries: 4,
            backoff_base_ms: 200,
        }
    }
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<(), InstructError> {
        if self.max_turns == 0 {
            return Err(InstructError::InvalidConfig("max_turns must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(InstructError::InvalidConfig("concurrency must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GenerationStats {
    pub backend: String,
    pub template: String,
    pub seed: u64,
    pub contexts: usize,
    pub pool_requests: usize,
    pub pool_size: usize,
    /// Step-2 responses that parsed into a conversation.
    pub generated: usize,
    pub kept: usize,
    pub rejected: BTreeMap<String, usize>,
    pub retries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationOutput {
    pub records: Vec<ConversationRecord>,
    pub stats: GenerationStats,
}

pub fn to_jsonl(records: &[ConversationRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn call_with_backoff(
    backend: &dyn GenerationBackend,
    prompt: &str,
    config: &GenerateConfig,
    retries: &AtomicUsize,
) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(prompt) {
            Err(e) if e.is_retryable() && attempt < config.max_retries => {
                retries.fetch_add(1, Ordering::Relaxed);
                std::thread::sleep(Duration::from_millis(config.backoff_base_ms.saturating_mul(1 << attempt.min(16))));
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Runs `job(i)` for every index on up to `workers` threads and returns the
/// results in index order.
fn run_parallel<T: Send>(n: usize, workers: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(n).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let r = job(i);
                slots.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("unpoisoned").into_iter().map(|r| r.expect("every slot filled")).collect()
}

enum Outcome {
    Parsed(Conversation),
    Failed(RejectReason),
}

fn request(
    ctx: &MoleculeContext,
    exemplars: &[Conversation],
    backend: &dyn GenerationBackend,
    config: &GenerateConfig,
    retries: &AtomicUsize,
) -> Result<Outcome, InstructError> {
    let prompt = build_prompt(ctx, exemplars, config.template)?;
    Ok(match call_with_backoff(backend, &prompt, config, retries) {
        Err(_) => Outcome::Failed(RejectReason::BackendFailure),
        Ok(text) => match parse_conversation(&text) {
            Ok(c) => Outcome::Parsed(c.with_context(ctx.clone())),
            Err(_) => Outcome::Failed(RejectReason::Malformed),
        },
    })
}

/// Step 1 prompts a seeded sample of up to `exemplar_pool` contexts with no
/// exemplars and keeps the conversations that pass the filter. Step 2
/// prompts every context with `exemplars_per_prompt` pool conversations
/// drawn without replacement (never its own molecule). Step 3 filters.
/// Backend failures and unparseable responses are counted per context and
/// do not stop the run. Output order follows `contexts`.
pub fn generate_dataset(
    contexts: &[MoleculeContext],
    backend: &dyn GenerationBackend,
    config: &GenerateConfig,
) -> Result<GenerationOutput, InstructError> {
    config.validate()?;
    if config.template == TemplateId::CaptionIupac {
        if let Some(i) = contexts.iter().position(|c| c.iupac.is_none()) {
            return Err(InstructError::BadContext { line: i + 1, message: "template needs an IUPAC name".into() });
        }
    }
    let retries = AtomicUsize::new(0);
    let mut stats = GenerationStats {
        backend: backend.name().to_string(),
        template: config.template.name().to_string(),
        seed: config.seed,
        contexts: contexts.len(),
        ..Default::default()
    };

    let mut pool_idx = sample(&mut rng_for(config.seed, 0), contexts.len(), config.exemplar_pool.min(contexts.len())).into_vec();
    pool_idx.sort_unstable();
    stats.pool_requests = pool_idx.len();
    let pool_out = run_parallel(pool_idx.len(), config.concurrency, |k| {
        request(&contexts[pool_idx[k]], &[], backend, config, &retries)
    });
    let mut candidates = Vec::new();
    for o in pool_out {
        if let Outcome::Parsed(c) = o? {
            candidates.push(c);
        }
    }
    let pool = filter_conversations(&candidates, config.max_turns).kept;
    stats.pool_size = pool.len();

    let outcomes = run_parallel(contexts.len(), config.concurrency, |i| {
        let ctx = &contexts[i];
        let eligible: Vec<&Conversation> =
            pool.iter().filter(|c| c.source_context.as_ref().is_none_or(|s| s.smiles != ctx.smiles)).collect();
        let k = config.exemplars_per_prompt.min(eligible.len());
        let picks = sample(&mut rng_for(config.seed, i as u64 + 1), eligible.len(), k);
        let exemplars: Vec<Conversation> = picks.iter().map(|j| eligible[j].clone()).collect();
        request(ctx, &exemplars, backend, config, &retries)
    });

    let mut generated = Vec::new();
    for o in outcomes {
        match o? {
            Outcome::Parsed(c) => generated.push(c),
            Outcome::Failed(r) => *stats.rejected.entry(r.code().to_string()).or_default() += 1,
        }
    }
    stats.generated = generated.len();
    let filtered = filter_conversations(&generated, config.max_turns);
    for r in &filtered.rejected {
        *stats.rejected.entry(r.reason.code().to_string()).or_default() += 1;
    }
    let records: Vec<ConversationRecord> = filtered.kept.iter().filter_map(Conversation::to_record).collect();
    stats.kept = records.len();
    stats.retries = retries.load(Ordering::Relaxed);
    Ok(GenerationOutput { records, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instructgen::{StubBackend, StubMode};

    fn contexts(n: usize) -> Vec<MoleculeContext> {
        (0..n)
            .map(|i| MoleculeContext { smiles: "C".repeat(i + 1), caption: format!("A chain of {} carbons.", i + 1), iupac: None })
            .collect()
    }

    #[test]
    fn stub_two_turn_keeps_everything() {
        let out = generate_dataset(&contexts(6), &StubBackend::default(), &GenerateConfig::default()).unwrap();
        assert_eq!(out.stats.kept, 6);
        assert_eq!(out.records[2].smiles, "CCC");
        assert_eq!(out.records[2].conversation.len(), 2);
    }

    #[test]
    fn stub_dangling_rejects_everything() {
        let out = generate_dataset(&contexts(5), &StubBackend::new(StubMode::Dangling), &GenerateConfig::default()).unwrap();
        assert_eq!(out.stats.kept, 0);
        assert_eq!(out.stats.pool_size, 0);
        assert_eq!(out.stats.rejected.get("incomplete"), Some(&5));
    }

    #[test]
    fn seeded_bytes() {
        let cfg = GenerateConfig { exemplar_pool: 4, concurrency: 3, seed: 11, ..Default::default() };
        let a = generate_dataset(&contexts(10), &StubBackend::default(), &cfg).unwrap();
        let b = generate_dataset(&contexts(10), &StubBackend::default(), &cfg).unwrap();
        assert_eq!(to_jsonl(&a.records), to_jsonl(&b.records));
        assert_eq!(a.stats.pool_size, 4);
    }
}
