use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::chem::parse_smiles;
use crate::lm::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Caption,
    Iupac,
    Property,
    ForwardReaction,
    Retrosynthesis,
    Conversation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub smiles: String,
    pub instruction: String,
    pub response: String,
    pub task: Task,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub question: String,
    pub answer: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationRecord {
    pub smiles: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iupac: Option<String>,
    pub conversation: Vec<ConversationTurn>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetRecord {
    Sample(SampleRecord),
    Conversation(ConversationRecord),
}

/// One training example: a molecule and its (instruction, response) turns.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub smiles: String,
    pub task: Task,
    pub turns: Vec<(String, String)>,
}

impl From<DatasetRecord> for Example {
    fn from(r: DatasetRecord) -> Self {
        match r {
            DatasetRecord::Sample(s) => Example { smiles: s.smiles, task: s.task, turns: vec![(s.instruction, s.response)] },
            DatasetRecord::Conversation(c) => Example {
                smiles: c.smiles,
                task: Task::Conversation,
                turns: c.conversation.into_iter().map(|t| (t.question, t.answer)).collect(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Quarantined {
    pub line: usize,
    pub smiles: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub quarantined: Vec<Quarantined>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Character vocabulary covering every SMILES, instruction and response.
    pub fn vocabulary(&self) -> Vocabulary {
        Vocabulary::from_corpus(
            self.examples
                .iter()
                .flat_map(|e| std::iter::once(e.smiles.as_str()).chain(e.turns.iter().flat_map(|(q, a)| [q.as_str(), a.as_str()]))),
        )
    }

    pub fn with_task(&self, task: Task) -> Dataset {
        Dataset {
            examples: self.examples.iter().filter(|e| e.task == task).cloned().collect(),
            quarantined: Vec::new(),
        }
    }

    pub fn from_records(records: impl IntoIterator<Item = DatasetRecord>) -> Dataset {
        let mut ds = Dataset::default();
        for (i, r) in records.into_iter().enumerate() {
            ds.push(i + 1, r);
        }
        ds
    }

    fn push(&mut self, line: usize, record: DatasetRecord) {
        let example = Example::from(record);
        match parse_smiles(&example.smiles) {
            Ok(_) if example.turns.is_empty() => self.quarantined.push(Quarantined {
                line,
                smiles: example.smiles,
                reason: "no turns".into(),
            }),
            Ok(_) => self.examples.push(example),
            Err(e) => self.quarantined.push(Quarantined { line, smiles: example.smiles, reason: e.to_string() }),
        }
    }

    /// Parses JSONL; records whose SMILES does not parse are quarantined,
    /// malformed JSON is an error.
    pub fn parse_jsonl(text: &str) -> Result<Dataset, PipelineError> {
        let mut ds = Dataset::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: DatasetRecord = serde_json::from_str(line)
                .map_err(|e| PipelineError::BadRecord { line: i + 1, message: e.to_string() })?;
            ds.push(i + 1, record);
        }
        Ok(ds)
    }

    pub fn load_jsonl(path: &Path) -> Result<Dataset, PipelineError> {
        Self::parse_jsonl(&std::fs::read_to_string(path)?)
    }
}

/// Concatenates datasets and shuffles with a fixed seed, so each source is
/// sampled in proportion to its size.
pub fn mix(datasets: &[Dataset], seed: u64) -> Dataset {
    let mut out = Dataset::default();
    for d in datasets {
        out.examples.extend(d.examples.iter().cloned());
        out.quarantined.extend(d.quarantined.iter().cloned());
    }
    out.examples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_record_kinds_and_quarantines() {
        let text = concat!(
            r#"{"smiles":"CCO","instruction":"Describe.","response":"ethanol","task":"caption"}"#,
            "\n",
            r#"{"smiles":"C1CC","instruction":"Describe.","response":"bad","task":"caption"}"#,
            "\n\n",
            r#"{"smiles":"CC(=O)O","caption":"acetic acid","conversation":[{"question":"q1","answer":"a1"},{"question":"q2","answer":"a2"}]}"#,
            "\n"
        );
        let ds = Dataset::parse_jsonl(text).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.quarantined.len(), 1);
        assert_eq!(ds.quarantined[0].line, 2);
        assert_eq!(ds.examples[1].task, Task::Conversation);
        assert_eq!(ds.examples[1].turns.len(), 2);
        assert!(Dataset::parse_jsonl("{not json").is_err());
    }

    #[test]
    fn mixing_is_seeded() {
        let a = Dataset::from_records((0..10).map(|i| {
            DatasetRecord::Sample(SampleRecord {
                smiles: "C".repeat(i + 1),
                instruction: "i".into(),
                response: "r".into(),
                task: Task::Caption,
            })
        }));
        let b = a.with_task(Task::Caption);
        assert_eq!(mix(&[a.clone(), b.clone()], 3), mix(&[a.clone(), b.clone()], 3));
        assert_eq!(mix(&[a, b], 3).len(), 20);
    }
}
