//! The `Question:` / `Answer:` block format, blocks separated by `===` lines.

use serde::{Deserialize, Serialize};

use super::{InstructError, MoleculeContext};
use crate::pipeline::{ConversationRecord, ConversationTurn};

pub const SEPARATOR: &str = "===";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub turns: Vec<ConversationTurn>,
    /// A trailing question that never got an answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_context: Option<MoleculeContext>,
}

impl Conversation {
    pub fn from_pairs<Q: Into<String>, A: Into<String>>(pairs: impl IntoIterator<Item = (Q, A)>) -> Self {
        Conversation {
            turns: pairs.into_iter().map(|(q, a)| ConversationTurn { question: q.into(), answer: a.into() }).collect(),
            ..Default::default()
        }
    }

    /// At least one turn, no dangling question, no empty question or answer.
    pub fn is_complete(&self) -> bool {
        self.pending_question.is_none()
            && !self.turns.is_empty()
            && self.turns.iter().all(|t| !t.question.trim().is_empty() && !t.answer.trim().is_empty())
    }

    pub fn with_context(mut self, ctx: MoleculeContext) -> Self {
        self.source_context = Some(ctx);
        self
    }

    /// Output record; `None` without a source context.
    pub fn to_record(&self) -> Option<ConversationRecord> {
        let ctx = self.source_context.as_ref()?;
        Some(ConversationRecord {
            smiles: ctx.smiles.clone(),
            caption: ctx.caption.clone(),
            iupac: ctx.iupac.clone(),
            conversation: self.turns.clone(),
        })
    }
}

enum Block {
    Question(String),
    Answer(String),
}

fn parse_block(index: usize, lines: &[&str]) -> Result<Block, InstructError> {
    let mut it = lines.iter().map(|l| l.trim_end()).skip_while(|l| l.trim().is_empty());
    let first = it.next().ok_or_else(|| InstructError::MalformedBlock { block: index, found: String::new() })?;
    let head = first.trim_start();
    let (kind, rest) = if let Some(r) = head.strip_prefix("Question:") {
        (true, r)
    } else if let Some(r) = head.strip_prefix("Answer:") {
        (false, r)
    } else {
        return Err(InstructError::MalformedBlock { block: index, found: head.to_string() });
    };
    let mut body: Vec<&str> = Vec::new();
    if !rest.trim().is_empty() {
        body.push(rest.trim());
    }
    body.extend(it);
    let text = body.join("\n").trim().to_string();
    Ok(if kind { Block::Question(text) } else { Block::Answer(text) })
}

/// Parses a response in the block format. A trailing question with no
/// answer sets `pending_question`; an answer with no question before it, or
/// a block with another header, is malformed.
pub fn parse_conversation(text: &str) -> Result<Conversation, InstructError> {
    let mut groups: Vec<Vec<&str>> = vec![Vec::new()];
    for line in text.lines() {
        if line.trim() == SEPARATOR {
            groups.push(Vec::new());
        } else {
            groups.last_mut().expect("non-empty").push(line);
        }
    }
    let groups: Vec<Vec<&str>> = groups.into_iter().filter(|g| g.iter().any(|l| !l.trim().is_empty())).collect();
    if groups.is_empty() {
        return Err(InstructError::MalformedBlock { block: 0, found: String::new() });
    }

    let mut conv = Conversation::default();
    let mut open: Option<String> = None;
    for (i, g) in groups.iter().enumerate() {
        match (parse_block(i, g)?, open.take()) {
            (Block::Question(q), None) => open = Some(q),
            (Block::Answer(a), Some(q)) => conv.turns.push(ConversationTurn { question: q, answer: a }),
            (Block::Question(_), Some(_)) => {
                return Err(InstructError::MalformedBlock { block: i, found: "Question: (expected Answer:)".into() })
            }
            (Block::Answer(_), None) => {
                return Err(InstructError::MalformedBlock { block: i, found: "Answer: (expected Question:)".into() })
            }
        }
    }
    conv.pending_question = open;
    Ok(conv)
}

pub fn serialize_conversation(conv: &Conversation) -> String {
    let mut blocks: Vec<String> = Vec::new();
    for t in &conv.turns {
        blocks.push(format!("Question:\n{}", t.question));
        blocks.push(format!("Answer:\n{}", t.answer));
    }
    if let Some(q) = &conv.pending_question {
        blocks.push(format!("Question:\n{q}"));
    }
    blocks.join(&format!("\n{SEPARATOR}\n"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Incomplete,
    TooManyTurns,
    Malformed,
    BackendFailure,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Incomplete => "incomplete",
            RejectReason::TooManyTurns => "too-many-turns",
            RejectReason::Malformed => "malformed",
            RejectReason::BackendFailure => "backend-failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rejection {
    pub index: usize,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<Conversation>,
    pub rejected: Vec<Rejection>,
}

/// Keeps complete conversations with at most `max_turns` turns, in order.
/// Incompleteness is reported ahead of length.
pub fn filter_conversations(convs: &[Conversation], max_turns: usize) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for (index, c) in convs.iter().enumerate() {
        if !c.is_complete() {
            out.rejected.push(Rejection { index, reason: RejectReason::Incomplete });
        } else if c.turns.len() > max_turns {
            out.rejected.push(Rejection { index, reason: RejectReason::TooManyTurns });
        } else {
            out.kept.push(c.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TWO_TURNS: &str = "Question:\nWhat is it?\n===\nAnswer:\nAn acid.\n===\nQuestion:\nWhy?\n===\nAnswer:\nIt has a carboxyl group.";

    #[test]
    fn parses_pairs() {
        let c = parse_conversation(TWO_TURNS).unwrap();
        assert_eq!(c.turns.len(), 2);
        assert_eq!(c.turns[1].answer, "It has a carboxyl group.");
        assert!(c.is_complete());
        assert_eq!(serialize_conversation(&c), TWO_TURNS);
    }

    #[test]
    fn dangling_and_malformed() {
        let c = parse_conversation(&format!("{TWO_TURNS}\n===\nQuestion:\nAnd?")).unwrap();
        assert_eq!(c.pending_question.as_deref(), Some("And?"));
        assert!(!c.is_complete());
        assert!(matches!(parse_conversation(""), Err(InstructError::MalformedBlock { .. })));
        assert!(matches!(parse_conversation("Note:\nhi"), Err(InstructError::MalformedBlock { block: 0, .. })));
        assert!(matches!(parse_conversation("Answer:\nno"), Err(InstructError::MalformedBlock { .. })));
    }

    #[test]
    fn inline_headers() {
        let c = parse_conversation("Question: Is it polar?\n===\nAnswer: Yes.\n").unwrap();
        assert_eq!(c.turns[0].question, "Is it polar?");
        assert_eq!(c.turns[0].answer, "Yes.");
    }

    #[test]
    fn filter_reasons() {
        let three = Conversation::from_pairs((0..3).map(|i| (format!("q{i}"), format!("a{i}"))));
        let twelve = Conversation::from_pairs((0..12).map(|i| (format!("q{i}"), format!("a{i}"))));
        let mut dangling = three.clone();
        dangling.pending_question = Some("q?".into());
        let out = filter_conversations(&[three.clone(), twelve, dangling], 8);
        assert_eq!(out.kept, vec![three]);
        assert_eq!(
            out.rejected,
            vec![
                Rejection { index: 1, reason: RejectReason::TooManyTurns },
                Rejection { index: 2, reason: RejectReason::Incomplete }
            ]
        );
        assert_eq!(filter_conversations(&out.kept, 8).kept, out.kept);
    }

    fn block_text() -> impl Strategy<Value = String> {
        "[a-zA-Z?. ]{0,12}( \n[a-z ]{0,6})?"
    }

    proptest! {
        #[test]
        fn normalization_is_a_fixed_point(
            pairs in proptest::collection::vec((block_text(), block_text()), 1..5),
            tail in proptest::option::of(block_text()),
        ) {
            let mut text = pairs.iter().map(|(q, a)| format!("Question: {q}\n===\nAnswer:\n{a}")).collect::<Vec<_>>().join("\n===\n");
            if let Some(t) = tail {
                text.push_str(&format!("\n===\nQuestion:\n{t}"));
            }
            let once = parse_conversation(&text).unwrap();
            let s1 = serialize_conversation(&once);
            let twice = parse_conversation(&s1).unwrap();
            prop_assert_eq!(&twice, &once);
            prop_assert_eq!(serialize_conversation(&twice), s1);
        }
    }
}
