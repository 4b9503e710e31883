use serde::Serialize;

use super::vocab::{BOS, PAD, SEP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Smiles,
    Graph,
    Text,
    Response,
}

/// One input position: a token id or a row of the graph-token matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Token(usize),
    Graph(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Position range `[start, end)` in the flattened sequence.
    pub start: usize,
    pub end: usize,
}

/// Flattened multimodal input:
/// `BOS S SEP G SEP T₁ SEP Y₁ [SEP T₂ SEP Y₂ ...]`.
///
/// Loss positions are exactly the response tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FusedSequence {
    pub slots: Vec<Slot>,
    pub loss_mask: Vec<bool>,
    pub segments: Vec<Segment>,
    pub graph_rows: usize,
}

impl FusedSequence {
    /// Single-turn sequence; `response_ids` is usually terminated by EOS.
    pub fn new(smiles_ids: &[usize], graph_rows: usize, text_ids: &[usize], response_ids: &[usize]) -> Self {
        Self::with_turns(smiles_ids, graph_rows, &[(text_ids.to_vec(), response_ids.to_vec())])
    }

    /// Multi-turn sequence. An empty final response leaves the sequence
    /// ending in SEP, ready for generation.
    pub fn with_turns(smiles_ids: &[usize], graph_rows: usize, turns: &[(Vec<usize>, Vec<usize>)]) -> Self {
        let mut seq = FusedSequence { slots: Vec::new(), loss_mask: Vec::new(), segments: Vec::new(), graph_rows };
        seq.push_token(BOS, false);
        seq.push_segment(SegmentKind::Smiles, smiles_ids);
        seq.push_token(SEP, false);
        let start = seq.slots.len();
        for r in 0..graph_rows {
            seq.slots.push(Slot::Graph(r));
            seq.loss_mask.push(false);
        }
        seq.segments.push(Segment { kind: SegmentKind::Graph, start, end: seq.slots.len() });
        for (text, response) in turns {
            seq.push_token(SEP, false);
            seq.push_segment(SegmentKind::Text, text);
            seq.push_token(SEP, false);
            seq.push_segment(SegmentKind::Response, response);
        }
        seq
    }

    fn push_token(&mut self, id: usize, loss: bool) {
        self.slots.push(Slot::Token(id));
        self.loss_mask.push(loss);
    }

    fn push_segment(&mut self, kind: SegmentKind, ids: &[usize]) {
        let start = self.slots.len();
        let loss = kind == SegmentKind::Response;
        for &id in ids {
            self.push_token(id, loss);
        }
        self.segments.push(Segment { kind, start, end: self.slots.len() });
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn loss_positions(&self) -> usize {
        self.loss_mask.iter().filter(|m| **m).count()
    }

    /// Appends a generated token to the final response segment.
    pub fn push_response_token(&mut self, id: usize) {
        let pos = self.slots.len();
        self.slots.push(Slot::Token(id));
        self.loss_mask.push(false);
        match self.segments.last_mut() {
            Some(seg) if seg.kind == SegmentKind::Response && seg.end == pos => seg.end += 1,
            _ => self.segments.push(Segment { kind: SegmentKind::Response, start: pos, end: pos + 1 }),
        }
    }

    /// Right-pads with PAD slots that carry no loss.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        while out.slots.len() < len {
            out.push_token(PAD, false);
        }
        out
    }

    /// Token ids with graph slots shown as `GRAPH_SLOT`.
    pub fn token_view(&self) -> Vec<usize> {
        self.slots
            .iter()
            .map(|s| match s {
                Slot::Token(id) => *id,
                Slot::Graph(_) => super::vocab::GRAPH_SLOT,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_mask() {
        let seq = FusedSequence::new(&[10, 11], 4, &[20, 21, 22], &[30, 31]);
        // BOS S SEP G SEP T SEP Y
        assert_eq!(seq.len(), 1 + 2 + 1 + 4 + 1 + 3 + 1 + 2);
        assert_eq!(seq.loss_positions(), 2);
        let kinds: Vec<SegmentKind> = seq.segments.iter().map(|s| s.kind).collect();
        assert_eq!(kinds, vec![SegmentKind::Smiles, SegmentKind::Graph, SegmentKind::Text, SegmentKind::Response]);
        for (i, m) in seq.loss_mask.iter().enumerate() {
            if *m {
                let seg = seq.segments.iter().find(|s| s.start <= i && i < s.end).unwrap();
                assert_eq!(seg.kind, SegmentKind::Response);
            }
        }
    }

    #[test]
    fn multi_turn_mask_counts_answers() {
        let turns = vec![(vec![1, 2, 3], vec![7, 8]), (vec![4], vec![9, 9, 9])];
        let seq = FusedSequence::with_turns(&[5], 2, &turns);
        assert_eq!(seq.loss_positions(), 5);
        assert_eq!(seq.padded(seq.len() + 3).loss_positions(), 5);
    }
}
