use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const GRAPH_SLOT: usize = 3;
pub const SEP: usize = 4;
pub const RESERVED: usize = 5;
const BYTE_BASE: usize = RESERVED;
const CHAR_BASE: usize = BYTE_BASE + 256;

/// Character-level vocabulary with a byte fallback.
///
/// Ids `0..5` are reserved, the next 256 ids are raw bytes, and the corpus
/// characters follow in sorted order. Characters outside the corpus are
/// written as their UTF-8 bytes, so every string round-trips.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    chars: String,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Vocabulary::from_chars(r.chars.chars().collect())
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr { chars: v.chars.iter().collect() }
    }
}

impl Vocabulary {
    fn from_chars(chars: Vec<char>) -> Self {
        let index = chars.iter().enumerate().map(|(i, c)| (*c, CHAR_BASE + i)).collect();
        Vocabulary { chars, index }
    }

    pub fn from_corpus<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<char> = texts.into_iter().flat_map(str::chars).collect();
        Self::from_chars(set.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        CHAR_BASE + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn char_count(&self) -> usize {
        self.chars.len()
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::with_capacity(text.len());
        for c in text.chars() {
            match self.index.get(&c) {
                Some(&id) => ids.push(id),
                None => {
                    let mut buf = [0u8; 4];
                    ids.extend(c.encode_utf8(&mut buf).bytes().map(|b| BYTE_BASE + b as usize));
                }
            }
        }
        ids
    }

    /// Tokens of `text` followed by EOS.
    pub fn encode_response(&self, text: &str) -> Vec<usize> {
        let mut ids = self.tokenize(text);
        ids.push(EOS);
        ids
    }

    /// Inverse of [`tokenize`](Self::tokenize). Reserved ids are skipped;
    /// stray byte sequences that are not valid UTF-8 decode lossily.
    pub fn detokenize(&self, ids: &[usize]) -> String {
        let mut bytes = Vec::with_capacity(ids.len());
        for &id in ids {
            if id < BYTE_BASE {
                continue;
            } else if id < CHAR_BASE {
                bytes.push((id - BYTE_BASE) as u8);
            } else if let Some(c) = self.chars.get(id - CHAR_BASE) {
                let mut buf = [0u8; 4];
                bytes.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            }
        }
        match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reserved_and_dense() {
        let v = Vocabulary::from_corpus(["ab", "ba"]);
        assert_eq!(v.len(), CHAR_BASE + 2);
        assert_eq!(v.tokenize("ab"), vec![CHAR_BASE, CHAR_BASE + 1]);
        assert!(v.tokenize("").is_empty());
    }

    #[test]
    fn byte_fallback_round_trip() {
        let v = Vocabulary::from_corpus(["CC(=O)O"]);
        assert_eq!(v.detokenize(&v.tokenize("CC(=O)O")), "CC(=O)O");
        let odd = "naïve → 🧪";
        assert_eq!(v.detokenize(&v.tokenize(odd)), odd);
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocabulary::from_corpus(["hello world"]);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(v, back);
    }

    proptest! {
        #[test]
        fn any_string_round_trips(corpus in ".{0,20}", text in ".{0,40}") {
            let v = Vocabulary::from_corpus([corpus.as_str()]);
            prop_assert_eq!(v.detokenize(&v.tokenize(&text)), text);
        }
    }
}
