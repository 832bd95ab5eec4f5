//! Self-describing policy files: a Q-network plus the vocabulary it reads.

use std::path::Path;

use thiserror::Error;

use crate::domain::act::CATALOG_SIZE;
use crate::domain::text::Vocabulary;
use crate::neural::{ByteReader, DecodeError, QNetwork};

pub const POLICY_MAGIC: &[u8] = b"SIMPLEDS-POLICY/1\n";

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub net: QNetwork,
    pub vocabulary: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: DecodeError,
    },
    #[error("policy reads {policy} features but the vocabulary has {vocabulary} words")]
    InputWidth { policy: usize, vocabulary: usize },
    #[error("policy has {0} outputs, expected {CATALOG_SIZE}")]
    OutputWidth(usize),
    #[error(
        "policy vocabulary differs from the data pack at word {index}: {policy:?} vs {pack:?}"
    )]
    VocabularyMismatch {
        index: usize,
        policy: Option<String>,
        pack: Option<String>,
    },
}

impl Policy {
    pub fn new(net: QNetwork, vocab: &Vocabulary) -> Self {
        Self {
            net,
            vocabulary: vocab.words().to_vec(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = POLICY_MAGIC.to_vec();
        self.net.encode(&mut out);
        out.extend_from_slice(&(self.vocabulary.len() as u32).to_le_bytes());
        for w in &self.vocabulary {
            out.extend_from_slice(&(w.len() as u32).to_le_bytes());
            out.extend_from_slice(w.as_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = ByteReader::new(bytes);
        if r.take(POLICY_MAGIC.len())? != POLICY_MAGIC {
            return Err(r.error_at(0, "missing SIMPLEDS-POLICY/1 header"));
        }
        let net = QNetwork::decode(&mut r)?;
        let count = r.u32()? as usize;
        let mut vocabulary = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let at = r.offset();
            let len = r.u32()? as usize;
            let raw = r.take(len)?;
            let word = std::str::from_utf8(raw).map_err(|_| r.error_at(at, "word is not UTF-8"))?;
            vocabulary.push(word.to_string());
        }
        r.finish()?;
        Ok(Self { net, vocabulary })
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let bytes = std::fs::read(path).map_err(|source| PolicyError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|source| PolicyError::Decode {
            path: path.display().to_string(),
            source,
        })
    }

    /// Checks that the policy can read states built from `vocab`.
    pub fn check(&self, vocab: &Vocabulary) -> Result<(), PolicyError> {
        if self.net.output_size() != CATALOG_SIZE {
            return Err(PolicyError::OutputWidth(self.net.output_size()));
        }
        if self.net.input_size() != vocab.len() {
            return Err(PolicyError::InputWidth {
                policy: self.net.input_size(),
                vocabulary: vocab.len(),
            });
        }
        let pack = vocab.words();
        for i in 0..self.vocabulary.len().max(pack.len()) {
            let (a, b) = (self.vocabulary.get(i), pack.get(i));
            if a != b {
                return Err(PolicyError::VocabularyMismatch {
                    index: i,
                    policy: a.cloned(),
                    pack: b.cloned(),
                });
            }
        }
        Ok(())
    }

    /// Highest-valued action among `valid`, ties to the lowest index.
    pub fn greedy(&self, state: &[f64], valid: &[usize]) -> Option<usize> {
        let q = self.net.forward(state).ok()?;
        crate::dqn::argmax_over(&q, valid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn policy() -> Policy {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = QNetwork::random(&[2, 4, 4, CATALOG_SIZE], &mut rng).unwrap();
        let vocab = Vocabulary::from_words(vec!["bye".into(), "hello".into()]).unwrap();
        Policy::new(net, &vocab)
    }

    #[test]
    fn round_trips() {
        let p = policy();
        assert_eq!(Policy::from_bytes(&p.to_bytes()).unwrap(), p);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let bytes = policy().to_bytes();
        assert_eq!(Policy::from_bytes(b"NOPE").unwrap_err().offset, 0);
        let err = Policy::from_bytes(&bytes[..bytes.len() - 2]).unwrap_err();
        assert!(err.offset > POLICY_MAGIC.len());
    }

    #[test]
    fn vocabulary_mismatch_is_reported() {
        let p = policy();
        let other = Vocabulary::from_words(vec!["bye".into(), "hi".into()]).unwrap();
        assert!(matches!(
            p.check(&other),
            Err(PolicyError::VocabularyMismatch { index: 1, .. })
        ));
    }
}
