use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{cosine_or_none, EmbeddingVector};

/// One past question/answer interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ContextEntry<T: Scalar> {
    pub question_embedding: EmbeddingVector<T>,
    pub answer_representation: EmbeddingVector<T>,
    pub turn_id: String,
}

/// Contextual memory bank of past question/answer pairs.
///
/// Unbounded when `capacity` is `None`; otherwise the oldest entry is dropped
/// once the limit is reached.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ContextBank<T: Scalar> {
    entries: VecDeque<ContextEntry<T>>,
    capacity: Option<usize>,
}

impl<T: Scalar> ContextBank<T> {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            entries: VecDeque::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &ContextEntry<T>> {
        self.entries.iter()
    }

    pub fn store(&mut self, entry: ContextEntry<T>) -> Result<()> {
        let d = entry.question_embedding.dim();
        if entry.answer_representation.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: entry.answer_representation.dim(),
            });
        }
        if let Some(first) = self.entries.front() {
            if first.question_embedding.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: first.question_embedding.dim(),
                    got: d,
                });
            }
        }
        if self.capacity == Some(0) {
            return Ok(());
        }
        if let Some(cap) = self.capacity {
            while self.entries.len() >= cap {
                self.entries.pop_front();
            }
        }
        self.entries.push_back(entry);
        Ok(())
    }

    /// Entries whose question similarity to `q` is at least `gate`, most
    /// similar first; equal similarity goes to the more recent entry.
    pub fn lookup(
        &self,
        q: &EmbeddingVector<T>,
        gate: T,
        top_n: usize,
    ) -> Result<Vec<ContextEntry<T>>> {
        if !(gate >= -T::one() && gate <= T::one()) {
            return Err(invalid("context gate must lie in [-1, 1]"));
        }
        if top_n == 0 {
            return Err(invalid("context lookup needs top_n >= 1"));
        }
        let mut hits: Vec<(T, usize)> = self
            .entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                cosine_or_none(q.as_slice(), e.question_embedding.as_slice()).map(|s| (s, i))
            })
            .filter(|&(s, _)| s >= gate)
            .collect();
        hits.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
        Ok(hits
            .into_iter()
            .take(top_n)
            .map(|(_, i)| self.entries[i].clone())
            .collect())
    }
}
