use serde::{Deserialize, Serialize};

/// Dense embedding produced by an [`Embedder`](crate::providers::Embedder).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Returns `None` when the vector is empty or has a non-finite entry.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(1.0 / n)
    }

    /// Cosine similarity; zero when either vector has zero norm or the
    /// dimensions disagree.
    pub fn cosine(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return 0.0;
        }
        let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        let denom = na.sqrt() * nb.sqrt();
        if denom == 0.0 {
            return 0.0;
        }
        (dot / denom).clamp(-1.0, 1.0)
    }

    /// Mean of unit-normalised members, renormalised. `None` for an empty set.
    pub fn centroid<'a, I>(vectors: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a EmbeddingVector>,
    {
        let mut acc: Option<Vec<f64>> = None;
        for v in vectors {
            let unit = v.normalized();
            match acc.as_mut() {
                None => acc = Some(unit.values),
                Some(sum) => {
                    if sum.len() != unit.values.len() {
                        return None;
                    }
                    for (s, x) in sum.iter_mut().zip(unit.values) {
                        *s += x;
                    }
                }
            }
        }
        acc.map(|values| Self { values }.normalized())
    }
}
