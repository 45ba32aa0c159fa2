//! Few-shot exemplar selection: uniform random draws or cosine similarity
//! over task-description embeddings, packed greedily into a token budget.

use std::collections::BTreeMap;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::prompt::{exemplar_tokens, TokenEstimator};

/// Description-keyed embedding table. No embedding model ships here; vectors
/// come from a fixture file or an external service.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embeddings {
    vectors: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum EmbeddingsError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct EmbeddingRecord {
    description: String,
    embedding: Vec<f64>,
}

impl Embeddings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, description: impl Into<String>, vector: Vec<f64>) {
        self.vectors.insert(description.into(), vector);
    }

    /// One JSON object per line: {"description": "...", "embedding": [...]}.
    pub fn from_jsonl(text: &str) -> Result<Self, EmbeddingsError> {
        let mut out = Self::new();
        for (idx, line) in text.as_bytes().lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord =
                serde_json::from_str(&line).map_err(|source| EmbeddingsError::Parse {
                    line: idx + 1,
                    source,
                })?;
            out.insert(rec.description, rec.embedding);
        }
        Ok(out)
    }

    pub fn vector(&self, description: &str) -> Option<&[f64]> {
        self.vectors.get(description).map(Vec::as_slice)
    }

    /// Cosine similarity of the two descriptions' vectors. Missing vectors or
    /// zero norms score 0.0 so unknown descriptions sink to the tail.
    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        let (Some(va), Some(vb)) = (self.vector(a), self.vector(b)) else {
            return 0.0;
        };
        if va.len() != vb.len() {
            return 0.0;
        }
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let na: f64 = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone)]
pub enum SelectionStrategy {
    /// Uniform draw without replacement. The effective stream is
    /// `seed ^ salt`, so callers can vary exemplars per prompt.
    Random { seed: u64 },
    /// Descending cosine similarity to the target description.
    Cosine { embeddings: Embeddings },
}

/// FNV-1a, used to fold task ids into per-prompt selection salts.
pub fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Orders the solved pool per the strategy, then keeps a prefix: exemplars
/// are taken in order until one no longer fits the token budget, which ends
/// the scan. Ties under cosine keep pool order, so results are deterministic.
pub fn select_examples(
    solved: &[(String, String)],
    target_description: &str,
    strategy: &SelectionStrategy,
    budget_tokens: usize,
    salt: u64,
    estimator: TokenEstimator,
) -> Vec<(String, String)> {
    let mut order: Vec<usize> = (0..solved.len()).collect();
    match strategy {
        SelectionStrategy::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
            order.shuffle(&mut rng);
        }
        SelectionStrategy::Cosine { embeddings } => {
            let scores: Vec<f64> = solved
                .iter()
                .map(|(desc, _)| embeddings.cosine(desc, target_description))
                .collect();
            order.sort_by(|&a, &b| {
                scores[b]
                    .partial_cmp(&scores[a])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
        }
    }

    let mut spent = 0;
    let mut picked = Vec::new();
    for idx in order {
        let (desc, prog) = &solved[idx];
        let cost = exemplar_tokens(desc, prog, estimator);
        if spent + cost > budget_tokens {
            break;
        }
        spent += cost;
        picked.push((desc.clone(), prog.clone()));
    }
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::estimate_tokens;

    fn pool() -> Vec<(String, String)> {
        vec![
            ("alpha".into(), "(lambda $0)".into()),
            ("beta".into(), "(lambda $0)".into()),
            ("gamma".into(), "(lambda $0)".into()),
            ("delta".into(), "(lambda $0)".into()),
        ]
    }

    fn embeddings() -> Embeddings {
        let mut e = Embeddings::new();
        e.insert("alpha", vec![1.0, 0.0, 0.0]);
        e.insert("beta", vec![0.0, 1.0, 0.0]);
        e.insert("gamma", vec![0.8, 0.6, 0.0]);
        e.insert("delta", vec![0.0, 0.0, 1.0]);
        e.insert("target", vec![1.0, 0.0, 0.0]);
        e
    }

    #[test]
    fn cosine_is_symmetric_and_bounded() {
        let e = embeddings();
        for a in ["alpha", "beta", "gamma", "delta", "target"] {
            for b in ["alpha", "beta", "gamma", "delta", "target"] {
                let ab = e.cosine(a, b);
                assert_eq!(ab, e.cosine(b, a));
                assert!((-1.0..=1.0).contains(&ab));
            }
        }
    }

    #[test]
    fn identical_description_is_selected_first() {
        let e = embeddings();
        assert_eq!(e.cosine("alpha", "target"), 1.0);
        let strategy = SelectionStrategy::Cosine { embeddings: e };
        let picked = select_examples(&pool(), "target", &strategy, 100_000, 0, estimate_tokens);
        assert_eq!(picked[0].0, "alpha");
    }

    #[test]
    fn orthogonal_embeddings_fall_to_the_tail() {
        let e = embeddings();
        let strategy = SelectionStrategy::Cosine { embeddings: e };
        let picked = select_examples(&pool(), "target", &strategy, 100_000, 0, estimate_tokens);
        let descs: Vec<&str> = picked.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(descs, ["alpha", "gamma", "beta", "delta"]);
    }

    #[test]
    fn tiny_budget_keeps_exactly_the_top_k() {
        let e = embeddings();
        let strategy = SelectionStrategy::Cosine { embeddings: e };
        let one = exemplar_tokens("alpha", "(lambda $0)", estimate_tokens);
        let picked = select_examples(&pool(), "target", &strategy, 2 * one, 0, estimate_tokens);
        let descs: Vec<&str> = picked.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(descs, ["alpha", "gamma"]);
    }

    #[test]
    fn random_is_deterministic_and_without_replacement() {
        let strategy = SelectionStrategy::Random { seed: 9 };
        let a = select_examples(&pool(), "target", &strategy, 100_000, 1, estimate_tokens);
        let b = select_examples(&pool(), "target", &strategy, 100_000, 1, estimate_tokens);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        let mut descs: Vec<&str> = a.iter().map(|(d, _)| d.as_str()).collect();
        descs.sort_unstable();
        descs.dedup();
        assert_eq!(descs.len(), 4);

        let c = select_examples(&pool(), "target", &strategy, 100_000, 2, estimate_tokens);
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn salt_varies_the_random_order() {
        let strategy = SelectionStrategy::Random { seed: 9 };
        let orders: Vec<Vec<String>> = (0..8)
            .map(|salt| {
                select_examples(&pool(), "t", &strategy, 100_000, salt, estimate_tokens)
                    .into_iter()
                    .map(|(d, _)| d)
                    .collect()
            })
            .collect();
        assert!(orders.iter().any(|o| o != &orders[0]));
    }

    #[test]
    fn embeddings_load_from_jsonl() {
        let text = concat!(
            "{\"description\":\"alpha\",\"embedding\":[1.0,0.0]}\n",
            "\n",
            "{\"description\":\"beta\",\"embedding\":[0.0,1.0]}\n",
        );
        let e = Embeddings::from_jsonl(text).unwrap();
        assert_eq!(e.vector("alpha"), Some(&[1.0, 0.0][..]));
        assert_eq!(e.cosine("alpha", "beta"), 0.0);
        assert!(Embeddings::from_jsonl("{bad json").is_err());
    }

    #[test]
    fn missing_vector_scores_zero() {
        let e = embeddings();
        assert_eq!(e.cosine("alpha", "never seen"), 0.0);
    }
}
