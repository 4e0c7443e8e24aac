//! Text embeddings and cosine similarity.
//!
//! Every vector is L2-normalised on construction, so cosine similarity is a
//! plain dot product. The built-in [`HashedBagProvider`] is a deterministic
//! bag-of-words hash embedding used for offline work and tests; a real
//! sentence-embedding model plugs in through [`RemoteProvider`].

use std::hash::Hasher;
use std::time::Duration;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Output size of the sentence-embedding model the index format targets.
pub const DEFAULT_DIM: usize = 384;

const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("text is empty")]
    EmptyText,
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("vector has zero or non-finite norm")]
    Degenerate,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalises `components` to unit length.
    pub fn normalized(mut components: Vec<f64>) -> Result<Self, EmbedError> {
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(EmbedError::Degenerate);
        }
        components.iter_mut().for_each(|x| *x /= norm);
        Ok(Self(components))
    }

    /// Accepts components that are already unit length (within 1e-9),
    /// without rescaling them. Used when reloading stored vectors.
    pub fn from_unit(components: Vec<f64>) -> Result<Self, EmbedError> {
        let norm = components.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() <= NORM_TOLERANCE {
            Ok(Self(components))
        } else {
            Err(EmbedError::Degenerate)
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cosine similarity, in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    /// Clamps into [-1, 1].
    pub fn new(value: f64) -> Self {
        Self(value.clamp(-1.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn distance(self) -> Distance {
        Distance(1.0 - self.0)
    }
}

/// Cosine distance `1 − similarity`, in [0, 2].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distance(f64);

impl Distance {
    pub fn new(value: f64) -> Self {
        Self(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn similarity(self) -> f64 {
        1.0 - self.0
    }
}

pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<SimilarityScore, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(SimilarityScore::new(dot))
}

/// A source of text embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifies the provider and its configuration; stored in index
    /// headers so vectors from different providers are never compared.
    fn fingerprint(&self) -> String;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut out = self.embed_batch(&[text])?;
        out.pop().ok_or_else(|| EmbedError::ProviderUnavailable("empty response".into()))
    }
}

fn check_texts(texts: &[&str]) -> Result<(), EmbedError> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        Err(EmbedError::EmptyText)
    } else {
        Ok(())
    }
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Bag-of-words hash embedding: each token's FNV-1a 64-bit hash modulo
/// `dim` selects a bucket, bucket counts are L2-normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagProvider {
    dim: usize,
}

impl HashedBagProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        let mut h = FnvHasher::default();
        h.write(token.as_bytes());
        (h.finish() % self.dim as u64) as usize
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut counts = vec![0.0; self.dim];
        for token in tokenize(text) {
            counts[self.bucket(&token)] += 1.0;
        }
        // text with no alphanumeric token at all
        EmbeddingVector::normalized(counts).map_err(|_| EmbedError::EmptyText)
    }
}

impl Default for HashedBagProvider {
    fn default() -> Self {
        Self::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashedBagProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("hashed-bag/fnv1a64/dim={}", self.dim)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_texts(texts)?;
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedReply {
    vectors: Vec<Vec<f64>>,
}

/// Client for an external embedding service:
/// `POST {base}/embed {"texts": [...]}` → `{"vectors": [[...]]}`.
#[derive(Debug, Clone)]
pub struct RemoteProvider {
    base_url: String,
    model: String,
    dim: usize,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            dim,
            agent,
        }
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("remote/{}/dim={}", self.model, self.dim)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        check_texts(texts)?;
        let unavailable = |e: ureq::Error| EmbedError::ProviderUnavailable(e.to_string());
        let reply: EmbedReply = self
            .agent
            .post(&format!("{}/embed", self.base_url))
            .send_json(EmbedRequest { texts })
            .map_err(unavailable)?
            .body_mut()
            .read_json()
            .map_err(unavailable)?;
        if reply.vectors.len() != texts.len() {
            return Err(EmbedError::ProviderUnavailable(format!(
                "expected {} vectors, got {}",
                texts.len(),
                reply.vectors.len()
            )));
        }
        reply
            .vectors
            .into_iter()
            .map(|v| {
                if v.len() != self.dim {
                    return Err(EmbedError::DimMismatch {
                        left: v.len(),
                        right: self.dim,
                    });
                }
                EmbeddingVector::normalized(v)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalized(v.to_vec()).unwrap()
    }

    #[test]
    fn builtin_is_deterministic() {
        let p = HashedBagProvider::default();
        let t = "Driving in the tunnel with a car ahead";
        assert_eq!(p.embed(t).unwrap(), p.embed(t).unwrap());
        assert_eq!(p.embed(t).unwrap().dim(), 384);
    }

    #[test]
    fn repeated_token_has_same_direction() {
        let p = HashedBagProvider::default();
        let s = cosine(&p.embed("snow snow").unwrap(), &p.embed("snow").unwrap()).unwrap();
        assert!((s.value() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn empty_text_rejected() {
        let p = HashedBagProvider::default();
        assert!(matches!(p.embed(""), Err(EmbedError::EmptyText)));
        assert!(matches!(p.embed("   \n"), Err(EmbedError::EmptyText)));
        assert!(matches!(p.embed("?!"), Err(EmbedError::EmptyText)));
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        let tokens: Vec<_> = tokenize("Snow-covered ROAD, 45 km/h").collect();
        assert_eq!(tokens, ["snow", "covered", "road", "45", "km", "h"]);
    }

    #[test]
    fn fnv_bucket_is_stable() {
        // FNV-1a 64 of "snow", computed offline from the offset basis
        // 0xcbf29ce484222325 and prime 0x100000001b3
        let mut h = FnvHasher::default();
        h.write(b"snow");
        assert_eq!(h.finish(), 0x5872_b118_ec96_d932);
        assert_eq!(HashedBagProvider::default().bucket("snow"), 306);
    }

    #[test]
    fn cosine_known_values() {
        let v = unit(&[0.3, -1.0, 2.0]);
        assert!((cosine(&v, &v).unwrap().value() - 1.0).abs() <= 1e-12);
        let e1 = unit(&[1.0, 0.0, 0.0]);
        let e2 = unit(&[0.0, 1.0, 0.0]);
        assert_eq!(cosine(&e1, &e2).unwrap().value(), 0.0);
        // (2 + 2 + 4) / 9
        let a = unit(&[1.0, 2.0, 2.0]);
        let b = unit(&[2.0, 1.0, 2.0]);
        assert!((cosine(&a, &b).unwrap().value() - 8.0 / 9.0).abs() <= 1e-9);
    }

    #[test]
    fn cosine_dim_mismatch() {
        assert!(matches!(
            cosine(&unit(&[1.0, 0.0]), &unit(&[1.0, 0.0, 0.0])),
            Err(EmbedError::DimMismatch { left: 2, right: 3 })
        ));
    }

    #[test]
    fn similarity_is_clamped_but_negative_kept() {
        assert_eq!(SimilarityScore::new(1.0 + 1e-15).value(), 1.0);
        assert_eq!(SimilarityScore::new(-0.25).value(), -0.25);
        assert_eq!(SimilarityScore::new(-0.25).distance().value(), 1.25);
    }

    #[test]
    fn from_unit_checks_norm() {
        assert!(EmbeddingVector::from_unit(vec![0.6, 0.8]).is_ok());
        assert!(EmbeddingVector::from_unit(vec![0.6, 0.9]).is_err());
        assert!(EmbeddingVector::normalized(vec![0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn embedded_vectors_are_unit(text in "[a-z ]{1,80}[a-z]") {
            let v = HashedBagProvider::new(64).embed(&text).unwrap();
            prop_assert!((v.norm() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn cosine_symmetric_and_bounded(
            a in proptest::collection::vec(-1.0f64..1.0, 16),
            b in proptest::collection::vec(-1.0f64..1.0, 16),
        ) {
            prop_assume!(a.iter().any(|x| *x != 0.0) && b.iter().any(|x| *x != 0.0));
            let (a, b) = (unit(&a), unit(&b));
            let ab = cosine(&a, &b).unwrap().value();
            prop_assert_eq!(ab, cosine(&b, &a).unwrap().value());
            prop_assert!(ab.abs() <= 1.0 + 1e-9);
        }
    }
}
