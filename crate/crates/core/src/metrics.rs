//! Evaluation quantities comparing a word2vec model with a Reference Model.
//!
//! The probability-dot similarity `C_S^P(i, i') = ⟨softmax(xᵢᵀWW'), row i' of W'₀⟩`
//! is deliberately not normalized; it is the single primitive behind the group
//! distance, the learning-trace distance and the block statistics.

use serde::Serialize;

use crate::embedder::Word2VecModel;
use crate::error::{Error, Result};
use crate::kernel::{BlockSpec, ProbVector, ReferenceModel};
use crate::linalg::{dot, norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupSimilarityStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl GroupSimilarityStats {
    /// Summary of `values`; the result does not depend on their order.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGroup);
        }
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(GroupSimilarityStats {
            mean,
            std: var.sqrt(),
            count: values.len(),
        })
    }
}

fn check_same_vocab(model: &Word2VecModel, rm: &ReferenceModel) -> Result<()> {
    if model.vocab_size() != rm.vocab_size() {
        return Err(Error::DimensionMismatch(
            model.vocab_size(),
            rm.vocab_size(),
        ));
    }
    Ok(())
}

fn check_index(i: usize, size: usize) -> Result<()> {
    if i >= size {
        return Err(Error::IndexOutOfRange { index: i, size });
    }
    Ok(())
}

/// `−Σ_j ref[j]·log model[j]`; terms with zero reference mass are skipped.
pub fn cross_entropy_row(reference: &[f64], model_probs: &[f64]) -> Result<f64> {
    if reference.len() != model_probs.len() {
        return Err(Error::DimensionMismatch(reference.len(), model_probs.len()));
    }
    let mut h = 0.0;
    for (&r, &q) in reference.iter().zip(model_probs) {
        if r == 0.0 {
            continue;
        }
        if q.is_nan() || q <= 0.0 {
            return Err(Error::NonpositiveModelProb(q));
        }
        h -= r * q.ln();
    }
    Ok(h)
}

/// Shannon entropy in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum()
}

/// `Σ_i μᵢ·H(row i of W'₀)`: the lower bound of [`expected_cross_entropy`].
pub fn conditional_entropy(rm: &ReferenceModel, mu: &ProbVector) -> Result<f64> {
    if mu.dim() != rm.vocab_size() {
        return Err(Error::DimensionMismatch(mu.dim(), rm.vocab_size()));
    }
    Ok((0..rm.vocab_size())
        .map(|i| mu[i] * entropy(rm.row(i)))
        .sum())
}

/// Stationary-weighted cross-entropy between Reference-Model rows and model rows.
pub fn expected_cross_entropy(
    model: &Word2VecModel,
    rm: &ReferenceModel,
    mu: &ProbVector,
) -> Result<f64> {
    check_same_vocab(model, rm)?;
    if mu.dim() != rm.vocab_size() {
        return Err(Error::DimensionMismatch(mu.dim(), rm.vocab_size()));
    }
    let mut total = 0.0;
    for i in 0..rm.vocab_size() {
        if mu[i] == 0.0 {
            continue;
        }
        total += mu[i] * cross_entropy_row(rm.row(i), model.forward(i)?.as_slice())?;
    }
    Ok(total)
}

pub fn prob_dot_similarity(
    model: &Word2VecModel,
    rm: &ReferenceModel,
    i: usize,
    i2: usize,
) -> Result<f64> {
    check_same_vocab(model, rm)?;
    check_index(i2, rm.vocab_size())?;
    Ok(dot(model.forward(i)?.as_slice(), rm.row(i2)))
}

/// Similarity with forward rows precomputed (`forward` is V×V).
fn dot_pre(forward: &Matrix, rm: &ReferenceModel, i: usize, i2: usize) -> f64 {
    dot(forward.row(i), rm.row(i2))
}

/// `1 − mean_{i∈G1, i'∈G2} C_S^P(i, i')`.
pub fn group_distance(
    model: &Word2VecModel,
    rm: &ReferenceModel,
    g1: &[usize],
    g2: &[usize],
) -> Result<f64> {
    check_same_vocab(model, rm)?;
    if g1.is_empty() || g2.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let v = rm.vocab_size();
    for &i in g1.iter().chain(g2) {
        check_index(i, v)?;
    }
    let mut sum = 0.0;
    for &i in g1 {
        let p = model.forward(i)?;
        for &i2 in g2 {
            sum += dot(p.as_slice(), rm.row(i2));
        }
    }
    Ok(1.0 - sum / (g1.len() * g2.len()) as f64)
}

/// `1 − (1/V)·Σ_i C_S^P(i, i)`: each model row against its own reference row.
pub fn trace_cosine_distance(model: &Word2VecModel, rm: &ReferenceModel) -> Result<f64> {
    check_same_vocab(model, rm)?;
    let forward = model.forward_matrix();
    let v = rm.vocab_size();
    let sum: f64 = (0..v).map(|i| dot_pre(&forward, rm, i, i)).sum();
    Ok(1.0 - sum / v as f64)
}

/// Similarity statistics over ordered pairs `i ≠ i'` inside a block (intra)
/// and over pairs from two different blocks (inter).
pub fn block_similarity_stats(
    model: &Word2VecModel,
    rm: &ReferenceModel,
    spec: BlockSpec,
) -> Result<(GroupSimilarityStats, GroupSimilarityStats)> {
    check_same_vocab(model, rm)?;
    spec.check(rm.vocab_size())?;
    let forward = model.forward_matrix();
    let rows = spec.structured_rows();
    let mut intra = Vec::new();
    let mut inter = Vec::new();
    for i in 0..rows {
        for i2 in 0..rows {
            if i == i2 {
                continue;
            }
            let s = dot_pre(&forward, rm, i, i2);
            if spec.block_of(i) == spec.block_of(i2) {
                intra.push(s);
            } else {
                inter.push(s);
            }
        }
    }
    Ok((
        GroupSimilarityStats::from_values(intra)?,
        GroupSimilarityStats::from_values(inter)?,
    ))
}

/// Cosine of rows `i` and `j` of an embedding matrix.
pub fn embedding_cosine(embeddings: &Matrix, i: usize, j: usize) -> Result<f64> {
    check_index(i, embeddings.rows())?;
    check_index(j, embeddings.rows())?;
    cosine(embeddings.row(i), embeddings.row(j))
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
