//! Full-softmax skip-gram word2vec: forward pass, loss, analytic gradient,
//! CBOW probability and a seeded Adam training loop.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{rng_from_seed, BlockSpec, ProbVector, ReferenceModel};
use crate::linalg::{dot, Matrix};
use crate::metrics::{self, GroupSimilarityStats};
use crate::textgen::Corpus;

/// Word embeddings `W` (V×N), context matrix `W'` (N×V) and window width `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Word2VecModel {
    embeddings: Matrix,
    contexts: Matrix,
    width: usize,
}

/// Gradient of the skip-gram loss of one pivot.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramGrad {
    /// Gradient with respect to the pivot's row of `W`; other rows get zero.
    pub embedding_row: Vec<f64>,
    /// Gradient with respect to `W'` (N×V).
    pub contexts: Matrix,
}

fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in z.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    z.iter_mut().for_each(|x| *x /= sum);
    // log-sum-exp of the original logits
    max + sum.ln()
}

impl Word2VecModel {
    /// Entries of `W` and `W'` i.i.d. uniform on `[−0.5/N, 0.5/N]`.
    pub fn init(vocab_size: usize, dim: usize, width: usize, seed: u64) -> Result<Self> {
        Word2VecModel::uniform(vocab_size, dim, width, 0.5 / dim as f64, seed)
    }

    /// Both matrices drawn i.i.d. uniform on `[−bound, bound]`.
    pub fn uniform(
        vocab_size: usize,
        dim: usize,
        width: usize,
        bound: f64,
        seed: u64,
    ) -> Result<Self> {
        if vocab_size < 2 || dim == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "need V ≥ 2, N ≥ 1, C ≥ 1 (got V={vocab_size}, N={dim}, C={width})"
            )));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad init bound {bound}")));
        }
        let mut rng = rng_from_seed(seed);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
        let embeddings = Matrix::from_vec(vocab_size, dim, draw(vocab_size * dim))?;
        let contexts = Matrix::from_vec(dim, vocab_size, draw(vocab_size * dim))?;
        Ok(Word2VecModel {
            embeddings,
            contexts,
            width,
        })
    }

    pub fn from_parts(embeddings: Matrix, contexts: Matrix, width: usize) -> Result<Self> {
        if embeddings.cols() != contexts.rows() {
            return Err(Error::DimensionMismatch(embeddings.cols(), contexts.rows()));
        }
        if embeddings.rows() != contexts.cols() {
            return Err(Error::DimensionMismatch(embeddings.rows(), contexts.cols()));
        }
        if embeddings.cols() == 0 || width == 0 {
            return Err(Error::InvalidParameter("need N ≥ 1 and C ≥ 1".into()));
        }
        if embeddings
            .as_slice()
            .iter()
            .chain(contexts.as_slice())
            .any(|x| !x.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite weight".into()));
        }
        Ok(Word2VecModel {
            embeddings,
            contexts,
            width,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    pub fn contexts(&self) -> &Matrix {
        &self.contexts
    }

    pub fn embeddings_mut(&mut self) -> &mut Matrix {
        &mut self.embeddings
    }

    pub fn contexts_mut(&mut self) -> &mut Matrix {
        &mut self.contexts
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.vocab_size() {
            return Err(Error::IndexOutOfRange {
                index: i,
                size: self.vocab_size(),
            });
        }
        Ok(())
    }

    fn hidden_logits(&self, hidden: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (n, &h) in hidden.iter().enumerate() {
            for (o, &c) in out.iter_mut().zip(self.contexts.row(n)) {
                *o += h * c;
            }
        }
    }

    /// Logits `xᵢᵀ·W·W'` of pivot `i`.
    pub fn logits(&self, i: usize) -> Result<Vec<f64>> {
        self.check_index(i)?;
        let mut z = vec![0.0; self.vocab_size()];
        self.hidden_logits(self.embeddings.row(i), &mut z);
        Ok(z)
    }

    /// `softmax(xᵢᵀ·W·W')`.
    pub fn forward(&self, i: usize) -> Result<ProbVector> {
        let mut z = self.logits(i)?;
        softmax_in_place(&mut z);
        Ok(ProbVector::from_raw(z))
    }

    /// All forward rows stacked as a V×V matrix.
    pub fn forward_matrix(&self) -> Matrix {
        let v = self.vocab_size();
        let mut out = Matrix::zeros(v, v);
        for i in 0..v {
            let row = out.row_mut(i);
            self.hidden_logits(self.embeddings.row(i), row);
            softmax_in_place(row);
        }
        out
    }

    fn check_contexts(&self, contexts: &[usize]) -> Result<()> {
        if contexts.len() != self.width {
            return Err(Error::InvalidParameter(format!(
                "expected {} context words, got {}",
                self.width,
                contexts.len()
            )));
        }
        contexts.iter().try_for_each(|&j| self.check_index(j))
    }

    /// Negative log-likelihood of the context words following pivot `i`:
    /// `−Σ_c z_{j_c} + C·log Σ_j exp(z_j)`.
    pub fn skipgram_loss(&self, i: usize, contexts: &[usize]) -> Result<f64> {
        self.check_contexts(contexts)?;
        let mut z = self.logits(i)?;
        let picked: f64 = contexts.iter().map(|&j| z[j]).sum();
        let lse = softmax_in_place(&mut z);
        Ok(contexts.len() as f64 * lse - picked)
    }

    pub fn skipgram_grad(&self, i: usize, contexts: &[usize]) -> Result<SkipGramGrad> {
        self.check_contexts(contexts)?;
        let mut r = self.logits(i)?;
        softmax_in_place(&mut r);
        let c = contexts.len() as f64;
        r.iter_mut().for_each(|x| *x *= c);
        for &j in contexts {
            r[j] -= 1.0;
        }
        let n = self.dim();
        let embedding_row = (0..n).map(|k| dot(self.contexts.row(k), &r)).collect();
        let mut grad = Matrix::zeros(n, self.vocab_size());
        for (k, &w) in self.embeddings.row(i).iter().enumerate() {
            for (g, &rj) in grad.row_mut(k).iter_mut().zip(&r) {
                *g = w * rj;
            }
        }
        Ok(SkipGramGrad {
            embedding_row,
            contexts: grad,
        })
    }

    /// CBOW probability of `target` given the averaged embeddings of `contexts`.
    pub fn cbow_prob(&self, contexts: &[usize], target: usize) -> Result<f64> {
        if contexts.is_empty() {
            return Err(Error::InvalidParameter(
                "CBOW needs at least one context word".into(),
            ));
        }
        self.check_index(target)?;
        contexts.iter().try_for_each(|&j| self.check_index(j))?;
        let mut hidden = vec![0.0; self.dim()];
        for &j in contexts {
            for (h, &w) in hidden.iter_mut().zip(self.embeddings.row(j)) {
                *h += w;
            }
        }
        let inv = 1.0 / contexts.len() as f64;
        hidden.iter_mut().for_each(|h| *h *= inv);
        let mut z = vec![0.0; self.vocab_size()];
        self.hidden_logits(&hidden, &mut z);
        softmax_in_place(&mut z);
        Ok(z[target])
    }

    /// Mean skip-gram loss over every pivot of `corpus`.
    pub fn corpus_loss(&self, corpus: &Corpus) -> Result<f64> {
        if corpus.vocab_size() != self.vocab_size() {
            return Err(Error::DimensionMismatch(
                corpus.vocab_size(),
                self.vocab_size(),
            ));
        }
        // Logits depend only on the pivot word: cache the log-sum-exp per word.
        let v = self.vocab_size();
        let mut logits = Matrix::zeros(v, v);
        let mut lse = vec![0.0; v];
        for (i, lse_i) in lse.iter_mut().enumerate() {
            let row = logits.row_mut(i);
            self.hidden_logits(self.embeddings.row(i), row);
            let mut p = row.to_vec();
            *lse_i = softmax_in_place(&mut p);
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for k in corpus.pivots(self.width) {
            let i = corpus.tokens()[k] as usize;
            let picked: f64 = corpus
                .contexts(k, self.width)
                .iter()
                .map(|&j| logits[(i, j as usize)])
                .sum();
            total += self.width as f64 * lse[i] - picked;
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyCorpus);
        }
        Ok(total / count as f64)
    }

    /// Checkpoint text: `V N C` header, the V rows of `W`, then the N rows of `W'`.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.vocab_size(), self.dim(), self.width);
        for m in [&self.embeddings, &self.contexts] {
            for i in 0..m.rows() {
                for (j, x) in m.row(i).iter().enumerate() {
                    if j > 0 {
                        s.push(' ');
                    }
                    write!(s, "{x:.16e}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let bad = |line: usize, msg: String| Error::ParseError { line, msg };
        let (_, header) = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| bad(1, format!("bad header {header:?}")))
            })
            .collect::<Result<_>>()?;
        let [v, n, c] = dims[..] else {
            return Err(bad(1, "header must be `V N C`".into()));
        };
        let mut read = |rows: usize, cols: usize| -> Result<Matrix> {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let (ln, line) = lines
                    .next()
                    .ok_or_else(|| bad(0, "unexpected end of checkpoint".into()))?;
                let before = data.len();
                for t in line.split_whitespace() {
                    data.push(
                        t.parse::<f64>()
                            .map_err(|_| bad(ln + 1, format!("bad number {t:?}")))?,
                    );
                }
                if data.len() - before != cols {
                    return Err(bad(ln + 1, format!("expected {cols} values")));
                }
            }
            Matrix::from_vec(rows, cols, data)
        };
        let embeddings = read(v, n)?;
        let contexts = read(n, v)?;
        Word2VecModel::from_parts(embeddings, contexts, c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Word2VecModel::from_text(&text)
    }
}

/// Adam hyper-parameters and training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Steps between trace records.
    pub log_every: usize,
    /// Visit pivots in a fresh random order every epoch.
    pub shuffle: bool,
    /// Also record intra/inter block statistics when an evaluation model is given.
    pub eval_blocks: Option<BlockSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 5,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            log_every: 10_000,
            shuffle: false,
            eval_blocks: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
            || self.learning_rate.is_infinite()
        {
            return Err(Error::InvalidParameter(
                "learning rate must be positive".into(),
            ));
        }
        if self.epochs == 0 || self.log_every == 0 {
            return Err(Error::InvalidParameter(
                "epochs and log_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub mean_loss: f64,
    pub cosine_distance: Option<f64>,
    pub blocks: Option<(GroupSimilarityStats, GroupSimilarityStats)>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

pub const TRACE_SCHEMA: &str = "w2v-ident/trace/v1";

impl TrainTrace {
    pub fn first(&self) -> Option<&TraceRecord> {
        self.records.first()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// CSV with a `# schema=…` comment line (plus `extra` key=value pairs)
    /// followed by `step,mean_loss,cosine_distance,intra_mean,intra_std,inter_mean,inter_std`.
    pub fn to_csv(&self, extra: &[(&str, String)]) -> String {
        let mut s = format!("# schema={TRACE_SCHEMA}");
        for (k, v) in extra {
            write!(s, " {k}={v}").unwrap();
        }
        s.push_str("\nstep,mean_loss,cosine_distance,intra_mean,intra_std,inter_mean,inter_std\n");
        let opt = |x: Option<f64>| x.map(|x| format!("{x:.10e}")).unwrap_or_default();
        for r in &self.records {
            let (im, is, em, es) = match &r.blocks {
                Some((intra, inter)) => (
                    Some(intra.mean),
                    Some(intra.std),
                    Some(inter.mean),
                    Some(inter.std),
                ),
                None => (None, None, None, None),
            };
            writeln!(
                s,
                "{},{:.10e},{},{},{},{},{}",
                r.step,
                r.mean_loss,
                opt(r.cosine_distance),
                opt(im),
                opt(is),
                opt(em),
                opt(es)
            )
            .unwrap();
        }
        s
    }
}

struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    step: i32,
    m_emb: Vec<f64>,
    v_emb: Vec<f64>,
    m_ctx: Vec<f64>,
    v_ctx: Vec<f64>,
}

impl Adam {
    fn new(model: &Word2VecModel, config: &TrainConfig) -> Self {
        let n_emb = model.embeddings.as_slice().len();
        let n_ctx = model.contexts.as_slice().len();
        Adam {
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_eps,
            lr: config.learning_rate,
            step: 0,
            m_emb: vec![0.0; n_emb],
            v_emb: vec![0.0; n_emb],
            m_ctx: vec![0.0; n_ctx],
            v_ctx: vec![0.0; n_ctx],
        }
    }
}

#[inline]
fn adam_update(
    theta: &mut f64,
    m: &mut f64,
    v: &mut f64,
    g: f64,
    (beta1, beta2, eps): (f64, f64, f64),
    (bc1, bc2_sqrt, lr): (f64, f64, f64),
) {
    *m = beta1 * *m + (1.0 - beta1) * g;
    *v = beta2 * *v + (1.0 - beta2) * g * g;
    *theta -= lr * (*m / bc1) / ((*v).sqrt() / bc2_sqrt + eps);
}

/// One Adam step on the loss of pivot `i`; returns the loss before the step.
///
/// The optimizer is dense: every coordinate of `W` and `W'` has its moments
/// decayed and is moved, including embedding rows with zero gradient.
fn adam_step(
    model: &mut Word2VecModel,
    adam: &mut Adam,
    i: usize,
    contexts: &[u32],
    residual: &mut [f64],
    grad_row: &mut [f64],
    old_row: &mut [f64],
) -> f64 {
    let c = contexts.len() as f64;
    model.hidden_logits(model.embeddings.row(i), residual);
    let picked: f64 = contexts.iter().map(|&j| residual[j as usize]).sum();
    let lse = softmax_in_place(residual);
    let loss = c * lse - picked;
    residual.iter_mut().for_each(|x| *x *= c);
    for &j in contexts {
        residual[j as usize] -= 1.0;
    }
    let n = model.dim();
    let v = model.vocab_size();
    for (k, g) in grad_row.iter_mut().enumerate() {
        *g = dot(model.contexts.row(k), residual);
    }
    old_row.copy_from_slice(model.embeddings.row(i));

    adam.step += 1;
    let hyper = (adam.beta1, adam.beta2, adam.eps);
    let bias = (
        1.0 - adam.beta1.powi(adam.step),
        (1.0 - adam.beta2.powi(adam.step)).sqrt(),
        adam.lr,
    );
    let ctx = model.contexts.as_mut_slice();
    for (k, &w) in old_row.iter().enumerate().take(n) {
        let range = k * v..(k + 1) * v;
        for (((theta, m), s), &r) in ctx[range.clone()]
            .iter_mut()
            .zip(&mut adam.m_ctx[range.clone()])
            .zip(&mut adam.v_ctx[range])
            .zip(residual.iter())
        {
            adam_update(theta, m, s, w * r, hyper, bias);
        }
    }
    let emb = model.embeddings.as_mut_slice();
    for (idx, ((theta, m), s)) in emb
        .iter_mut()
        .zip(adam.m_emb.iter_mut())
        .zip(adam.v_emb.iter_mut())
        .enumerate()
    {
        let g = if idx / n == i { grad_row[idx % n] } else { 0.0 };
        adam_update(theta, m, s, g, hyper, bias);
    }
    loss
}

/// Trains with one Adam step per pivot, in corpus order unless `shuffle` is set.
///
/// A trace record is written every `log_every` steps (and at the end) with
/// the mean pre-step loss of the window; with `eval_rm` it also carries the
/// trace cosine distance and, if `config.eval_blocks` is set, block statistics.
pub fn train_skipgram(
    mut model: Word2VecModel,
    corpus: &Corpus,
    config: &TrainConfig,
    eval_rm: Option<&ReferenceModel>,
) -> Result<(Word2VecModel, TrainTrace)> {
    config.validate()?;
    if corpus.vocab_size() != model.vocab_size() {
        return Err(Error::DimensionMismatch(
            corpus.vocab_size(),
            model.vocab_size(),
        ));
    }
    if let Some(rm) = eval_rm {
        if rm.vocab_size() != model.vocab_size() {
            return Err(Error::DimensionMismatch(
                rm.vocab_size(),
                model.vocab_size(),
            ));
        }
    }
    if let Some(spec) = config.eval_blocks {
        spec.check(model.vocab_size())?;
    }
    let width = model.width();
    let mut pivots: Vec<usize> = corpus.pivots(width).collect();
    if pivots.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut rng = rng_from_seed(config.seed);
    let mut adam = Adam::new(&model, config);
    let mut residual = vec![0.0; model.vocab_size()];
    let mut grad_row = vec![0.0; model.dim()];
    let mut old_row = vec![0.0; model.dim()];
    let mut trace = TrainTrace::default();
    let mut window_loss = 0.0;
    let mut window_len = 0usize;
    let mut step = 0usize;

    let snapshot = |model: &Word2VecModel, step: usize, mean_loss: f64| -> Result<TraceRecord> {
        let (cosine_distance, blocks) = match eval_rm {
            Some(rm) => {
                let cos = metrics::trace_cosine_distance(model, rm)?;
                let blocks = match config.eval_blocks {
                    Some(spec) if spec.num_blocks > 1 => {
                        Some(metrics::block_similarity_stats(model, rm, spec)?)
                    }
                    _ => None,
                };
                (Some(cos), blocks)
            }
            None => (None, None),
        };
        Ok(TraceRecord {
            step,
            mean_loss,
            cosine_distance,
            blocks,
        })
    };

    for _ in 0..config.epochs {
        if config.shuffle {
            pivots.shuffle(&mut rng);
        }
        for &k in &pivots {
            let i = corpus.tokens()[k] as usize;
            let ctx = corpus.contexts(k, width);
            window_loss += adam_step(
                &mut model,
                &mut adam,
                i,
                ctx,
                &mut residual,
                &mut grad_row,
                &mut old_row,
            );
            window_len += 1;
            step += 1;
            if window_len == config.log_every {
                trace
                    .records
                    .push(snapshot(&model, step, window_loss / window_len as f64)?);
                window_loss = 0.0;
                window_len = 0;
            }
        }
    }
    if window_len > 0 {
        trace
            .records
            .push(snapshot(&model, step, window_loss / window_len as f64)?);
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn model_from(w: &[&[f64]], wp: &[&[f64]], c: usize) -> Word2VecModel {
        Word2VecModel::from_parts(
            Matrix::from_rows(w).unwrap(),
            Matrix::from_rows(wp).unwrap(),
            c,
        )
        .unwrap()
    }

    /// V=2, N=1 model whose logits for pivot 0 are `[a, b]`.
    fn two_word_logits(a: f64, b: f64, c: usize) -> Word2VecModel {
        model_from(&[&[1.0], &[0.0]], &[&[a, b]], c)
    }

    #[test]
    fn init_shapes_bounds_determinism() {
        let m = Word2VecModel::init(50, 10, 2, 4).unwrap();
        assert_eq!((m.embeddings().rows(), m.embeddings().cols()), (50, 10));
        assert_eq!((m.contexts().rows(), m.contexts().cols()), (10, 50));
        assert!(m
            .embeddings()
            .as_slice()
            .iter()
            .chain(m.contexts().as_slice())
            .all(|x| x.abs() <= 0.05));
        assert_eq!(m, Word2VecModel::init(50, 10, 2, 4).unwrap());
        assert!(Word2VecModel::init(1, 10, 2, 4).is_err());
        assert!(Word2VecModel::init(5, 0, 2, 4).is_err());
    }

    #[test]
    fn forward_examples() {
        let zero = model_from(&[&[0.0], &[0.0], &[0.0]], &[&[1.0, 2.0, 3.0]], 1);
        for x in zero.forward(1).unwrap().as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = two_word_logits(2f64.ln(), 0.0, 1).forward(0).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let shifted = two_word_logits(2f64.ln() + 17.0, 17.0, 1)
            .forward(0)
            .unwrap();
        for (a, b) in p.as_slice().iter().zip(shifted.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(
            zero.forward(3),
            Err(Error::IndexOutOfRange { index: 3, size: 3 })
        ));
    }

    #[test]
    fn forward_survives_huge_logits() {
        let p = two_word_logits(1000.0, 0.0, 1).forward(0).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn loss_examples() {
        let m = two_word_logits(0.0, 0.0, 2);
        let l = m.skipgram_loss(0, &[0, 1]).unwrap();
        assert!((l - 2.0 * 2f64.ln()).abs() < 1e-15);
        // −1 + log(e + 1)
        let l = two_word_logits(1.0, 0.0, 1).skipgram_loss(0, &[0]).unwrap();
        assert!((l - 0.31326168751822286).abs() < 1e-14);
        assert!(m.skipgram_loss(0, &[0]).is_err());
        assert!(m.skipgram_loss(0, &[0, 2]).is_err());
    }

    #[test]
    fn cbow_examples() {
        let m = Word2VecModel::init(6, 3, 2, 1).unwrap();
        let single = m.cbow_prob(&[2], 4).unwrap();
        assert!((single - m.forward(2).unwrap()[4]).abs() < 1e-15);
        let repeated = m.cbow_prob(&[2, 2, 2], 4).unwrap();
        assert!((single - repeated).abs() < 1e-15);
        let m = model_from(&[&[1.0], &[-1.0]], &[&[1.0, 0.0]], 2);
        assert_eq!(m.cbow_prob(&[0, 1], 0).unwrap(), 0.5);
        assert!(m.cbow_prob(&[], 0).is_err());
        assert!(m.cbow_prob(&[0], 2).is_err());
    }

    fn finite_difference_check(v: usize, n: usize, c: usize, seed: u64) -> f64 {
        let mut rng = rng_from_seed(seed);
        let model = Word2VecModel::uniform(v, n, c, 1.0, seed).unwrap();
        let i = rng.random_range(0..v);
        let ctx: Vec<usize> = (0..c).map(|_| rng.random_range(0..v)).collect();
        let g = model.skipgram_grad(i, &ctx).unwrap();
        let h = 1e-6;
        let mut worst = 0.0_f64;
        let mut compare = |analytic: f64, numeric: f64| {
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        };
        for k in 0..n {
            let mut plus = model.clone();
            plus.embeddings[(i, k)] += h;
            let mut minus = model.clone();
            minus.embeddings[(i, k)] -= h;
            let numeric = (plus.skipgram_loss(i, &ctx).unwrap()
                - minus.skipgram_loss(i, &ctx).unwrap())
                / (2.0 * h);
            compare(g.embedding_row[k], numeric);
            for j in 0..v {
                let mut plus = model.clone();
                plus.contexts[(k, j)] += h;
                let mut minus = model.clone();
                minus.contexts[(k, j)] -= h;
                let numeric = (plus.skipgram_loss(i, &ctx).unwrap()
                    - minus.skipgram_loss(i, &ctx).unwrap())
                    / (2.0 * h);
                compare(g.contexts[(k, j)], numeric);
            }
        }
        // Rows other than the pivot have zero derivative.
        let other = (i + 1) % v;
        let mut plus = model.clone();
        plus.embeddings[(other, 0)] += h;
        assert_eq!(
            plus.skipgram_loss(i, &ctx).unwrap(),
            model.skipgram_loss(i, &ctx).unwrap()
        );
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..5 {
            assert!(finite_difference_check(5, 3, 2, seed) < 1e-5);
            assert!(finite_difference_check(8, 4, 3, seed) < 1e-5);
        }
    }

    #[test]
    fn zero_embedding_row_has_zero_context_gradient() {
        let mut m = Word2VecModel::init(5, 3, 2, 8).unwrap();
        m.embeddings.row_mut(1).iter_mut().for_each(|x| *x = 0.0);
        let g = m.skipgram_grad(1, &[0, 3]).unwrap();
        assert!(g.contexts.as_slice().iter().all(|&x| x == 0.0));
        assert!(g.embedding_row.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn residual_vanishes_at_the_empirical_optimum() {
        // Contexts [0, 1] give y = (1, 1, 0) and C·p = y needs p = (½, ½, 0):
        // approximate with logits (0, 0, −60).
        let m = model_from(&[&[1.0], &[0.5], &[0.2]], &[&[0.0, 0.0, -60.0]], 2);
        let g = m.skipgram_grad(0, &[0, 1]).unwrap();
        assert!(g.contexts.as_slice().iter().all(|x| x.abs() < 1e-20));
        assert!(g.embedding_row.iter().all(|x| x.abs() < 1e-20));
    }

    #[test]
    fn corpus_loss_matches_pointwise_sum() {
        let m = Word2VecModel::init(4, 2, 2, 3).unwrap();
        let corpus = Corpus::from_documents(vec![0, 1, 2, 3, 0, 1, 2], 4, vec![4, 7]).unwrap();
        let manual = [(0, [1, 2]), (1, [2, 3]), (0, [1, 2])]
            .iter()
            .map(|(i, ctx)| m.skipgram_loss(*i, ctx).unwrap())
            .sum::<f64>()
            / 3.0;
        assert!((m.corpus_loss(&corpus).unwrap() - manual).abs() < 1e-14);
    }

    #[test]
    fn training_is_deterministic_and_learns_alternation() {
        let tokens: Vec<u32> = (0..20_000).map(|k| (k % 2) as u32).collect();
        let corpus = Corpus::new(tokens, 2).unwrap();
        let config = TrainConfig {
            learning_rate: 1e-2,
            epochs: 1,
            log_every: 1000,
            ..TrainConfig::default()
        };
        let init = Word2VecModel::init(2, 2, 1, 0).unwrap();
        let (a, trace) = train_skipgram(init.clone(), &corpus, &config, None).unwrap();
        let (b, _) = train_skipgram(init, &corpus, &config, None).unwrap();
        assert_eq!(a, b);
        assert!(trace.last().unwrap().mean_loss < 0.05);
        assert!(trace.records.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(trace.last().unwrap().step, 19_999);
    }

    #[test]
    fn training_rejects_bad_input() {
        let corpus = Corpus::new(vec![0, 1], 2).unwrap();
        let m = Word2VecModel::init(2, 2, 2, 0).unwrap();
        assert!(matches!(
            train_skipgram(m.clone(), &corpus, &TrainConfig::default(), None),
            Err(Error::EmptyCorpus)
        ));
        let bad = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(train_skipgram(m, &corpus, &bad, None).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = Word2VecModel::init(7, 3, 2, 5).unwrap();
        let text = m.to_text();
        assert!(text.starts_with("7 3 2\n"));
        assert_eq!(Word2VecModel::from_text(&text).unwrap(), m);
        assert!(Word2VecModel::from_text("7 3\n").is_err());
    }

    proptest! {
        #[test]
        fn loss_is_permutation_invariant_and_matches_forward(
            seed in any::<u64>(),
            ctx in prop::collection::vec(0usize..6, 3),
            pivot in 0usize..6,
        ) {
            let m = Word2VecModel::init(6, 3, 3, seed).unwrap();
            let loss = m.skipgram_loss(pivot, &ctx).unwrap();
            let mut rev = ctx.clone();
            rev.reverse();
            prop_assert!((loss - m.skipgram_loss(pivot, &rev).unwrap()).abs() < 1e-12);
            let p = m.forward(pivot).unwrap();
            let via_forward: f64 = ctx.iter().map(|&j| -p[j].ln()).sum();
            prop_assert!((loss - via_forward).abs() < 1e-10);
            prop_assert!(loss >= 0.0);
        }
    }
}
