//! Corpus sampling from Markov generative models and empirical estimators.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{rng_from_seed, ProbVector, ReferenceModel, StochasticMatrix};
use crate::linalg::Matrix;

/// Irreducible transition kernel together with the law of the first word.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    kernel: StochasticMatrix,
    initial: ProbVector,
}

impl MarkovModel {
    pub fn new(kernel: StochasticMatrix, initial: ProbVector) -> Result<Self> {
        if kernel.dim() != initial.dim() {
            return Err(Error::DimensionMismatch(kernel.dim(), initial.dim()));
        }
        if !kernel.is_irreducible() {
            return Err(Error::NotIrreducible);
        }
        Ok(MarkovModel { kernel, initial })
    }

    /// Starts from the uniform distribution.
    pub fn with_uniform_start(kernel: StochasticMatrix) -> Result<Self> {
        let dim = kernel.dim();
        MarkovModel::new(kernel, ProbVector::uniform(dim))
    }

    pub fn kernel(&self) -> &StochasticMatrix {
        &self.kernel
    }

    pub fn initial(&self) -> &ProbVector {
        &self.initial
    }

    pub fn vocab_size(&self) -> usize {
        self.kernel.dim()
    }
}

/// Token stream over a vocabulary of `vocab_size` words, split into documents.
///
/// Context windows never cross a document boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    tokens: Vec<u32>,
    vocab_size: usize,
    /// Exclusive end offset of every document, strictly increasing, last = len.
    doc_ends: Vec<usize>,
}

impl Corpus {
    /// Single-document corpus.
    pub fn new(tokens: Vec<u32>, vocab_size: usize) -> Result<Self> {
        let len = tokens.len();
        Corpus::from_documents(tokens, vocab_size, vec![len])
    }

    pub fn from_documents(
        tokens: Vec<u32>,
        vocab_size: usize,
        doc_ends: Vec<usize>,
    ) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                size: vocab_size,
            });
        }
        let sorted = doc_ends.windows(2).all(|w| w[0] < w[1]);
        if !sorted || doc_ends.last() != Some(&tokens.len()) || doc_ends.first() == Some(&0) {
            return Err(Error::InvalidParameter(
                "document ends must be strictly increasing and end at the corpus length".into(),
            ));
        }
        Ok(Corpus {
            tokens,
            vocab_size,
            doc_ends,
        })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn documents(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let starts = std::iter::once(0).chain(self.doc_ends.iter().copied());
        starts.zip(self.doc_ends.iter().copied()).map(|(s, e)| s..e)
    }

    /// Positions `k` whose `width` following tokens lie in the same document.
    pub fn pivots(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        self.documents()
            .flat_map(move |doc| doc.start..doc.end.saturating_sub(width).max(doc.start))
    }

    pub fn num_pivots(&self, width: usize) -> usize {
        self.documents()
            .map(|d| d.len().saturating_sub(width))
            .sum()
    }

    /// The `width` tokens following position `k`.
    pub fn contexts(&self, k: usize, width: usize) -> &[u32] {
        &self.tokens[k + 1..k + 1 + width]
    }

    /// Text form: optional `# V=<int> seed=<int>` header, one token per line,
    /// blank lines between documents.
    pub fn to_text(&self, seed: Option<u64>) -> String {
        let mut s = format!("# V={}", self.vocab_size);
        if let Some(seed) = seed {
            write!(s, " seed={seed}").unwrap();
        }
        s.push('\n');
        for (d, doc) in self.documents().enumerate() {
            if d > 0 {
                s.push('\n');
            }
            for &t in &self.tokens[doc] {
                writeln!(s, "{t}").unwrap();
            }
        }
        s
    }

    /// Parses the text form. Without a `V=` header the vocabulary size is one
    /// more than the largest token, unless `vocab_size` is given.
    pub fn from_text(text: &str, vocab_size: Option<usize>) -> Result<Corpus> {
        let mut header_v = None;
        let mut tokens = Vec::new();
        let mut doc_ends = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(v) = field.strip_prefix("V=") {
                        header_v = Some(v.parse::<usize>().map_err(|_| Error::ParseError {
                            line: n + 1,
                            msg: format!("bad vocabulary size {v:?}"),
                        })?);
                    }
                }
                continue;
            }
            if line.is_empty() {
                if doc_ends.last() != Some(&tokens.len()) && !tokens.is_empty() {
                    doc_ends.push(tokens.len());
                }
                continue;
            }
            let t: u32 = line.parse().map_err(|_| Error::ParseError {
                line: n + 1,
                msg: format!("bad token {line:?}"),
            })?;
            tokens.push(t);
        }
        if doc_ends.last() != Some(&tokens.len()) {
            doc_ends.push(tokens.len());
        }
        let v = vocab_size
            .or(header_v)
            .unwrap_or_else(|| tokens.iter().max().map_or(0, |&m| m as usize + 1));
        Corpus::from_documents(tokens, v, doc_ends)
    }

    pub fn save(&self, path: impl AsRef<Path>, seed: Option<u64>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text(seed)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Corpus> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Corpus::from_text(&text, None)
    }
}

/// Inverse-CDF draw from `probs` with one uniform variate.
fn sample_categorical<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = j;
            if u < cum {
                return j;
            }
        }
    }
    // Rounding left u beyond the accumulated mass.
    last_positive
}

/// Samples `len` tokens: the first from the initial law, then one transition per token.
pub fn sample_corpus(model: &MarkovModel, len: usize, seed: u64) -> Result<Corpus> {
    if len == 0 {
        return Err(Error::InvalidParameter(
            "corpus length must be at least 1".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut tokens = Vec::with_capacity(len);
    let mut state = sample_categorical(&mut rng, model.initial().as_slice());
    tokens.push(state as u32);
    for _ in 1..len {
        state = sample_categorical(&mut rng, model.kernel().row(state));
        tokens.push(state as u32);
    }
    Corpus::new(tokens, model.vocab_size())
}

/// Relative frequency of every word.
pub fn empirical_unigram(corpus: &Corpus) -> ProbVector {
    let mut counts = vec![0usize; corpus.vocab_size()];
    for &t in corpus.tokens() {
        counts[t as usize] += 1;
    }
    let total = corpus.len() as f64;
    ProbVector::from_raw(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Empirical Reference Model of width `width`.
///
/// Row `i` averages, over offsets `1..=width`, the empirical law of the word
/// at that offset after an occurrence of `i`. Only positions whose whole
/// window fits in the document are counted. Words never seen as a pivot get
/// a uniform row and `false` in the returned mask.
pub fn empirical_reference(corpus: &Corpus, width: usize) -> Result<(ReferenceModel, Vec<bool>)> {
    if width == 0 {
        return Err(Error::InvalidParameter("width must be at least 1".into()));
    }
    if corpus.num_pivots(width) == 0 {
        return Err(Error::EmptyCorpus);
    }
    let v = corpus.vocab_size();
    let mut counts = Matrix::zeros(v, v);
    let mut pivots = vec![0usize; v];
    for k in corpus.pivots(width) {
        let i = corpus.tokens()[k] as usize;
        pivots[i] += 1;
        for &j in corpus.contexts(k, width) {
            counts[(i, j as usize)] += 1.0;
        }
    }
    let mut seen = vec![false; v];
    for i in 0..v {
        let row = counts.row_mut(i);
        if pivots[i] == 0 {
            row.iter_mut().for_each(|x| *x = 1.0 / v as f64);
        } else {
            seen[i] = true;
            let denom = (pivots[i] * width) as f64;
            row.iter_mut().for_each(|x| *x /= denom);
        }
    }
    let rm = ReferenceModel::new(crate::kernel::validate_stochastic(counts)?, width)?;
    Ok((rm, seen))
}
