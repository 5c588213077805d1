//! Lexicon-group similarity analyses over tokenized corpus slices.
//!
//! Two notions of group similarity are provided and they are not
//! interchangeable: [`mean_pairwise_cosine`] averages the cosine over every
//! pair of words drawn from two groups, while [`centroid_cosine`] compares a
//! word with the renormalized sum of a group's unit vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::embedder::{train_skipgram, TrainConfig, Word2VecModel};
use crate::error::{Error, Result};
use crate::kernel::{rng_from_seed, StochasticMatrix};
use crate::linalg::{norm, Matrix};
use crate::metrics::{cosine, GroupSimilarityStats};
use crate::textgen::{sample_corpus, Corpus, MarkovModel};

/// Name of the random baseline group in reports.
pub const RANDOM_GROUP: &str = "Random";

/// Named word categories, e.g. `positive` and `negative`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    categories: BTreeMap<String, BTreeSet<String>>,
}

impl Lexicon {
    /// Parses `category,word` lines (an optional `category,word` header
    /// included); words are lowercased and deduplicated.
    pub fn from_text(text: &str) -> Result<Lexicon> {
        let mut lexicon = Lexicon::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || (n == 0 && line == "category,word") {
                continue;
            }
            let (category, word) = line.split_once(',').ok_or_else(|| Error::ParseError {
                line: n + 1,
                msg: "expected `category,word`".into(),
            })?;
            let (category, word) = (category.trim(), word.trim().to_lowercase());
            if category.is_empty() || word.is_empty() || word.contains(',') {
                return Err(Error::ParseError {
                    line: n + 1,
                    msg: format!("malformed entry {line:?}"),
                });
            }
            lexicon
                .categories
                .entry(category.to_string())
                .or_default()
                .insert(word);
        }
        Ok(lexicon)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Lexicon::from_text(&text)
    }

    pub fn insert<I, S>(&mut self, category: &str, words: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set = self.categories.entry(category.to_string()).or_default();
        set.extend(words.into_iter().map(|w| w.as_ref().to_lowercase()));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn category(&self, name: &str) -> Result<&BTreeSet<String>> {
        match self.categories.get(name) {
            Some(words) if !words.is_empty() => Ok(words),
            _ => Err(Error::EmptyCategory(name.to_string())),
        }
    }
}

/// Whitespace split, lowercase, and trim non-alphanumeric characters at both ends.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Labelled set of tokenized documents (for instance one year of news).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedCorpusSlice {
    label: String,
    documents: Vec<Vec<String>>,
}

impl TokenizedCorpusSlice {
    pub fn new(label: impl Into<String>, documents: Vec<Vec<String>>) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::InvalidParameter(
                "slice label must not be empty".into(),
            ));
        }
        Ok(TokenizedCorpusSlice { label, documents })
    }

    /// One document per input line, tokenized with [`tokenize`].
    pub fn from_lines<'a>(
        label: impl Into<String>,
        lines: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let docs = lines
            .into_iter()
            .map(tokenize)
            .filter(|d| !d.is_empty())
            .collect();
        TokenizedCorpusSlice::new(label, docs)
    }

    /// Reads every file of `dir` (sorted by name), one document per line; the
    /// directory name becomes the label.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let label = dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut text = String::new();
        for f in files {
            text.push_str(&std::fs::read_to_string(&f).map_err(|e| Error::io(&f, e))?);
            text.push('\n');
        }
        TokenizedCorpusSlice::from_lines(label, text.lines())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn documents(&self) -> &[Vec<String>] {
        &self.documents
    }
}

/// Loads every subdirectory of `root` as a slice, sorted by label.
pub fn load_slices(root: impl AsRef<Path>) -> Result<Vec<TokenizedCorpusSlice>> {
    let root = root.as_ref();
    let mut dirs: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    dirs.iter().map(TokenizedCorpusSlice::load_dir).collect()
}

/// Dense word indices for words seen at least `min_count` times, most
/// frequent first, ties in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct VocabMap {
    words: Vec<String>,
    counts: Vec<usize>,
    index: HashMap<String, usize>,
    min_count: usize,
}

impl VocabMap {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn count(&self, i: usize) -> usize {
        self.counts[i]
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    /// Indices of the words of `group` present in the vocabulary, sorted.
    pub fn indices<'a>(&self, group: impl IntoIterator<Item = &'a String>) -> Vec<usize> {
        let mut idx: Vec<usize> = group.into_iter().filter_map(|w| self.get(w)).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

pub fn build_vocab(slice: &TokenizedCorpusSlice, min_count: usize) -> Result<VocabMap> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for w in slice.documents.iter().flatten() {
        *counts.entry(w).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::EmptySlice);
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let words: Vec<String> = kept.iter().map(|(w, _)| w.to_string()).collect();
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(VocabMap {
        words,
        counts: kept.into_iter().map(|(_, c)| c).collect(),
        index,
        min_count,
    })
}

/// Drops out-of-vocabulary words; each input document stays a separate
/// document so no context window spans two of them.
pub fn encode_slice(slice: &TokenizedCorpusSlice, vocab: &VocabMap) -> Result<Corpus> {
    let mut tokens = Vec::new();
    let mut ends = Vec::new();
    for doc in &slice.documents {
        let before = tokens.len();
        tokens.extend(doc.iter().filter_map(|w| vocab.get(w)).map(|i| i as u32));
        if tokens.len() > before {
            ends.push(tokens.len());
        }
    }
    Corpus::from_documents(tokens, vocab.len(), ends)
}

fn overlap(vocab: &VocabMap, group: &BTreeSet<String>, name: &str) -> Result<Vec<usize>> {
    let idx = vocab.indices(group);
    if idx.is_empty() {
        return Err(Error::NoGroupOverlap(name.to_string()));
    }
    Ok(idx)
}

/// Mean and spread of the embedding cosine over all pairs `(a, b)` with
/// `a ∈ A`, `b ∈ B` in the vocabulary and `a ≠ b`.
pub fn mean_pairwise_cosine(
    embeddings: &Matrix,
    vocab: &VocabMap,
    group_a: &BTreeSet<String>,
    group_b: &BTreeSet<String>,
) -> Result<GroupSimilarityStats> {
    let a = overlap(vocab, group_a, "groupA")?;
    let b = overlap(vocab, group_b, "groupB")?;
    let mut values = Vec::with_capacity(a.len() * b.len());
    for &i in &a {
        for &j in &b {
            if i != j {
                values.push(cosine(embeddings.row(i), embeddings.row(j))?);
            }
        }
    }
    GroupSimilarityStats::from_values(values)
}

/// Cosine between `word` and the sum of the unit vectors of `group`.
pub fn centroid_cosine(
    embeddings: &Matrix,
    vocab: &VocabMap,
    group: &BTreeSet<String>,
    word: &str,
) -> Result<f64> {
    let members = overlap(vocab, group, "group")?;
    let target = vocab
        .get(word)
        .ok_or_else(|| Error::WordNotInVocab(word.to_string()))?;
    let mut centroid = vec![0.0; embeddings.cols()];
    for i in members {
        let row = embeddings.row(i);
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        for (c, x) in centroid.iter_mut().zip(row) {
            *c += x / n;
        }
    }
    cosine(&centroid, embeddings.row(target))
}

/// Embedding model trained for each slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub width: usize,
    pub min_count: usize,
    pub train: TrainConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 100,
            width: 5,
            min_count: 5,
            train: TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityConfig {
    /// Group pairs to report; either side may be [`RANDOM_GROUP`].
    pub pairs: Vec<(String, String)>,
    /// Size of the random baseline; defaults to the size of the first
    /// category named in `pairs`.
    pub n_random: Option<usize>,
    pub embed: EmbedConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarityRow {
    pub slice: String,
    pub group_a: String,
    pub group_b: String,
    pub stats: GroupSimilarityStats,
}

/// Trains a skip-gram model on a slice; returns the vocabulary and `W`.
pub fn embed_slice(
    slice: &TokenizedCorpusSlice,
    config: &EmbedConfig,
    seed: u64,
) -> Result<(VocabMap, Word2VecModel)> {
    let vocab = build_vocab(slice, config.min_count)?;
    let corpus = encode_slice(slice, &vocab)?;
    let init = Word2VecModel::init(vocab.len(), config.dim, config.width, seed)?;
    let train = TrainConfig {
        seed,
        ..config.train.clone()
    };
    let (model, _) = train_skipgram(init, &corpus, &train, None)?;
    Ok((vocab, model))
}

/// Per-slice seed: the report seed offset by the slice position.
fn slice_seed(seed: u64, position: usize) -> u64 {
    seed.wrapping_add(position as u64)
}

pub fn polarity_report(
    slices: &[TokenizedCorpusSlice],
    lexicon: &Lexicon,
    config: &PolarityConfig,
) -> Result<Vec<PolarityRow>> {
    if slices.is_empty() {
        return Err(Error::InvalidParameter("no slices given".into()));
    }
    if config.pairs.is_empty() {
        return Err(Error::InvalidParameter("no group pairs requested".into()));
    }
    let categories: Vec<&str> = config
        .pairs
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .filter(|&g| g != RANDOM_GROUP)
        .collect();
    for c in &categories {
        lexicon.category(c)?;
    }
    let n_random = match (config.n_random, categories.first()) {
        (Some(n), _) => n,
        (None, Some(c)) => lexicon.category(c)?.len(),
        (None, None) => {
            return Err(Error::InvalidParameter(
                "n_random is required when no category is named".into(),
            ))
        }
    };

    let mut rows = Vec::new();
    for (position, slice) in slices.iter().enumerate() {
        let seed = slice_seed(config.seed, position);
        let (vocab, model) = embed_slice(slice, &config.embed, seed)?;
        let mut rng = rng_from_seed(seed ^ 0x5eed_4a4d_0000_0001);
        let random: BTreeSet<String> =
            index::sample(&mut rng, vocab.len(), n_random.min(vocab.len()))
                .into_iter()
                .map(|i| vocab.word(i).to_string())
                .collect();
        let group = |name: &str| -> Result<&BTreeSet<String>> {
            if name == RANDOM_GROUP {
                Ok(&random)
            } else {
                lexicon.category(name)
            }
        };
        for (a, b) in &config.pairs {
            let stats = mean_pairwise_cosine(model.embeddings(), &vocab, group(a)?, group(b)?)
                .map_err(|e| match e {
                    Error::NoGroupOverlap(side) => {
                        let name = if side == "groupA" { a } else { b };
                        Error::NoGroupOverlap(format!("{name} in slice {}", slice.label()))
                    }
                    other => other,
                })?;
            rows.push(PolarityRow {
                slice: slice.label().to_string(),
                group_a: a.clone(),
                group_b: b.clone(),
                stats,
            });
        }
    }
    Ok(rows)
}

/// Mean over slices of the per-slice means, per group pair, skipping the
/// slices listed in `exclude`; `std` is the spread of the slice means.
pub fn average_over_slices(rows: &[PolarityRow], exclude: &[String]) -> Result<Vec<PolarityRow>> {
    let mut by_pair: BTreeMap<(String, String), (Vec<f64>, usize)> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows.iter().filter(|r| !exclude.contains(&r.slice)) {
        let key = (r.group_a.clone(), r.group_b.clone());
        if !by_pair.contains_key(&key) {
            order.push(key.clone());
        }
        let entry = by_pair.entry(key).or_default();
        entry.0.push(r.stats.mean);
        entry.1 += r.stats.count;
    }
    order
        .into_iter()
        .map(|key| {
            let (means, pairs) = by_pair.remove(&key).unwrap();
            let stats = GroupSimilarityStats::from_values(means)?;
            Ok(PolarityRow {
                slice: "mean".into(),
                group_a: key.0,
                group_b: key.1,
                stats: GroupSimilarityStats {
                    count: pairs,
                    ..stats
                },
            })
        })
        .collect()
}

/// `slice,groupA,groupB,mean,std,pairs`.
pub fn report_csv(rows: &[PolarityRow]) -> String {
    let mut s = String::from("slice,groupA,groupB,mean,std,pairs\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{:.10e},{:.10e},{}",
            r.slice, r.group_a, r.group_b, r.stats.mean, r.stats.std, r.stats.count
        )
        .unwrap();
    }
    s
}

/// Name of word `i` in synthetic slices.
pub fn synthetic_word(i: usize) -> String {
    format!("w{i:04}")
}

/// Slice whose text is sampled from `kernel`, with word `i` spelled
/// [`synthetic_word`]`(i)` and documents of `doc_len` words.
pub fn synthetic_slice(
    label: &str,
    kernel: &StochasticMatrix,
    len: usize,
    doc_len: usize,
    seed: u64,
) -> Result<TokenizedCorpusSlice> {
    if doc_len == 0 {
        return Err(Error::InvalidParameter(
            "document length must be positive".into(),
        ));
    }
    let corpus = sample_corpus(&MarkovModel::with_uniform_start(kernel.clone())?, len, seed)?;
    let names: Vec<String> = (0..kernel.dim()).map(synthetic_word).collect();
    let documents = corpus
        .tokens()
        .chunks(doc_len)
        .map(|chunk| chunk.iter().map(|&t| names[t as usize].clone()).collect())
        .collect();
    TokenizedCorpusSlice::new(label, documents)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn slice(docs: &[&[&str]]) -> TokenizedCorpusSlice {
        TokenizedCorpusSlice::new(
            "s",
            docs.iter()
                .map(|d| d.iter().map(|w| w.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn lexicon_parsing() {
        let lex =
            Lexicon::from_text("positive,able\npositive,abundant\nnegative,abandon\n").unwrap();
        assert_eq!(lex.category("positive").unwrap().len(), 2);
        assert_eq!(lex.category("negative").unwrap().len(), 1);
        let lex = Lexicon::from_text("positive,Able\npositive,able\n").unwrap();
        assert_eq!(lex.category("positive").unwrap(), &set(&["able"]));
        let empty = Lexicon::from_text("").unwrap();
        assert!(matches!(
            empty.category("positive"),
            Err(Error::EmptyCategory(_))
        ));
        assert!(matches!(
            Lexicon::from_text("positive,able\nnocomma\n"),
            Err(Error::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn tokenizer_rule() {
        assert_eq!(
            tokenize("  Profits ROSE, (sharply)! -- 3.5% \"gain\""),
            vec!["profits", "rose", "sharply", "3.5", "gain"]
        );
    }

    #[test]
    fn vocab_ordering() {
        let s = slice(&[&["a", "b", "a"]]);
        let v = build_vocab(&s, 1).unwrap();
        assert_eq!((v.get("a"), v.get("b")), (Some(0), Some(1)));
        let v = build_vocab(&s, 2).unwrap();
        assert_eq!((v.get("a"), v.get("b"), v.len()), (Some(0), None, 1));
        let v = build_vocab(&slice(&[&["d", "c", "b", "c", "d"]]), 1).unwrap();
        assert_eq!(v.word(0), "c");
        assert_eq!(v.word(1), "d");
        assert_eq!(v.word(2), "b");
        assert!(matches!(
            build_vocab(&slice(&[]), 1),
            Err(Error::EmptySlice)
        ));
    }

    #[test]
    fn encoding_respects_documents() {
        let s = slice(&[&["a", "b", "c"], &["zzz"], &["c", "b", "a"]]);
        let v = build_vocab(&s, 2).unwrap();
        let c = encode_slice(&s, &v).unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c.documents().count(), 2);
        assert_eq!(c.num_pivots(2), 2);
    }

    fn toy_vocab(words: &[&str]) -> VocabMap {
        let docs: Vec<&str> = words.to_vec();
        build_vocab(&slice(&[&docs]), 1).unwrap()
    }

    #[test]
    fn pairwise_cosine_examples() {
        let vocab = toy_vocab(&["a", "b", "c", "d"]);
        let mut w = Matrix::zeros(4, 2);
        for word in ["a", "b"] {
            w.row_mut(vocab.get(word).unwrap())
                .copy_from_slice(&[1.0, 0.0]);
        }
        for word in ["c", "d"] {
            w.row_mut(vocab.get(word).unwrap())
                .copy_from_slice(&[0.0, 2.0]);
        }
        let ab = set(&["a", "b"]);
        let cd = set(&["c", "d", "unknown"]);
        let same = mean_pairwise_cosine(&w, &vocab, &ab, &ab).unwrap();
        assert_eq!((same.mean, same.count), (1.0, 2));
        let cross = mean_pairwise_cosine(&w, &vocab, &ab, &cd).unwrap();
        assert_eq!((cross.mean, cross.count), (0.0, 4));
        assert!(matches!(
            mean_pairwise_cosine(&w, &vocab, &set(&["x"]), &ab),
            Err(Error::NoGroupOverlap(_))
        ));
    }

    #[test]
    fn pairwise_cosine_is_exactly_symmetric() {
        let vocab = toy_vocab(&["a", "b", "c", "d", "e", "f"]);
        let m = Word2VecModel::init(6, 5, 1, 3).unwrap();
        let a = set(&["a", "b", "c"]);
        let b = set(&["c", "d", "e", "f"]);
        assert_eq!(
            mean_pairwise_cosine(m.embeddings(), &vocab, &a, &b).unwrap(),
            mean_pairwise_cosine(m.embeddings(), &vocab, &b, &a).unwrap()
        );
    }

    #[test]
    fn centroid_examples() {
        let vocab = toy_vocab(&["u", "v", "x"]);
        let mut w = Matrix::zeros(3, 2);
        w.row_mut(vocab.get("u").unwrap())
            .copy_from_slice(&[1.0, 0.0]);
        w.row_mut(vocab.get("v").unwrap())
            .copy_from_slice(&[0.0, 1.0]);
        w.row_mut(vocab.get("x").unwrap())
            .copy_from_slice(&[1.0, -1.0]);
        assert!((centroid_cosine(&w, &vocab, &set(&["u"]), "u").unwrap() - 1.0).abs() < 1e-15);
        assert!(
            centroid_cosine(&w, &vocab, &set(&["u", "v"]), "x")
                .unwrap()
                .abs()
                < 1e-15
        );
        let c = centroid_cosine(&w, &vocab, &set(&["u", "v"]), "u").unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(matches!(
            centroid_cosine(&w, &vocab, &set(&["u"]), "nope"),
            Err(Error::WordNotInVocab(_))
        ));
        assert!(matches!(
            centroid_cosine(&w, &vocab, &set(&["nope"]), "u"),
            Err(Error::NoGroupOverlap(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let rows = vec![PolarityRow {
            slice: "2020".into(),
            group_a: "positive".into(),
            group_b: RANDOM_GROUP.into(),
            stats: GroupSimilarityStats {
                mean: 0.25,
                std: 0.5,
                count: 12,
            },
        }];
        assert_eq!(
            report_csv(&rows),
            "slice,groupA,groupB,mean,std,pairs\n2020,positive,Random,2.5000000000e-1,5.0000000000e-1,12\n"
        );
        let avg = average_over_slices(&rows, &["2020".into()]).unwrap();
        assert!(avg.is_empty());
        let avg = average_over_slices(&rows, &[]).unwrap();
        assert_eq!(avg[0].stats.mean, 0.25);
    }
}
