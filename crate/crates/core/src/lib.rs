//! Identifiability laboratory for skip-gram word2vec.
//!
//! Corpora are sampled from Markov generative models with a known transition
//! kernel, a full-softmax skip-gram model is trained on them, and the learned
//! factorization `softmax(W·W')` is compared with the Reference Model that
//! generated the text.
//!
//! * [`kernel`]: stochastic matrices, Reference Models, the kernel ↔ Reference
//!   Model correspondence and exact duplicate-row compression.
//! * [`textgen`]: corpus sampling and empirical estimators.
//! * [`embedder`]: the word2vec model, its loss, gradients and Adam training.
//! * [`metrics`]: cross-entropy criterion and similarity measures.
//! * [`polarity`]: lexicon-group similarity reports over tokenized corpora.
//! * [`harness`]: experiment grids, numerical checks and CSV/JSON emission.

pub mod embedder;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod polarity;
pub mod textgen;

pub use embedder::{TrainConfig, TrainTrace, Word2VecModel};
pub use error::{Error, Result};
pub use kernel::{BlockSpec, ProbVector, ReferenceModel, StochasticMatrix};
pub use linalg::Matrix;
pub use textgen::{Corpus, MarkovModel};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
