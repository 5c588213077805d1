//! Experiment orchestration: seeded pipelines from kernel to trained model,
//! figure presets, numerical checks, and CSV / JSON emission.
//!
//! Every run directory receives a `manifest.json` that echoes the
//! configuration, its hash, every derived seed and timings, and is rewritten
//! after each completed run so partial grids remain usable.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedder::{train_skipgram, TrainConfig, TrainTrace, Word2VecModel};
use crate::error::{Error, Result};
use crate::kernel::{
    block_kernel, kernel_from_reference, random_kernel, reference_from_kernel, rng_from_seed,
    stationary, symmetric_kernel, BlockSpec, ReferenceModel, StochasticMatrix,
};
use crate::metrics::{block_similarity_stats, expected_cross_entropy, GroupSimilarityStats};
use crate::textgen::{sample_corpus, Corpus, MarkovModel};

pub const BLOCK_RECOVERY_SCHEMA: &str = "w2v-ident/block-recovery/v1";
pub const MANIFEST_SCHEMA: &str = "w2v-ident/manifest/v1";

/// Tokens per run when the configuration does not say: every word then
/// expects well over 10³ pivot occurrences.
pub fn default_corpus_len(vocab_size: usize) -> usize {
    if vocab_size <= 200 {
        1_000_000
    } else {
        4_000_000
    }
}

fn default_workers() -> usize {
    1
}

/// One grid of runs: every `(N, seed)` pair in `dims × seeds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub vocab_size: usize,
    pub dims: Vec<usize>,
    pub width: usize,
    #[serde(default)]
    pub num_blocks: Option<usize>,
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub corpus_len: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
    pub log_every: usize,
    pub out_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }

    pub fn blocks(&self) -> Result<Option<BlockSpec>> {
        match (self.num_blocks, self.block_size) {
            (None, None) => Ok(None),
            (Some(b), Some(s)) => Ok(Some(BlockSpec::new(b, s))),
            _ => Err(Error::InvalidParameter(
                "num_blocks and block_size must be given together".into(),
            )),
        }
    }

    pub fn corpus_len(&self) -> usize {
        self.corpus_len
            .unwrap_or_else(|| default_corpus_len(self.vocab_size))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("width", self.width),
            ("epochs", self.epochs),
            ("log_every", self.log_every),
            ("workers", self.workers),
            ("corpus_len", self.corpus_len()),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidParameter(
                "vocab_size must be at least 2".into(),
            ));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidParameter(
                "dims must be a non-empty list of positive sizes".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("seeds must not be empty".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidParameter(
                "learning_rate must be positive".into(),
            ));
        }
        if self.corpus_len() <= self.width {
            return Err(Error::InvalidParameter(
                "corpus_len must exceed width".into(),
            ));
        }
        if let Some(spec) = self.blocks()? {
            spec.check(self.vocab_size)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }

    fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        Ok(TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            seed,
            log_every: self.log_every,
            eval_blocks: self.blocks()?,
            ..TrainConfig::default()
        })
    }
}

/// Seeds derived from a run seed. Kernel and corpus depend on the run seed
/// only, so every `N` of a grid sees the same text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RunSeeds {
    pub kernel: u64,
    pub corpus: u64,
    pub init: u64,
    pub train: u64,
}

impl RunSeeds {
    pub fn derive(seed: u64) -> Self {
        RunSeeds {
            kernel: seed,
            corpus: seed.wrapping_add(0x1000),
            init: seed.wrapping_add(0x2000),
            train: seed.wrapping_add(0x3000),
        }
    }
}

/// Generating side of a run: kernel, its Reference Model and a sampled corpus.
#[derive(Debug, Clone)]
pub struct SyntheticSetup {
    pub kernel: StochasticMatrix,
    pub reference: ReferenceModel,
    pub corpus: Corpus,
}

pub fn synthetic_setup(config: &ExperimentConfig, seed: u64) -> Result<SyntheticSetup> {
    let seeds = RunSeeds::derive(seed);
    let kernel = match config.blocks()? {
        Some(spec) => block_kernel(config.vocab_size, spec, seeds.kernel)?,
        None => random_kernel(config.vocab_size, seeds.kernel)?,
    };
    let reference = reference_from_kernel(&kernel, config.width)?;
    let model = MarkovModel::with_uniform_start(kernel.clone())?;
    let corpus = sample_corpus(&model, config.corpus_len(), seeds.corpus)?;
    Ok(SyntheticSetup {
        kernel,
        reference,
        corpus,
    })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dim: usize,
    pub seed: u64,
    pub seeds: RunSeeds,
    pub model: Word2VecModel,
    pub trace: TrainTrace,
    pub wall_clock_secs: f64,
}

/// Trains one model of dimension `dim` on a prepared setup.
pub fn run_single(
    config: &ExperimentConfig,
    setup: &SyntheticSetup,
    dim: usize,
    seed: u64,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let seeds = RunSeeds::derive(seed);
    let init = Word2VecModel::init(config.vocab_size, dim, config.width, seeds.init)?;
    let (model, trace) = train_skipgram(
        init,
        &setup.corpus,
        &config.train_config(seeds.train)?,
        Some(&setup.reference),
    )?;
    Ok(RunOutcome {
        dim,
        seed,
        seeds,
        model,
        trace,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub dim: usize,
    pub seed: u64,
    pub seeds: RunSeeds,
    pub output: String,
    pub wall_clock_secs: f64,
    pub final_mean_loss: Option<f64>,
    pub final_cosine_distance: Option<f64>,
    pub intra: Option<GroupSimilarityStats>,
    pub inter: Option<GroupSimilarityStats>,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    library_version: &'static str,
    kind: &'a str,
    config: &'a ExperimentConfig,
    config_hash: String,
    corpus_len: usize,
    runs: Vec<RunRecord>,
    total_wall_clock_secs: f64,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs every `(N, seed)` of the grid, calling `finish` as each completes;
/// the manifest is rewritten after every run.
fn execute_grid<F>(config: &ExperimentConfig, kind: &str, finish: F) -> Result<Vec<RunRecord>>
where
    F: Fn(&RunOutcome) -> Result<RunRecord> + Sync,
{
    config.validate()?;
    let out = &config.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let start = Instant::now();
    let manifest_path = out.join("manifest.json");
    let records = Mutex::new(Vec::<RunRecord>::new());
    let flush = |records: &[RunRecord]| -> Result<()> {
        let mut runs = records.to_vec();
        runs.sort_by_key(|r| (r.seed, r.dim));
        let manifest = Manifest {
            schema: MANIFEST_SCHEMA,
            library_version: crate::VERSION,
            kind,
            config,
            config_hash: config.hash(),
            corpus_len: config.corpus_len(),
            runs,
            total_wall_clock_secs: start.elapsed().as_secs_f64(),
        };
        write_file(&manifest_path, &serde_json::to_string_pretty(&manifest)?)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| {
        config.seeds.par_iter().try_for_each(|&seed| -> Result<()> {
            let setup = synthetic_setup(config, seed)?;
            config.dims.par_iter().try_for_each(|&dim| -> Result<()> {
                let outcome = run_single(config, &setup, dim, seed)?;
                let record = finish(&outcome)?;
                let mut guard = records.lock().unwrap();
                guard.push(record);
                flush(&guard)
            })
        })
    })?;
    let mut records = records.into_inner().unwrap();
    records.sort_by_key(|r| (r.seed, r.dim));
    flush(&records)?;
    Ok(records)
}

fn final_blocks(
    trace: &TrainTrace,
) -> (Option<GroupSimilarityStats>, Option<GroupSimilarityStats>) {
    match trace.last().and_then(|r| r.blocks) {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    }
}

/// Learning traces for every `(N, seed)`: `trace_N<N>_seed<seed>.csv` plus `manifest.json`.
pub fn run_identifiability(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    execute_grid(config, "identifiability", |outcome| {
        let name = format!("trace_N{}_seed{}.csv", outcome.dim, outcome.seed);
        let blocks = match config.blocks()? {
            Some(s) => format!("{}x{}", s.num_blocks, s.block_size),
            None => "none".into(),
        };
        let csv = outcome.trace.to_csv(&[
            ("V", config.vocab_size.to_string()),
            ("N", outcome.dim.to_string()),
            ("C", config.width.to_string()),
            ("blocks", blocks),
            ("seed", outcome.seed.to_string()),
        ]);
        write_file(&config.out_dir.join(&name), &csv)?;
        let last = outcome.trace.last();
        let (intra, inter) = final_blocks(&outcome.trace);
        Ok(RunRecord {
            dim: outcome.dim,
            seed: outcome.seed,
            seeds: outcome.seeds,
            output: name,
            wall_clock_secs: outcome.wall_clock_secs,
            final_mean_loss: last.map(|r| r.mean_loss),
            final_cosine_distance: last.and_then(|r| r.cosine_distance),
            intra,
            inter,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockRecoveryRow {
    pub dim: usize,
    pub seed: u64,
    pub intra: GroupSimilarityStats,
    pub inter: GroupSimilarityStats,
}

pub fn block_recovery_csv(rows: &[BlockRecoveryRow]) -> String {
    let mut s = format!(
        "# schema={BLOCK_RECOVERY_SCHEMA}\nN,seed,intra_mean,intra_std,inter_mean,inter_std\n"
    );
    for r in rows {
        writeln!(
            s,
            "{},{},{:.10e},{:.10e},{:.10e},{:.10e}",
            r.dim, r.seed, r.intra.mean, r.intra.std, r.inter.mean, r.inter.std
        )
        .unwrap();
    }
    s
}

/// Final intra/inter block statistics per `(N, seed)`, written to `block_recovery.csv`.
pub fn run_block_recovery(config: &ExperimentConfig) -> Result<Vec<BlockRecoveryRow>> {
    let spec = config.blocks()?.ok_or_else(|| {
        Error::InvalidParameter("block recovery needs num_blocks and block_size".into())
    })?;
    config.validate()?;
    if spec.num_blocks < 2 {
        return Err(Error::InvalidParameter(
            "block recovery needs at least two blocks".into(),
        ));
    }
    let rows = Mutex::new(Vec::new());
    let records = execute_grid(config, "block-recovery", |outcome| {
        let setup_rm = reference_for(config, outcome.seed)?;
        let (intra, inter) = block_similarity_stats(&outcome.model, &setup_rm, spec)?;
        rows.lock().unwrap().push(BlockRecoveryRow {
            dim: outcome.dim,
            seed: outcome.seed,
            intra,
            inter,
        });
        let last = outcome.trace.last();
        Ok(RunRecord {
            dim: outcome.dim,
            seed: outcome.seed,
            seeds: outcome.seeds,
            output: "block_recovery.csv".into(),
            wall_clock_secs: outcome.wall_clock_secs,
            final_mean_loss: last.map(|r| r.mean_loss),
            final_cosine_distance: last.and_then(|r| r.cosine_distance),
            intra: Some(intra),
            inter: Some(inter),
        })
    })?;
    debug_assert_eq!(records.len(), config.dims.len() * config.seeds.len());
    let mut rows = rows.into_inner().unwrap();
    rows.sort_by_key(|r| (r.dim, r.seed));
    write_file(
        &config.out_dir.join("block_recovery.csv"),
        &block_recovery_csv(&rows),
    )?;
    Ok(rows)
}

fn reference_for(config: &ExperimentConfig, seed: u64) -> Result<ReferenceModel> {
    let seeds = RunSeeds::derive(seed);
    let kernel = match config.blocks()? {
        Some(spec) => block_kernel(config.vocab_size, spec, seeds.kernel)?,
        None => random_kernel(config.vocab_size, seeds.kernel)?,
    };
    reference_from_kernel(&kernel, config.width)
}

/// Figure grids at desk scale (`full = false`) or with the complete `N` sweeps.
pub fn preset(name: &str, full: bool, out_dir: &Path) -> Result<Vec<ExperimentConfig>> {
    let grid = |v: usize, blocks: &[Option<(usize, usize)>], dims: &[usize], epochs: usize| {
        blocks
            .iter()
            .map(|b| {
                let tag = match b {
                    Some((nb, bs)) => format!("V{v}_blk{nb}x{bs}"),
                    None => format!("V{v}_noblk"),
                };
                ExperimentConfig {
                    vocab_size: v,
                    dims: dims.to_vec(),
                    width: 1,
                    num_blocks: b.map(|x| x.0),
                    block_size: b.map(|x| x.1),
                    corpus_len: None,
                    epochs,
                    learning_rate: 1e-4,
                    seeds: vec![1],
                    log_every: if v <= 200 { 50_000 } else { 200_000 },
                    out_dir: out_dir.join(tag),
                    workers: 1,
                }
            })
            .collect::<Vec<_>>()
    };
    let configs = match (name, full) {
        ("fig1", false) => grid(50, &[Some((8, 5)), None], &[10, 80], 5),
        ("fig1", true) => grid(50, &[Some((8, 5)), None], &[5, 10, 20, 30, 50, 80, 100], 5),
        ("fig2", false) => grid(
            200,
            &[Some((8, 20)), Some((16, 10)), Some((32, 5)), None],
            &[10, 50],
            5,
        ),
        ("fig2", true) => grid(
            200,
            &[Some((8, 20)), Some((16, 10)), Some((32, 5)), None],
            &[10, 20, 50, 100, 150, 250],
            5,
        ),
        ("fig3", false) => grid(
            1000,
            &[Some((10, 80)), Some((40, 20)), Some((160, 5)), None],
            &[200, 800],
            2,
        ),
        ("fig3", true) => grid(
            1000,
            &[Some((10, 80)), Some((40, 20)), Some((160, 5)), None],
            &[50, 200, 500, 800],
            5,
        ),
        ("fig4", false) => {
            let mut c = grid(50, &[Some((8, 5))], &[10], 5);
            c.extend(grid(1000, &[Some((160, 5))], &[200, 800], 2));
            c
        }
        ("fig4", true) => {
            let mut c = grid(50, &[Some((8, 5))], &[5, 10, 20, 50], 5);
            c.extend(grid(
                1000,
                &[Some((40, 20)), Some((160, 5))],
                &[200, 500, 800],
                5,
            ));
            c
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown preset {name:?} (expected fig1, fig2, fig3 or fig4)"
            )))
        }
    };
    Ok(configs)
}

/// Tolerance of the kernel round trip.
pub const ROUNDTRIP_TOL: f64 = 1e-8;
const ROUNDTRIP_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundtripReport {
    pub vocab_size: usize,
    pub width: usize,
    pub seed: u64,
    pub attempts: usize,
    pub max_error: f64,
    pub passed: bool,
}

/// Builds a symmetric kernel with spectrum in `[0, 1]`, maps it to its
/// Reference Model and back, and reports the largest entrywise error.
pub fn run_roundtrip_check(vocab_size: usize, width: usize, seed: u64) -> Result<RoundtripReport> {
    let mut rng = rng_from_seed(seed);
    for attempt in 1..=ROUNDTRIP_ATTEMPTS {
        let kernel = match symmetric_kernel(vocab_size, rng.random()) {
            Ok(k) => k,
            Err(Error::InvalidParameter(msg)) => return Err(Error::InvalidParameter(msg)),
            Err(_) => continue,
        };
        let reference = reference_from_kernel(&kernel, width)?;
        let recovered = match kernel_from_reference(&reference) {
            Ok(k) => k,
            Err(Error::EigenvalueOutOfRange(_)) | Err(Error::NotRepresentable { .. }) => continue,
            Err(e) => return Err(e),
        };
        let max_error = recovered.matrix().max_abs_diff(kernel.matrix());
        return Ok(RoundtripReport {
            vocab_size,
            width,
            seed,
            attempts: attempt,
            max_error,
            passed: max_error < ROUNDTRIP_TOL,
        });
    }
    Err(Error::ConstructionFailed(ROUNDTRIP_ATTEMPTS))
}

/// Relative gap below which the corpus loss counts as converged at the largest length.
pub const LOSSLIMIT_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossLimitRow {
    pub corpus_len: usize,
    pub seed: u64,
    pub corpus_loss: f64,
    pub expected_cross_entropy: f64,
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossLimitReport {
    pub vocab_size: usize,
    pub model_seed: u64,
    pub rows: Vec<LossLimitRow>,
    /// `(T, median relative gap over seeds)`, ordered by `T`.
    pub median_gaps: Vec<(usize, f64)>,
    pub monotone: bool,
    pub final_gap: f64,
    pub passed: bool,
}

/// Model with entries uniform on `[−1, 1]`, large enough that its softmax
/// rows are far from uniform.
pub fn fixed_random_model(vocab_size: usize, dim: usize, seed: u64) -> Result<Word2VecModel> {
    Word2VecModel::uniform(vocab_size, dim, 1, 1.0, seed)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Compares the mean skip-gram loss (C = 1) of a fixed model over sampled
/// corpora with the stationary-weighted cross-entropy against the kernel.
///
/// Seed `s` uses `random_kernel(V, s)` and one sampled trajectory, whose
/// prefixes give the shorter lengths.
pub fn run_losslimit_check(
    vocab_size: usize,
    lengths: &[usize],
    seeds: &[u64],
    model_seed: u64,
) -> Result<LossLimitReport> {
    if lengths.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one length and one seed".into(),
        ));
    }
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    let model = fixed_random_model(vocab_size, 5.min(vocab_size), model_seed)?;
    let mut rows = Vec::new();
    for &seed in seeds {
        let kernel = random_kernel(vocab_size, seed)?;
        let mu = stationary(&kernel)?;
        let reference = reference_from_kernel(&kernel, 1)?;
        let expected = expected_cross_entropy(&model, &reference, &mu)?;
        let chain = MarkovModel::with_uniform_start(kernel)?;
        let longest = *lengths.last().unwrap();
        let trajectory = sample_corpus(&chain, longest, RunSeeds::derive(seed).corpus)?;
        for &len in &lengths {
            let prefix = Corpus::new(trajectory.tokens()[..len].to_vec(), vocab_size)?;
            let loss = model.corpus_loss(&prefix)?;
            rows.push(LossLimitRow {
                corpus_len: len,
                seed,
                corpus_loss: loss,
                expected_cross_entropy: expected,
                relative_gap: (loss - expected).abs() / expected,
            });
        }
    }
    let median_gaps: Vec<(usize, f64)> = lengths
        .iter()
        .map(|&len| {
            let mut gaps: Vec<f64> = rows
                .iter()
                .filter(|r| r.corpus_len == len)
                .map(|r| r.relative_gap)
                .collect();
            (len, median(&mut gaps))
        })
        .collect();
    let monotone = median_gaps.windows(2).all(|w| w[1].1 <= w[0].1);
    let final_gap = rows
        .iter()
        .filter(|r| r.corpus_len == *lengths.last().unwrap())
        .map(|r| r.relative_gap)
        .fold(0.0, f64::max);
    Ok(LossLimitReport {
        vocab_size,
        model_seed,
        rows,
        median_gaps,
        monotone,
        final_gap,
        passed: monotone && final_gap < LOSSLIMIT_TOL,
    })
}
