//! `w2vlab`: command-line front end for the identifiability lab.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure (including
//! a check that ran but did not pass).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use w2v_ident::embedder::{train_skipgram, TrainConfig, Word2VecModel};
use w2v_ident::harness::{
    preset, run_block_recovery, run_identifiability, run_losslimit_check, run_roundtrip_check,
    ExperimentConfig,
};
use w2v_ident::kernel::{
    block_kernel, random_kernel, reference_from_kernel, symmetric_kernel, BlockSpec,
    ReferenceModel, StochasticMatrix,
};
use w2v_ident::polarity::{
    average_over_slices, load_slices, polarity_report, report_csv, EmbedConfig, Lexicon,
    PolarityConfig,
};
use w2v_ident::textgen::{sample_corpus, Corpus, MarkovModel};
use w2v_ident::{Error, Result};

#[derive(Parser)]
#[command(
    name = "w2vlab",
    version,
    about = "Synthetic-text identifiability experiments for word2vec"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random transition kernel (optionally block-structured or symmetric).
    GenKernel {
        #[arg(long = "V")]
        vocab_size: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        block_size: Option<usize>,
        /// Symmetric kernel with spectrum in [0, 1] (invertible from its Reference Model).
        #[arg(long, conflicts_with_all = ["blocks", "block_size"])]
        symmetric: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the Reference Model for window `--C`.
        #[arg(long, requires = "width")]
        rm_out: Option<PathBuf>,
        #[arg(long = "C")]
        width: Option<usize>,
    },
    /// Sample a Markov corpus from a kernel file (uniform initial distribution).
    GenCorpus {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long = "T")]
        len: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a skip-gram model on a corpus file.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long = "N")]
        dim: usize,
        #[arg(long = "C")]
        width: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long)]
        seed: u64,
        /// Reference Model (matrix file) to evaluate the cosine distance against.
        #[arg(long)]
        eval_rm: Option<PathBuf>,
        #[arg(long, requires = "eval_rm")]
        blocks: Option<usize>,
        #[arg(long, requires = "blocks")]
        block_size: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        log_every: usize,
        #[arg(long)]
        shuffle: bool,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Learning traces over an (N, seed) grid.
    Identifiability(GridArgs),
    /// Final intra/inter block similarity over an (N, seed) grid.
    BlockRecovery(GridArgs),
    /// Kernel → Reference Model → kernel round trip on a symmetric kernel.
    RoundtripCheck {
        #[arg(long = "V")]
        vocab_size: usize,
        #[arg(long = "C")]
        width: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Corpus loss of a fixed model against its stationary cross-entropy limit.
    LosslimitCheck {
        #[arg(long = "V")]
        vocab_size: usize,
        #[arg(long = "T", value_delimiter = ',', default_values_t = [10_000usize, 100_000, 1_000_000])]
        lengths: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Category polarity per corpus slice.
    ///
    /// Tokens are whitespace-split, lowercased and stripped of leading and
    /// trailing non-alphanumeric characters.
    PolarityReport {
        /// Directory with one sub-directory per slice, one document per line.
        #[arg(long)]
        slices: PathBuf,
        /// CSV lines `category,word`.
        #[arg(long)]
        lexicon: PathBuf,
        /// Group pairs as `A:B`; `Random` names the sampled baseline.
        #[arg(long = "pair", required = true, value_parser = parse_pair)]
        pairs: Vec<(String, String)>,
        #[arg(long)]
        n_random: Option<usize>,
        #[arg(long = "N", default_value_t = 100)]
        dim: usize,
        #[arg(long = "C", default_value_t = 5)]
        width: usize,
        #[arg(long, default_value_t = 5)]
        min_count: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long)]
        seed: u64,
        /// Slice labels left out of the averaged table.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the slice-averaged table here.
        #[arg(long)]
        average_out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct GridArgs {
    /// JSON experiment configuration.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["fig1", "fig2", "fig3", "fig4"])]
    preset: Option<String>,
    /// Complete N sweeps for a preset.
    #[arg(long, requires = "preset")]
    full: bool,
    /// Output root for presets.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overrides the configured worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the configured seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    match s.split_once(':') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_string(), b.to_string())),
        _ => Err(format!("expected A:B, got {s:?}")),
    }
}

fn blocks_of(blocks: Option<usize>, block_size: Option<usize>) -> Result<Option<BlockSpec>> {
    match (blocks, block_size) {
        (None, None) => Ok(None),
        (Some(b), Some(s)) => Ok(Some(BlockSpec::new(b, s))),
        _ => Err(Error::InvalidParameter(
            "--blocks and --block-size go together".into(),
        )),
    }
}

fn grid_configs(args: &GridArgs) -> Result<Vec<ExperimentConfig>> {
    let mut configs = match (&args.config, &args.preset) {
        (Some(path), _) => vec![ExperimentConfig::load(path)?],
        (None, Some(name)) => preset(name, args.full, &args.out)?,
        (None, None) => unreachable!("clap requires one of --config/--preset"),
    };
    for c in &mut configs {
        if let Some(w) = args.workers {
            c.workers = w;
        }
        if !args.seed.is_empty() {
            c.seeds = args.seed.clone();
        }
        c.validate()?;
    }
    Ok(configs)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// `Ok(false)` means a check ran and failed.
fn run(command: Command) -> Result<bool> {
    match command {
        Command::GenKernel {
            vocab_size,
            seed,
            blocks,
            block_size,
            symmetric,
            out,
            rm_out,
            width,
        } => {
            let kernel = if symmetric {
                symmetric_kernel(vocab_size, seed)?
            } else {
                match blocks_of(blocks, block_size)? {
                    Some(spec) => block_kernel(vocab_size, spec, seed)?,
                    None => random_kernel(vocab_size, seed)?,
                }
            };
            kernel.save(&out)?;
            if let (Some(path), Some(c)) = (rm_out, width) {
                reference_from_kernel(&kernel, c)?
                    .context_probs()
                    .save(path)?;
            }
            Ok(true)
        }
        Command::GenCorpus {
            kernel,
            len,
            seed,
            out,
        } => {
            let model = MarkovModel::with_uniform_start(StochasticMatrix::load(kernel)?)?;
            sample_corpus(&model, len, seed)?.save(out, Some(seed))?;
            Ok(true)
        }
        Command::Train {
            corpus,
            dim,
            width,
            lr,
            epochs,
            seed,
            eval_rm,
            blocks,
            block_size,
            log_every,
            shuffle,
            trace_out,
            model_out,
        } => {
            let corpus = Corpus::load(corpus)?;
            let reference = eval_rm
                .map(|p| ReferenceModel::new(StochasticMatrix::load(p)?, width))
                .transpose()?;
            let config = TrainConfig {
                learning_rate: lr,
                epochs,
                seed,
                log_every,
                shuffle,
                eval_blocks: blocks_of(blocks, block_size)?,
                ..TrainConfig::default()
            };
            let init = Word2VecModel::init(corpus.vocab_size(), dim, width, seed)?;
            let (model, trace) = train_skipgram(init, &corpus, &config, reference.as_ref())?;
            if let Some(last) = trace.last() {
                eprintln!("step {} mean_loss {:.6}", last.step, last.mean_loss);
            }
            if let Some(path) = trace_out {
                let csv = trace.to_csv(&[
                    ("V", corpus.vocab_size().to_string()),
                    ("N", dim.to_string()),
                    ("C", width.to_string()),
                    ("seed", seed.to_string()),
                ]);
                write(&path, &csv)?;
            }
            if let Some(path) = model_out {
                model.save(path)?;
            }
            Ok(true)
        }
        Command::Identifiability(args) => {
            for config in grid_configs(&args)? {
                let records = run_identifiability(&config)?;
                eprintln!("{}: {} runs", config.out_dir.display(), records.len());
            }
            Ok(true)
        }
        Command::BlockRecovery(args) => {
            for config in grid_configs(&args)? {
                for row in run_block_recovery(&config)? {
                    println!(
                        "V={} N={} seed={} intra={:.6}±{:.6} inter={:.6}±{:.6}",
                        config.vocab_size,
                        row.dim,
                        row.seed,
                        row.intra.mean,
                        row.intra.std,
                        row.inter.mean,
                        row.inter.std
                    );
                }
            }
            Ok(true)
        }
        Command::RoundtripCheck {
            vocab_size,
            width,
            seed,
        } => {
            let report = run_roundtrip_check(vocab_size, width, seed)?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(report.passed)
        }
        Command::LosslimitCheck {
            vocab_size,
            lengths,
            seeds,
            seed,
        } => {
            let report = run_losslimit_check(vocab_size, &lengths, &seeds, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed)
        }
        Command::PolarityReport {
            slices,
            lexicon,
            pairs,
            n_random,
            dim,
            width,
            min_count,
            lr,
            epochs,
            seed,
            exclude,
            out,
            average_out,
        } => {
            let slices = load_slices(slices)?;
            let lexicon = Lexicon::load(lexicon)?;
            let config = PolarityConfig {
                pairs,
                n_random,
                embed: EmbedConfig {
                    dim,
                    width,
                    min_count,
                    train: TrainConfig {
                        learning_rate: lr,
                        epochs,
                        ..EmbedConfig::default().train
                    },
                },
                seed,
            };
            let rows = polarity_report(&slices, &lexicon, &config)?;
            write(&out, &report_csv(&rows))?;
            if let Some(path) = average_out {
                write(&path, &report_csv(&average_over_slices(&rows, &exclude)?))?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("check failed");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
