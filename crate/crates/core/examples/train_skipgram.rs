// Train a small skip-gram model with Adam and print its learning trace.

use w2v_ident::embedder::{train_skipgram, TrainConfig, Word2VecModel};
use w2v_ident::kernel::{block_kernel, reference_from_kernel, stationary, BlockSpec};
use w2v_ident::metrics::{conditional_entropy, trace_cosine_distance};
use w2v_ident::textgen::{sample_corpus, MarkovModel};

pub fn run_example() -> w2v_ident::Result<()> {
    let spec = BlockSpec::new(3, 4);
    let kernel = block_kernel(16, spec, 1)?;
    let reference = reference_from_kernel(&kernel, 1)?;
    let corpus = sample_corpus(&MarkovModel::with_uniform_start(kernel.clone())?, 50_000, 2)?;

    let config = TrainConfig {
        learning_rate: 1e-2,
        epochs: 2,
        seed: 3,
        log_every: 20_000,
        eval_blocks: Some(spec),
        ..TrainConfig::default()
    };
    let init = Word2VecModel::init(16, 8, 1, 3)?;
    println!(
        "initial cosine distance {:.4}",
        trace_cosine_distance(&init, &reference)?
    );
    let (model, trace) = train_skipgram(init, &corpus, &config, Some(&reference))?;
    print!("{}", trace.to_csv(&[("V", "16".into()), ("N", "8".into())]));
    println!(
        "loss floor (conditional entropy) {:.4}",
        conditional_entropy(&reference, &stationary(&kernel)?)?
    );
    println!(
        "final cosine distance {:.4}",
        trace_cosine_distance(&model, &reference)?
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
