// Polarity report on synthetic slices whose "positive" and "negative"
// words occupy two different blocks of the generating kernel.

use w2v_ident::embedder::TrainConfig;
use w2v_ident::kernel::{block_kernel, BlockSpec};
use w2v_ident::polarity::{
    polarity_report, report_csv, synthetic_slice, synthetic_word, EmbedConfig, Lexicon,
    PolarityConfig, RANDOM_GROUP,
};

pub fn run_example() -> w2v_ident::Result<()> {
    let spec = BlockSpec::new(4, 6);
    let kernel = block_kernel(40, spec, 11)?;

    let mut lexicon = Lexicon::default();
    lexicon.insert("Positive", spec.block(0).map(synthetic_word));
    lexicon.insert("Negative", spec.block(1).map(synthetic_word));

    let slices = (0..2)
        .map(|y| synthetic_slice(&format!("year{y}"), &kernel, 40_000, 40, 100 + y as u64))
        .collect::<w2v_ident::Result<Vec<_>>>()?;

    let config = PolarityConfig {
        pairs: vec![
            ("Positive".into(), "Positive".into()),
            ("Positive".into(), "Negative".into()),
            ("Positive".into(), RANDOM_GROUP.into()),
        ],
        n_random: None,
        embed: EmbedConfig {
            dim: 10,
            width: 2,
            min_count: 1,
            train: TrainConfig {
                learning_rate: 1e-2,
                epochs: 2,
                log_every: usize::MAX,
                ..TrainConfig::default()
            },
        },
        seed: 5,
    };
    let rows = polarity_report(&slices, &lexicon, &config)?;
    print!("{}", report_csv(&rows));
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
