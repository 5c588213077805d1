// Sample a Markov corpus and watch the empirical Reference Model approach
// the generating one as the corpus grows.

use w2v_ident::kernel::{random_kernel, reference_from_kernel};
use w2v_ident::textgen::{empirical_reference, empirical_unigram, sample_corpus, MarkovModel};

pub fn run_example() -> w2v_ident::Result<()> {
    let kernel = random_kernel(8, 3)?;
    let chain = MarkovModel::with_uniform_start(kernel.clone())?;
    let width = 2;
    let truth = reference_from_kernel(&kernel, width)?;

    for len in [1_000, 10_000, 100_000] {
        let corpus = sample_corpus(&chain, len, 9)?;
        let (estimate, seen) = empirical_reference(&corpus, width)?;
        let max_l1 = (0..kernel.dim())
            .map(|i| {
                estimate
                    .row(i)
                    .iter()
                    .zip(truth.row(i))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        println!(
            "T={len:>6} seen={}/{} max row L1={max_l1:.4}",
            seen.iter().filter(|&&s| s).count(),
            seen.len()
        );
        if len == 1_000 {
            println!("unigram: {:.3?}", empirical_unigram(&corpus).as_slice());
            println!(
                "{}",
                corpus
                    .to_text(Some(9))
                    .lines()
                    .take(4)
                    .collect::<Vec<_>>()
                    .join(" | ")
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
