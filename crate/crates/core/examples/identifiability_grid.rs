// Learning traces over a small (N, seed) grid, one CSV per run.

use w2v_ident::harness::{run_identifiability, ExperimentConfig};

pub fn run_example() -> w2v_ident::Result<()> {
    let out_dir = std::env::temp_dir().join(format!("w2v-identifiability-{}", std::process::id()));
    let config = ExperimentConfig {
        vocab_size: 12,
        dims: vec![2, 6, 24],
        width: 2,
        num_blocks: None,
        block_size: None,
        corpus_len: Some(20_000),
        epochs: 1,
        learning_rate: 1e-2,
        seeds: vec![7],
        log_every: 5_000,
        out_dir: out_dir.clone(),
        workers: 1,
    };
    for record in run_identifiability(&config)? {
        println!(
            "N={:>2} loss={:.4} cosine distance={:.4} -> {}",
            record.dim,
            record.final_mean_loss.unwrap_or(f64::NAN),
            record.final_cosine_distance.unwrap_or(f64::NAN),
            record.output
        );
    }
    std::fs::remove_dir_all(&out_dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
