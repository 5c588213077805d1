// Run a tiny block-recovery grid through the harness and read back the
// CSV and manifest it writes.

use w2v_ident::harness::{run_block_recovery, ExperimentConfig};

pub fn run_example() -> w2v_ident::Result<()> {
    let out_dir = std::env::temp_dir().join(format!("w2v-block-recovery-{}", std::process::id()));
    let config = ExperimentConfig::from_json(&format!(
        r#"{{
            "vocab_size": 20, "dims": [3, 12], "width": 1,
            "num_blocks": 3, "block_size": 4,
            "corpus_len": 20000, "epochs": 2, "learning_rate": 0.01,
            "seeds": [1, 2], "log_every": 10000, "out_dir": {:?}
        }}"#,
        out_dir.display().to_string()
    ))?;
    for row in run_block_recovery(&config)? {
        println!(
            "N={:>2} seed={} intra={:.4} inter={:.4}",
            row.dim, row.seed, row.intra.mean, row.inter.mean
        );
    }
    let manifest = std::fs::read_to_string(out_dir.join("manifest.json")).unwrap_or_default();
    println!(
        "manifest: {} bytes, config hash {}",
        manifest.len(),
        config.hash()
    );
    std::fs::remove_dir_all(&out_dir).ok();
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
