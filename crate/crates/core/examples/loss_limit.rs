// Mean skip-gram loss of a fixed random model over growing corpora versus
// its stationary cross-entropy limit.

use w2v_ident::harness::run_losslimit_check;

pub fn run_example() -> w2v_ident::Result<()> {
    let report = run_losslimit_check(10, &[1_000, 10_000, 100_000], &[1, 2, 3], 0)?;
    for (len, gap) in &report.median_gaps {
        println!("T={len:>6} median relative gap {gap:.5}");
    }
    println!(
        "monotone={} final max gap={:.5}",
        report.monotone, report.final_gap
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
