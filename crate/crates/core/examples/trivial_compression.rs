// Two words with identical context distributions can share one column of
// a rank-(V−1) factorization without any loss.

use w2v_ident::kernel::{block_kernel, compress_duplicates, reference_from_kernel, BlockSpec};

pub fn run_example() -> w2v_ident::Result<()> {
    let kernel = block_kernel(7, BlockSpec::new(2, 2), 4)?;
    let reference = reference_from_kernel(&kernel, 2)?;
    // words 0 and 1 share a block, hence a row
    let (merge_map, reduced) = compress_duplicates(&reference, 0, 1)?;
    let rebuilt = merge_map.matmul(&reduced)?;
    let exact = rebuilt.as_slice() == reference.context_probs().matrix().as_slice();
    println!(
        "merge_map {}x{}, reduced {}x{}, bit-exact: {exact}",
        merge_map.rows(),
        merge_map.cols(),
        reduced.rows(),
        reduced.cols()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
