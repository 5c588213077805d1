// Kernel → Reference Model → kernel on a symmetric kernel whose spectrum
// lies in [0, 1], plus the check harness over a few sizes.

use w2v_ident::harness::run_roundtrip_check;
use w2v_ident::kernel::{
    kernel_from_reference, reference_from_kernel, stationary, symmetric_kernel,
};

pub fn run_example() -> w2v_ident::Result<()> {
    let kernel = symmetric_kernel(6, 42)?;
    let reference = reference_from_kernel(&kernel, 3)?;
    let recovered = kernel_from_reference(&reference)?;
    println!("stationary: {:?}", stationary(&kernel)?.as_slice());
    println!(
        "V=6 C=3 max |K_recovered - K| = {:.3e}",
        recovered.matrix().max_abs_diff(kernel.matrix())
    );

    for (v, c) in [(5, 1), (10, 2), (50, 5)] {
        let report = run_roundtrip_check(v, c, 7)?;
        println!(
            "V={v:>2} C={c} attempts={} max_error={:.3e} passed={}",
            report.attempts, report.max_error, report.passed
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> w2v_ident::Result<()> {
    run_example()
}
