//! With fewer observations than variables the leading eigenpairs of a
//! `p × p` scatter come from the much smaller `n × n` Gram matrix.
//!
//!     cargo run --release --example gram_trick

use std::time::Instant;

use hddc::linalg::{top_eig, CenteredDesign};
use hddc::{gram_top_eig, simulate, SimSpec};
use nalgebra::DVector;

fn main() -> hddc::Result<()> {
    let data = simulate(&SimSpec::three_subspaces(800, 40, 1))?;
    let weights = vec![1.0; data.n()];
    let mean = data.matrix().row_mean().transpose();
    let design = CenteredDesign::new(&data, &weights, &DVector::from(mean))?;

    let t = Instant::now();
    let small = gram_top_eig(&design, 5)?;
    let gram = t.elapsed();
    let t = Instant::now();
    let big = top_eig(&design.scatter(), 5)?;
    let full = t.elapsed();

    println!("gram ({0}x{0}): {gram:?}, full ({1}x{1}): {full:?}", data.n(), data.p());
    for (g, f) in small.values.iter().zip(&big.values) {
        println!("{g:12.4} {f:12.4}");
    }
    Ok(())
}
