//! Recognition rate of a subspace model and of the full-covariance mixture
//! as the ambient dimension grows while the class subspaces stay small.
//!
//!     cargo run --release --example dimension_sweep

use hddc::benchmark::{dimension_sweep, BenchConfig};
use hddc::{BaselineKind, ModelKind};

fn main() -> hddc::Result<()> {
    let methods = ["[a_i b_i Q_i d_i]".parse()?, ModelKind::Baseline(BaselineKind::Full)];
    let cfg = BenchConfig { replications: 3, n_restarts: 3, ..BenchConfig::default() };
    println!("p\tmethod\trecognition");
    for point in dimension_sweep(&[20, 50, 80], 600, &methods, &cfg)? {
        println!("{}\t{}\t{:.3}", point.x, point.method, point.mean_recognition());
    }
    Ok(())
}
