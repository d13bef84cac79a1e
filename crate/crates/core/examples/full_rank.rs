//! Data that does not follow the subspace assumption: full-rank Gaussian
//! classes with a prescribed condition number. Prints how well each method
//! recovers the classes and how well conditioned its fitted covariances are.
//!
//!     cargo run --release --example full_rank

use hddc::benchmark::{full_rank_sweep, BenchConfig};
use hddc::{BaselineKind, ModelKind};

fn main() -> hddc::Result<()> {
    let methods = ["[a_ij b_i Q_i d_i]".parse()?, ModelKind::Baseline(BaselineKind::Full)];
    let cfg = BenchConfig { replications: 2, n_restarts: 3, seed: 11, ..BenchConfig::default() };
    println!("n\tmethod\trecognition\tcondition");
    for pt in full_rank_sweep(&[200, 800], 20, 50.0, &methods, &cfg)? {
        println!("{}\t{}\t{:.3}\t{:.1}", pt.x, pt.method, pt.mean_recognition(), pt.mean_condition());
    }
    Ok(())
}
