//! Grid search over models, component counts and scree thresholds; the
//! lowest BIC wins.
//!
//!     cargo run --release --example select_models

use hddc::{enumerate_models, select, simulate, EmConfig, Family, SelectionGrid, SimSpec};

fn main() -> hddc::Result<()> {
    // three classes living on 2-, 5- and 10-dimensional subspaces of R^40
    let data = simulate(&SimSpec::three_subspaces(40, 600, 3))?;
    let mut grid = SelectionGrid::new(enumerate_models(Some(Family::FreeOrientation))[..4].to_vec(), 2..=4);
    grid.thresholds = vec![0.05, 0.2];
    let cfg = EmConfig { n_restarts: 3, seed: 5, ..EmConfig::default() };
    let report = select(&data, &grid, &cfg)?;
    print!("{}", report.to_tsv());
    let w = report.winner();
    println!("selected {} with k = {}, dims {:?}", w.model, w.k, w.dims);
    Ok(())
}
