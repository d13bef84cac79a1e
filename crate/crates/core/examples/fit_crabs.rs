//! Clusters the crabs morphometry data (200 crabs, 5 measurements, 4 groups)
//! with a subspace model and compares the partition with the known groups.
//!
//!     cargo run --release --example fit_crabs

use hddc::io::crabs;
use hddc::{fit, recognition_rate, ConfusionMatrix, DimPolicy, EmConfig, ModelKind};

fn main() -> hddc::Result<()> {
    let crabs = crabs();
    let model: ModelKind = "[a_ij b_i Q_i d_i]".parse()?;
    let cfg = EmConfig { n_restarts: 20, seed: 1, ..EmConfig::default() };
    let report = fit(&crabs.data, 4, model, &DimPolicy::scree(0.2), &cfg)?;

    let truth = crabs.data.labels().expect("crabs carry labels");
    let rate = recognition_rate(truth, &report.assignments)?;
    println!("model {model}: loglik {:.2}, bic {:.2}, dims {:?}", report.loglik, report.bic, report.dims());
    println!("recognition rate {:.3}", rate.rate);
    println!("groups: {}", crabs.label_names.join(" "));
    print!("{}", ConfusionMatrix::new(truth, &report.assignments)?.to_tsv());
    Ok(())
}
