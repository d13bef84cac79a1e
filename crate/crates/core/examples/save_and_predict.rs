//! Fits on one sample, saves the model to a text file, loads it back and
//! classifies a fresh sample from the same mixture.
//!
//!     cargo run --release --example save_and_predict

use hddc::io::ModelFile;
use hddc::{fit, recognition_rate, simulate, DimPolicy, EmConfig, ModelKind, SimSpec};

fn main() -> hddc::Result<()> {
    let train = simulate(&SimSpec::three_subspaces(30, 500, 8))?;
    let model: ModelKind = "[a_i b_i Q_i d_i]".parse()?;
    let report = fit(&train, 3, model, &DimPolicy::scree(0.2), &EmConfig::default())?;

    let path = std::env::temp_dir().join("hddc-example.model");
    ModelFile::from(&report).save(&path)?;
    let loaded = ModelFile::load(&path)?;
    println!("saved {} ({} components, dims {:?})", path.display(), loaded.params.k(), loaded.params.dims());

    // same mixture, different draw: only the sample seed changes
    let spec = SimSpec::three_subspaces(30, 300, 8);
    let test = hddc::synthgen::sample_mixture(&spec.true_params()?, spec.n, 99)?;
    let (pred, post) = loaded.params.predict(&test)?;
    let rate = recognition_rate(test.labels().unwrap(), &pred)?;
    println!("held-out recognition {:.3}", rate.rate);
    println!("first posterior row {:?}", post.matrix().row(0).iter().map(|t| (t * 1e3).round() / 1e3).collect::<Vec<_>>());
    Ok(())
}
