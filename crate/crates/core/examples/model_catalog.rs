//! Lists every model with its free-parameter count for a given problem size.
//!
//!     cargo run --example model_catalog -- 4 100 10

use hddc::{enumerate_models, param_count, ParamCountInputs};

fn main() -> hddc::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (k, p, d) = match args[..] {
        [k, p, d] => (k, p, d),
        _ => (4, 100, 10),
    };
    println!("k = {k}, p = {p}, d = {d}");
    for m in enumerate_models(None) {
        println!("{:<22} {:?} {}", m.to_string(), m.family(), param_count(m, &ParamCountInputs::common(k, p, d))?);
    }
    Ok(())
}
