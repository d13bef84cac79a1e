//! Draws data from a spec file (the same TOML accepted by `hddc simulate`)
//! and writes it as CSV to stdout.
//!
//!     cargo run --example simulate > sim.csv

use hddc::io::write_csv;
use hddc::synthgen::SpecFile;

const SPEC: &str = r#"
p = 20
n = 300
seed = 42
orientation = "per-class"

[[class]]
pi = 0.5
d = 2
a = [40.0, 20.0]
b = 1.0

[[class]]
pi = 0.5
d = 4
a = 25.0
b = 2.0
"#;

fn main() -> hddc::Result<()> {
    let data = SpecFile::parse(SPEC)?.simulate()?;
    eprintln!("{} observations in {} dimensions", data.n(), data.p());
    write_csv(&data, std::io::stdout().lock())
}
