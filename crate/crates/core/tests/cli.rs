use std::fs;
use std::path::Path;

use hddc::cli::{run, EXIT_INPUT, EXIT_OK, EXIT_VALIDATION};

fn hddc(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["hddc"];
    full.extend_from_slice(args);
    let code = run(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn crabs_path() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/crabs.csv").display().to_string()
}

const SPEC: &str = "p = 8\nn = 120\nseed = 4\n\n[[class]]\npi = 0.5\nd = 1\na = 30\nb = 1\n\n[[class]]\npi = 0.5\nd = 2\na = [20, 10]\nb = 1\n";

#[test]
fn fit_crabs_reports_dimensions_and_saves_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let m1 = dir.path().join("a.model");
    let m2 = dir.path().join("b.model");
    let crabs = crabs_path();
    let args = |out: &str| {
        vec!["fit", crabs.as_str(), "--label-col", "--k", "4", "--model", "[a_i b_i Q_i d_i]", "--restarts", "20", "--out"]
            .into_iter()
            .map(String::from)
            .chain([out.to_string()])
            .collect::<Vec<_>>()
    };
    let a1 = args(m1.to_str().unwrap());
    let (code, out, err) = hddc(&a1.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code, EXIT_OK, "{err}");
    let summary: Vec<&str> = out.lines().next().unwrap().split('\t').collect();
    assert_eq!(summary[0], "[a_i b_i Q_i d_i]");
    assert_eq!(summary[5], "1,1,1,1");
    let a2 = args(m2.to_str().unwrap());
    hddc(&a2.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    let (code, out, _) = hddc(&["predict", m1.to_str().unwrap(), &crabs, "--label-col"]);
    assert_eq!(code, EXIT_OK);
    for line in out.lines().skip(1) {
        let sum: f64 = line.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-10);
    }
}

#[test]
fn predict_rejects_wrong_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m");
    let crabs = crabs_path();
    let (code, _, _) = hddc(&["fit", &crabs, "--label-col", "--k", "2", "--restarts", "1", "--out", model.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let other = dir.path().join("x.csv");
    fs::write(&other, "1,2,3\n4,5,6\n").unwrap();
    let (code, _, err) = hddc(&["predict", model.to_str().unwrap(), other.to_str().unwrap()]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("dimension"), "{err}");
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3,x\n").unwrap();
    let (code, _, err) = hddc(&["fit", bad.to_str().unwrap(), "--k", "1"]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("row 2, column 2"), "{err}");
    let (code, _, _) = hddc(&["fit", "/nonexistent/file.csv", "--k", "1"]);
    assert_eq!(code, EXIT_INPUT);
    let (code, _, _) = hddc(&["benchmark", "no-such-suite", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn simulate_then_select_one_cell() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    let csv = dir.path().join("data.csv");
    fs::write(&spec, SPEC).unwrap();
    let (code, _, err) = hddc(&["simulate", spec.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let read = hddc::io::read_csv(&csv, true).unwrap();
    assert_eq!((read.data.n(), read.data.p()), (120, 8));
    let again = hddc::synthgen::SpecFile::parse(SPEC).unwrap().simulate().unwrap();
    assert_eq!(read.data.matrix(), again.matrix());

    let (code, out, err) = hddc(&[
        "select", csv.to_str().unwrap(), "--label-col", "--models", "[a_i b_i Q_i d_i]", "--k-range", "2", "--thresholds", "0.2",
        "--restarts", "2",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "model\tk\tt\tdims\tloglik\tnu\tbic\tstatus");
    assert_eq!(lines.len(), 2);
}

#[test]
fn crabs_benchmark_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = hddc(&["benchmark", "crabs", "--restarts", "20", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("crabs.tsv"));
    let table = fs::read_to_string(dir.path().join("crabs.tsv")).unwrap();
    assert!(table.lines().any(|l| l.starts_with("Sphe-GMM\t")));
    assert!(table.lines().any(|l| l.starts_with("HDDC [a_i b_i Q_i d_i]\t")));
}
