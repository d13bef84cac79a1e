//! File formats: numeric CSV datasets and saved models.
//!
//! # CSV
//!
//! Comma separated, `.` as decimal point, UTF-8. The first row is a header
//! when any of its feature cells fails to parse as a number. With labels
//! enabled, the last column holds class labels; any strings are accepted
//! and numbered in order of first appearance.
//!
//! # Model files
//!
//! Line oriented, one `key value...` record per line, values separated by
//! single spaces and written with 17 significant digits so they read back
//! to the same `f64`. Field order is fixed:
//!
//! ```text
//! hddc-model 1
//! model <name, e.g. [a_i b_i Q_i d_i]>
//! k <components>
//! p <dimension>
//! loglik <value>
//! bic <value>
//! seed <value>
//! component <index>          repeated k times, followed by
//! pi <proportion>
//! mu <p values>
//! d <intrinsic dimension>    subspace models only
//! a <d values>
//! b <value>
//! q <p*d values, column by column>
//! cov full <p*p values, column by column>    baselines only, one of
//! cov diag <p values>
//! cov sphe <value>
//! ```

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::baselines::{BaselineComponent, BaselineParams, Covariance};
use crate::data::DataMatrix;
use crate::em::{FitReport, FittedParams, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::model::{Component, MixtureParams, ModelKind};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const CRABS_CSV: &str = include_str!("../data/crabs.csv");

/// A dataset read from CSV, with the names needed to write it back.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub data: DataMatrix,
    pub header: Option<Vec<String>>,
    /// Original label strings, indexed by the numeric labels in `data`.
    pub label_names: Vec<String>,
}

pub fn read_csv_str(text: &str, label_col: bool) -> Result<CsvData> {
    read_csv_from(text.as_bytes(), label_col)
}

pub fn read_csv(path: &Path, label_col: bool) -> Result<CsvData> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv_from(file, label_col)
}

pub fn read_csv_from<R: Read>(reader: R, label_col: bool) -> Result<CsvData> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = None;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(format!("row {}: {e}", r + 1)))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let cells: Vec<&str> = rec.iter().collect();
        let n_features = if label_col { cells.len().saturating_sub(1) } else { cells.len() };
        if r == 0 && cells[..n_features].iter().any(|c| c.parse::<f64>().is_err()) {
            header = Some(cells.iter().map(|s| s.to_string()).collect());
            width = Some(cells.len());
            continue;
        }
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::Parse(format!(
                    "row {}: expected {w} columns, found {}",
                    r + 1,
                    cells.len()
                )))
            }
            _ => {}
        }
        if n_features == 0 {
            return Err(Error::Parse(format!("row {}: no numeric columns", r + 1)));
        }
        let values = cells[..n_features]
            .iter()
            .enumerate()
            .map(|(c, s)| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse(format!("row {}, column {}: '{s}' is not a finite number", r + 1, c + 1))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
        if label_col {
            raw_labels.push(cells[n_features].to_string());
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let mut data = DataMatrix::from_rows(&rows).map_err(|e| Error::Parse(e.to_string()))?;
    let mut label_names = Vec::new();
    if label_col {
        let mut index: HashMap<String, usize> = HashMap::new();
        let labels = raw_labels
            .into_iter()
            .map(|s| {
                let next = index.len();
                *index.entry(s.clone()).or_insert_with(|| {
                    label_names.push(s);
                    next
                })
            })
            .collect();
        data = data.with_labels(labels)?;
    }
    Ok(CsvData { data, header, label_names })
}

/// Writes `data` as CSV; labels, when present, go in a trailing `label` column.
pub fn write_csv<W: Write>(data: &DataMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut head: Vec<String> = (1..=data.p()).map(|c| format!("x{c}")).collect();
    if data.labels().is_some() {
        head.push("label".into());
    }
    w.write_record(&head).map_err(io)?;
    for j in 0..data.n() {
        let mut rec: Vec<String> = data.row(j).iter().map(|v| v.to_string()).collect();
        if let Some(l) = data.labels() {
            rec.push(l[j].to_string());
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// The bundled crabs measurements: 200 rows, 5 columns in millimetres,
/// labels 0..4 for the classes `BM`, `BF`, `OM`, `OF`.
pub fn crabs() -> CsvData {
    read_csv_str(CRABS_CSV, true).expect("bundled crabs data parses")
}

/// Hard assignments and posterior probabilities, one row per observation.
pub fn write_predictions<W: Write>(assignments: &[usize], resp: &Responsibilities, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut head = vec!["cluster".to_string()];
    head.extend((0..resp.k()).map(|i| format!("p{i}")));
    w.write_record(&head).map_err(io)?;
    for (j, a) in assignments.iter().enumerate() {
        let mut rec = vec![a.to_string()];
        rec.extend(resp.matrix().row(j).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// A fitted model with the metadata needed to reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: ModelKind,
    pub params: FittedParams,
    pub loglik: f64,
    pub bic: f64,
    pub seed: u64,
}

impl From<&FitReport> for ModelFile {
    fn from(r: &FitReport) -> Self {
        ModelFile {
            model: r.model,
            params: r.params.clone(),
            loglik: r.loglik,
            bic: r.bic,
            seed: r.seed,
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn nums<'a>(vs: impl IntoIterator<Item = &'a f64>) -> String {
    vs.into_iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ")
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("hddc-model {MODEL_FORMAT_VERSION}"),
            format!("model {}", self.model),
            format!("k {}", self.params.k()),
            format!("p {}", self.params.p()),
            format!("loglik {}", num(self.loglik)),
            format!("bic {}", num(self.bic)),
            format!("seed {}", self.seed),
        ];
        match &self.params {
            FittedParams::Subspace(m) => {
                for (i, c) in m.components.iter().enumerate() {
                    lines.push(format!("component {i}"));
                    lines.push(format!("pi {}", num(c.pi)));
                    lines.push(format!("mu {}", nums(c.mean.iter())));
                    lines.push(format!("d {}", c.dim()));
                    lines.push(format!("a {}", nums(&c.a)));
                    lines.push(format!("b {}", num(c.b)));
                    lines.push(format!("q {}", nums(c.orientation.iter())));
                }
            }
            FittedParams::Baseline(b) => {
                for (i, c) in b.components.iter().enumerate() {
                    lines.push(format!("component {i}"));
                    lines.push(format!("pi {}", num(c.pi)));
                    lines.push(format!("mu {}", nums(c.mean.iter())));
                    lines.push(match &c.cov {
                        Covariance::Full(s) => format!("cov full {}", nums(s.matrix().iter())),
                        Covariance::Diag(v) => format!("cov diag {}", nums(v)),
                        Covariance::Sphe(v) => format!("cov sphe {}", num(*v)),
                    });
                }
            }
        }
        lines.push(String::new());
        lines.join("\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = Lines { it: text.lines().enumerate(), last: 0 };
        let version = lines.field("hddc-model")?;
        if version != MODEL_FORMAT_VERSION.to_string() {
            return Err(Error::Parse(format!("unsupported model format version {version}")));
        }
        let model: ModelKind = lines.field("model")?.parse()?;
        let k: usize = lines.parse_one("k")?;
        let p: usize = lines.parse_one("p")?;
        let loglik: f64 = lines.parse_one("loglik")?;
        let bic: f64 = lines.parse_one("bic")?;
        let seed: u64 = lines.parse_one("seed")?;
        let params = match model {
            ModelKind::Subspace(_) => {
                let mut components = Vec::with_capacity(k);
                for i in 0..k {
                    lines.expect_component(i)?;
                    let pi = lines.parse_one("pi")?;
                    let mean = DVector::from_vec(lines.floats("mu", p)?);
                    let d: usize = lines.parse_one("d")?;
                    let a = lines.floats("a", d)?;
                    let b = lines.parse_one("b")?;
                    let orientation = DMatrix::from_vec(p, d, lines.floats("q", p * d)?);
                    components.push(Component { pi, mean, orientation, a, b });
                }
                FittedParams::Subspace(MixtureParams { p, components })
            }
            ModelKind::Baseline(kind) => {
                let mut components = Vec::with_capacity(k);
                for i in 0..k {
                    lines.expect_component(i)?;
                    let pi = lines.parse_one("pi")?;
                    let mean = DVector::from_vec(lines.floats("mu", p)?);
                    let cov_line = lines.field("cov")?;
                    let (tag, rest) = cov_line.split_once(' ').unwrap_or((cov_line.as_str(), ""));
                    let values = parse_floats(rest, lines.last)?;
                    let want = match tag {
                        "full" => p * p,
                        "diag" => p,
                        "sphe" => 1,
                        other => return Err(Error::Parse(format!("line {}: unknown covariance '{other}'", lines.last))),
                    };
                    if values.len() != want {
                        return Err(Error::Parse(format!(
                            "line {}: expected {want} covariance values, found {}",
                            lines.last,
                            values.len()
                        )));
                    }
                    let cov = match tag {
                        "full" => Covariance::Full(SymMatrix::new(DMatrix::from_vec(p, p, values))?),
                        "diag" => Covariance::Diag(values),
                        _ => Covariance::Sphe(values[0]),
                    };
                    components.push(BaselineComponent { pi, mean, cov });
                }
                FittedParams::Baseline(BaselineParams { kind, p, components })
            }
        };
        Ok(ModelFile { model, params, loglik, bic, seed })
    }
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    it: I,
    last: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    /// The rest of the next non-empty line, which must start with `key`.
    fn field(&mut self, key: &str) -> Result<String> {
        for (no, line) in self.it.by_ref() {
            self.last = no + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            if head != key {
                return Err(Error::Parse(format!("line {}: expected '{key}', found '{head}'", self.last)));
            }
            return Ok(rest.trim().to_string());
        }
        Err(Error::Parse(format!("unexpected end of file, expected '{key}'")))
    }

    fn parse_one<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value '{v}' for '{key}'", self.last)))
    }

    fn floats(&mut self, key: &str, len: usize) -> Result<Vec<f64>> {
        let v = parse_floats(&self.field(key)?, self.last)?;
        if v.len() != len {
            return Err(Error::Parse(format!(
                "line {}: expected {len} values for '{key}', found {}",
                self.last,
                v.len()
            )));
        }
        Ok(v)
    }

    fn expect_component(&mut self, i: usize) -> Result<()> {
        let got: usize = self.parse_one("component")?;
        if got != i {
            return Err(Error::Parse(format!("line {}: expected component {i}, found {got}", self.last)));
        }
        Ok(())
    }
}

fn parse_floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("line {line}: bad number '{t}'"))))
        .collect()
}
