//! Reproducible experiment suites. Each suite returns TSV tables and
//! plot-data files (columns `x`, `method`, `y`); nothing is rendered.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::data::DataMatrix;
use crate::em::{fit, EmConfig, FitReport};
use crate::error::{Error, Result};
use crate::io::crabs;
use crate::metrics::{condition_ratio, recognition_rate};
use crate::model::{enumerate_models, BaselineKind, DStructure, Family, ModelKind};
use crate::selection::{select, DimPolicy, SelectionGrid};
use crate::synthgen::{simulate, simulate_full_rank, FullRankSpec, SimSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ModelSelection,
    HyperParams,
    DimensionSweep,
    FullRank,
    Crabs,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::ModelSelection,
        Suite::HyperParams,
        Suite::DimensionSweep,
        Suite::FullRank,
        Suite::Crabs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ModelSelection => "model-selection",
            Suite::HyperParams => "hyper-params",
            Suite::DimensionSweep => "dimension-sweep",
            Suite::FullRank => "full-rank",
            Suite::Crabs => "crabs",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.name()).collect();
                Error::InvalidInput(format!("unknown suite '{s}', expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub replications: usize,
    pub n_restarts: usize,
    /// Scree threshold used wherever a single fit is needed.
    pub threshold: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { seed: 0, replications: 10, n_restarts: 5, threshold: 0.2 }
    }
}

impl BenchConfig {
    fn em(&self, replication: usize) -> EmConfig {
        EmConfig { seed: self.seed + replication as u64, n_restarts: self.n_restarts, ..EmConfig::default() }
    }

    fn data_seed(&self, replication: usize) -> u64 {
        // Kept apart from the EM seeds so data and starts are not correlated.
        self.seed.wrapping_mul(1_000_003).wrapping_add(replication as u64 + 1)
    }
}

/// Named output files of a suite.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchOutput {
    pub files: Vec<(String, String)>,
}

impl BenchOutput {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, content) in &self.files {
            fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

/// Mean recognition of each method at each point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub method: String,
    pub recognition: Vec<f64>,
    /// Per-replication mean condition number of the fitted covariances.
    pub condition: Vec<f64>,
}

impl SweepPoint {
    pub fn mean_recognition(&self) -> f64 {
        mean(&self.recognition)
    }

    pub fn mean_condition(&self) -> f64 {
        mean(&self.condition)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn method_name(model: ModelKind) -> String {
    match model {
        ModelKind::Baseline(b) => b.name().to_string(),
        m => format!("HDDC {m}"),
    }
}

fn rate(data: &DataMatrix, report: &FitReport) -> Result<f64> {
    let truth = data
        .labels()
        .ok_or_else(|| Error::InvalidInput("benchmark data carries no labels".into()))?;
    Ok(recognition_rate(truth, &report.assignments)?.rate)
}

/// Geometric mean over components of each fitted covariance's condition number.
pub fn fitted_condition(report: &FitReport) -> Result<f64> {
    let values: Vec<f64> = match (&report.params.subspace(), &report.params.baseline()) {
        (Some(m), _) => (0..m.k()).map(|i| condition_ratio(m, i)).collect(),
        (_, Some(b)) => (0..b.components.len()).map(|i| b.condition_number(i)).collect::<Result<_>>()?,
        _ => unreachable!(),
    };
    Ok((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

fn fit_or_chance(data: &DataMatrix, k: usize, model: ModelKind, cfg: &BenchConfig, r: usize) -> Result<(f64, f64)> {
    match fit(data, k, model, &DimPolicy::scree(cfg.threshold), &cfg.em(r)) {
        Ok(rep) => Ok((rate(data, &rep)?, fitted_condition(&rep)?)),
        // A method that cannot be fitted scores no better than one class.
        Err(Error::FitFailed(_)) => {
            let truth = data.labels().unwrap();
            Ok((recognition_rate(truth, &vec![0; truth.len()])?.rate, f64::NAN))
        }
        Err(e) => Err(e),
    }
}

fn sweep<F>(xs: &[f64], methods: &[ModelKind], k: usize, cfg: &BenchConfig, make: F) -> Result<Vec<SweepPoint>>
where
    F: Fn(f64, u64) -> Result<DataMatrix>,
{
    let mut points: Vec<SweepPoint> = Vec::new();
    for &x in xs {
        let mut by_method: Vec<SweepPoint> = methods
            .iter()
            .map(|&m| SweepPoint { x, method: method_name(m), recognition: vec![], condition: vec![] })
            .collect();
        for r in 0..cfg.replications {
            let data = make(x, cfg.data_seed(r))?;
            for (point, &m) in by_method.iter_mut().zip(methods) {
                let (rec, cond) = fit_or_chance(&data, k, m, cfg, r)?;
                point.recognition.push(rec);
                point.condition.push(cond);
            }
        }
        points.append(&mut by_method);
    }
    Ok(points)
}

fn plot(points: &[SweepPoint], y: impl Fn(&SweepPoint) -> f64) -> String {
    let mut out = String::from("x\tmethod\ty\n");
    for pt in points {
        writeln!(out, "{}\t{}\t{}", pt.x, pt.method, y(pt)).unwrap();
    }
    out
}

/// Recognition against the ambient dimension for data from
/// `[a_i b_i Q_i d_i]` with dimensions 2, 5 and 10.
pub fn dimension_sweep(ps: &[usize], n: usize, methods: &[ModelKind], cfg: &BenchConfig) -> Result<Vec<SweepPoint>> {
    let truth = "[a_i b_i Q_i d_i]".parse::<ModelKind>()?.subspace().unwrap();
    let xs: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
    sweep(&xs, methods, 3, cfg, |p, seed| simulate(&SimSpec::for_model(truth, p as usize, n, seed)))
}

/// Recognition and fitted condition numbers against the sample size for
/// full-rank classes of condition number `condition`.
pub fn full_rank_sweep(
    ns: &[usize],
    p: usize,
    condition: f64,
    methods: &[ModelKind],
    cfg: &BenchConfig,
) -> Result<Vec<SweepPoint>> {
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    sweep(&xs, methods, 3, cfg, |n, seed| {
        simulate_full_rank(&FullRankSpec::new(3, p, n as usize, condition, seed))
    })
}

fn sweep_table(points: &[SweepPoint], x_name: &str) -> String {
    let mut out = format!("{x_name}\tmethod\trecognition_mean\trecognition_sd\tcondition_mean\n");
    for pt in points {
        writeln!(
            out,
            "{}\t{}\t{:.4}\t{:.4}\t{:.4e}",
            pt.x,
            pt.method,
            pt.mean_recognition(),
            sd(&pt.recognition),
            pt.mean_condition()
        )
        .unwrap();
    }
    out
}

fn baselines_and(hddc: &str) -> Vec<ModelKind> {
    let mut m = vec![hddc.parse().expect("catalog model name")];
    m.extend(
        [BaselineKind::Full, BaselineKind::Com, BaselineKind::Diag, BaselineKind::Sphe]
            .into_iter()
            .map(ModelKind::Baseline),
    );
    m
}

/// One row of the crabs comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CrabsRow {
    pub method: String,
    pub recognition: f64,
    pub dims: Vec<usize>,
    pub bic: f64,
}

/// Every baseline and a few subspace models on the raw crabs data, `k = 4`.
pub fn crabs_comparison(models: &[ModelKind], cfg: &EmConfig, threshold: f64) -> Result<Vec<CrabsRow>> {
    let data = crabs().data;
    models
        .iter()
        .map(|&m| {
            let rep = fit(&data, 4, m, &DimPolicy::scree(threshold), cfg)?;
            Ok(CrabsRow { method: method_name(m), recognition: rate(&data, &rep)?, dims: rep.dims(), bic: rep.bic })
        })
        .collect()
}

fn join(dims: &[usize]) -> String {
    dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn run_suite(suite: Suite, cfg: &BenchConfig) -> Result<BenchOutput> {
    let mut out = BenchOutput::default();
    match suite {
        Suite::ModelSelection => {
            let models: Vec<ModelKind> = enumerate_models(Some(Family::FreeOrientation))
                .into_iter()
                .filter(|m| m.subspace().is_some_and(|s| s.d() == DStructure::PerClass))
                .collect();
            let mut table = String::from("generating\tfitted\tbic_mean\trecognition_mean\ttimes_selected\n");
            for &truth in &models {
                let mut bics = vec![Vec::new(); models.len()];
                let mut recs = vec![Vec::new(); models.len()];
                let mut wins = vec![0; models.len()];
                for r in 0..cfg.replications {
                    let data = simulate(&SimSpec::for_model(truth.subspace().unwrap(), 50, 1000, cfg.data_seed(r)))?;
                    let mut best = (f64::INFINITY, 0);
                    for (i, &m) in models.iter().enumerate() {
                        let rep = fit(&data, 3, m, &DimPolicy::scree(cfg.threshold), &cfg.em(r))?;
                        if rep.bic < best.0 {
                            best = (rep.bic, i);
                        }
                        bics[i].push(rep.bic);
                        recs[i].push(rate(&data, &rep)?);
                    }
                    wins[best.1] += 1;
                }
                for (i, m) in models.iter().enumerate() {
                    writeln!(table, "{truth}\t{m}\t{:.1}\t{:.4}\t{}", mean(&bics[i]), mean(&recs[i]), wins[i]).unwrap();
                }
            }
            out.files.push(("model-selection.tsv".into(), table));
        }
        Suite::HyperParams => {
            let model: ModelKind = "[a_i b_i Q_i d_i]".parse()?;
            let mut table = String::from("replication\tk\tt\tdims\tbic\twinner\n");
            let mut curve: Vec<Vec<f64>> = vec![Vec::new(); 5];
            for r in 0..cfg.replications {
                let data = simulate(&SimSpec::three_subspaces(100, 1000, cfg.data_seed(r)))?;
                let grid = SelectionGrid::new(vec![model], 2..=6);
                let report = select(&data, &grid, &cfg.em(r))?;
                let winner = report.winner().clone();
                for k in 2..=6 {
                    let best = report
                        .rows
                        .iter()
                        .filter(|row| row.k == k && row.bic.is_finite())
                        .min_by(|a, b| a.bic.total_cmp(&b.bic));
                    if let Some(row) = best {
                        curve[k - 2].push(row.bic);
                        writeln!(
                            table,
                            "{r}\t{k}\t{}\t{}\t{:.1}\t{}",
                            row.threshold.map_or("-".into(), |t| t.to_string()),
                            join(&row.dims),
                            row.bic,
                            row == &winner
                        )
                        .unwrap();
                    }
                }
            }
            let mut plot = String::from("x\tmethod\ty\n");
            for (i, bics) in curve.iter().enumerate() {
                writeln!(plot, "{}\tHDDC {model}\t{}", i + 2, mean(bics)).unwrap();
            }
            out.files.push(("hyper-params.tsv".into(), table));
            out.files.push(("hyper-params.plot.tsv".into(), plot));
        }
        Suite::DimensionSweep => {
            let ps = [20, 40, 60, 80, 100];
            let points = dimension_sweep(&ps, 1000, &baselines_and("[a_i b_i Q_i d_i]"), cfg)?;
            out.files.push(("dimension-sweep.tsv".into(), sweep_table(&points, "p")));
            out.files.push(("dimension-sweep.plot.tsv".into(), plot(&points, SweepPoint::mean_recognition)));
        }
        Suite::FullRank => {
            let ns = [150, 250, 500, 1000, 1500, 2000];
            let methods = ["[a_ij b_i Q_i d_i]".parse()?, ModelKind::Baseline(BaselineKind::Full)];
            let points = full_rank_sweep(&ns, 50, 100.0, &methods, cfg)?;
            out.files.push(("full-rank.tsv".into(), sweep_table(&points, "n")));
            out.files.push(("full-rank.plot.tsv".into(), plot(&points, SweepPoint::mean_recognition)));
            out.files.push(("full-rank-condition.plot.tsv".into(), plot(&points, SweepPoint::mean_condition)));
        }
        Suite::Crabs => {
            let mut models: Vec<ModelKind> =
                [BaselineKind::Sphe, BaselineKind::Diag, BaselineKind::Com, BaselineKind::Full]
                    .into_iter()
                    .map(ModelKind::Baseline)
                    .collect();
            models.extend(["[a_i b_i Q_i d_i]", "[a_ij b_i Q_i d_i]", "[a b Q_i d]"].iter().map(|s| s.parse::<ModelKind>().unwrap()));
            let em = EmConfig { seed: cfg.seed, n_restarts: cfg.n_restarts.max(20), ..EmConfig::default() };
            let rows = crabs_comparison(&models, &em, cfg.threshold)?;
            let mut table = String::from("method\trecognition\tdims\tbic\n");
            for row in rows {
                writeln!(table, "{}\t{:.3}\t{}\t{:.1}", row.method, row.recognition, join(&row.dims), row.bic).unwrap();
            }
            out.files.push(("crabs.tsv".into(), table));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn tiny_sweep_shape() {
        let cfg = BenchConfig { replications: 1, n_restarts: 1, ..BenchConfig::default() };
        let methods = [ModelKind::Baseline(BaselineKind::Sphe)];
        let pts = full_rank_sweep(&[60], 4, 10.0, &methods, &cfg).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].recognition.len(), 1);
        let text = plot(&pts, SweepPoint::mean_recognition);
        assert!(text.starts_with("x\tmethod\ty\n60\tSphe-GMM\t"));
    }
}
