//! The `hddc` command line. Kept in the library so it can be driven from
//! tests without spawning a process.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::benchmark::{run_suite, BenchConfig, Suite};
use crate::data::DataMatrix;
use crate::em::{fit, EmConfig, InitKind};
use crate::error::{Error, Result};
use crate::io::{read_csv, write_csv, write_predictions, ModelFile};
use crate::metrics::recognition_rate;
use crate::model::{enumerate_models, Family, ModelKind};
use crate::selection::{select, DimPolicy, DimPolicyKind, SelectionGrid, DEFAULT_THRESHOLDS};
use crate::synthgen::SpecFile;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hddc", version, about = "Subspace Gaussian mixture clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Scree test per class at `--threshold`.
    Scree,
    /// Dimensions given by `--dims`.
    Fixed,
    /// One common dimension chosen by BIC.
    CommonBic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Kmeans,
}

#[derive(Debug, clap::Args)]
pub struct InputArgs {
    /// CSV file of observations.
    pub input: PathBuf,
    /// Treat the last column as class labels.
    #[arg(long)]
    pub label_col: bool,
    /// Center and scale every column to unit variance first.
    #[arg(long)]
    pub standardize: bool,
}

impl InputArgs {
    fn load(&self) -> Result<DataMatrix> {
        let data = read_csv(&self.input, self.label_col)?.data;
        Ok(if self.standardize { data.standardized() } else { data })
    }
}

#[derive(Debug, clap::Args)]
pub struct EmArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

impl EmArgs {
    fn config(&self) -> EmConfig {
        EmConfig {
            seed: self.seed,
            n_restarts: self.restarts,
            max_iters: self.max_iters,
            init_kind: match self.init {
                InitArg::Random => InitKind::RandomPartition,
                InitArg::Kmeans => InitKind::KMeansSeeded,
            },
            ..EmConfig::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and print `model k loglik nu bic dims`.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value = "[a_ij b_i Q_i d_i]")]
        model: String,
        #[arg(long, value_enum, default_value_t = PolicyArg::Scree)]
        dim_policy: PolicyArg,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        /// Comma-separated intrinsic dimensions for `--dim-policy fixed`.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[command(flatten)]
        em: EmArgs,
        /// Where to save the fitted model.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid search over models, component counts and thresholds by BIC.
    Select {
        #[command(flatten)]
        input: InputArgs,
        /// `all`, a family (`free`, `common-orientation`, `common-covariance`,
        /// `baselines`) or model names separated by `;`.
        #[arg(long, default_value = "free")]
        models: String,
        /// Inclusive range such as `2..6`, or a single value.
        #[arg(long, default_value = "1..6")]
        k_range: String,
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
        #[command(flatten)]
        em: EmArgs,
        /// Where to write the TSV report; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a labelled dataset from a spec file.
    Simulate {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment suite and write its tables and plot data.
    Benchmark {
        /// model-selection, hyper-params, dimension-sweep, full-rank or crabs.
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        replications: usize,
        #[arg(long, default_value_t = 5)]
        restarts: usize,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
    },
    /// Assign observations with a saved model; writes cluster and posteriors.
    Predict {
        model_file: PathBuf,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code for an error: input problems 2, invalid requests 3, fitting 4.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) => EXIT_INPUT,
        Error::InvalidInput(_) => EXIT_VALIDATION,
        Error::FitFailed(_) | Error::SelectionFailed | Error::DegenerateCluster { .. } | Error::Numerical { .. } => {
            EXIT_FIT
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_INPUT;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "hddc: {e}");
            exit_code(&e)
        }
    }
}

fn parse_models(spec: &str) -> Result<Vec<ModelKind>> {
    let family = |f| enumerate_models(Some(f));
    Ok(match spec.trim() {
        "all" => enumerate_models(None),
        "free" => family(Family::FreeOrientation),
        "common-orientation" => family(Family::CommonOrientation),
        "common-covariance" => family(Family::CommonCovariance),
        "baselines" => family(Family::Baseline),
        list => list
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse())
            .collect::<Result<_>>()?,
    })
}

fn parse_k_range(s: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::InvalidInput(format!("bad k range '{s}', expected e.g. 2..6"));
    let (lo, hi) = match s.split_once("..") {
        Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
        None => (s, s),
    };
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim().parse().map_err(|_| bad())?;
    if lo == 0 || hi < lo {
        return Err(bad());
    }
    Ok(lo..=hi)
}

fn write_out(out: &Option<PathBuf>, stdout: &mut dyn Write, content: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => Ok(stdout.write_all(content)?),
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Fit { input, k, model, dim_policy, threshold, dims, em, out } => {
            let data = input.load()?;
            let model: ModelKind = model.parse()?;
            let policy = match dim_policy {
                PolicyArg::Scree => DimPolicy::scree(threshold),
                PolicyArg::Fixed if dims.is_empty() => {
                    return Err(Error::InvalidInput("--dim-policy fixed needs --dims".into()))
                }
                PolicyArg::Fixed if dims.len() == 1 => DimPolicy::fixed_common(dims[0]),
                PolicyArg::Fixed => DimPolicy::fixed(dims),
                PolicyArg::CommonBic => DimPolicy::new(DimPolicyKind::ScreeCommonViaBic),
            };
            let report = fit(&data, k, model, &policy, &em.config())?;
            let dims = report.dims().iter().map(usize::to_string).collect::<Vec<_>>().join(",");
            writeln!(
                stdout,
                "{}\t{}\t{:.6}\t{}\t{:.6}\t{}",
                report.model, k, report.loglik, report.nu, report.bic, dims
            )?;
            if let Some(truth) = data.labels() {
                writeln!(stdout, "recognition\t{:.4}", recognition_rate(truth, &report.assignments)?.rate)?;
            }
            if let Some(path) = out {
                ModelFile::from(&report).save(&path)?;
            }
            Ok(())
        }
        Command::Select { input, models, k_range, thresholds, em, out } => {
            let data = input.load()?;
            let mut grid = SelectionGrid::new(parse_models(&models)?, parse_k_range(&k_range)?);
            grid.thresholds = if thresholds.is_empty() { DEFAULT_THRESHOLDS.to_vec() } else { thresholds };
            let report = select(&data, &grid, &em.config())?;
            write_out(&out, stdout, report.to_tsv().as_bytes())
        }
        Command::Simulate { spec, out } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::Io(format!("{}: {e}", spec.display())))?;
            let data = SpecFile::parse(&text)?.simulate()?;
            let mut buf = Vec::new();
            write_csv(&data, &mut buf)?;
            write_out(&out, stdout, &buf)
        }
        Command::Benchmark { suite, seed, replications, restarts, out } => {
            let suite: Suite = suite.parse().map_err(|e: Error| Error::Parse(e.to_string()))?;
            let cfg = BenchConfig { seed, replications, n_restarts: restarts, ..BenchConfig::default() };
            let output = run_suite(suite, &cfg)?;
            output.write_to(&out)?;
            for (name, _) in &output.files {
                writeln!(stdout, "{}", out.join(name).display())?;
            }
            Ok(())
        }
        Command::Predict { model_file, input, out } => {
            let model = ModelFile::load(&model_file)?;
            let data = input.load()?;
            let (assignments, resp) = model.params.predict(&data)?;
            let mut buf = Vec::new();
            write_predictions(&assignments, &resp, &mut buf)?;
            write_out(&out, stdout, &buf)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_ranges() {
        assert_eq!(parse_k_range("2..6").unwrap(), 2..=6);
        assert_eq!(parse_k_range("2..=6").unwrap(), 2..=6);
        assert_eq!(parse_k_range("3").unwrap(), 3..=3);
        assert!(parse_k_range("6..2").is_err());
        assert!(parse_k_range("0..2").is_err());
    }

    #[test]
    fn model_lists() {
        assert_eq!(parse_models("all").unwrap().len(), 23);
        assert_eq!(parse_models("baselines").unwrap().len(), 4);
        let two = parse_models("[a_i b_i Q_i d_i]; Full-GMM").unwrap();
        assert_eq!(two.len(), 2);
        assert!(parse_models("[zzz]").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["hddc", "fit"], &mut out, &mut err), EXIT_INPUT);
        assert_eq!(run(["hddc", "benchmark", "nope"], &mut out, &mut err), EXIT_INPUT);
    }
}
