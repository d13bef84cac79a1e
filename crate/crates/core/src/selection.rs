//! Hyper-parameter estimation: the scree test for intrinsic dimensions,
//! BIC, and the grid search over models, component counts and thresholds.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::em::{fit, EmConfig};
use crate::error::{Error, Result};
use crate::model::ModelKind;

/// Default scree thresholds searched by [`select`].
pub const DEFAULT_THRESHOLDS: [f64; 7] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.2, 0.3];

#[derive(Debug, Clone, PartialEq)]
pub enum DimPolicyKind {
    FixedPerClass(Vec<usize>),
    FixedCommon(usize),
    /// Scree test with a normalized threshold in (0, 1).
    ScreeFree(f64),
    /// A common dimension chosen by BIC over `d_min..=d_max`.
    ScreeCommonViaBic,
}

/// How intrinsic dimensions are chosen during a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DimPolicy {
    pub kind: DimPolicyKind,
    pub d_min: usize,
    /// Upper bound; `None` means `p - 1`.
    pub d_max: Option<usize>,
}

impl DimPolicy {
    pub fn new(kind: DimPolicyKind) -> Self {
        Self {
            kind,
            d_min: 1,
            d_max: None,
        }
    }

    pub fn fixed(dims: Vec<usize>) -> Self {
        Self::new(DimPolicyKind::FixedPerClass(dims))
    }

    pub fn fixed_common(d: usize) -> Self {
        Self::new(DimPolicyKind::FixedCommon(d))
    }

    pub fn scree(threshold: f64) -> Self {
        Self::new(DimPolicyKind::ScreeFree(threshold))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.d_min == 0 || self.d_max.is_some_and(|m| m < self.d_min || m >= p) {
            return Err(Error::InvalidInput(format!(
                "dimension bounds [{}, {:?}] invalid for p = {p}",
                self.d_min, self.d_max
            )));
        }
        match &self.kind {
            DimPolicyKind::ScreeFree(t) if !(*t > 0.0 && *t < 1.0) => Err(Error::InvalidInput(format!(
                "scree threshold {t} outside (0, 1)"
            ))),
            DimPolicyKind::FixedCommon(d) if *d == 0 || *d >= p => Err(Error::InvalidInput(format!(
                "dimension {d} outside [1, {}]",
                p - 1
            ))),
            DimPolicyKind::FixedPerClass(ds) if ds.iter().any(|&d| d == 0 || d >= p) => Err(
                Error::InvalidInput(format!("dimensions {ds:?} outside [1, {}]", p - 1)),
            ),
            _ => Ok(()),
        }
    }
}

/// Cattell's scree test on a descending spectrum.
///
/// Differences between consecutive eigenvalues are divided by the largest
/// one; the result is the last index whose normalized difference reaches
/// `threshold`, clamped to `[d_min, d_max]`. A flat spectrum gives `d_min`.
pub fn scree_dimension(eigenvalues: &[f64], threshold: f64, d_min: usize, d_max: usize) -> Result<usize> {
    if eigenvalues.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "scree test needs at least 2 eigenvalues, got {}",
            eigenvalues.len()
        )));
    }
    let diffs: Vec<f64> = eigenvalues.windows(2).map(|w| w[0] - w[1]).collect();
    let max = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d = if max > 0.0 {
        diffs
            .iter()
            .rposition(|&delta| delta / max >= threshold)
            .map_or(d_min, |j| j + 1)
    } else {
        d_min
    };
    Ok(d.clamp(d_min, d_max.max(d_min)))
}

/// `-2 log L + nu log n`.
pub fn bic(loglik: f64, nu: usize, n: usize) -> f64 {
    -2.0 * loglik + nu as f64 * (n as f64).ln()
}

/// The cells searched by [`select`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionGrid {
    pub models: Vec<ModelKind>,
    pub k_range: RangeInclusive<usize>,
    pub thresholds: Vec<f64>,
}

impl SelectionGrid {
    pub fn new(models: Vec<ModelKind>, k_range: RangeInclusive<usize>) -> Self {
        Self {
            models,
            k_range,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.models.is_empty() || self.thresholds.is_empty() || self.k_range.is_empty() {
            return Err(Error::InvalidInput("selection grid has an empty axis".into()));
        }
        if *self.k_range.start() == 0 || *self.k_range.end() > n {
            return Err(Error::InvalidInput(format!(
                "k range {:?} outside [1, {n}]",
                self.k_range
            )));
        }
        if let Some(t) = self.thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(Error::InvalidInput(format!("threshold {t} outside (0, 1)")));
        }
        Ok(())
    }

    /// Grid cells in order: model, then k, then threshold. Baselines get one
    /// cell per k.
    fn cells(&self) -> Vec<(ModelKind, usize, Option<f64>)> {
        let mut out = Vec::new();
        for &m in &self.models {
            for k in self.k_range.clone() {
                if m.subspace().is_some() {
                    out.extend(self.thresholds.iter().map(|&t| (m, k, Some(t))));
                } else {
                    out.push((m, k, None));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

/// One fitted grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    pub model: ModelKind,
    pub k: usize,
    pub threshold: Option<f64>,
    pub dims: Vec<usize>,
    pub loglik: f64,
    pub nu: usize,
    pub bic: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    pub rows: Vec<SelectionRow>,
    /// Index into `rows` of the lowest-BIC successful cell (first one on ties).
    pub winner: usize,
}

impl SelectionReport {
    pub fn winner(&self) -> &SelectionRow {
        &self.rows[self.winner]
    }

    /// Tab-separated table with a header line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("model\tk\tt\tdims\tloglik\tnu\tbic\tstatus\n");
        for r in &self.rows {
            let t = r.threshold.map_or("-".to_string(), |t| t.to_string());
            let dims = if r.dims.is_empty() {
                "-".to_string()
            } else {
                r.dims.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            };
            let status = match &r.status {
                CellStatus::Ok => "ok".to_string(),
                CellStatus::Failed(e) => format!("failed: {}", e.replace(['\t', '\n'], " ")),
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.6}\t{}\t{:.6}\t{}",
                r.model, r.k, t, dims, r.loglik, r.nu, r.bic, status
            );
        }
        s
    }
}

/// Fits every grid cell and picks the minimum-BIC one.
pub fn select(data: &DataMatrix, grid: &SelectionGrid, cfg: &EmConfig) -> Result<SelectionReport> {
    grid.validate(data.n())?;
    let rows: Vec<SelectionRow> = grid
        .cells()
        .into_par_iter()
        .map(|(model, k, threshold)| {
            let policy = DimPolicy::scree(threshold.unwrap_or(0.5));
            match fit(data, k, model, &policy, cfg) {
                Ok(r) => SelectionRow {
                    model,
                    k,
                    threshold,
                    dims: r.dims(),
                    loglik: r.loglik,
                    nu: r.nu,
                    bic: r.bic,
                    status: CellStatus::Ok,
                },
                Err(e) => SelectionRow {
                    model,
                    k,
                    threshold,
                    dims: Vec::new(),
                    loglik: f64::NAN,
                    nu: 0,
                    bic: f64::NAN,
                    status: CellStatus::Failed(e.to_string()),
                },
            }
        })
        .collect();
    let mut winner: Option<usize> = None;
    for (i, r) in rows.iter().enumerate() {
        if r.status == CellStatus::Ok && winner.is_none_or(|w| r.bic < rows[w].bic) {
            winner = Some(i);
        }
    }
    let winner = winner.ok_or(Error::SelectionFailed)?;
    Ok(SelectionReport { rows, winner })
}
