//! Classical Gaussian mixtures used as reference clusterers: full,
//! common, diagonal and spherical covariances, sharing the EM shell.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::DataMatrix;
use crate::em::mstep::moments;
use crate::em::{best_of_restarts, report, EmConfig, FitReport, FittedParams, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::{eig_desc, weighted_scatter, SymMatrix};
use crate::model::{BaselineKind, ModelKind};

pub use crate::model::baseline_param_count;

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(SymMatrix),
    Diag(Vec<f64>),
    Sphe(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineComponent {
    pub pi: f64,
    pub mean: DVector<f64>,
    pub cov: Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub kind: BaselineKind,
    pub p: usize,
    pub components: Vec<BaselineComponent>,
}

impl BaselineParams {
    /// Ratio of the largest to smallest eigenvalue of component `i`'s covariance.
    pub fn condition_number(&self, i: usize) -> Result<f64> {
        Ok(match &self.components[i].cov {
            Covariance::Full(s) => {
                let v = eig_desc(s)?.values;
                v[0] / v[v.len() - 1]
            }
            Covariance::Diag(v) => {
                let max = v.iter().copied().fold(f64::MIN, f64::max);
                let min = v.iter().copied().fold(f64::MAX, f64::min);
                max / min
            }
            Covariance::Sphe(_) => 1.0,
        })
    }
}

fn ridge(w: &SymMatrix, factor: f64) -> SymMatrix {
    let p = w.dim();
    let eps = factor * w.trace() / p as f64;
    SymMatrix::new(w.matrix() + DMatrix::identity(p, p) * eps).expect("finite scatter")
}

/// Proportions, means and covariances of `kind` from fixed responsibilities.
pub fn baseline_m_step(
    resp: &Responsibilities,
    data: &DataMatrix,
    kind: BaselineKind,
    cfg: &EmConfig,
) -> Result<BaselineParams> {
    let mom = moments(resp, data, cfg)?;
    let p = data.p();
    let k = resp.k();
    let scatters: Vec<SymMatrix> = (0..k)
        .map(|i| {
            let w: Vec<f64> = resp.matrix().column(i).iter().copied().collect();
            weighted_scatter(data, &w, &mom.means[i])
        })
        .collect::<Result<_>>()?;
    let shared = (kind == BaselineKind::Com).then(|| {
        let within = scatters
            .iter()
            .zip(&mom.pi)
            .fold(SymMatrix::zeros(p), |acc, (w, &pi)| acc.add_scaled(w, pi));
        ridge(&within, cfg.ridge_factor)
    });
    let components = (0..k)
        .map(|i| {
            let w = &scatters[i];
            let cov = match kind {
                BaselineKind::Full => Covariance::Full(ridge(w, cfg.ridge_factor)),
                BaselineKind::Com => Covariance::Full(shared.clone().unwrap()),
                BaselineKind::Diag => Covariance::Diag(
                    w.matrix().diagonal().iter().map(|v| v.max(cfg.b_floor)).collect(),
                ),
                BaselineKind::Sphe => Covariance::Sphe((w.trace() / p as f64).max(cfg.b_floor)),
            };
            BaselineComponent {
                pi: mom.pi[i],
                mean: mom.means[i].clone(),
                cov,
            }
        })
        .collect();
    Ok(BaselineParams { kind, p, components })
}

/// `-2 log(pi_i phi(x_j)) - p log(2 pi)` for every observation and component.
pub fn cost_matrix(params: &BaselineParams, data: &DataMatrix) -> Result<DMatrix<f64>> {
    if data.p() != params.p {
        return Err(Error::InvalidInput(format!(
            "model has dimension {}, data has {}",
            params.p,
            data.p()
        )));
    }
    let x = data.matrix();
    let n = data.n();
    let mut costs = DMatrix::zeros(n, params.components.len());
    for (i, c) in params.components.iter().enumerate() {
        let mut y = x.clone();
        for (mut col, m) in y.column_iter_mut().zip(c.mean.iter()) {
            col.add_scalar_mut(-m);
        }
        let (maha, logdet): (Vec<f64>, f64) = match &c.cov {
            Covariance::Full(s) => {
                let chol = Cholesky::new(s.matrix().clone()).ok_or_else(|| Error::Numerical {
                    component: i,
                    detail: "covariance is not positive definite".into(),
                })?;
                let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                let solved = chol.l().solve_lower_triangular(&y.transpose()).ok_or_else(|| {
                    Error::Numerical {
                        component: i,
                        detail: "singular Cholesky factor".into(),
                    }
                })?;
                (solved.column_iter().map(|c| c.norm_squared()).collect(), logdet)
            }
            Covariance::Diag(v) => {
                let maha = y
                    .row_iter()
                    .map(|r| r.iter().zip(v).map(|(y, s)| y * y / s).sum())
                    .collect();
                (maha, v.iter().map(|s| s.ln()).sum())
            }
            Covariance::Sphe(s) => (
                y.row_iter().map(|r| r.norm_squared() / s).collect(),
                params.p as f64 * s.ln(),
            ),
        };
        let constant = logdet - 2.0 * c.pi.ln();
        for (j, m) in maha.into_iter().enumerate() {
            let value = m + constant;
            if !value.is_finite() {
                return Err(Error::Numerical {
                    component: i,
                    detail: format!("cost is {value} at observation {j}"),
                });
            }
            costs[(j, i)] = value;
        }
    }
    Ok(costs)
}

/// Observed-data log-likelihood of a baseline mixture.
pub fn log_likelihood(params: &BaselineParams, data: &DataMatrix) -> Result<f64> {
    let costs = cost_matrix(params, data)?;
    let ll = crate::em::estep::responsibilities_from_costs(&costs, params.p).1;
    debug_assert!(ll.is_finite() || PI > 0.0);
    Ok(ll)
}

/// EM for a classical mixture, restarted from the same partitions the
/// subspace models use for a given seed.
pub fn fit_baseline(data: &DataMatrix, k: usize, kind: BaselineKind, cfg: &EmConfig) -> Result<FitReport> {
    let (restart, run) = best_of_restarts(data, k, cfg, |resp, _| {
        Ok((FittedParams::Baseline(baseline_m_step(resp, data, kind, cfg)?), true))
    })?;
    report(ModelKind::Baseline(kind), data, cfg, restart, run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_counts() {
        assert_eq!(baseline_param_count(BaselineKind::Full, 4, 100), 20603);
        assert_eq!(baseline_param_count(BaselineKind::Diag, 4, 100), 803);
        assert_eq!(baseline_param_count(BaselineKind::Sphe, 1, 1), 2);
    }

    #[test]
    fn full_on_fewer_points_than_dimensions_stays_finite() {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|j| (0..10).map(|c| ((j * 7 + c * 3) % 11) as f64).collect())
            .collect();
        let data = DataMatrix::from_rows(&rows).unwrap();
        let resp = Responsibilities::from_hard(&[0, 0, 0, 1, 1, 1], 2);
        let params = baseline_m_step(&resp, &data, BaselineKind::Full, &EmConfig::default()).unwrap();
        assert!(log_likelihood(&params, &data).unwrap().is_finite());
    }

    #[test]
    fn sphe_condition_number_is_one() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 3.0], vec![2.0, 2.0]];
        let data = DataMatrix::from_rows(&rows).unwrap();
        let resp = Responsibilities::from_hard(&[0, 0, 0], 1);
        let params = baseline_m_step(&resp, &data, BaselineKind::Sphe, &EmConfig::default()).unwrap();
        assert_eq!(params.condition_number(0).unwrap(), 1.0);
    }
}
