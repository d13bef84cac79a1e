//! The E step through the cost function `K_i(x) = -2 log(pi_i phi(x; theta_i)) - p log(2 pi)`.
//!
//! Only the retained orientation columns are touched: the distance to the
//! specific subspace is `|x - mu|^2 - |Q^t (x - mu)|^2`, so neither a `p × p`
//! inverse nor the discarded eigenvectors are ever needed.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::em::Responsibilities;
use crate::error::{Error, Result};
use crate::model::{Component, MixtureParams};

/// `K_i(x)` for a single observation.
pub fn cost_k(params: &MixtureParams, component: usize, x: &[f64]) -> f64 {
    let c = &params.components[component];
    let y = DVector::from_column_slice(x) - &c.mean;
    let z = c.orientation.tr_mul(&y);
    let in_sub: f64 = z.iter().zip(&c.a).map(|(z, a)| z * z / a).sum();
    let z2 = z.norm_squared();
    let residual = (y.norm_squared() - z2).max(0.0);
    in_sub + residual / c.b + log_terms(c, params.p)
}

fn log_terms(c: &Component, p: usize) -> f64 {
    let d = c.dim();
    c.a.iter().map(|a| a.ln()).sum::<f64>() + (p - d) as f64 * c.b.ln() - 2.0 * c.pi.ln()
}

/// The `n × k` matrix of costs `K_i(x_j)`.
pub fn cost_matrix(params: &MixtureParams, data: &DataMatrix) -> Result<DMatrix<f64>> {
    if data.p() != params.p {
        return Err(Error::InvalidInput(format!(
            "model has dimension {}, data has {}",
            params.p,
            data.p()
        )));
    }
    let x = data.matrix();
    let n = data.n();
    let mut costs = DMatrix::zeros(n, params.k());
    for (i, c) in params.components.iter().enumerate() {
        let mut y = x.clone();
        for (mut col, m) in y.column_iter_mut().zip(c.mean.iter()) {
            col.add_scalar_mut(-m);
        }
        let z = &y * &c.orientation;
        let constant = log_terms(c, params.p);
        let inv_a: Vec<f64> = c.a.iter().map(|a| 1.0 / a).collect();
        for j in 0..n {
            let mut in_sub = 0.0;
            let mut z2 = 0.0;
            for (l, ia) in inv_a.iter().enumerate() {
                let v = z[(j, l)];
                in_sub += v * v * ia;
                z2 += v * v;
            }
            let y2 = y.row(j).norm_squared();
            let value = in_sub + (y2 - z2).max(0.0) / c.b + constant;
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

/// Posterior memberships and observed-data log-likelihood from a cost matrix.
///
/// `t_ij = exp(-(K_i - K_min)/2) / sum_l exp(-(K_l - K_min)/2)`.
pub fn responsibilities_from_costs(costs: &DMatrix<f64>, p: usize) -> (Responsibilities, f64) {
    let (n, k) = costs.shape();
    let mut t = DMatrix::zeros(n, k);
    let mut loglik = 0.0;
    let half_log_2pi = 0.5 * p as f64 * (2.0 * PI).ln();
    for j in 0..n {
        let row = costs.row(j);
        let kmin = row.min();
        let mut s = 0.0;
        for i in 0..k {
            let e = (-0.5 * (row[i] - kmin)).exp();
            t[(j, i)] = e;
            s += e;
        }
        for i in 0..k {
            t[(j, i)] /= s;
        }
        loglik += -0.5 * kmin + s.ln() - half_log_2pi;
    }
    (Responsibilities::from_matrix_unchecked(t), loglik)
}

/// Posterior memberships and observed-data log-likelihood.
pub fn e_step(params: &MixtureParams, data: &DataMatrix) -> Result<(Responsibilities, f64)> {
    let costs = cost_matrix(params, data)?;
    Ok(responsibilities_from_costs(&costs, params.p))
}

/// `sum_j log sum_i pi_i phi(x_j; theta_i)`.
pub fn log_likelihood(params: &MixtureParams, data: &DataMatrix) -> Result<f64> {
    e_step(params, data).map(|(_, ll)| ll)
}

/// Hard assignments (lowest index wins ties) together with the posteriors.
pub fn predict(params: &MixtureParams, data: &DataMatrix) -> Result<(Vec<usize>, Responsibilities)> {
    let costs = cost_matrix(params, data)?;
    let assignments = argmin_rows(&costs);
    let (resp, _) = responsibilities_from_costs(&costs, params.p);
    Ok((assignments, resp))
}

pub(crate) fn argmin_rows(costs: &DMatrix<f64>) -> Vec<usize> {
    costs
        .row_iter()
        .map(|row| {
            let mut best = 0;
            for i in 1..row.len() {
                if row[i] < row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: usize, a: Vec<f64>, b: f64, pi: f64) -> MixtureParams {
        let d = a.len();
        MixtureParams {
            p,
            components: vec![Component {
                pi,
                mean: DVector::zeros(p),
                orientation: DMatrix::identity(p, d),
                a,
                b,
            }],
        }
    }

    #[test]
    fn cost_vanishes_at_mean_with_unit_variances() {
        let params = single(2, vec![1.0], 1.0, 1.0);
        assert_eq!(cost_k(&params, 0, &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn cost_hand_evaluation() {
        let params = single(2, vec![4.0], 1.0, 1.0);
        let k = cost_k(&params, 0, &[2.0, 1.0]);
        assert!((k - (2.0 + 4f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn doubling_pi_lowers_cost_by_2_log_2() {
        let a = single(3, vec![3.0, 2.0], 0.5, 0.25);
        let b = single(3, vec![3.0, 2.0], 0.5, 0.5);
        let x = [0.3, -1.0, 2.0];
        let diff = cost_k(&a, 0, &x) - cost_k(&b, 0, &x);
        assert!((diff - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn unit_variance_density_at_mean() {
        let params = single(2, vec![1.0], 1.0, 1.0);
        let data = DataMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let ll = log_likelihood(&params, &data).unwrap();
        assert!((ll + (2.0 * PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn single_component_takes_everything() {
        let params = single(2, vec![2.0], 1.0, 1.0);
        let data = DataMatrix::from_rows(&[vec![5.0, 1.0], vec![-3.0, 0.0]]).unwrap();
        let (resp, _) = e_step(&params, &data).unwrap();
        assert!(resp.matrix().iter().all(|t| *t == 1.0));
    }

    #[test]
    fn bulk_costs_match_pointwise() {
        let mut params = single(3, vec![3.0, 2.0], 0.5, 0.4);
        let mut other = params.components[0].clone();
        other.pi = 0.6;
        other.mean = DVector::from_vec(vec![1.0, 1.0, -1.0]);
        params.components.push(other);
        let data = DataMatrix::from_rows(&[vec![0.3, -1.0, 2.0], vec![1.0, 2.0, 3.0]]).unwrap();
        let costs = cost_matrix(&params, &data).unwrap();
        for j in 0..2 {
            for i in 0..2 {
                let direct = cost_k(&params, i, &data.row(j));
                assert!((costs[(j, i)] - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let params = single(3, vec![1.0], 1.0, 1.0);
        let data = DataMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        assert!(cost_matrix(&params, &data).is_err());
    }
}
