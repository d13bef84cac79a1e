//! Independent reference computations shared by the integration tests.
//! Nothing here calls the library's numerical routines.
#![allow(dead_code)]

use hddc::{Component, DataMatrix, MixtureParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense covariance `Q diag(a) Q^t + b (I - Q Q^t)` of a subspace component.
pub fn dense_covariance(c: &Component) -> DMatrix<f64> {
    let p = c.mean.len();
    let q = &c.orientation;
    let proj = q * q.transpose();
    let a = DMatrix::from_diagonal(&DVector::from_vec(c.a.clone()));
    q * a * q.transpose() + (DMatrix::identity(p, p) - proj) * c.b
}

/// `log N(x; mu, sigma)` through an explicit inverse and determinant.
pub fn log_normal(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> f64 {
    let p = x.len() as f64;
    let chol = sigma.clone().cholesky().expect("positive definite covariance");
    let inv = chol.inverse();
    let y = x - mu;
    let maha = (y.transpose() * inv * &y)[(0, 0)];
    let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    -0.5 * (maha + logdet + p * (2.0 * std::f64::consts::PI).ln())
}

/// Log joint densities `log(pi_i) + log N(x_j; ...)`, `n × k`.
pub fn log_joint(pis: &[f64], means: &[DVector<f64>], covs: &[DMatrix<f64>], data: &DataMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(data.n(), pis.len(), |j, i| {
        pis[i].ln() + log_normal(&data.row_view(j), &means[i], &covs[i])
    })
}

pub fn mixture_log_joint(params: &MixtureParams, data: &DataMatrix) -> DMatrix<f64> {
    let pis: Vec<f64> = params.components.iter().map(|c| c.pi).collect();
    let means: Vec<DVector<f64>> = params.components.iter().map(|c| c.mean.clone()).collect();
    let covs: Vec<DMatrix<f64>> = params.components.iter().map(dense_covariance).collect();
    log_joint(&pis, &means, &covs, data)
}

/// Posterior probabilities and observed log-likelihood from log joints.
pub fn posteriors(lj: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let mut post = lj.clone();
    let mut ll = 0.0;
    for mut row in post.row_iter_mut() {
        let m = row.max();
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        ll += m + s.ln();
        row.apply(|v| *v = (*v - m).exp() / s);
    }
    (post, ll)
}

/// Expected complete-data log-likelihood `sum t_ij log(pi_i N(x_j))`.
pub fn expected_cll(params: &MixtureParams, data: &DataMatrix, t: &DMatrix<f64>) -> f64 {
    mixture_log_joint(params, data).component_mul(t).sum()
}

pub fn random_orthonormal(rng: &mut ChaCha8Rng, p: usize, d: usize) -> DMatrix<f64> {
    // Gram-Schmidt on Gaussian columns.
    let mut q = DMatrix::<f64>::zeros(p, d);
    for j in 0..d {
        let mut v = DVector::from_fn(p, |_, _| StandardNormal.sample(rng));
        for i in 0..j {
            let qi = q.column(i).clone_owned();
            v -= &qi * qi.dot(&v);
        }
        q.set_column(j, &(&v / v.norm()));
    }
    q
}

/// Random valid subspace parameters; dimensions drawn in `1..p`.
pub fn random_params(rng: &mut ChaCha8Rng, k: usize, p: usize) -> MixtureParams {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let components = raw
        .iter()
        .map(|w| {
            let d = rng.random_range(1..p);
            let b: f64 = rng.random_range(0.1..2.0);
            let mut a: Vec<f64> = (0..d).map(|_| b * rng.random_range(1.05..20.0)).collect();
            a.sort_by(|x, y| y.total_cmp(x));
            Component {
                pi: w / total,
                mean: DVector::from_fn(p, |_, _| rng.random_range(-5.0..5.0)),
                orientation: random_orthonormal(rng, p, d),
                a,
                b,
            }
        })
        .collect();
    MixtureParams { p, components }
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize, p: usize, scale: f64) -> DataMatrix {
    DataMatrix::new(DMatrix::from_fn(n, p, |_, _| scale * rng.random_range(-1.0..1.0))).unwrap()
}

/// Softmax of random scores: strictly positive rows summing to one.
pub fn random_soft(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    let mut t = DMatrix::from_fn(n, k, |_, _| rng.random_range(-2.0..2.0f64).exp());
    for mut row in t.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    t
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off.sqrt() < 1e-14 * a.norm().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut v: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Best agreement over every bijection between label alphabets, padding the
/// smaller one with unmatched slots.
pub fn brute_force_rate(truth: &[usize], pred: &[usize]) -> f64 {
    let mut t_alpha: Vec<usize> = truth.to_vec();
    t_alpha.sort();
    t_alpha.dedup();
    let mut p_alpha: Vec<usize> = pred.to_vec();
    p_alpha.sort();
    p_alpha.dedup();
    let m = t_alpha.len().max(p_alpha.len());
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = 0;
    loop {
        // perm[i] is the true slot given to predicted slot i.
        let hits = truth
            .iter()
            .zip(pred)
            .filter(|(t, p)| {
                let pi = p_alpha.iter().position(|x| x == *p).unwrap();
                let ti = t_alpha.iter().position(|x| x == *t).unwrap();
                perm[pi] == ti
            })
            .count();
        best = best.max(hits);
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best as f64 / truth.len() as f64
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
