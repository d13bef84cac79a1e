//! Closed-form and fixed-point M steps for every admissible subspace model.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::em::{EmConfig, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::{eig_desc, gram_top_eig, top_eig, weighted_scatter, CenteredDesign, EigenPairs, SymMatrix};
use crate::model::{AStructure, BStructure, Component, DStructure, Family, MixtureParams, SubspaceModel};
use crate::selection::scree_dimension;

/// Intrinsic dimensions to use in one M step.
#[derive(Debug, Clone, PartialEq)]
pub enum DimSpec {
    /// One dimension per component (replicated for common-dimension models).
    Fixed(Vec<usize>),
    /// Re-estimated from the scatter spectra with the scree test.
    Scree { threshold: f64, d_min: usize, d_max: Option<usize> },
}

/// Result of an M step.
#[derive(Debug, Clone)]
pub struct MStepOutput {
    pub params: MixtureParams,
    /// False when the common-orientation fixed point hit `inner_max_iters`.
    pub inner_converged: bool,
    pub inner_iters: usize,
}

/// Proportions, means and effective sizes of the fuzzy classes.
pub(crate) struct Moments {
    pub n_i: Vec<f64>,
    pub pi: Vec<f64>,
    pub means: Vec<DVector<f64>>,
}

pub(crate) fn moments(resp: &Responsibilities, data: &DataMatrix, cfg: &EmConfig) -> Result<Moments> {
    if resp.n() != data.n() {
        return Err(Error::InvalidInput(format!(
            "{} responsibility rows for {} observations",
            resp.n(),
            data.n()
        )));
    }
    let n = data.n() as f64;
    let min_weight = cfg.min_weight(data.n());
    let t = resp.matrix();
    let x = data.matrix();
    let mut n_i = Vec::with_capacity(resp.k());
    let mut means = Vec::with_capacity(resp.k());
    for i in 0..resp.k() {
        let col = t.column(i);
        let w: f64 = col.sum();
        if !(w > 0.0) || w < min_weight {
            return Err(Error::DegenerateCluster {
                component: i,
                detail: format!("weight {w:.3e} below minimum {min_weight:.3e}"),
            });
        }
        means.push(x.tr_mul(&col) / w);
        n_i.push(w);
    }
    let pi = n_i.iter().map(|w| w / n).collect();
    Ok(Moments { n_i, pi, means })
}

fn weights_of(resp: &Responsibilities, i: usize) -> Vec<f64> {
    resp.matrix().column(i).iter().copied().collect()
}

/// Largest admissible dimension for a class of effective size `n_i`.
fn dim_cap(n_i: f64, p: usize, d_max: Option<usize>) -> usize {
    let by_n = (n_i.ceil() as usize).saturating_sub(1);
    let cap = by_n.min(p - 1).min(d_max.unwrap_or(p - 1));
    cap.max(1)
}

/// Leading `m` eigenpairs and the trace of the weighted scatter of one class.
fn class_spectrum(
    data: &DataMatrix,
    weights: &[f64],
    mean: &DVector<f64>,
    m: usize,
    cfg: &EmConfig,
) -> Result<(EigenPairs, f64)> {
    let p = data.p();
    let design = CenteredDesign::new(data, weights, mean)?;
    let trace = design.scatter_trace();
    let threshold = cfg.gram_threshold.unwrap_or(p);
    // Soft responsibilities give every row some weight, so the Gram matrix
    // is only small when few rows carry any weight at all.
    let pairs = if design.n_eff() < threshold {
        gram_top_eig(&design, m)?
    } else {
        top_eig(&design.scatter(), m)?
    };
    Ok((pairs, trace))
}

/// Variance parameters from per-direction variances `lam[i][j]` and class traces.
///
/// Shared by every family: for free orientations `lam` holds the leading
/// eigenvalues of `W_i`; for a common orientation `Q` it holds `q_j^t W_i q_j`.
/// `b` is floored at `b_floor` and every `a` clamped up to its `b`.
fn estimate_ab(
    model: SubspaceModel,
    pi: &[f64],
    lam: &[Vec<f64>],
    traces: &[f64],
    p: usize,
    b_floor: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (a, b, _) = estimate_ab_flagged(model, pi, lam, traces, p, b_floor);
    (a, b)
}

/// [`estimate_ab`] that also says whether the estimates are unconstrained,
/// i.e. no floor or clamp was needed.
fn estimate_ab_flagged(
    model: SubspaceModel,
    pi: &[f64],
    lam: &[Vec<f64>],
    traces: &[f64],
    p: usize,
    b_floor: f64,
) -> (Vec<Vec<f64>>, Vec<f64>, bool) {
    let k = pi.len();
    let dims: Vec<usize> = lam.iter().map(Vec::len).collect();
    let sums: Vec<f64> = lam.iter().map(|l| l.iter().sum()).collect();
    let xi: f64 = pi.iter().zip(&dims).map(|(p, &d)| p * d as f64).sum();
    let weighted_sum: f64 = pi.iter().zip(&sums).map(|(p, s)| p * s).sum();
    let mut b: Vec<f64> = match model.b() {
        BStructure::PerClass => (0..k)
            .map(|i| (traces[i] - sums[i]) / (p - dims[i]) as f64)
            .collect(),
        BStructure::Global => {
            let within: f64 = pi.iter().zip(traces).map(|(p, t)| p * t).sum();
            vec![(within - weighted_sum) / (p as f64 - xi); k]
        }
    };
    let mut exact = true;
    for v in &mut b {
        exact &= *v >= b_floor;
        *v = v.max(b_floor);
    }
    let a: Vec<Vec<f64>> = match model.a() {
        AStructure::PerClassPerDim => lam.to_vec(),
        AStructure::PerClass => (0..k).map(|i| vec![sums[i] / dims[i] as f64; dims[i]]).collect(),
        AStructure::Global => {
            let a = weighted_sum / xi;
            dims.iter().map(|&d| vec![a; d]).collect()
        }
        AStructure::PerDimShared => {
            let d = dims[0];
            let shared: Vec<f64> = (0..d)
                .map(|j| pi.iter().zip(lam).map(|(p, l)| p * l[j]).sum())
                .collect();
            vec![shared; k]
        }
    };
    let a = a
        .into_iter()
        .zip(&b)
        .map(|(ai, &bi)| {
            exact &= ai.iter().all(|&v| v >= bi);
            ai.into_iter().map(|v| v.max(bi)).collect()
        })
        .collect();
    (a, b, exact)
}

fn resolve_fixed(dims: &[usize], k: usize, p: usize, common: bool) -> Result<Vec<usize>> {
    let dims = if dims.len() == 1 && k > 1 {
        vec![dims[0]; k]
    } else {
        dims.to_vec()
    };
    if dims.len() != k {
        return Err(Error::InvalidInput(format!(
            "{} dimensions for {k} components",
            dims.len()
        )));
    }
    if let Some(&d) = dims.iter().find(|&&d| d == 0 || d >= p) {
        return Err(Error::InvalidInput(format!(
            "intrinsic dimension {d} outside [1, {}]",
            p - 1
        )));
    }
    if common && dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::InvalidInput(format!(
            "model needs a common dimension, got {dims:?}"
        )));
    }
    Ok(dims)
}

/// One M step: proportions, means, then the family-specific variance and
/// orientation estimators.
pub fn m_step(
    resp: &Responsibilities,
    data: &DataMatrix,
    model: SubspaceModel,
    dims: &DimSpec,
    cfg: &EmConfig,
) -> Result<MStepOutput> {
    m_step_from(resp, data, model, dims, cfg, None)
}

/// [`m_step`] that never does worse than `prev`.
///
/// Errors with [`Error::DegenerateCluster`] when a component's proportion
/// falls below `min_component_weight` or its noise variance collapses to
/// `b_floor`; EM restarts the run in both cases.
///
/// When a clamp binds, or the common-orientation fixed point settles
/// somewhere poor, the closed form is no longer the maximizer of the expected
/// complete-data log-likelihood. The candidate is then compared with the
/// previous variances and orientations (re-centred on the new means) and the
/// better one is kept, so the step stays a generalized EM step and the
/// likelihood cannot decrease. `prev` is ignored when the dimensions differ.
pub fn m_step_from(
    resp: &Responsibilities,
    data: &DataMatrix,
    model: SubspaceModel,
    dims: &DimSpec,
    cfg: &EmConfig,
    prev: Option<&MixtureParams>,
) -> Result<MStepOutput> {
    let mom = moments(resp, data, cfg)?;
    let (out, exact) = match model.family() {
        Family::FreeOrientation => free_orientation(resp, data, model, dims, cfg, &mom)?,
        Family::CommonOrientation => (common_orientation(resp, data, model, dims, cfg, &mom, prev)?, false),
        Family::CommonCovariance => common_covariance(resp, data, model, dims, cfg, &mom)?,
        Family::Baseline => unreachable!("subspace models never carry the baseline family"),
    };
    // a class lying in an affine subspace of its own dimension has unbounded
    // likelihood; the floor would only hide that
    if let Some(i) = out.params.components.iter().position(|c| c.b <= cfg.b_floor) {
        return Err(Error::DegenerateCluster {
            component: i,
            detail: format!("noise variance collapsed to the floor {:.1e}", cfg.b_floor),
        });
    }
    match prev {
        Some(prev) if !exact && prev.dims() == out.params.dims() && prev.k() == out.params.k() => {
            let recentred = recentre(prev, &mom);
            let ours = variance_objective(resp, data, &mom, &out.params)?;
            let theirs = variance_objective(resp, data, &mom, &recentred)?;
            Ok(if theirs > ours {
                MStepOutput {
                    params: recentred,
                    ..out
                }
            } else {
                out
            })
        }
        _ => Ok(out),
    }
}

/// `prev` with the proportions and means of `mom`.
fn recentre(prev: &MixtureParams, mom: &Moments) -> MixtureParams {
    let mut out = prev.clone();
    for (i, c) in out.components.iter_mut().enumerate() {
        c.pi = mom.pi[i];
        c.mean = mom.means[i].clone();
    }
    out
}

/// Expected complete-data log-likelihood up to terms that only depend on the
/// proportions and means:
/// `-1/2 sum_i n_i (sum_j log a_ij + (p - d_i) log b_i + sum_j s_ij / a_ij + (tr W_i - sum_j s_ij) / b_i)`
/// with `s_ij = q_ij^t W_i q_ij`.
fn variance_objective(resp: &Responsibilities, data: &DataMatrix, mom: &Moments, params: &MixtureParams) -> Result<f64> {
    let p = data.p() as f64;
    let mut total = 0.0;
    for (i, c) in params.components.iter().enumerate() {
        let design = CenteredDesign::new(data, &weights_of(resp, i), &mom.means[i])?;
        let w = design.weight_total();
        let proj = design.rows() * &c.orientation;
        let s: Vec<f64> = proj.column_iter().map(|col| col.norm_squared() / w).collect();
        let s_sum: f64 = s.iter().sum();
        let residual = (design.scatter_trace() - s_sum).max(0.0);
        let value: f64 = c.a.iter().zip(&s).map(|(a, s)| a.ln() + s / a).sum::<f64>()
            + (p - c.dim() as f64) * c.b.ln()
            + residual / c.b;
        total -= 0.5 * mom.n_i[i] * value;
    }
    Ok(total)
}

fn class_scatters(resp: &Responsibilities, data: &DataMatrix, mom: &Moments) -> Result<Vec<SymMatrix>> {
    (0..resp.k())
        .map(|i| weighted_scatter(data, &weights_of(resp, i), &mom.means[i]))
        .collect()
}

fn within_scatter(scatters: &[SymMatrix], pi: &[f64]) -> SymMatrix {
    let p = scatters[0].dim();
    scatters
        .iter()
        .zip(pi)
        .fold(SymMatrix::zeros(p), |acc, (w, &pi)| acc.add_scaled(w, pi))
}

fn scree_common(
    spectrum: &[f64],
    threshold: f64,
    d_min: usize,
    cap: usize,
) -> Result<usize> {
    let len = (cap + 1).min(spectrum.len());
    scree_dimension(&spectrum[..len], threshold, d_min.min(cap), cap)
}

fn free_orientation(
    resp: &Responsibilities,
    data: &DataMatrix,
    model: SubspaceModel,
    dims: &DimSpec,
    cfg: &EmConfig,
    mom: &Moments,
) -> Result<(MStepOutput, bool)> {
    let p = data.p();
    let k = resp.k();
    let common = model.d() == DStructure::Common;
    // dimensions known up front, or decided from a spectrum
    let (fixed, common_scree): (Option<Vec<usize>>, Option<usize>) = match dims {
        DimSpec::Fixed(d) => (Some(resolve_fixed(d, k, p, common)?), None),
        DimSpec::Scree { threshold, d_min, d_max } if common => {
            let cap = (0..k).map(|i| dim_cap(mom.n_i[i], p, *d_max)).min().unwrap_or(1);
            let within = within_scatter(&class_scatters(resp, data, mom)?, &mom.pi);
            let spectrum = top_eig(&within, (cap + 1).min(p))?.values;
            (None, Some(scree_common(&spectrum, *threshold, *d_min, cap)?))
        }
        DimSpec::Scree { .. } => (None, None),
    };
    let mut lam = Vec::with_capacity(k);
    let mut orientations = Vec::with_capacity(k);
    let mut traces = Vec::with_capacity(k);
    for i in 0..k {
        let w = weights_of(resp, i);
        let (d, pairs, trace) = match (&fixed, common_scree, dims) {
            (Some(f), _, _) => {
                let (pairs, tr) = class_spectrum(data, &w, &mom.means[i], f[i], cfg)?;
                (f[i], pairs, tr)
            }
            (None, Some(d), _) => {
                let (pairs, tr) = class_spectrum(data, &w, &mom.means[i], d, cfg)?;
                (d, pairs, tr)
            }
            (None, None, DimSpec::Scree { threshold, d_min, d_max }) => {
                let cap = dim_cap(mom.n_i[i], p, *d_max);
                let m = (cap + 1).min(p);
                let (pairs, tr) = class_spectrum(data, &w, &mom.means[i], m, cfg)?;
                let usable = pairs.rank_limit.unwrap_or(m).max(2).min(m);
                let d = scree_dimension(&pairs.values[..usable], *threshold, (*d_min).min(cap), cap)?;
                (d, pairs, tr)
            }
            _ => unreachable!(),
        };
        lam.push(pairs.values[..d].to_vec());
        orientations.push(pairs.vectors.columns(0, d).into_owned());
        traces.push(trace);
    }
    let (a, b, exact) = estimate_ab_flagged(model, &mom.pi, &lam, &traces, p, cfg.b_floor);
    let components = (0..k)
        .map(|i| Component {
            pi: mom.pi[i],
            mean: mom.means[i].clone(),
            orientation: orientations[i].clone(),
            a: a[i].clone(),
            b: b[i],
        })
        .collect();
    let out = MStepOutput {
        params: MixtureParams { p, components },
        inner_converged: true,
        inner_iters: 0,
    };
    Ok((out, exact))
}

fn common_dimension(
    dims: &DimSpec,
    k: usize,
    p: usize,
    mom: &Moments,
    within: &SymMatrix,
) -> Result<usize> {
    match dims {
        DimSpec::Fixed(d) => Ok(resolve_fixed(d, k, p, true)?[0]),
        DimSpec::Scree { threshold, d_min, d_max } => {
            let cap = (0..k).map(|i| dim_cap(mom.n_i[i], p, *d_max)).min().unwrap_or(1);
            let spectrum = top_eig(within, (cap + 1).min(p))?.values;
            scree_common(&spectrum, *threshold, *d_min, cap)
        }
    }
}

fn shared_components(mom: &Moments, q: &DMatrix<f64>, a: Vec<Vec<f64>>, b: Vec<f64>) -> Vec<Component> {
    a.into_iter()
        .zip(b)
        .enumerate()
        .map(|(i, (a, b))| Component {
            pi: mom.pi[i],
            mean: mom.means[i].clone(),
            orientation: q.clone(),
            a,
            b,
        })
        .collect()
}

fn common_covariance(
    resp: &Responsibilities,
    data: &DataMatrix,
    model: SubspaceModel,
    dims: &DimSpec,
    cfg: &EmConfig,
    mom: &Moments,
) -> Result<(MStepOutput, bool)> {
    let p = data.p();
    let k = resp.k();
    let within = within_scatter(&class_scatters(resp, data, mom)?, &mom.pi);
    let d = common_dimension(dims, k, p, mom, &within)?;
    let pairs = top_eig(&within, d)?;
    let lam = vec![pairs.values.clone(); k];
    let traces = vec![within.trace(); k];
    let (a, b, exact) = estimate_ab_flagged(model, &mom.pi, &lam, &traces, p, cfg.b_floor);
    let q = pairs.vectors;
    let out = MStepOutput {
        params: MixtureParams {
            p,
            components: shared_components(mom, &q, a, b),
        },
        inner_converged: true,
        inner_iters: 0,
    };
    Ok((out, exact))
}

/// `q_j^t W_i q_j` for every class and retained direction.
fn projected_variances(scatters: &[SymMatrix], q: &DMatrix<f64>) -> Vec<Vec<f64>> {
    scatters
        .iter()
        .map(|w| {
            q.column_iter()
                .map(|c| w.quad_form(&c.into_owned()))
                .collect()
        })
        .collect()
}

/// Alternates the orientation update (leading eigenvectors of
/// `M = sum_i n_i (1/b_i - 1/a_i) W_i`) with the variance estimators,
/// starting from `q`.
fn orientation_fixed_point(
    model: SubspaceModel,
    scatters: &[SymMatrix],
    traces: &[f64],
    mom: &Moments,
    mut q: DMatrix<f64>,
    cfg: &EmConfig,
) -> Result<MStepOutput> {
    let p = scatters[0].dim();
    let d = q.ncols();
    let (mut a, mut b) = estimate_ab(model, &mom.pi, &projected_variances(scatters, &q), traces, p, cfg.b_floor);
    let mut converged = false;
    let mut iters = 0;
    while iters < cfg.inner_max_iters {
        iters += 1;
        let m = scatters
            .iter()
            .enumerate()
            .fold(SymMatrix::zeros(p), |acc, (i, w)| {
                acc.add_scaled(w, mom.n_i[i] * (1.0 / b[i] - 1.0 / a[i][0]))
            });
        q = top_eig(&m, d)?.vectors;
        let (a_new, b_new) =
            estimate_ab(model, &mom.pi, &projected_variances(scatters, &q), traces, p, cfg.b_floor);
        let change = a
            .iter()
            .zip(&a_new)
            .map(|(x, y)| (x[0] - y[0]).abs())
            .chain(b.iter().zip(&b_new).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        a = a_new;
        b = b_new;
        if change < cfg.inner_tol {
            converged = true;
            break;
        }
    }
    Ok(MStepOutput {
        params: MixtureParams {
            p,
            components: shared_components(mom, &q, a, b),
        },
        inner_converged: converged,
        inner_iters: iters,
    })
}

/// Runs the fixed point from the eigenvectors of `W` and, when available,
/// from the previous orientation; keeps the better end point.
fn common_orientation(
    resp: &Responsibilities,
    data: &DataMatrix,
    model: SubspaceModel,
    dims: &DimSpec,
    cfg: &EmConfig,
    mom: &Moments,
    prev: Option<&MixtureParams>,
) -> Result<MStepOutput> {
    let p = data.p();
    let k = resp.k();
    let scatters = class_scatters(resp, data, mom)?;
    let traces: Vec<f64> = scatters.iter().map(SymMatrix::trace).collect();
    let within = within_scatter(&scatters, &mom.pi);
    let d = common_dimension(dims, k, p, mom, &within)?;

    let cold = orientation_fixed_point(model, &scatters, &traces, mom, top_eig(&within, d)?.vectors, cfg)?;
    let warm_start = prev
        .map(|m| &m.components[0].orientation)
        .filter(|q| q.nrows() == p && q.ncols() == d);
    let Some(q0) = warm_start else {
        return Ok(cold);
    };
    let warm = orientation_fixed_point(model, &scatters, &traces, mom, q0.clone(), cfg)?;
    let cold_value = variance_objective(resp, data, mom, &cold.params)?;
    let warm_value = variance_objective(resp, data, mom, &warm.params)?;
    Ok(if warm_value > cold_value { warm } else { cold })
}

/// Full spectrum of the within-class scatter `W = sum_i pi_i W_i`.
pub fn within_class_spectrum(resp: &Responsibilities, data: &DataMatrix, cfg: &EmConfig) -> Result<Vec<f64>> {
    let mom = moments(resp, data, cfg)?;
    let within = within_scatter(&class_scatters(resp, data, &mom)?, &mom.pi);
    Ok(eig_desc(&within)?.values)
}
