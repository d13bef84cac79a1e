//! Expectation-maximization for the subspace mixture models.
//!
//! The E step works through the cost function `K_i`, the M step dispatches
//! on the model family. `fit` runs several restarts from random starting
//! partitions and keeps the one with the highest final log-likelihood.

pub mod estep;
pub mod init;
pub mod mstep;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{self, BaselineParams};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::model::{param_count, ModelKind, MixtureParams, ParamCountInputs};
use crate::selection::{bic, DimPolicy, DimPolicyKind};

pub use estep::{cost_k, cost_matrix, e_step, log_likelihood, predict};
pub use init::init_responsibilities;
pub use mstep::{m_step, m_step_from, DimSpec, MStepOutput};

/// Posterior membership probabilities, `n × k`, rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities(DMatrix<f64>);

impl Responsibilities {
    pub fn new(t: DMatrix<f64>) -> Result<Self> {
        if t.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidInput("responsibilities must lie in [0, 1]".into()));
        }
        if let Some(j) = t.row_iter().position(|r| (r.sum() - 1.0).abs() > 1e-10) {
            return Err(Error::InvalidInput(format!("responsibility row {j} does not sum to 1")));
        }
        Ok(Self(t))
    }

    pub(crate) fn from_matrix_unchecked(t: DMatrix<f64>) -> Self {
        Self(t)
    }

    /// One-hot memberships.
    pub fn from_hard(labels: &[usize], k: usize) -> Self {
        let mut t = DMatrix::zeros(labels.len(), k);
        for (j, &l) in labels.iter().enumerate() {
            t[(j, l)] = 1.0;
        }
        Self(t)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }

    /// Row-wise argmax; ties go to the lowest index.
    pub fn assignments(&self) -> Vec<usize> {
        self.0
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for i in 1..row.len() {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

/// How starting partitions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    RandomPartition,
    KMeansSeeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when the relative log-likelihood change falls below this.
    pub rel_tol: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
    /// Components lighter than this are degenerate; `None` means `1e-6 * n`.
    pub min_component_weight: Option<f64>,
    pub b_floor: f64,
    pub seed: u64,
    pub n_restarts: usize,
    /// Extra attempts per restart slot after a degenerate run.
    pub max_retries: usize,
    pub init_kind: InitKind,
    /// Classes with fewer effective observations than this use the Gram
    /// path; `None` means `p`.
    pub gram_threshold: Option<usize>,
    /// Ridge for the full-covariance baselines, relative to `trace(W)/p`.
    pub ridge_factor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-7,
            inner_max_iters: 100,
            inner_tol: 1e-8,
            min_component_weight: None,
            b_floor: 1e-10,
            seed: 0,
            n_restarts: 10,
            max_retries: 5,
            init_kind: InitKind::RandomPartition,
            gram_threshold: None,
            ridge_factor: 1e-6,
        }
    }
}

impl EmConfig {
    pub(crate) fn min_weight(&self, n: usize) -> f64 {
        self.min_component_weight.unwrap_or(1e-6 * n as f64)
    }

    /// Random stream `stream` of this configuration's seed.
    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.rel_tol, self.inner_tol, self.b_floor];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_iters == 0 || self.n_restarts == 0 {
            return Err(Error::InvalidInput("EM tolerances and counts must be positive".into()));
        }
        if self.ridge_factor < 0.0 {
            return Err(Error::InvalidInput("ridge factor must be non-negative".into()));
        }
        Ok(())
    }
}

/// Parameters of any fitted mixture.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedParams {
    Subspace(MixtureParams),
    Baseline(BaselineParams),
}

impl FittedParams {
    pub fn p(&self) -> usize {
        match self {
            FittedParams::Subspace(m) => m.p,
            FittedParams::Baseline(b) => b.p,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            FittedParams::Subspace(m) => m.k(),
            FittedParams::Baseline(b) => b.components.len(),
        }
    }

    /// `K_i(x_j)` for every observation and component.
    pub fn cost_matrix(&self, data: &DataMatrix) -> Result<DMatrix<f64>> {
        match self {
            FittedParams::Subspace(m) => estep::cost_matrix(m, data),
            FittedParams::Baseline(b) => baselines::cost_matrix(b, data),
        }
    }

    pub fn e_step(&self, data: &DataMatrix) -> Result<(Responsibilities, f64)> {
        let costs = self.cost_matrix(data)?;
        Ok(estep::responsibilities_from_costs(&costs, self.p()))
    }

    pub fn log_likelihood(&self, data: &DataMatrix) -> Result<f64> {
        self.e_step(data).map(|(_, ll)| ll)
    }

    pub fn predict(&self, data: &DataMatrix) -> Result<(Vec<usize>, Responsibilities)> {
        let costs = self.cost_matrix(data)?;
        let (resp, _) = estep::responsibilities_from_costs(&costs, self.p());
        Ok((estep::argmin_rows(&costs), resp))
    }

    pub fn dims(&self) -> Vec<usize> {
        match self {
            FittedParams::Subspace(m) => m.dims(),
            FittedParams::Baseline(_) => Vec::new(),
        }
    }

    pub fn subspace(&self) -> Option<&MixtureParams> {
        match self {
            FittedParams::Subspace(m) => Some(m),
            FittedParams::Baseline(_) => None,
        }
    }

    pub fn baseline(&self) -> Option<&BaselineParams> {
        match self {
            FittedParams::Baseline(b) => Some(b),
            FittedParams::Subspace(_) => None,
        }
    }
}

/// Outcome of a fit.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: FittedParams,
    pub model: ModelKind,
    pub loglik_trace: Vec<f64>,
    pub n_iters: usize,
    pub converged: bool,
    /// False when some common-orientation M step stopped at `inner_max_iters`.
    pub inner_converged: bool,
    pub loglik: f64,
    pub nu: usize,
    pub bic: f64,
    pub assignments: Vec<usize>,
    pub responsibilities: Responsibilities,
    pub restart_index: usize,
    pub seed: u64,
}

impl FitReport {
    pub fn dims(&self) -> Vec<usize> {
        self.params.dims()
    }
}

/// Result of a single EM run from one starting partition.
pub(crate) struct Run {
    pub params: FittedParams,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub inner_converged: bool,
    pub resp: Responsibilities,
}

/// Alternates `m` and the E step until the relative log-likelihood change
/// drops below `cfg.rel_tol`. `m` also sees the previous parameters, if any.
pub(crate) fn em_loop<M>(data: &DataMatrix, start: Responsibilities, cfg: &EmConfig, m: M) -> Result<Run>
where
    M: Fn(&Responsibilities, Option<&FittedParams>) -> Result<(FittedParams, bool)>,
{
    let mut resp = start;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut inner_converged = true;
    let mut params = None;
    for _ in 0..cfg.max_iters {
        let (next, inner_ok) = m(&resp, params.as_ref())?;
        inner_converged &= inner_ok;
        let (t, ll) = next.e_step(data)?;
        if !ll.is_finite() {
            return Err(Error::Numerical {
                component: 0,
                detail: format!("log-likelihood is {ll}"),
            });
        }
        resp = t;
        params = Some(next);
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if (ll - prev).abs() <= cfg.rel_tol * ll.abs() {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
    }
    Ok(Run {
        params: params.expect("max_iters is positive"),
        trace,
        converged,
        inner_converged,
        resp,
    })
}

/// Runs `cfg.n_restarts` independent EM runs and keeps the best one.
///
/// Restart `r` draws its starting partition from random stream `r` of the
/// seed; a run that hits a degenerate component is retried on a fresh stream.
pub(crate) fn best_of_restarts<M>(data: &DataMatrix, k: usize, cfg: &EmConfig, m: M) -> Result<(usize, Run)>
where
    M: Fn(&Responsibilities, Option<&FittedParams>) -> Result<(FittedParams, bool)> + Sync,
{
    cfg.validate()?;
    if data.n() < k || k == 0 {
        return Err(Error::InvalidInput(format!(
            "need at least k = {k} observations, got {}",
            data.n()
        )));
    }
    let slots = cfg.n_restarts as u64;
    let runs: Vec<Result<Run>> = (0..cfg.n_restarts)
        .into_par_iter()
        .map(|r| {
            let mut last_err = None;
            for attempt in 0..=cfg.max_retries as u64 {
                let mut rng = cfg.rng(r as u64 + attempt * slots);
                let labels = init::initial_partition(data, k, cfg.init_kind, &mut rng)?;
                match em_loop(data, Responsibilities::from_hard(&labels, k), cfg, &m) {
                    Ok(run) => return Ok(run),
                    Err(e @ (Error::DegenerateCluster { .. } | Error::Numerical { .. })) => last_err = Some(e),
                    Err(e) => return Err(e),
                }
            }
            Err(last_err.expect("at least one attempt"))
        })
        .collect();
    let mut best: Option<(usize, Run)> = None;
    let mut last_err = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let ll = *run.trace.last().unwrap();
                if best.as_ref().is_none_or(|(_, b)| ll > *b.trace.last().unwrap()) {
                    best = Some((r, run));
                }
            }
            Err(e @ Error::InvalidInput(_)) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        Error::FitFailed(format!(
            "all {} restarts failed; last error: {}",
            cfg.n_restarts,
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ))
    })
}

pub(crate) fn report(model: ModelKind, data: &DataMatrix, cfg: &EmConfig, restart: usize, run: Run) -> Result<FitReport> {
    let k = run.params.k();
    let nu = match &run.params {
        FittedParams::Subspace(m) => param_count(
            model,
            &ParamCountInputs {
                k,
                p: m.p,
                dims: m.dims(),
            },
        )?,
        FittedParams::Baseline(b) => crate::model::baseline_param_count(b.kind, k, b.p),
    };
    let loglik = *run.trace.last().unwrap();
    Ok(FitReport {
        assignments: run.resp.assignments(),
        bic: bic(loglik, nu, data.n()),
        nu,
        loglik,
        n_iters: run.trace.len(),
        converged: run.converged,
        inner_converged: run.inner_converged,
        loglik_trace: run.trace,
        responsibilities: run.resp,
        params: run.params,
        model,
        restart_index: restart,
        seed: cfg.seed,
    })
}

/// Fits `model` with `k` components.
pub fn fit(data: &DataMatrix, k: usize, model: ModelKind, policy: &DimPolicy, cfg: &EmConfig) -> Result<FitReport> {
    let p = data.p();
    if p < 2 {
        return Err(Error::InvalidInput("need at least two dimensions".into()));
    }
    let sub = match model {
        ModelKind::Baseline(kind) => return baselines::fit_baseline(data, k, kind, cfg),
        ModelKind::Subspace(m) => m,
    };
    policy.validate(p)?;
    let spec = match &policy.kind {
        DimPolicyKind::FixedPerClass(d) => DimSpec::Fixed(d.clone()),
        DimPolicyKind::FixedCommon(d) => DimSpec::Fixed(vec![*d; k]),
        DimPolicyKind::ScreeFree(t) => DimSpec::Scree {
            threshold: *t,
            d_min: policy.d_min,
            d_max: policy.d_max,
        },
        DimPolicyKind::ScreeCommonViaBic => return fit_common_dim_by_bic(data, k, model, policy, cfg),
    };
    let (restart, run) = best_of_restarts(data, k, cfg, |resp, prev| {
        let out = m_step_from(resp, data, sub, &spec, cfg, prev.and_then(FittedParams::subspace))?;
        Ok((FittedParams::Subspace(out.params), out.inner_converged))
    })?;
    report(model, data, cfg, restart, run)
}

fn fit_common_dim_by_bic(
    data: &DataMatrix,
    k: usize,
    model: ModelKind,
    policy: &DimPolicy,
    cfg: &EmConfig,
) -> Result<FitReport> {
    let hi = policy.d_max.unwrap_or(data.p() - 1).min(data.p() - 1);
    let mut best: Option<FitReport> = None;
    let mut last_err = None;
    for d in policy.d_min..=hi {
        match fit(data, k, model, &DimPolicy::fixed_common(d), cfg) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.bic < b.bic) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| Error::FitFailed(format!("no common dimension could be fitted: {last_err:?}")))
}
