//! Dense symmetric linear algebra: weighted scatter matrices, descending
//! eigendecompositions, truncated solves and the small-sample Gram path.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// A real symmetric `p × p` matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps `m`, mirroring the upper triangle onto the lower one so the
    /// stored matrix is exactly symmetric.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let p = m.nrows();
        for c in 0..p {
            for r in (c + 1)..p {
                m[(r, c)] = m[(c, r)];
            }
        }
        Ok(Self(m))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DMatrix::zeros(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.amax()
    }

    /// `self + other * scale`.
    pub fn add_scaled(&self, other: &SymMatrix, scale: f64) -> SymMatrix {
        SymMatrix(&self.0 + &other.0 * scale)
    }

    /// `q^t S q`.
    pub fn quad_form(&self, q: &DVector<f64>) -> f64 {
        q.dot(&(&self.0 * q))
    }
}

/// Eigenpairs sorted by descending eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// `p × m`, column `j` paired with `values[j]`.
    pub vectors: DMatrix<f64>,
    /// Index of the first pair that lies beyond the numerical rank (Gram path only).
    pub rank_limit: Option<usize>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keeps the first `m` pairs.
    pub fn truncate(mut self, m: usize) -> Self {
        if m < self.values.len() {
            self.values.truncate(m);
            self.vectors = self.vectors.columns(0, m).into_owned();
            self.rank_limit = self.rank_limit.filter(|&r| r < m);
        }
        self
    }
}

/// Weight-scaled, mean-centered observations: row `j` is `sqrt(w_j) (x_j - mu)`.
#[derive(Debug, Clone)]
pub struct CenteredDesign {
    rows: DMatrix<f64>,
    weight_total: f64,
}

impl CenteredDesign {
    /// Builds the design from the rows carrying strictly positive weight.
    pub fn new(data: &DataMatrix, weights: &[f64], mean: &DVector<f64>) -> Result<Self> {
        check_weights(data, weights, mean)?;
        let total: f64 = weights.iter().sum();
        let kept: Vec<usize> = (0..data.n()).filter(|&j| weights[j] > 0.0).collect();
        let x = data.matrix();
        let rows = DMatrix::from_fn(kept.len(), data.p(), |r, c| {
            let j = kept[r];
            weights[j].sqrt() * (x[(j, c)] - mean[c])
        });
        Ok(Self {
            rows,
            weight_total: total,
        })
    }

    pub fn from_rows(rows: DMatrix<f64>, weight_total: f64) -> Result<Self> {
        if !(weight_total > 0.0) {
            return Err(Error::InvalidInput("weight total must be positive".into()));
        }
        Ok(Self { rows, weight_total })
    }

    pub fn n_eff(&self) -> usize {
        self.rows.nrows()
    }

    pub fn p(&self) -> usize {
        self.rows.ncols()
    }

    pub fn weight_total(&self) -> f64 {
        self.weight_total
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// The `p × p` scatter `rows^t rows / weight_total`.
    pub fn scatter(&self) -> SymMatrix {
        symmetric_from_product(self.rows.tr_mul(&self.rows) / self.weight_total)
    }

    /// `trace(rows^t rows) / weight_total`, without forming the scatter.
    pub fn scatter_trace(&self) -> f64 {
        self.rows.norm_squared() / self.weight_total
    }
}

fn check_weights(data: &DataMatrix, weights: &[f64], mean: &DVector<f64>) -> Result<()> {
    if weights.len() != data.n() {
        return Err(Error::InvalidInput(format!(
            "{} weights for {} observations",
            weights.len(),
            data.n()
        )));
    }
    if mean.len() != data.p() {
        return Err(Error::InvalidInput(format!(
            "mean has length {}, data has {} columns",
            mean.len(),
            data.p()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateCluster {
            component: 0,
            detail: format!("total weight {total:.3e}"),
        });
    }
    Ok(())
}

fn symmetric_from_product(mut m: DMatrix<f64>) -> SymMatrix {
    let p = m.nrows();
    for c in 0..p {
        for r in (c + 1)..p {
            m[(r, c)] = m[(c, r)];
        }
    }
    SymMatrix(m)
}

/// `(1 / sum w) * sum_j w_j (x_j - mean)(x_j - mean)^t`.
pub fn weighted_scatter(data: &DataMatrix, weights: &[f64], mean: &DVector<f64>) -> Result<SymMatrix> {
    Ok(CenteredDesign::new(data, weights, mean)?.scatter())
}

/// Full eigendecomposition, eigenvalues descending.
///
/// Each eigenvector is signed so that its largest-magnitude entry is positive.
pub fn eig_desc(s: &SymMatrix) -> Result<EigenPairs> {
    if s.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(s.0.clone());
    let p = s.dim();
    let mut order: Vec<usize> = (0..p).collect();
    // stable: tied eigenvalues keep backend order
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    Ok(EigenPairs {
        values,
        vectors,
        rank_limit: None,
    })
}

/// The `m` leading eigenpairs of `s`.
pub fn top_eig(s: &SymMatrix, m: usize) -> Result<EigenPairs> {
    if m == 0 || m > s.dim() {
        return Err(Error::InvalidInput(format!(
            "requested {m} eigenpairs of a {}x{} matrix",
            s.dim(),
            s.dim()
        )));
    }
    Ok(eig_desc(s)?.truncate(m))
}

/// Leading eigenpairs of the scatter `Y^t Y / w` computed from the
/// `n_eff × n_eff` inner-product matrix `Y Y^t / w`.
///
/// Pairs beyond the numerical rank come back with value 0, an arbitrary
/// orthonormal completion as vector, and `rank_limit` set.
pub fn gram_top_eig(design: &CenteredDesign, m: usize) -> Result<EigenPairs> {
    let p = design.p();
    if m == 0 || m > p {
        return Err(Error::InvalidInput(format!(
            "requested {m} eigenpairs in dimension {p}"
        )));
    }
    let n_eff = design.n_eff();
    let w = design.weight_total;
    let mut values = Vec::with_capacity(m);
    let mut vectors = DMatrix::zeros(p, m);
    let mut rank_limit = None;
    let mut filled = 0;
    if n_eff > 0 {
        let gram = symmetric_from_product(&design.rows * design.rows.transpose() / w);
        let small = eig_desc(&gram)?;
        let cutoff = small.values[0].max(0.0) * (n_eff.max(p) as f64) * f64::EPSILON * 4.0;
        for j in 0..m.min(n_eff) {
            let lambda = small.values[j];
            if !(lambda > cutoff) {
                break;
            }
            let mut v = design.rows.tr_mul(&small.vectors.column(j));
            let norm = v.norm();
            v /= norm;
            vectors.set_column(j, &v);
            values.push(lambda);
            filled += 1;
        }
    }
    if filled < m {
        rank_limit = Some(filled);
        complete_basis(&mut vectors, filled);
        values.resize(m, 0.0);
    }
    fix_signs(&mut vectors);
    Ok(EigenPairs {
        values,
        vectors,
        rank_limit,
    })
}

/// Fills columns `from..` with an orthonormal completion of the leading columns.
fn complete_basis(v: &mut DMatrix<f64>, from: usize) {
    let (p, m) = v.shape();
    let mut col = from;
    let mut axis = 0;
    while col < m && axis < p {
        let mut e = DVector::zeros(p);
        e[axis] = 1.0;
        axis += 1;
        // two passes of Gram-Schmidt
        for _ in 0..2 {
            for c in 0..col {
                let q = v.column(c);
                let proj = q.dot(&e);
                e -= q * proj;
            }
        }
        let norm = e.norm();
        if norm > 1e-6 {
            v.set_column(col, &(e / norm));
            col += 1;
        }
    }
}

fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}
