//! Synthetic Gaussian data: subspace mixtures drawn through their spectral
//! factors, and full-rank mixtures with a prescribed condition number.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Deserialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::model::{AStructure, BStructure, Component, DStructure, MixtureParams, SubspaceModel};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub pi: f64,
    pub d: usize,
    /// Subspace variances; a single value is repeated `d` times.
    #[serde(deserialize_with = "scalar_or_vec")]
    pub a: Vec<f64>,
    pub b: f64,
}

impl ClassSpec {
    pub fn a_values(&self) -> Vec<f64> {
        if self.a.len() == 1 {
            vec![self.a[0]; self.d]
        } else {
            self.a.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrientationMode {
    #[default]
    PerClass,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub p: usize,
    pub n: usize,
    #[serde(rename = "class")]
    pub classes: Vec<ClassSpec>,
    /// Distance of each class mean from the origin. Defaults to `sqrt(b)`
    /// of the class, so classes overlap and differ mainly by orientation.
    #[serde(default)]
    pub mean_radius: Option<f64>,
    #[serde(default)]
    pub orientation: OrientationMode,
    #[serde(default)]
    pub seed: u64,
}

impl SimSpec {
    pub fn k(&self) -> usize {
        self.classes.len()
    }

    /// Three classes with intrinsic dimensions 2, 5 and 10.
    pub fn three_subspaces(p: usize, n: usize, seed: u64) -> Self {
        let class = |pi, d, a| ClassSpec { pi, d, a: vec![a], b: 15.0 };
        SimSpec {
            p,
            n,
            classes: vec![class(0.4, 2, 150.0), class(0.3, 5, 100.0), class(0.3, 10, 75.0)],
            mean_radius: None,
            orientation: OrientationMode::PerClass,
            seed,
        }
    }

    /// Three classes obeying the sharing constraints of `model`.
    pub fn for_model(model: SubspaceModel, p: usize, n: usize, seed: u64) -> Self {
        let dims: [usize; 3] = match model.d() {
            DStructure::PerClass => [2, 5, 10],
            DStructure::Common => [5, 5, 5],
        };
        let scales = [150.0, 100.0, 75.0];
        let bs = [15.0, 10.0, 5.0];
        let classes = (0..3)
            .map(|i| {
                let d = dims[i];
                let decay = |top: f64| (0..d).map(|j| top * (1.0 - 0.5 * j as f64 / d as f64)).collect::<Vec<_>>();
                let a = match model.a() {
                    AStructure::PerClassPerDim => decay(scales[i]),
                    AStructure::PerDimShared => decay(scales[0]),
                    AStructure::PerClass => vec![scales[i]],
                    AStructure::Global => vec![scales[0]],
                };
                let b = match model.b() {
                    BStructure::PerClass => bs[i],
                    BStructure::Global => bs[0],
                };
                ClassSpec { pi: [0.4, 0.3, 0.3][i], d, a, b }
            })
            .collect();
        SimSpec {
            p,
            n,
            classes,
            mean_radius: None,
            orientation: if model.shares_orientation() { OrientationMode::Shared } else { OrientationMode::PerClass },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.p < 2 {
            return Err(Error::InvalidInput("need at least one class and p >= 2".into()));
        }
        check_proportions(self.classes.iter().map(|c| c.pi))?;
        for (i, c) in self.classes.iter().enumerate() {
            let bad = |msg: String| Err(Error::InvalidInput(format!("class {i}: {msg}")));
            if c.d == 0 || c.d >= self.p {
                return bad(format!("d = {} must lie in 1..{}", c.d, self.p - 1));
            }
            if c.a.len() != 1 && c.a.len() != c.d {
                return bad(format!("{} subspace variances for d = {}", c.a.len(), c.d));
            }
            if !(c.b > 0.0) {
                return bad("b must be positive".into());
            }
            if c.a.iter().any(|&a| !(a > c.b)) {
                return bad("every a must exceed b".into());
            }
        }
        if self.orientation == OrientationMode::Shared && self.classes.iter().any(|c| c.d != self.classes[0].d) {
            return Err(Error::InvalidInput("a shared orientation needs a common d".into()));
        }
        if let Some(r) = self.mean_radius {
            if !(r >= 0.0) {
                return Err(Error::InvalidInput("mean_radius must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// The generating mixture: orientations, means and variances.
    pub fn true_params(&self) -> Result<MixtureParams> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shared = (self.orientation == OrientationMode::Shared)
            .then(|| orthonormal(&mut rng, self.p, self.classes[0].d));
        let components = self
            .classes
            .iter()
            .map(|c| {
                let orientation = shared.clone().unwrap_or_else(|| orthonormal(&mut rng, self.p, c.d));
                let radius = self.mean_radius.unwrap_or(c.b.sqrt());
                Component {
                    pi: c.pi,
                    mean: sphere_point(&mut rng, self.p, radius),
                    orientation,
                    a: c.a_values(),
                    b: c.b,
                }
            })
            .collect();
        Ok(MixtureParams { p: self.p, components })
    }
}

/// Mixture of full-rank Gaussians whose covariances all have the same
/// ratio between largest and smallest eigenvalue.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullRankSpec {
    pub k: usize,
    pub p: usize,
    pub n: usize,
    pub condition_number: f64,
    /// Defaults to equal proportions.
    #[serde(default)]
    pub proportions: Option<Vec<f64>>,
    /// Defaults to `sqrt(condition_number)`.
    #[serde(default)]
    pub mean_radius: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// One full-rank class: mean, orthogonal eigenbasis and descending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRankClass {
    pub pi: f64,
    pub mean: DVector<f64>,
    pub basis: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl FullRankClass {
    pub fn covariance(&self) -> DMatrix<f64> {
        let scaled = &self.basis * DMatrix::from_diagonal(&DVector::from_vec(self.eigenvalues.clone()));
        scaled * self.basis.transpose()
    }
}

impl FullRankSpec {
    pub fn new(k: usize, p: usize, n: usize, condition_number: f64, seed: u64) -> Self {
        FullRankSpec { k, p, n, condition_number, proportions: None, mean_radius: None, seed }
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.proportions.clone().unwrap_or_else(|| vec![1.0 / self.k as f64; self.k])
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return Err(Error::InvalidInput("k and p must be positive".into()));
        }
        if !(self.condition_number >= 1.0) || !self.condition_number.is_finite() {
            return Err(Error::InvalidInput("condition_number must be a finite value >= 1".into()));
        }
        let pi = self.proportions();
        if pi.len() != self.k {
            return Err(Error::InvalidInput(format!("{} proportions for k = {}", pi.len(), self.k)));
        }
        check_proportions(pi.into_iter())
    }

    pub fn classes(&self) -> Result<Vec<FullRankClass>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let radius = self.mean_radius.unwrap_or(self.condition_number.sqrt());
        let (lo, hi) = (0.0f64, self.condition_number.ln());
        Ok(self
            .proportions()
            .into_iter()
            .map(|pi| {
                let basis = orthonormal(&mut rng, self.p, self.p);
                let mut eigenvalues: Vec<f64> = (0..self.p)
                    .map(|j| match j {
                        0 => self.condition_number,
                        j if j + 1 == self.p => 1.0,
                        _ => rng.random_range(lo..=hi).exp(),
                    })
                    .collect();
                if self.p == 1 {
                    eigenvalues = vec![1.0];
                }
                eigenvalues.sort_by(|a, b| b.total_cmp(a));
                FullRankClass { pi, mean: sphere_point(&mut rng, self.p, radius), basis, eigenvalues }
            })
            .collect())
    }
}

fn check_proportions(pi: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for v in pi {
        if !(v >= 0.0) {
            return Err(Error::InvalidInput("proportions must be non-negative".into()));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("proportions sum to {sum}, not 1")));
    }
    Ok(())
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled row by row so the draw order does not depend on storage layout.
    let mut m = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = StandardNormal.sample(rng);
        }
    }
    m
}

fn orthonormal(rng: &mut ChaCha8Rng, p: usize, d: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, p, d).qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign correction makes the result Haar distributed.
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn sphere_point(rng: &mut ChaCha8Rng, p: usize, radius: f64) -> DVector<f64> {
    let g: DVector<f64> = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
    let norm = g.norm();
    if norm == 0.0 {
        DVector::zeros(p)
    } else {
        g * (radius / norm)
    }
}

fn draw_labels(rng: &mut ChaCha8Rng, pi: &[f64], n: usize) -> Vec<usize> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, &w) in pi.iter().enumerate() {
                acc += w;
                if u < acc {
                    return i;
                }
            }
            pi.iter().rposition(|&w| w > 0.0).unwrap_or(0)
        })
        .collect()
}

/// A `p × d` matrix with orthonormal columns, uniformly distributed.
pub fn random_orientation(p: usize, d: usize, seed: u64) -> Result<DMatrix<f64>> {
    if d > p || p == 0 {
        return Err(Error::InvalidInput(format!("cannot draw {d} orthonormal columns in dimension {p}")));
    }
    Ok(orthonormal(&mut ChaCha8Rng::seed_from_u64(seed), p, d))
}

/// Draws `spec.n` labelled points from the subspace mixture of `spec`.
pub fn simulate(spec: &SimSpec) -> Result<DataMatrix> {
    let params = spec.true_params()?;
    sample_mixture(&params, spec.n, spec.seed)
}

/// Draws `n` labelled points from fitted or generating parameters.
///
/// Each point is `mu + sqrt(b) g + Q diag(sqrt(a) - sqrt(b)) Q^t g` with
/// `g` standard normal, which has covariance `Q diag(a) Q^t + b (I - Q Q^t)`.
pub fn sample_mixture(params: &MixtureParams, n: usize, seed: u64) -> Result<DataMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let pi: Vec<f64> = params.components.iter().map(|c| c.pi).collect();
    let labels = draw_labels(&mut rng, &pi, n);
    let g = gaussian_matrix(&mut rng, n, params.p);
    let mut x = DMatrix::zeros(n, params.p);
    for (i, c) in params.components.iter().enumerate() {
        let rows: Vec<usize> = (0..n).filter(|&j| labels[j] == i).collect();
        if rows.is_empty() {
            continue;
        }
        let gi = g.select_rows(&rows);
        let sb = c.b.sqrt();
        let stretch = DVector::from_iterator(c.dim(), c.a.iter().map(|a| a.sqrt() - sb));
        let mut proj = &gi * &c.orientation;
        for (mut col, s) in proj.column_iter_mut().zip(stretch.iter()) {
            col *= *s;
        }
        let xi = gi * sb + proj * c.orientation.transpose();
        for (r, &j) in rows.iter().enumerate() {
            for col in 0..params.p {
                x[(j, col)] = xi[(r, col)] + c.mean[col];
            }
        }
    }
    DataMatrix::new(x)?.with_labels(labels)
}

/// Draws `spec.n` labelled points from the full-rank mixture of `spec`.
pub fn simulate_full_rank(spec: &FullRankSpec) -> Result<DataMatrix> {
    let classes = spec.classes()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let pi: Vec<f64> = classes.iter().map(|c| c.pi).collect();
    let labels = draw_labels(&mut rng, &pi, spec.n);
    let g = gaussian_matrix(&mut rng, spec.n, spec.p);
    let mut x = DMatrix::zeros(spec.n, spec.p);
    for (i, c) in classes.iter().enumerate() {
        let roots = DVector::from_iterator(spec.p, c.eigenvalues.iter().map(|v| v.sqrt()));
        let factor = &c.basis * DMatrix::from_diagonal(&roots);
        for j in (0..spec.n).filter(|&j| labels[j] == i) {
            let xj = &factor * g.row(j).transpose() + &c.mean;
            x.row_mut(j).copy_from(&xj.transpose());
        }
    }
    DataMatrix::new(x)?.with_labels(labels)
}

/// Either kind of generator, as read from a spec file.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecFile {
    Subspace(SimSpec),
    FullRank(FullRankSpec),
}

impl SpecFile {
    /// Parses the `key = value` format. A top-level `kind = "full-rank"`
    /// selects the full-rank generator; otherwise classes are listed in
    /// `[[class]]` sections.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Parse(format!("{e}")))?;
        let kind = match table.remove("kind") {
            None => "subspace".to_string(),
            Some(toml::Value::String(s)) => s,
            Some(other) => return Err(Error::Parse(format!("kind must be a string, got {other}"))),
        };
        let value = toml::Value::Table(table);
        let parsed = match kind.as_str() {
            "subspace" => SpecFile::Subspace(value.try_into().map_err(|e| Error::Parse(format!("{e}")))?),
            "full-rank" => SpecFile::FullRank(value.try_into().map_err(|e| Error::Parse(format!("{e}")))?),
            other => return Err(Error::Parse(format!("unknown kind '{other}'"))),
        };
        match &parsed {
            SpecFile::Subspace(s) => s.validate()?,
            SpecFile::FullRank(s) => s.validate()?,
        }
        Ok(parsed)
    }

    pub fn simulate(&self) -> Result<DataMatrix> {
        match self {
            SpecFile::Subspace(s) => simulate(s),
            SpecFile::FullRank(s) => simulate_full_rank(s),
        }
    }
}

fn scalar_or_vec<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}
