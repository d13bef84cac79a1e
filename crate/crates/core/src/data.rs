//! The clustering input: `n` observations in `p` dimensions with optional labels.

use nalgebra::{DMatrix, DVectorView};

use crate::error::{Error, Result};

/// Observations stored row-wise (`n × p`), optionally carrying class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    x: DMatrix<f64>,
    labels: Option<Vec<usize>>,
}

impl DataMatrix {
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidInput("empty data matrix".into()));
        }
        if let Some((idx, _)) = x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx % x.nrows(), idx / x.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {r}, column {c}"
            )));
        }
        Ok(Self { x, labels: None })
    }

    /// Builds from row slices; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(r) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!(
                "ragged row {r}: expected {p} values, found {}",
                rows[r].len()
            )));
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |r, c| rows[r][c]))
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} observations",
                labels.len(),
                self.n()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.x.row(j).iter().copied().collect()
    }

    pub fn row_view(&self, j: usize) -> nalgebra::DVector<f64> {
        self.x.row(j).transpose()
    }

    pub fn column(&self, c: usize) -> DVectorView<'_, f64> {
        self.x.column(c)
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Rows reordered by `perm` (row `j` of the result is row `perm[j]` of `self`).
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let x = DMatrix::from_fn(self.n(), self.p(), |r, c| self.x[(perm[r], c)]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| perm.iter().map(|&j| l[j]).collect());
        Self { x, labels }
    }

    /// Column-wise standardization to zero mean and unit (population) variance.
    pub fn standardized(&self) -> Self {
        let n = self.n() as f64;
        let mut x = self.x.clone();
        for mut col in x.column_iter_mut() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            col.apply(|v| *v = (*v - mean) / sd);
        }
        Self {
            x,
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        let err = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(m) if m.contains("row 1")));
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn standardize_gives_unit_variance() {
        let d = DataMatrix::from_rows(&[vec![1.0, 10.0], vec![3.0, 10.0], vec![5.0, 10.0]])
            .unwrap()
            .standardized();
        let c0: Vec<f64> = d.column(0).iter().copied().collect();
        let var = c0.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert!(d.column(1).iter().all(|v| *v == 0.0));
    }
}
