//! External evaluation of a clustering against known classes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use pathfinding::prelude::{kuhn_munkres, Matrix};

use crate::error::{Error, Result};
use crate::model::MixtureParams;

/// Above this many labels on the smaller side, matchings come from the
/// assignment solver rather than by enumeration.
const EXHAUSTIVE_LIMIT: usize = 8;

/// Counts of `(true class, predicted cluster)` pairs. Rows and columns are
/// the sorted distinct labels of each argument.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub true_labels: Vec<usize>,
    pub pred_labels: Vec<usize>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::InvalidInput(format!(
                "label vectors differ in length: {} true, {} predicted",
                truth.len(),
                pred.len()
            )));
        }
        let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
            let mut m: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
            for (i, v) in m.values_mut().enumerate() {
                *v = i;
            }
            m
        };
        let ti = index(truth);
        let pi = index(pred);
        let mut counts = vec![vec![0; pi.len()]; ti.len()];
        for (t, p) in truth.iter().zip(pred) {
            counts[ti[t]][pi[p]] += 1;
        }
        Ok(ConfusionMatrix {
            true_labels: ti.into_keys().collect(),
            pred_labels: pi.into_keys().collect(),
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("true\\pred");
        for p in &self.pred_labels {
            write!(out, "\t{p}").unwrap();
        }
        out.push('\n');
        for (t, row) in self.true_labels.iter().zip(&self.counts) {
            write!(out, "{t}").unwrap();
            for c in row {
                write!(out, "\t{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionResult {
    pub rate: f64,
    /// `(predicted label, true label)` pairs of the optimal matching.
    pub matching: Vec<(usize, usize)>,
}

/// Best agreement between clusters and classes over all one-to-one
/// matchings. Predicted clusters left unmatched count as errors.
pub fn recognition_rate(truth: &[usize], pred: &[usize]) -> Result<RecognitionResult> {
    let cm = ConfusionMatrix::new(truth, pred)?;
    let (matched, pairs) = if cm.true_labels.len().min(cm.pred_labels.len()) <= EXHAUSTIVE_LIMIT {
        best_matching_exhaustive(&cm.counts)
    } else {
        best_matching_assignment(&cm.counts)
    };
    Ok(to_result(&cm, truth.len(), matched, pairs))
}

/// Same optimum as [`recognition_rate`], always through the assignment solver.
pub fn recognition_rate_assignment(truth: &[usize], pred: &[usize]) -> Result<RecognitionResult> {
    let cm = ConfusionMatrix::new(truth, pred)?;
    let (matched, pairs) = best_matching_assignment(&cm.counts);
    Ok(to_result(&cm, truth.len(), matched, pairs))
}

fn to_result(cm: &ConfusionMatrix, n: usize, matched: usize, pairs: Vec<(usize, usize)>) -> RecognitionResult {
    let matching = pairs
        .into_iter()
        .map(|(t, p)| (cm.pred_labels[p], cm.true_labels[t]))
        .collect();
    RecognitionResult {
        rate: if n == 0 { 1.0 } else { matched as f64 / n as f64 },
        matching,
    }
}

/// Transposes so that rows are the smaller side, returning `(counts, transposed)`.
fn oriented(counts: &[Vec<usize>]) -> (Vec<Vec<usize>>, bool) {
    let rows = counts.len();
    let cols = counts.first().map_or(0, Vec::len);
    if rows <= cols {
        (counts.to_vec(), false)
    } else {
        ((0..cols).map(|c| (0..rows).map(|r| counts[r][c]).collect()).collect(), true)
    }
}

fn unorient(pairs: Vec<(usize, usize)>, transposed: bool) -> Vec<(usize, usize)> {
    if transposed {
        pairs.into_iter().map(|(a, b)| (b, a)).collect()
    } else {
        pairs
    }
}

fn best_matching_exhaustive(counts: &[Vec<usize>]) -> (usize, Vec<(usize, usize)>) {
    let (m, transposed) = oriented(counts);
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut best = (0, Vec::new());
    let mut used = vec![false; cols];
    let mut chosen = Vec::with_capacity(rows);
    fn recurse(
        m: &[Vec<usize>],
        r: usize,
        sum: usize,
        used: &mut [bool],
        chosen: &mut Vec<usize>,
        best: &mut (usize, Vec<(usize, usize)>),
    ) {
        if r == m.len() {
            if sum > best.0 || best.1.is_empty() {
                *best = (sum, chosen.iter().copied().enumerate().collect());
            }
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                chosen.push(c);
                recurse(m, r + 1, sum + m[r][c], used, chosen, best);
                chosen.pop();
                used[c] = false;
            }
        }
    }
    recurse(&m, 0, 0, &mut used, &mut chosen, &mut best);
    (best.0, unorient(best.1, transposed))
}

fn best_matching_assignment(counts: &[Vec<usize>]) -> (usize, Vec<(usize, usize)>) {
    let (m, transposed) = oriented(counts);
    if m.is_empty() {
        return (0, Vec::new());
    }
    let weights = Matrix::from_rows(m.iter().map(|r| r.iter().map(|&c| c as i64)))
        .expect("rectangular confusion matrix");
    let (total, cols) = kuhn_munkres(&weights);
    (total as usize, unorient(cols.into_iter().enumerate().collect(), transposed))
}

/// `a_i1 / b_i`, the condition number of component `i`'s fitted covariance.
pub fn condition_ratio(params: &MixtureParams, component: usize) -> f64 {
    let c = &params.components[component];
    c.a.first().copied().unwrap_or(c.b) / c.b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_permutation() {
        let t = [0, 0, 1, 1, 2, 2];
        assert_eq!(recognition_rate(&t, &t).unwrap().rate, 1.0);
        let p = [2, 2, 0, 0, 1, 1];
        let r = recognition_rate(&t, &p).unwrap();
        assert_eq!(r.rate, 1.0);
        assert!(r.matching.contains(&(2, 0)));
    }

    #[test]
    fn small_example() {
        let r = recognition_rate(&[1, 1, 2, 2], &[1, 2, 2, 2]).unwrap();
        assert_eq!(r.rate, 0.75);
    }

    #[test]
    fn unequal_alphabets() {
        // Three clusters against two classes: one cluster must go unmatched.
        let r = recognition_rate(&[0, 0, 0, 1, 1, 1], &[0, 0, 5, 1, 1, 1]).unwrap();
        assert!((r.rate - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.matching.len(), 2);
        let a = recognition_rate_assignment(&[0, 0, 0, 1, 1, 1], &[0, 0, 5, 1, 1, 1]).unwrap();
        assert_eq!(a.rate, r.rate);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(recognition_rate(&[0, 1], &[0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn confusion_tsv() {
        let cm = ConfusionMatrix::new(&[0, 0, 1], &[1, 1, 1]).unwrap();
        assert_eq!(cm.total(), 3);
        assert_eq!(cm.to_tsv(), "true\\pred\t1\n0\t2\n1\t1\n");
    }
}
