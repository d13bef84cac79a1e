//! Starting partitions for EM.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::em::{EmConfig, InitKind, Responsibilities};
use crate::error::{Error, Result};

const KMEANS_ITERS: usize = 10;

/// Hard starting partition with every component non-empty, reproducible from `cfg.seed`.
pub fn init_responsibilities(data: &DataMatrix, k: usize, cfg: &EmConfig) -> Result<Responsibilities> {
    let mut rng = cfg.rng(0);
    initial_partition(data, k, cfg.init_kind, &mut rng).map(|a| Responsibilities::from_hard(&a, k))
}

pub(crate) fn initial_partition(
    data: &DataMatrix,
    k: usize,
    kind: InitKind,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>> {
    let n = data.n();
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} observations into {k} components"
        )));
    }
    Ok(match kind {
        InitKind::RandomPartition => random_partition(n, k, rng),
        InitKind::KMeansSeeded => kmeans_partition(data, k, rng),
    })
}

fn random_partition(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &j) in order.iter().enumerate() {
        labels[j] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    labels
}

fn sq_dist(data: &DataMatrix, j: usize, center: &[f64]) -> f64 {
    let x = data.matrix();
    center
        .iter()
        .enumerate()
        .map(|(c, m)| (x[(j, c)] - m).powi(2))
        .sum()
}

fn kmeans_partition(data: &DataMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.n();
    let p = data.p();
    // k-means++ seeding
    let mut centers: Vec<Vec<f64>> = vec![data.row(rng.random_range(0..n))];
    let mut nearest: Vec<f64> = (0..n).map(|j| sq_dist(data, j, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (j, d) in nearest.iter().enumerate() {
                if target < *d {
                    pick = j;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(data.row(next));
        for (j, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(data, j, centers.last().unwrap()));
        }
    }
    let mut labels = vec![0; n];
    for _ in 0..KMEANS_ITERS {
        for (j, label) in labels.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0);
            for (i, c) in centers.iter().enumerate() {
                let d = sq_dist(data, j, c);
                if d < best.0 {
                    best = (d, i);
                }
            }
            *label = best.1;
        }
        fill_empty(data, k, &centers, &mut labels);
        let mut sums = vec![vec![0.0; p]; k];
        let mut counts = vec![0usize; k];
        for (j, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (c, s) in sums[l].iter_mut().enumerate() {
                *s += data.matrix()[(j, c)];
            }
        }
        for i in 0..k {
            centers[i] = sums[i].iter().map(|s| s / counts[i] as f64).collect();
        }
    }
    labels
}

/// Moves the point farthest from its center into each empty cluster.
fn fill_empty(data: &DataMatrix, k: usize, centers: &[Vec<f64>], labels: &mut [usize]) {
    loop {
        let mut counts = vec![0usize; k];
        for &l in labels.iter() {
            counts[l] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let far = (0..labels.len())
            .filter(|&j| counts[labels[j]] > 1)
            .max_by(|&a, &b| {
                sq_dist(data, a, &centers[labels[a]]).total_cmp(&sq_dist(data, b, &centers[labels[b]]))
            })
            .expect("n >= k guarantees a donor cluster");
        labels[far] = empty;
    }
}
