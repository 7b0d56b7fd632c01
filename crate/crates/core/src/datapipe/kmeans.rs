use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::numcore::Tensor;
use crate::rng::{self, ChaCha8Rng};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const RESTARTS: u64 = 5;
pub const DEFAULT_ELBOW_THRESHOLD: f64 = 0.10;
pub const DEFAULT_K_MAX: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    pub centroids: Tensor,
    pub inertia: f64,
    /// `(k_candidate, inertia)`; a single entry unless produced by
    /// [`select_k_elbow`].
    pub inertia_curve: Vec<(usize, f64)>,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

/// One cluster's rows, plus their positions in the source dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub indices: Vec<usize>,
    pub dataset: Dataset,
}

#[derive(Debug, Clone)]
struct LloydRun {
    assignments: Vec<usize>,
    centroids: Vec<f64>,
    inertia: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.chunks_exact(d).enumerate() {
        let dist = sq_dist(point, centroid);
        if dist < best.1 {
            best = (c, dist);
        }
    }
    best
}

fn inertia_of(data: &Tensor, assignments: &[usize], centroids: &[f64]) -> f64 {
    let d = data.cols();
    (0..data.rows())
        .map(|i| sq_dist(data.row(i), &centroids[assignments[i] * d..(assignments[i] + 1) * d]))
        .sum()
}

/// k-means++ seeding.
fn plus_plus(data: &Tensor, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = data.rows();
    let d = data.cols();
    let mut centroids = Vec::with_capacity(k * d);
    centroids.extend_from_slice(data.row(rng.gen_range(0..n)));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centroids[..d])).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(data.row(pick));
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(data.row(i), &centroids[start..start + d]));
        }
    }
    centroids
}

/// Moves the point farthest from its centroid in the largest cluster into
/// each empty cluster.
fn repair_empty(data: &Tensor, assignments: &mut [usize], centroids: &mut [f64], k: usize) {
    let d = data.cols();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let largest = (0..k).fold(0, |b, c| if sizes[c] > sizes[b] { c } else { b });
        let mut far = (usize::MAX, -1.0);
        for i in 0..data.rows() {
            if assignments[i] == largest {
                let dist = sq_dist(data.row(i), &centroids[largest * d..(largest + 1) * d]);
                if dist > far.1 {
                    far = (i, dist);
                }
            }
        }
        assignments[far.0] = empty;
        centroids[empty * d..(empty + 1) * d].copy_from_slice(data.row(far.0));
    }
}

fn update_centroids(data: &Tensor, assignments: &[usize], centroids: &mut [f64], k: usize) {
    let d = data.cols();
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for i in 0..data.rows() {
        let c = assignments[i];
        counts[c] += 1;
        for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for j in 0..d {
                centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
            }
        }
    }
}

fn lloyd(data: &Tensor, mut centroids: Vec<f64>, k: usize) -> LloydRun {
    let n = data.rows();
    let d = data.cols();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for i in 0..n {
            let (c, _) = nearest(data.row(i), &centroids, d);
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        repair_empty(data, &mut assignments, &mut centroids, k);
        update_centroids(data, &assignments, &mut centroids, k);
        let inertia = inertia_of(data, &assignments, &centroids);
        if let Some(&prev) = history.last() {
            debug_assert!(inertia <= prev * (1.0 + 1e-12) + 1e-300, "inertia rose {prev} -> {inertia}");
        }
        history.push(inertia);
    }
    let inertia = inertia_of(data, &assignments, &centroids);
    LloydRun {
        assignments,
        centroids,
        inertia,
        history,
    }
}

fn best_of(runs: impl IntoIterator<Item = LloydRun>) -> LloydRun {
    // strict `<` keeps the earliest candidate on ties
    runs.into_iter()
        .reduce(|best, r| if r.inertia < best.inertia { r } else { best })
        .expect("at least one run")
}

fn seeded_runs(data: &Tensor, k: usize, seed: u64) -> Vec<LloydRun> {
    (0..RESTARTS)
        .map(|r| {
            let mut rng = rng::seeded(rng::derive_seed(seed, r));
            lloyd(data, plus_plus(data, k, &mut rng), k)
        })
        .collect()
}

fn check_k(data: &Tensor, k: usize) -> Result<()> {
    if k == 0 || k > data.rows() {
        return Err(Error::arg(format!("k = {k} outside 1..={}", data.rows())));
    }
    Ok(())
}

fn to_result(run: LloydRun, k: usize, d: usize, curve: Vec<(usize, f64)>) -> ClusteringResult {
    ClusteringResult {
        k,
        assignments: run.assignments,
        centroids: Tensor::matrix(k, d, run.centroids).expect("k x d centroids"),
        inertia: run.inertia,
        inertia_curve: curve,
    }
}

/// Lloyd's algorithm with k-means++ seeding, best of [`RESTARTS`] seeded
/// restarts (lowest inertia, earliest restart on ties).
pub fn kmeans(data: &Tensor, k: usize, seed: u64) -> Result<ClusteringResult> {
    check_k(data, k)?;
    let best = best_of(seeded_runs(data, k, seed));
    let inertia = best.inertia;
    Ok(to_result(best, k, data.cols(), vec![(k, inertia)]))
}

/// Runs k-means for `k = 1..=k_max` and returns the clustering at the elbow:
/// the `k` just before the first candidate whose relative inertia improvement
/// `(I[k-1] - I[k]) / I[k-1]` falls below `threshold`, or `k_max` if none
/// does. The returned result carries the whole inertia curve.
///
/// Each `k` also tries a warm start from the previous `k`'s centroids plus
/// the worst-fit point, which makes the curve non-increasing.
pub fn select_k_elbow(data: &Tensor, k_max: usize, threshold: f64, seed: u64) -> Result<ClusteringResult> {
    if k_max < 2 {
        return Err(Error::arg("k_max must be at least 2"));
    }
    if k_max > data.rows() {
        return Err(Error::arg(format!(
            "k_max = {k_max} exceeds sample count {}",
            data.rows()
        )));
    }
    let d = data.cols();
    let mut bests: Vec<LloydRun> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut runs = seeded_runs(data, k, rng::derive_seed(seed, k as u64));
        if let Some(prev) = bests.last() {
            let mut init = prev.centroids.clone();
            let worst = (0..data.rows()).fold((0, -1.0), |acc, i| {
                let a = prev.assignments[i];
                let dist = sq_dist(data.row(i), &prev.centroids[a * d..(a + 1) * d]);
                if dist > acc.1 {
                    (i, dist)
                } else {
                    acc
                }
            });
            init.extend_from_slice(data.row(worst.0));
            runs.push(lloyd(data, init, k));
        }
        bests.push(best_of(runs));
    }
    let curve: Vec<(usize, f64)> = bests.iter().enumerate().map(|(i, r)| (i + 1, r.inertia)).collect();
    let mut chosen = k_max;
    for k in 2..=k_max {
        let prev = curve[k - 2].1;
        let improvement = if prev > 0.0 { (prev - curve[k - 1].1) / prev } else { 0.0 };
        if improvement < threshold {
            chosen = k - 1;
            break;
        }
    }
    let run = bests.swap_remove(chosen - 1);
    Ok(to_result(run, chosen, d, curve))
}

/// Splits `dataset` into one dataset per cluster, preserving row order.
pub fn partition(dataset: &Dataset, clustering: &ClusteringResult) -> Result<Vec<Partition>> {
    if clustering.assignments.len() != dataset.n_samples() {
        return Err(Error::LengthMismatch {
            left: dataset.n_samples(),
            right: clustering.assignments.len(),
        });
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); clustering.k];
    for (i, &a) in clustering.assignments.iter().enumerate() {
        if a >= clustering.k {
            return Err(Error::arg(format!("assignment {a} out of range for k = {}", clustering.k)));
        }
        groups[a].push(i);
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(Error::arg("clustering has an empty cluster"));
    }
    Ok(groups
        .into_iter()
        .map(|indices| Partition {
            dataset: dataset.subset(&indices),
            indices,
        })
        .collect())
}
