//! Lloyd's k-means with greedy k-means++ seeding and restarts.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    /// Lloyd stops once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 10,
            max_iter: 300,
            tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// Cluster of each point, numbered by first appearance.
    pub labels: Vec<usize>,
    /// Row-major `k × dim`.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squares.
    pub wcss: f64,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the rows of `points` (row-major `n × dim`) into `k` groups.
/// Returns the best of `cfg.restarts` runs by within-cluster sum of squares.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, cfg: &KMeansConfig) -> KMeansResult {
    let n = if dim == 0 { 0 } else { points.len() / dim };
    assert!(k >= 1 && k <= n.max(1), "k-means needs 1 <= k <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts.max(1) {
        let run = lloyd(points, n, dim, k, cfg, &mut rng);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    relabel_by_first_appearance(&mut best, k, dim);
    best
}

fn relabel_by_first_appearance(res: &mut KMeansResult, k: usize, dim: usize) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &res.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut().filter(|m| **m == usize::MAX) {
        *m = next;
        next += 1;
    }
    for l in res.labels.iter_mut() {
        *l = map[*l];
    }
    let old = res.centroids.clone();
    for c in 0..k {
        res.centroids[map[c] * dim..(map[c] + 1) * dim].copy_from_slice(&old[c * dim..(c + 1) * dim]);
    }
}

/// Greedy k-means++: each new center is the best of a few D²-sampled
/// candidates by resulting potential.
fn seed_centers(points: &[f64], n: usize, dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let trials = 2 + (k as f64).ln().floor() as usize;
    let mut centers = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(row(first));
    let mut closest: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    let mut chosen = vec![first];

    for _ in 1..k {
        let total: f64 = closest.iter().sum();
        let mut best_idx = usize::MAX;
        let mut best_pot = f64::INFINITY;
        for _ in 0..trials {
            let cand = if total > 0.0 {
                let mut r = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in closest.iter().enumerate() {
                    if r < d {
                        pick = i;
                        break;
                    }
                    r -= d;
                }
                pick
            } else {
                // All remaining mass is zero: fall back to an unused index.
                let unused: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
                *unused.choose(rng).unwrap_or(&0)
            };
            let pot: f64 = (0..n).map(|i| closest[i].min(sq_dist(row(i), row(cand)))).sum();
            if pot < best_pot {
                best_pot = pot;
                best_idx = cand;
            }
        }
        centers.extend_from_slice(row(best_idx));
        chosen.push(best_idx);
        for (i, c) in closest.iter_mut().enumerate() {
            *c = c.min(sq_dist(row(i), row(best_idx)));
        }
    }
    centers
}

fn lloyd(points: &[f64], n: usize, dim: usize, k: usize, cfg: &KMeansConfig, rng: &mut ChaCha8Rng) -> KMeansResult {
    let row = |i: usize| &points[i * dim..(i + 1) * dim];
    let mut centroids = seed_centers(points, n, dim, k, rng);
    let mut labels = vec![0usize; n];
    let mut sums = vec![0.0; k * dim];
    let mut counts = vec![0usize; k];

    for _ in 0..cfg.max_iter {
        for (i, label) in labels.iter_mut().enumerate() {
            *label = nearest(row(i), &centroids, dim).0;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, x) in sums[l * dim..(l + 1) * dim].iter_mut().zip(row(i)) {
                *s += x;
            }
        }
        // Empty clusters take the point farthest from its own centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n).filter(|&i| counts[labels[i]] > 1).max_by(|&a, &b| {
                let da = sq_dist(row(a), &centroids[labels[a] * dim..(labels[a] + 1) * dim]);
                let db = sq_dist(row(b), &centroids[labels[b] * dim..(labels[b] + 1) * dim]);
                da.total_cmp(&db).then(b.cmp(&a))
            });
            if let Some(i) = far {
                let old = labels[i];
                counts[old] -= 1;
                for (s, x) in sums[old * dim..(old + 1) * dim].iter_mut().zip(row(i)) {
                    *s -= x;
                }
                labels[i] = c;
                counts[c] = 1;
                sums[c * dim..(c + 1) * dim].copy_from_slice(row(i));
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let inv = 1.0 / counts[c] as f64;
            let centroid = &mut centroids[c * dim..(c + 1) * dim];
            let mut moved = 0.0;
            for (ctr, s) in centroid.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                let next = s * inv;
                moved += (next - *ctr) * (next - *ctr);
                *ctr = next;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < cfg.tol {
            break;
        }
    }
    for (i, label) in labels.iter_mut().enumerate() {
        *label = nearest(row(i), &centroids, dim).0;
    }
    let wcss = (0..n)
        .map(|i| sq_dist(row(i), &centroids[labels[i] * dim..(labels[i] + 1) * dim]))
        .sum();
    KMeansResult {
        labels,
        centroids,
        wcss,
    }
}

#[inline]
fn nearest(p: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, ctr) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(p, ctr);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}
