//! Normalized Laplacian, spectral embedding, spectral clustering and the
//! spectral norm.

pub mod eigen;
pub mod kmeans;

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
pub use eigen::{EigenPairs, LanczosConfig, Target};
pub use kmeans::{KMeansConfig, KMeansResult};

/// Knobs shared by every spectral computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Matrices up to this size are decomposed densely; larger ones go
    /// through Lanczos with the Laplacian null space deflated.
    pub dense_cutoff: usize,
    /// Relative residual tolerance for Laplacian eigenvectors.
    pub embedding_tol: f64,
    /// Relative residual tolerance for the spectral norm.
    pub norm_tol: f64,
    /// Eigenvalues below `zero_threshold * λ_max` count as zero on the
    /// dense route.
    pub zero_threshold: f64,
    /// Scale embedding rows to unit length before k-means.
    pub row_normalize: bool,
    pub kmeans: KMeansConfig,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig {
            dense_cutoff: 64,
            embedding_tol: 1e-6,
            norm_tol: 1e-8,
            zero_threshold: 1e-8,
            row_normalize: false,
            kmeans: KMeansConfig::default(),
        }
    }
}

/// Symmetric normalized Laplacian together with the degrees that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub matrix: Array2<f64>,
    pub degrees: Vec<f64>,
}

/// `L_ii = 1` for non-isolated `i`, `L_ij = -1/sqrt(d_i d_j)` on edges, `0`
/// elsewhere.
pub fn normalized_laplacian(g: &Graph) -> Laplacian {
    let n = g.n();
    let mut adj = Vec::new();
    g.induced_dense_into(&(0..n).collect::<Vec<_>>(), &mut adj);
    let (data, degrees) = laplacian_from_adjacency(&adj, n);
    Laplacian {
        matrix: Array2::from_shape_vec((n, n), data).expect("square"),
        degrees,
    }
}

/// Row-major normalized Laplacian of a dense 0/1 adjacency.
pub(crate) fn laplacian_from_adjacency(adj: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let degrees: Vec<f64> = adj.chunks_exact(n.max(1)).take(n).map(|r| r.iter().sum()).collect();
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        let row = &adj[i * n..(i + 1) * n];
        let out = &mut l[i * n..(i + 1) * n];
        for j in 0..n {
            if row[j] != 0.0 {
                out[j] = -row[j] * inv_sqrt[i] * inv_sqrt[j];
            }
        }
        if degrees[i] > 0.0 {
            out[i] = 1.0;
        }
    }
    (l, degrees)
}

/// Connected components of the graph whose edges are the non-zero
/// off-diagonal entries of a dense symmetric matrix.
fn dense_components(m: &[f64], n: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut comp = vec![root];
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let row = &m[u * n..(u + 1) * n];
            for v in 0..n {
                if v != u && row[v] != 0.0 && !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Eigenvalues and `n × k` eigenvector matrix of the `k` smallest non-zero
/// Laplacian eigenvalues.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

pub fn smallest_nonzero_eigvecs(l: &Laplacian, k: usize, seed: u64, cfg: &SpectralConfig) -> Result<Embedding> {
    let n = l.degrees.len();
    let data = l.matrix.as_standard_layout();
    let pairs = smallest_nonzero_impl(data.as_slice().expect("contiguous"), &l.degrees, n, k, seed, cfg, None)?;
    let mut vectors = Array2::zeros((n, k));
    for j in 0..k {
        for (i, &x) in pairs.vector(j).iter().enumerate() {
            vectors[[i, j]] = x;
        }
    }
    Ok(Embedding {
        values: pairs.values,
        vectors,
    })
}

pub(crate) fn smallest_nonzero_impl(
    lap: &[f64],
    degrees: &[f64],
    n: usize,
    k: usize,
    seed: u64,
    cfg: &SpectralConfig,
    comps: Option<&[Vec<usize>]>,
) -> Result<EigenPairs> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut pairs = if n <= cfg.dense_cutoff {
        let full = eigen::dense_symmetric_eigen(lap, n);
        let lmax = full.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let cut = cfg.zero_threshold * lmax;
        let keep: Vec<usize> = (0..n).filter(|&j| full.values[j] > cut).take(k).collect();
        if keep.len() < k {
            let available = (0..n).filter(|&j| full.values[j] > cut).count();
            return Err(Error::DegenerateSpectrum {
                requested: k,
                available,
            });
        }
        let mut vectors = Vec::with_capacity(n * k);
        for &j in &keep {
            vectors.extend_from_slice(full.vector(j));
        }
        EigenPairs {
            values: keep.iter().map(|&j| full.values[j]).collect(),
            vectors,
            n,
        }
    } else {
        let owned;
        let comps = match comps {
            Some(c) => c,
            None => {
                owned = dense_components(lap, n);
                &owned
            }
        };
        let available = n - comps.len();
        if k > available {
            return Err(Error::DegenerateSpectrum {
                requested: k,
                available,
            });
        }
        // Null space: D^{1/2} 1_C per component (e_i for isolated nodes).
        let mut null = vec![0.0; n * comps.len()];
        for (c, comp) in comps.iter().enumerate() {
            let col = &mut null[c * n..(c + 1) * n];
            let isolated = comp.len() == 1 && degrees[comp[0]] == 0.0;
            for &i in comp {
                col[i] = if isolated { 1.0 } else { degrees[i].sqrt() };
            }
            let nrm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            col.iter_mut().for_each(|x| *x /= nrm);
        }
        let apply = |x: &[f64], y: &mut [f64]| dense_matvec(lap, n, x, y);
        let lcfg = LanczosConfig {
            tol: cfg.embedding_tol,
            ..LanczosConfig::default()
        };
        eigen::lanczos(apply, n, &null, Target::Smallest(k), &lcfg, seed)
    };
    eigen::canonicalize_signs(&mut pairs.vectors, n);
    Ok(pairs)
}

#[inline]
pub(crate) fn dense_matvec(a: &[f64], n: usize, x: &[f64], y: &mut [f64]) {
    for (yi, row) in y.iter_mut().zip(a.chunks_exact(n)) {
        *yi = eigen::dot(row, x);
    }
}

/// Row-major embedding used by spectral clustering.
///
/// On a connected graph this is the `k` eigenvectors of the smallest
/// non-zero eigenvalues. On a disconnected graph only the global trivial
/// direction `D^{1/2} 1` is dropped: the rest of the null space separates
/// components and comes first, topped up with non-zero eigenvectors when it
/// has fewer than `k` dimensions.
fn clustering_embedding(
    lap: &[f64],
    degrees: &[f64],
    n: usize,
    k: usize,
    seed: u64,
    cfg: &SpectralConfig,
) -> Result<(Vec<f64>, usize)> {
    let comps = dense_components(lap, n);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if comps.len() > 1 {
        let trivial_norm = degrees.iter().sum::<f64>().sqrt();
        let trivial: Vec<f64> = degrees
            .iter()
            .map(|&d| {
                if trivial_norm > 0.0 {
                    d.sqrt() / trivial_norm
                } else {
                    0.0
                }
            })
            .collect();
        for comp in &comps {
            let isolated = comp.len() == 1 && degrees[comp[0]] == 0.0;
            let mut u = vec![0.0; n];
            for &i in comp {
                u[i] = if isolated { 1.0 } else { degrees[i].sqrt() };
            }
            for _ in 0..2 {
                let t_dot: f64 = u.iter().zip(&trivial).map(|(a, b)| a * b).sum();
                u.iter_mut().zip(&trivial).for_each(|(x, t)| *x -= t_dot * t);
                for c in &columns {
                    let d: f64 = u.iter().zip(c).map(|(a, b)| a * b).sum();
                    u.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
                }
            }
            let nrm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 1e-8 {
                u.iter_mut().for_each(|x| *x /= nrm);
                columns.push(u);
            }
        }
    }
    if columns.len() < k {
        let extra = k - columns.len();
        let pairs = smallest_nonzero_impl(lap, degrees, n, extra, seed, cfg, Some(&comps))?;
        for j in 0..extra {
            columns.push(pairs.vector(j).to_vec());
        }
    }
    let dim = columns.len();
    let mut points = vec![0.0; n * dim];
    for (j, col) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            points[i * dim + j] = x;
        }
    }
    Ok((points, dim))
}

/// Estimated partition; labels are `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterLabels {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// True when some cluster is empty.
    pub fn is_degenerate(&self) -> bool {
        self.sizes().contains(&0)
    }
}

/// k-means on the rows of the Laplacian embedding of `g`.
pub fn spectral_clustering(g: &Graph, k: usize, seed: u64, cfg: &SpectralConfig) -> Result<ClusterLabels> {
    let n = g.n();
    let mut adj = Vec::new();
    g.induced_dense_into(&(0..n).collect::<Vec<_>>(), &mut adj);
    cluster_adjacency(&adj, n, k, seed, cfg)
}

/// Spectral clustering of a dense row-major 0/1 adjacency matrix.
pub(crate) fn cluster_adjacency(
    adj: &[f64],
    n: usize,
    k: usize,
    seed: u64,
    cfg: &SpectralConfig,
) -> Result<ClusterLabels> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot form {k} clusters from {n} nodes")));
    }
    if k == 1 {
        return Ok(ClusterLabels { labels: vec![0; n], k });
    }
    let (lap, degrees) = laplacian_from_adjacency(adj, n);
    let (mut points, dim) = clustering_embedding(&lap, &degrees, n, k, seed, cfg)?;
    if cfg.row_normalize {
        for row in points.chunks_exact_mut(dim) {
            let nrm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm > 0.0 {
                row.iter_mut().for_each(|x| *x /= nrm);
            }
        }
    }
    let res = kmeans::kmeans(&points, dim, k, seed ^ 0x6b6d_6561_6e73, &cfg.kmeans);
    Ok(ClusterLabels { labels: res.labels, k })
}

/// Largest absolute eigenvalue of a symmetric matrix and a unit eigenvector
/// for it.
#[derive(Debug, Clone)]
pub struct SpectralNorm {
    pub norm: f64,
    /// Signed eigenvalue attaining the norm.
    pub eigenvalue: f64,
    pub vector: Vec<f64>,
}

pub fn spectral_norm(m: &Array2<f64>, seed: u64, cfg: &SpectralConfig) -> Result<SpectralNorm> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::InvalidInput(format!("matrix is {rows}×{cols}, not square")));
    }
    let scale = m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    for i in 0..rows {
        for j in (i + 1)..rows {
            if (m[[i, j]] - m[[j, i]]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidInput(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    let data = m.as_standard_layout();
    Ok(spectral_norm_dense(
        data.as_slice().expect("contiguous"),
        rows,
        seed,
        cfg,
    ))
}

pub(crate) fn spectral_norm_dense(a: &[f64], n: usize, seed: u64, cfg: &SpectralConfig) -> SpectralNorm {
    if n == 0 {
        return SpectralNorm {
            norm: 0.0,
            eigenvalue: 0.0,
            vector: Vec::new(),
        };
    }
    let lcfg = LanczosConfig {
        tol: cfg.norm_tol,
        ..LanczosConfig::default()
    };
    let apply = |x: &[f64], y: &mut [f64]| dense_matvec(a, n, x, y);
    let mut pairs = eigen::lanczos(apply, n, &[], Target::LargestMagnitude(1), &lcfg, seed);
    eigen::canonicalize_signs(&mut pairs.vectors, n);
    let eigenvalue = pairs.values[0];
    SpectralNorm {
        norm: eigenvalue.abs(),
        eigenvalue,
        vector: pairs.vectors,
    }
}
