//! Plug-in connectivity estimate `Γ̂`, the block reconstruction `Q̂(S)` and the
//! cost `c(S) = ‖A_S − Q̂(S)‖`.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSubset};
use crate::seeds;
use crate::spectral::{self, SpectralConfig};

/// Disjoint non-empty parts `S_1..S_K` of a node subset `S`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionedSubset {
    union: NodeSubset,
    /// Part of `union[i]`.
    labels: Vec<usize>,
    k: usize,
}

impl PartitionedSubset {
    pub fn new(parts: Vec<NodeSubset>) -> Result<Self> {
        let k = parts.len();
        if k == 0 {
            return Err(Error::InvalidInput("a partition needs at least one part".into()));
        }
        let mut tagged: Vec<(usize, usize)> = Vec::new();
        for (c, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(Error::InvalidInput(format!("part {c} is empty")));
            }
            tagged.extend(part.iter().map(|&i| (i, c)));
        }
        tagged.sort_unstable();
        if tagged.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("parts are not disjoint".into()));
        }
        let (nodes, labels) = tagged.into_iter().unzip();
        Ok(PartitionedSubset {
            union: NodeSubset::from_sorted(nodes),
            labels,
            k,
        })
    }

    /// Partition of `union` where `labels[i]` is the part of `union[i]`.
    pub fn from_labels(union: NodeSubset, labels: Vec<usize>, k: usize) -> Result<Self> {
        if labels.len() != union.len() {
            return Err(Error::InvalidInput("one label per node required".into()));
        }
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidInput(format!("label {l} not below k = {k}")));
            }
            sizes[l] += 1;
        }
        if let Some(c) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("part {c} is empty")));
        }
        Ok(PartitionedSubset { union, labels, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn union(&self) -> &NodeSubset {
        &self.union
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn parts(&self) -> Vec<NodeSubset> {
        let mut parts = vec![Vec::new(); self.k];
        for (&i, &l) in self.union.iter().zip(&self.labels) {
            parts[l].push(i);
        }
        parts.into_iter().map(NodeSubset::from_sorted).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// One-hot `|S| × K` matrix `𝐒`.
    pub fn membership(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.union.len(), self.k));
        for (i, &l) in self.labels.iter().enumerate() {
            m[[i, l]] = 1.0;
        }
        m
    }
}

/// Estimated `K × K` connectivities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GammaHat(pub Vec<Vec<f64>>);

impl GammaHat {
    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[a][b]
    }

    pub fn to_array(&self) -> Array2<f64> {
        let k = self.k();
        Array2::from_shape_fn((k, k), |(a, b)| self.0[a][b])
    }
}

/// Denominator used for same-block averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalNormalization {
    /// `|S_k|²`: the zero diagonal of `A` is averaged in.
    #[default]
    Literal,
    /// `|S_k|(|S_k| − 1)`.
    Unbiased,
}

pub fn estimate_gamma(g: &Graph, p: &PartitionedSubset) -> Result<GammaHat> {
    estimate_gamma_with(g, p, DiagonalNormalization::Literal)
}

pub fn estimate_gamma_with(g: &Graph, p: &PartitionedSubset, norm: DiagonalNormalization) -> Result<GammaHat> {
    p.union.check_bounds(g.n())?;
    let mut adj = Vec::new();
    g.induced_dense_into(p.union.as_slice(), &mut adj);
    Ok(gamma_from_dense(&adj, &p.labels, p.k, norm))
}

/// `Γ̂` from a dense row-major induced adjacency and per-row labels. Every
/// part must be non-empty.
pub(crate) fn gamma_from_dense(adj: &[f64], labels: &[usize], k: usize, norm: DiagonalNormalization) -> GammaHat {
    let n = labels.len();
    let mut sums = vec![0.0; k * k];
    for i in 0..n {
        let li = labels[i];
        let row = &adj[i * n..(i + 1) * n];
        for (j, &a) in row.iter().enumerate() {
            if a != 0.0 {
                sums[li * k + labels[j]] += a;
            }
        }
    }
    let mut sizes = vec![0.0_f64; k];
    for &l in labels {
        sizes[l] += 1.0;
    }
    let values = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    let denom = if a == b && norm == DiagonalNormalization::Unbiased {
                        sizes[a] * (sizes[a] - 1.0)
                    } else {
                        sizes[a] * sizes[b]
                    };
                    if denom > 0.0 {
                        sums[a * k + b] / denom
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    GammaHat(values)
}

/// `Q̂(S) = 𝐒 Γ̂ 𝐒ᵗ`, diagonal included.
pub fn q_hat(p: &PartitionedSubset, gh: &GammaHat) -> Result<Array2<f64>> {
    if gh.k() != p.k {
        return Err(Error::InvalidInput(format!(
            "Γ̂ is {0}×{0} but the partition has {1} parts",
            gh.k(),
            p.k
        )));
    }
    let n = p.labels.len();
    Ok(Array2::from_shape_fn((n, n), |(i, j)| gh.get(p.labels[i], p.labels[j])))
}

/// One cost evaluation of a node subset.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `+∞` when clustering left a part empty.
    pub cost: f64,
    pub subset: NodeSubset,
    /// Cluster of `subset[i]`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub gamma_hat: Option<GammaHat>,
}

impl Evaluation {
    pub fn is_degenerate(&self) -> bool {
        self.gamma_hat.is_none()
    }

    pub fn partition(&self) -> Option<PartitionedSubset> {
        PartitionedSubset::from_labels(self.subset.clone(), self.labels.clone(), self.k).ok()
    }
}

/// Cost evaluation plus the residual's top eigenvector (entries aligned with
/// the subset).
#[derive(Debug, Clone)]
pub struct DetailedEvaluation {
    pub eval: Evaluation,
    pub top_vector: Vec<f64>,
}

/// Evaluates `c(S)` for one graph and run seed, caching by the exact sorted
/// index set. The clustering seed is a hash of (run seed, S), so each cost is
/// a deterministic function of S and caching never changes results.
pub struct CostEvaluator<'g> {
    graph: &'g Graph,
    k: usize,
    run_seed: u64,
    cfg: SpectralConfig,
    cache: HashMap<Vec<usize>, Rc<Evaluation>>,
    cache_capacity: usize,
    evaluations: usize,
    hits: usize,
    adj: Vec<f64>,
}

impl<'g> CostEvaluator<'g> {
    pub fn new(graph: &'g Graph, k: usize, run_seed: u64, cfg: SpectralConfig) -> Self {
        CostEvaluator {
            graph,
            k,
            run_seed,
            cfg,
            cache: HashMap::new(),
            cache_capacity: 1 << 16,
            evaluations: 0,
            hits: 0,
            adj: Vec::new(),
        }
    }

    /// Entries beyond this count flush the cache.
    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache_capacity = capacity;
        self
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn spectral_config(&self) -> &SpectralConfig {
        &self.cfg
    }

    /// Fresh (uncached) cost computations so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn cache_hits(&self) -> usize {
        self.hits
    }

    pub fn cost(&mut self, s: &NodeSubset) -> Result<Rc<Evaluation>> {
        if let Some(hit) = self.cache.get(s.as_slice()) {
            self.hits += 1;
            return Ok(Rc::clone(hit));
        }
        let eval = Rc::new(self.compute(s)?.eval);
        if self.cache.len() >= self.cache_capacity {
            self.cache.clear();
        }
        self.cache.insert(s.as_slice().to_vec(), Rc::clone(&eval));
        Ok(eval)
    }

    /// Uncached evaluation that also returns the residual's top eigenvector.
    pub fn cost_detailed(&mut self, s: &NodeSubset) -> Result<DetailedEvaluation> {
        self.compute(s)
    }

    fn compute(&mut self, s: &NodeSubset) -> Result<DetailedEvaluation> {
        s.check_bounds(self.graph.n())?;
        let n = s.len();
        if n < self.k {
            return Err(Error::InvalidInput(format!(
                "subset of {n} nodes cannot hold {} clusters",
                self.k
            )));
        }
        self.evaluations += 1;
        let seed = seeds::subset_seed(self.run_seed, s.as_slice());
        self.graph.induced_dense_into(s.as_slice(), &mut self.adj);
        let degenerate = |labels: Vec<usize>| DetailedEvaluation {
            eval: Evaluation {
                cost: f64::INFINITY,
                subset: s.clone(),
                labels,
                k: self.k,
                gamma_hat: None,
            },
            top_vector: Vec::new(),
        };
        let labels = match spectral::cluster_adjacency(&self.adj, n, self.k, seed, &self.cfg) {
            Ok(l) => l,
            Err(Error::DegenerateSpectrum { .. }) => return Ok(degenerate(vec![0; n])),
            Err(e) => return Err(e),
        };
        if labels.is_degenerate() {
            return Ok(degenerate(labels.labels));
        }
        let labels = labels.labels;
        let gh = gamma_from_dense(&self.adj, &labels, self.k, DiagonalNormalization::Literal);
        // Residual A_S − Q̂(S) in place.
        for i in 0..n {
            let gi = &gh.0[labels[i]];
            let row = &mut self.adj[i * n..(i + 1) * n];
            for (j, a) in row.iter_mut().enumerate() {
                *a -= gi[labels[j]];
            }
        }
        let norm = spectral::spectral_norm_dense(&self.adj, n, seeds::splitmix64(seed), &self.cfg);
        Ok(DetailedEvaluation {
            eval: Evaluation {
                cost: norm.norm,
                subset: s.clone(),
                labels,
                k: self.k,
                gamma_hat: Some(gh),
            },
            top_vector: norm.vector,
        })
    }
}

/// One-off `c(S)` with a fresh evaluator.
pub fn cost(g: &Graph, s: &NodeSubset, k: usize, seed: u64) -> Result<Evaluation> {
    let mut ev = CostEvaluator::new(g, k, seed, SpectralConfig::default());
    Ok(ev.cost_detailed(s)?.eval)
}
