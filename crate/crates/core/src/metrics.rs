//! Ground-truth evaluation: label alignment, estimation error, outlier counts
//! and the empirical error bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{q_hat, Evaluation, GammaHat, PartitionedSubset};
use crate::graph::NodeSubset;
use crate::sbm::{expected_adjacency, CommunityAssignment, SbmSample};
use crate::spectral::{self, SpectralConfig};
use crate::trace::{Annotation, TraceAnnotator};

/// Largest `k` aligned by exhaustive search over permutations.
pub const BRUTE_FORCE_MAX_K: usize = 8;

/// `overlap[t][e] = |Ω_t ∩ S_e|`.
pub fn overlap_matrix(est: &PartitionedSubset, truth: &CommunityAssignment) -> Result<Vec<Vec<usize>>> {
    if est.k() != truth.k {
        return Err(Error::InvalidInput(format!(
            "estimated partition has {} parts, truth has {}",
            est.k(),
            truth.k
        )));
    }
    est.union().check_bounds(truth.n())?;
    let mut o = vec![vec![0usize; est.k()]; truth.k];
    for (&node, &label) in est.union().iter().zip(est.labels()) {
        o[truth.z[node]][label] += 1;
    }
    Ok(o)
}

/// Permutation `σ` (true community → estimated part) maximizing
/// `Σ_k |S_σ(k) ∩ Ω_k|`.
pub fn align_labels(est: &PartitionedSubset, truth: &CommunityAssignment) -> Result<Vec<usize>> {
    let o = overlap_matrix(est, truth)?;
    let w: Vec<Vec<f64>> = o.iter().map(|r| r.iter().map(|&x| x as f64).collect()).collect();
    Ok(if w.len() <= BRUTE_FORCE_MAX_K {
        max_assignment_brute_force(&w)
    } else {
        max_assignment_hungarian(&w)
    })
}

/// Exhaustive maximum-weight assignment; the first maximizer in
/// lexicographic order wins.
pub fn max_assignment_brute_force(w: &[Vec<f64>]) -> Vec<usize> {
    let k = w.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = perm.clone();
    let mut best_val = f64::NEG_INFINITY;
    loop {
        let val: f64 = perm.iter().enumerate().map(|(t, &e)| w[t][e]).sum();
        if val > best_val {
            best_val = val;
            best.clone_from(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    best
}

fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Maximum-weight assignment on a square matrix by the Hungarian method with
/// potentials, `O(k³)`.
pub fn max_assignment_hungarian(w: &[Vec<f64>]) -> Vec<usize> {
    let k = w.len();
    if k == 0 {
        return Vec::new();
    }
    // Minimize the negated weights; 1-based arrays with a virtual column 0.
    let cost = |r: usize, c: usize| -w[r - 1][c - 1];
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut row_of = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for r in 1..=k {
        row_of[0] = r;
        let mut col = 0usize;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[col] = true;
            let r0 = row_of[col];
            let mut delta = f64::INFINITY;
            let mut next = 0usize;
            for c in 1..=k {
                if used[c] {
                    continue;
                }
                let cur = cost(r0, c) - u[r0] - v[c];
                if cur < minv[c] {
                    minv[c] = cur;
                    way[c] = col;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    next = c;
                }
            }
            for c in 0..=k {
                if used[c] {
                    u[row_of[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col = next;
            if row_of[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            row_of[col] = row_of[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; k];
    for c in 1..=k {
        assign[row_of[c] - 1] = c - 1;
    }
    assign
}

/// `Σ_{k ≤ l} |Γ_kl − Γ̂_σ(k)σ(l)|`.
pub fn estimation_error(gamma_true: &[Vec<f64>], gamma_hat: &GammaHat, sigma: &[usize]) -> Result<f64> {
    let k = gamma_true.len();
    if gamma_hat.k() != k || sigma.len() != k {
        return Err(Error::InvalidInput("shapes of Γ, Γ̂ and σ differ".into()));
    }
    let mut err = 0.0;
    for a in 0..k {
        for b in a..k {
            err += (gamma_true[a][b] - gamma_hat.get(sigma[a], sigma[b])).abs();
        }
    }
    Ok(err)
}

/// Ground-truth evaluation of one estimate, including every term of the
/// error bound `K² / min_k |S_k ∩ Ω_k ∩ F| · (max_k Γ_kk + ‖A_F − E[A]_F‖ + ‖A_S − Q̂(S)‖)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub estimation_error: f64,
    /// `alignment[k]` is the estimated part matched to true community `k`.
    pub alignment: Vec<usize>,
    pub subset_size: usize,
    pub outliers_in_s: usize,
    /// `|S_σ(k) ∩ Ω_k ∩ F|` per true community.
    pub overlaps: Vec<usize>,
    pub min_overlap: usize,
    pub cost: f64,
    pub max_gamma_diag: f64,
    pub noise_norm: f64,
    /// `None` when `min_overlap == 0`.
    pub cost_to_overlap: Option<f64>,
    pub bound_rhs: Option<f64>,
    pub bound_holds: bool,
}

impl EvalReport {
    pub fn is_vacuous(&self) -> bool {
        self.min_overlap == 0
    }
}

/// `‖A_F − E[A]_F‖` for the sample's inlier set.
pub fn inlier_noise_norm(sample: &SbmSample, cfg: &SpectralConfig) -> Result<f64> {
    let f = &sample.inliers;
    if f.is_empty() {
        return Ok(0.0);
    }
    let a = sample.graph.restrict(f, f)?;
    let e = expected_adjacency(&sample.params, &sample.assignment);
    let ef = ndarray::Array2::from_shape_fn((f.len(), f.len()), |(i, j)| e[[f[i], f[j]]]);
    Ok(spectral::spectral_norm(&(a - ef), 0, cfg)?.norm)
}

pub fn bound_check(sample: &SbmSample, p: &PartitionedSubset, gh: &GammaHat) -> Result<EvalReport> {
    let cfg = SpectralConfig::default();
    let noise = inlier_noise_norm(sample, &cfg)?;
    bound_check_with_noise(sample, p, gh, noise, &cfg)
}

/// [`bound_check`] with a precomputed `‖A_F − E[A]_F‖`.
pub fn bound_check_with_noise(
    sample: &SbmSample,
    p: &PartitionedSubset,
    gh: &GammaHat,
    noise_norm: f64,
    cfg: &SpectralConfig,
) -> Result<EvalReport> {
    let k = sample.params.k;
    let sigma = align_labels(p, &sample.assignment)?;
    let err = estimation_error(&sample.params.gamma, gh, &sigma)?;
    let s = p.union();
    let a = sample.graph.restrict(s, s)?;
    let cost = spectral::spectral_norm(&(a - q_hat(p, gh)?), 0, cfg)?.norm;

    let inlier = sample.inliers.mask(sample.n());
    let mut overlaps = vec![0usize; k];
    for (&node, &label) in s.iter().zip(p.labels()) {
        let t = sample.assignment.z[node];
        if inlier[node] && sigma[t] == label {
            overlaps[t] += 1;
        }
    }
    let min_overlap = overlaps.iter().copied().min().unwrap_or(0);
    let max_gamma_diag = (0..k).map(|c| sample.params.gamma[c][c]).fold(0.0, f64::max);
    let (cost_to_overlap, bound_rhs) = if min_overlap > 0 {
        let m = min_overlap as f64;
        (
            Some(cost / m),
            Some((k * k) as f64 / m * (max_gamma_diag + noise_norm + cost)),
        )
    } else {
        (None, None)
    };
    Ok(EvalReport {
        estimation_error: err,
        alignment: sigma,
        subset_size: s.len(),
        outliers_in_s: s.intersection_len(&sample.outliers),
        overlaps,
        min_overlap,
        cost,
        max_gamma_diag,
        noise_norm,
        cost_to_overlap,
        bound_rhs,
        bound_holds: bound_rhs.is_none_or(|rhs| err <= rhs),
    })
}

/// Aligned estimation error of a partition and its `Γ̂`.
pub fn aligned_error(sample: &SbmSample, p: &PartitionedSubset, gh: &GammaHat) -> Result<f64> {
    let sigma = align_labels(p, &sample.assignment)?;
    estimation_error(&sample.params.gamma, gh, &sigma)
}

/// Number of the sample's outliers inside `s`.
pub fn outliers_in(sample: &SbmSample, s: &NodeSubset) -> usize {
    s.intersection_len(&sample.outliers)
}

/// Fills trace ground-truth columns from a synthetic sample.
pub struct GroundTruth<'a> {
    pub sample: &'a SbmSample,
}

impl TraceAnnotator for GroundTruth<'_> {
    fn annotate(&self, eval: &Evaluation) -> Annotation {
        let error = match (eval.partition(), eval.gamma_hat.as_ref()) {
            (Some(p), Some(gh)) => aligned_error(self.sample, &p, gh).ok(),
            _ => None,
        };
        Annotation {
            estimation_error: error,
            outliers_in_s: Some(outliers_in(self.sample, &eval.subset)),
        }
    }
}
