//! Comparison methods: the inlier oracle, degree pruning and eigenvector
//! filtering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate_gamma, CostEvaluator, Evaluation, GammaHat, PartitionedSubset};
use crate::graph::{Graph, NodeSubset};
use crate::sbm::SbmSample;
use crate::seeds;
use crate::spectral::{self, SpectralConfig};
use crate::trace::{Annotation, RunTrace, TraceAnnotator, TraceRow};

/// The inlier set partitioned by the true labels.
pub fn oracle_partition(sample: &SbmSample) -> Result<PartitionedSubset> {
    let k = sample.params.k;
    let mut parts = vec![Vec::new(); k];
    for &i in sample.inliers.iter() {
        parts[sample.assignment.z[i]].push(i);
    }
    let parts = parts.into_iter().map(NodeSubset::new).collect::<Result<Vec<_>>>()?;
    PartitionedSubset::new(parts)
}

/// `Γ̂` from the inliers with their true labels.
pub fn oracle_estimate(sample: &SbmSample) -> Result<GammaHat> {
    estimate_gamma(&sample.graph, &oracle_partition(sample)?)
}

/// How `num_to_prune` is split within each cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneQuota {
    /// `⌈num/(2K)⌉` highest plus `⌈num/(2K)⌉` lowest degrees per cluster.
    #[default]
    HalfEach,
    /// `⌈num/K⌉` highest plus `⌈num/K⌉` lowest degrees per cluster.
    FullEach,
}

impl PruneQuota {
    pub fn per_side(self, num_to_prune: usize, k: usize) -> usize {
        match self {
            PruneQuota::HalfEach => num_to_prune.div_ceil(2 * k),
            PruneQuota::FullEach => num_to_prune.div_ceil(k),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PruningResult {
    pub kept: NodeSubset,
    pub removed: NodeSubset,
    /// Isolated nodes dropped after the degree cut.
    pub isolated: NodeSubset,
    /// Reclustering, `Γ̂` and cost on the kept nodes.
    pub eval: Evaluation,
}

/// Cluster, drop the extreme-degree nodes of each cluster and any nodes left
/// isolated, then recluster the remainder.
pub fn pruning(
    g: &Graph,
    k: usize,
    num_to_prune: usize,
    seed: u64,
    quota: PruneQuota,
    cfg: &SpectralConfig,
) -> Result<PruningResult> {
    let n = g.n();
    if num_to_prune >= n {
        return Err(Error::InvalidInput(format!("cannot prune {num_to_prune} of {n} nodes")));
    }
    let labels = spectral::spectral_clustering(g, k, seeds::derive(seed, &[seeds::tag("cluster")]), cfg)?;
    let degrees = g.degrees();
    let per_side = quota.per_side(num_to_prune, k);
    let mut removed = vec![false; n];
    for c in 0..k {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels.labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if 2 * per_side >= members.len() {
            let keep = members[members.len() / 2];
            log::warn!(
                "cluster {c} has {} nodes, fewer than its removal quota; keeping node {keep} only",
                members.len()
            );
            members.iter().filter(|&&i| i != keep).for_each(|&i| removed[i] = true);
            continue;
        }
        // Highest degrees first, then the lowest among the rest; ties go to
        // the smaller index.
        members.sort_by_key(|&i| (std::cmp::Reverse(degrees[i]), i));
        let high: Vec<usize> = members.drain(..per_side).collect();
        members.sort_by_key(|&i| (degrees[i], i));
        for i in high.into_iter().chain(members.into_iter().take(per_side)) {
            removed[i] = true;
        }
    }
    let survivors: Vec<usize> = (0..n).filter(|&i| !removed[i]).collect();
    let mut isolated = Vec::new();
    let mut kept = Vec::new();
    for &i in &survivors {
        if g.neighbors(i).iter().any(|&j| !removed[j]) {
            kept.push(i);
        } else {
            isolated.push(i);
        }
    }
    let kept = NodeSubset::new(kept)?;
    if kept.len() < k {
        return Err(Error::InvalidInput(format!(
            "pruning left {} nodes, fewer than k = {k}",
            kept.len()
        )));
    }
    let mut ev = CostEvaluator::new(g, k, seeds::derive(seed, &[seeds::tag("cost")]), *cfg);
    let eval = ev.cost_detailed(&kept)?.eval;
    Ok(PruningResult {
        kept,
        removed: NodeSubset::new((0..n).filter(|&i| removed[i]).collect())?,
        isolated: NodeSubset::new(isolated)?,
        eval,
    })
}

#[derive(Debug, Clone)]
pub struct FilteringResult {
    /// Minimum-cost iterate along the trajectory.
    pub best: Evaluation,
    /// Step at which `best` was reached.
    pub best_step: usize,
    /// One row per iterate, `max_removals + 1` in total.
    pub trace: RunTrace,
    /// Node removed at each step.
    pub removed: Vec<usize>,
}

/// Normalized squared entries of `v`; uniform when `v` vanishes.
pub fn removal_probabilities(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().map(|x| x * x).sum();
    if total > 0.0 && total.is_finite() {
        v.iter().map(|x| x * x / total).collect()
    } else {
        vec![1.0 / v.len() as f64; v.len()]
    }
}

/// Starting from the full graph, repeatedly deletes a node drawn with
/// probability `v_t(i)²` for the top eigenvector `v_t` of `A_S − Q̂(S)`.
pub fn filtering(
    g: &Graph,
    k: usize,
    max_removals: usize,
    seed: u64,
    cfg: &SpectralConfig,
    annotator: Option<&dyn TraceAnnotator>,
) -> Result<FilteringResult> {
    let n = g.n();
    if max_removals >= n || n - max_removals < k {
        return Err(Error::InvalidInput(format!(
            "cannot remove {max_removals} of {n} nodes with k = {k}"
        )));
    }
    let mut ev = CostEvaluator::new(g, k, seeds::derive(seed, &[seeds::tag("cost")]), *cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[seeds::tag("filter")]));
    let mut current: Vec<usize> = (0..n).collect();
    let mut trace = RunTrace::default();
    let mut removed = Vec::with_capacity(max_removals);
    let mut best: Option<(Evaluation, usize)> = None;
    for step in 0..=max_removals {
        let subset = NodeSubset::new(current.clone())?;
        let detail = ev.cost_detailed(&subset)?;
        let eval = detail.eval;
        if best.as_ref().is_none_or(|(b, _)| eval.cost < b.cost) {
            best = Some((eval.clone(), step));
        }
        let ann = annotator.map_or(Annotation::default(), |a| a.annotate(&eval));
        trace.push(TraceRow {
            iter: step,
            temperature: None,
            current_cost: eval.cost,
            best_cost: best.as_ref().map_or(eval.cost, |(b, _)| b.cost),
            accepted_moves: None,
            subgraph_size: current.len(),
            estimation_error: ann.estimation_error,
            outliers_in_s: ann.outliers_in_s,
        });
        if step == max_removals {
            break;
        }
        let probs = if detail.top_vector.len() == current.len() {
            removal_probabilities(&detail.top_vector)
        } else {
            vec![1.0 / current.len() as f64; current.len()]
        };
        let mut r = rng.random::<f64>();
        let mut pick = current.len() - 1;
        for (idx, &p) in probs.iter().enumerate() {
            if r < p {
                pick = idx;
                break;
            }
            r -= p;
        }
        removed.push(current.remove(pick));
    }
    let (best, best_step) = best.expect("at least one iterate");
    Ok(FilteringResult {
        best,
        best_step,
        trace,
        removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::{CorruptionConfig, SbmParams};

    fn sample(n: usize, gamma: f64, seed: u64) -> SbmSample {
        let p = SbmParams::planted(2, 0.65, 0.35).unwrap();
        SbmSample::generate(&p, n, gamma, &CorruptionConfig::default(), seed).unwrap()
    }

    #[test]
    fn oracle_without_corruption_matches_full_estimate() {
        let s = sample(60, 0.0, 1);
        let full = PartitionedSubset::new(s.assignment.communities()).unwrap();
        assert_eq!(oracle_estimate(&s).unwrap(), estimate_gamma(&s.graph, &full).unwrap());
    }

    #[test]
    fn oracle_concentrates() {
        let p = SbmParams::new(vec![1.0], vec![vec![0.3]]).unwrap();
        let s = SbmSample::generate(&p, 400, 0.0, &CorruptionConfig::default(), 2).unwrap();
        let gh = oracle_estimate(&s).unwrap();
        // Literal estimator: mean 0.3 · (1 − 1/n), sd ≈ sqrt(0.21 / (n²/2)).
        assert!((gh.get(0, 0) - 0.3).abs() < 0.01, "{}", gh.get(0, 0));
    }

    #[test]
    fn quota_variants() {
        assert_eq!(PruneQuota::HalfEach.per_side(60, 2), 15);
        assert_eq!(PruneQuota::HalfEach.per_side(30, 3), 5);
        assert_eq!(PruneQuota::HalfEach.per_side(31, 3), 6);
        assert_eq!(PruneQuota::FullEach.per_side(60, 2), 30);
    }

    #[test]
    fn pruning_regular_graph_uses_index_ties() {
        // Cycle: every degree is 2. K=1 removes the lowest and highest ids.
        let n = 12;
        let g = Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap().0;
        let r = pruning(&g, 1, 4, 0, PruneQuota::HalfEach, &SpectralConfig::default()).unwrap();
        assert_eq!(r.removed.as_slice(), &[0, 1, 2, 3]);
        assert!(r.isolated.is_empty());
        assert_eq!(r.kept.len(), 8);
    }

    #[test]
    fn pruning_respects_quota_per_cluster() {
        let s = sample(200, 0.3, 3);
        let cfg = SpectralConfig::default();
        let r = pruning(&s.graph, 2, 60, 4, PruneQuota::HalfEach, &cfg).unwrap();
        assert_eq!(r.kept.len() + r.removed.len() + r.isolated.len(), 200);
        assert!(!r.eval.is_degenerate());
        let labels = spectral::spectral_clustering(&s.graph, 2, seeds::derive(4, &[seeds::tag("cluster")]), &cfg)
            .unwrap()
            .labels;
        // A cluster no larger than twice the quota keeps a single node.
        let mut total = 0;
        for c in 0..2 {
            let size = labels.iter().filter(|&&l| l == c).count();
            let want = if 30 >= size { size.saturating_sub(1) } else { 30 };
            let cnt = r.removed.iter().filter(|&&i| labels[i] == c).count();
            assert_eq!(cnt, want, "cluster {c} of size {size}");
            total += want;
        }
        assert_eq!(r.removed.len(), total);
    }

    #[test]
    fn pruning_tiny_cluster_keeps_one_node() {
        // Two disjoint triangles with K=2 and a quota larger than a cluster.
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
            .unwrap()
            .0;
        let err = pruning(&g, 2, 5, 0, PruneQuota::HalfEach, &SpectralConfig::default()).unwrap_err();
        // One node per cluster survives, each isolated, leaving nothing to recluster.
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn removal_probabilities_normalize() {
        let v = [0.6, -0.8, 0.0];
        let p = removal_probabilities(&v);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.36).abs() < 1e-15 && (p[1] - 0.64).abs() < 1e-15 && p[2] == 0.0);
        assert_eq!(removal_probabilities(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(removal_probabilities(&[0.0, 1.0, 0.0]), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn filtering_trace_shape() {
        let s = sample(60, 0.2, 5);
        let cfg = SpectralConfig::default();
        let r = filtering(&s.graph, 2, 30, 6, &cfg, None).unwrap();
        assert_eq!(r.trace.len(), 31);
        assert_eq!(r.removed.len(), 30);
        for (t, row) in r.trace.rows.iter().enumerate() {
            assert_eq!(row.subgraph_size, 60 - t);
        }
        let min = r
            .trace
            .rows
            .iter()
            .map(|row| row.current_cost)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.cost, min);
        assert_eq!(r.trace.rows[r.best_step].current_cost, min);
        assert!(r.trace.rows.windows(2).all(|w| w[1].best_cost <= w[0].best_cost));
        let again = filtering(&s.graph, 2, 30, 6, &cfg, None).unwrap();
        assert_eq!(again.removed, r.removed);
        assert!(filtering(&s.graph, 2, 60, 6, &cfg, None).is_err());
    }
}
