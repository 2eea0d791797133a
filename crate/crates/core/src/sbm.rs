//! Stochastic block model sampling, expected adjacency and the Beta node
//! corruption adversary.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Beta;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeSubset};
use crate::seeds;

/// Community sizes `pi` and connectivities `gamma` (row-major `k × k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub k: usize,
    pub pi: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
}

impl SbmParams {
    pub fn new(pi: Vec<f64>, gamma: Vec<Vec<f64>>) -> Result<Self> {
        let p = SbmParams { k: pi.len(), pi, gamma };
        p.validate()?;
        Ok(p)
    }

    /// `k` equal communities with `p_in` on the diagonal and `p_out` off it.
    pub fn planted(k: usize, p_in: f64, p_out: f64) -> Result<Self> {
        let gamma = (0..k)
            .map(|a| (0..k).map(|b| if a == b { p_in } else { p_out }).collect())
            .collect();
        SbmParams::new(vec![1.0 / k as f64; k], gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.pi.len() != self.k {
            return Err(Error::InvalidInput(format!(
                "pi has {} entries for k = {}",
                self.pi.len(),
                self.k
            )));
        }
        if self.pi.iter().any(|&p| !(p > 0.0 && p <= 1.0)) || (self.pi.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("pi must be positive and sum to 1".into()));
        }
        if self.gamma.len() != self.k || self.gamma.iter().any(|r| r.len() != self.k) {
            return Err(Error::InvalidInput(format!("gamma must be {0}×{0}", self.k)));
        }
        for a in 0..self.k {
            for b in 0..self.k {
                let v = self.gamma[a][b];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidInput(format!("gamma[{a}][{b}] = {v} outside [0, 1]")));
                }
                if v != self.gamma[b][a] {
                    return Err(Error::InvalidInput("gamma must be symmetric".into()));
                }
            }
        }
        Ok(())
    }
}

/// 0-based community label per node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityAssignment {
    pub z: Vec<usize>,
    pub k: usize,
}

impl CommunityAssignment {
    pub fn new(z: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = z.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidInput(format!("label {bad} not below k = {k}")));
        }
        Ok(CommunityAssignment { z, k })
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// One-hot `n × k` membership matrix.
    pub fn membership(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.z.len(), self.k));
        for (i, &c) in self.z.iter().enumerate() {
            m[[i, c]] = 1.0;
        }
        m
    }

    /// The sets `Ω_k`.
    pub fn communities(&self) -> Vec<NodeSubset> {
        let mut sets = vec![Vec::new(); self.k];
        for (i, &c) in self.z.iter().enumerate() {
            sets[c].push(i);
        }
        sets.into_iter().map(NodeSubset::from_sorted).collect()
    }
}

pub fn sample_sbm(params: &SbmParams, n: usize, seed: u64) -> Result<(Graph, CommunityAssignment)> {
    params.validate()?;
    if n < params.k {
        return Err(Error::InvalidInput(format!("n = {n} is below k = {}", params.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = WeightedIndex::new(&params.pi).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let z: Vec<usize> = (0..n).map(|_| pick.sample(&mut rng)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < params.gamma[z[i]][z[j]] {
                edges.push((i, j));
            }
        }
    }
    let (g, _) = Graph::from_edges(n, edges)?;
    Ok((g, CommunityAssignment { z, k: params.k }))
}

/// `Q − diag(Q)` with `Q = Z Γ Zᵗ`.
pub fn expected_adjacency(params: &SbmParams, assignment: &CommunityAssignment) -> Array2<f64> {
    let z = &assignment.z;
    let n = z.len();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { params.gamma[z[i]][z[j]] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    /// `α + β` of each Beta draw.
    pub beta_concentration: f64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            beta_concentration: 0.1,
        }
    }
}

/// Ground-truth bundle of a corrupted synthetic graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSample {
    pub graph: Graph,
    pub clean_graph: Graph,
    pub assignment: CommunityAssignment,
    pub params: SbmParams,
    pub inliers: NodeSubset,
    pub outliers: NodeSubset,
    pub gamma_frac: f64,
    /// `drawn[r][k]`: probability drawn for outlier `outliers[r]` towards community `k`.
    pub drawn: Vec<Vec<f64>>,
    pub corruption: CorruptionConfig,
    pub seed: u64,
}

/// Number of outliers `⌊γ n⌋`.
pub fn outlier_count(gamma_frac: f64, n: usize) -> usize {
    seeds::floor_frac(gamma_frac, n)
}

fn draw_probability(mu: f64, s: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if mu <= 0.0 || mu >= 1.0 {
        return Ok(mu.clamp(0.0, 1.0));
    }
    let beta = Beta::new(mu * s, (1.0 - mu) * s).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(beta.sample(rng))
}

/// Rewires `⌊γ n⌋` uniformly chosen nodes with Beta-drawn connection
/// probabilities whose means match the true block probabilities.
pub fn corrupt(
    clean: &Graph,
    assignment: &CommunityAssignment,
    params: &SbmParams,
    gamma_frac: f64,
    cfg: &CorruptionConfig,
    seed: u64,
) -> Result<SbmSample> {
    if !(0.0..0.5).contains(&gamma_frac) {
        return Err(Error::InvalidInput(format!(
            "corruption fraction {gamma_frac} outside [0, 1/2)"
        )));
    }
    if cfg.beta_concentration.is_nan() || cfg.beta_concentration <= 0.0 {
        return Err(Error::InvalidInput("beta concentration must be positive".into()));
    }
    let n = clean.n();
    if assignment.n() != n || assignment.k != params.k {
        return Err(Error::InvalidInput("assignment does not match graph or params".into()));
    }
    let m = outlier_count(gamma_frac, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, n, m).into_vec();
    chosen.sort_unstable();
    let outliers = NodeSubset::from_sorted(chosen);
    let inliers = outliers.complement(n);

    let mut drawn = Vec::with_capacity(m);
    for &i in outliers.iter() {
        let zi = assignment.z[i];
        let row = (0..params.k)
            .map(|k| draw_probability(params.gamma[zi][k], cfg.beta_concentration, &mut rng))
            .collect::<Result<Vec<f64>>>()?;
        drawn.push(row);
    }

    let mut adj: Vec<u8> = (0..n).flat_map(|i| clean.row(i).iter().copied()).collect();
    let is_outlier = outliers.mask(n);
    for (r, &i) in outliers.iter().enumerate() {
        for j in 0..n {
            // Outlier pairs are drawn once, by the lower-indexed endpoint.
            if j == i || (is_outlier[j] && j < i) {
                continue;
            }
            let bit = u8::from(rng.random::<f64>() < drawn[r][assignment.z[j]]);
            adj[i * n + j] = bit;
            adj[j * n + i] = bit;
        }
    }
    Ok(SbmSample {
        graph: Graph::from_dense(n, adj)?,
        clean_graph: clean.clone(),
        assignment: assignment.clone(),
        params: params.clone(),
        inliers,
        outliers,
        gamma_frac,
        drawn,
        corruption: *cfg,
        seed,
    })
}

impl SbmSample {
    /// Samples a clean SBM and corrupts it; both seeds derive from `seed`.
    pub fn generate(params: &SbmParams, n: usize, gamma_frac: f64, cfg: &CorruptionConfig, seed: u64) -> Result<Self> {
        let (clean, z) = sample_sbm(params, n, seeds::derive(seed, &[0]))?;
        let mut s = corrupt(&clean, &z, params, gamma_frac, cfg, seeds::derive(seed, &[1]))?;
        s.seed = seed;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn to_bundle(&self) -> SampleBundle {
        SampleBundle {
            n: self.n(),
            params: self.params.clone(),
            z: self.assignment.z.clone(),
            inliers: self.inliers.clone(),
            outliers: self.outliers.clone(),
            gamma_frac: self.gamma_frac,
            drawn: self.drawn.clone(),
            beta_concentration: self.corruption.beta_concentration,
            seed: self.seed,
            edges: self.graph.edges(),
            clean_edges: self.clean_graph.edges(),
        }
    }

    pub fn from_bundle(b: SampleBundle) -> Result<Self> {
        b.params.validate()?;
        let (graph, _) = Graph::from_edges(b.n, b.edges)?;
        let (clean_graph, _) = Graph::from_edges(b.n, b.clean_edges)?;
        b.inliers.check_bounds(b.n)?;
        b.outliers.check_bounds(b.n)?;
        if b.z.len() != b.n {
            return Err(Error::InvalidInput("label vector length differs from n".into()));
        }
        Ok(SbmSample {
            graph,
            clean_graph,
            assignment: CommunityAssignment::new(b.z, b.params.k)?,
            params: b.params,
            inliers: b.inliers,
            outliers: b.outliers,
            gamma_frac: b.gamma_frac,
            drawn: b.drawn,
            corruption: CorruptionConfig {
                beta_concentration: b.beta_concentration,
            },
            seed: b.seed,
        })
    }
}

/// JSON form of an [`SbmSample`]; round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBundle {
    pub n: usize,
    pub params: SbmParams,
    pub z: Vec<usize>,
    pub inliers: NodeSubset,
    pub outliers: NodeSubset,
    pub gamma_frac: f64,
    pub drawn: Vec<Vec<f64>>,
    pub beta_concentration: f64,
    pub seed: u64,
    pub edges: Vec<(usize, usize)>,
    pub clean_edges: Vec<(usize, usize)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_block() -> SbmParams {
        SbmParams::planted(2, 0.65, 0.35).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(SbmParams::new(vec![0.5, 0.6], vec![vec![0.1, 0.1], vec![0.1, 0.1]]).is_err());
        assert!(SbmParams::new(vec![0.5, 0.5], vec![vec![0.1, 0.2], vec![0.3, 0.1]]).is_err());
        assert!(SbmParams::new(vec![1.0], vec![vec![1.5]]).is_err());
        assert!(SbmParams::new(vec![1.0, 0.0], vec![vec![0.1, 0.1], vec![0.1, 0.1]]).is_err());
        assert!(sample_sbm(&two_block(), 1, 0).is_err());
    }

    #[test]
    fn extreme_probabilities() {
        let ones = SbmParams::planted(2, 1.0, 1.0).unwrap();
        let (g, _) = sample_sbm(&ones, 12, 3).unwrap();
        assert_eq!(g.edge_count(), 66);
        let zeros = SbmParams::planted(3, 0.0, 0.0).unwrap();
        let (g, _) = sample_sbm(&zeros, 12, 3).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn within_block_density_over_seeds() {
        let params = two_block();
        let (mut edges, mut pairs) = (0usize, 0usize);
        for seed in 0..100 {
            let (g, z) = sample_sbm(&params, 200, seed).unwrap();
            for i in 0..200 {
                for j in (i + 1)..200 {
                    if z.z[i] == z.z[j] {
                        pairs += 1;
                        edges += usize::from(g.has_edge(i, j));
                    }
                }
            }
        }
        let density = edges as f64 / pairs as f64;
        assert!((density - 0.65).abs() < 0.02, "density {density}");
    }

    #[test]
    fn expected_adjacency_cases() {
        let p = SbmParams::new(vec![1.0], vec![vec![0.4]]).unwrap();
        let e = expected_adjacency(&p, &CommunityAssignment::new(vec![0; 3], 1).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(e[[i, j]], if i == j { 0.0 } else { 0.4 });
            }
        }
        let (a, b, c) = (0.7, 0.2, 0.5);
        let p = SbmParams::new(vec![0.5, 0.5], vec![vec![a, b], vec![b, c]]).unwrap();
        let e = expected_adjacency(&p, &CommunityAssignment::new(vec![0, 0, 1, 1], 2).unwrap());
        let want = ndarray::arr2(&[[0.0, a, b, b], [a, 0.0, b, b], [b, b, 0.0, c], [b, b, c, 0.0]]);
        assert_eq!(e, want);
    }

    #[test]
    fn expected_adjacency_matches_lookup() {
        let p = SbmParams::new(
            vec![0.2, 0.3, 0.5],
            vec![vec![0.9, 0.1, 0.3], vec![0.1, 0.6, 0.2], vec![0.3, 0.2, 0.05]],
        )
        .unwrap();
        let (_, z) = sample_sbm(&p, 30, 8).unwrap();
        let e = expected_adjacency(&p, &z);
        let zm = z.membership();
        let gm = Array2::from_shape_fn((3, 3), |(a, b)| p.gamma[a][b]);
        let q = zm.dot(&gm).dot(&zm.t());
        for i in 0..30 {
            for j in 0..30 {
                let want = if i == j { 0.0 } else { q[[i, j]] };
                assert_eq!(e[[i, j]], want);
            }
        }
    }

    #[test]
    fn zero_corruption_is_identity() {
        let p = two_block();
        let (g, z) = sample_sbm(&p, 50, 1).unwrap();
        let s = corrupt(&g, &z, &p, 0.0, &CorruptionConfig::default(), 2).unwrap();
        assert!(s.outliers.is_empty());
        assert_eq!(s.inliers.len(), 50);
        assert_eq!(s.graph, s.clean_graph);
    }

    #[test]
    fn outlier_count_and_bounds() {
        let p = two_block();
        let s = SbmSample::generate(&p, 200, 0.3, &CorruptionConfig::default(), 5).unwrap();
        assert_eq!(s.outliers.len(), 60);
        assert_eq!(s.inliers.len(), 140);
        let (g, z) = sample_sbm(&p, 20, 1).unwrap();
        assert!(corrupt(&g, &z, &p, 0.5, &CorruptionConfig::default(), 0).is_err());
        let bad = CorruptionConfig {
            beta_concentration: 0.0,
        };
        assert!(corrupt(&g, &z, &p, 0.1, &bad, 0).is_err());
    }

    #[test]
    fn inlier_block_untouched() {
        let p = two_block();
        let s = SbmSample::generate(&p, 80, 0.25, &CorruptionConfig::default(), 9).unwrap();
        for &i in s.inliers.iter() {
            for &j in s.inliers.iter() {
                assert_eq!(s.graph.has_edge(i, j), s.clean_graph.has_edge(i, j));
            }
        }
    }

    #[test]
    fn degenerate_means_fix_the_draw() {
        let p = SbmParams::new(vec![0.5, 0.5], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = SbmSample::generate(&p, 40, 0.2, &CorruptionConfig::default(), 4).unwrap();
        assert_eq!(s.graph, s.clean_graph);
        for (r, &i) in s.outliers.iter().enumerate() {
            let zi = s.assignment.z[i];
            assert_eq!(s.drawn[r][zi], 1.0);
            assert_eq!(s.drawn[r][1 - zi], 0.0);
        }
    }

    #[test]
    fn outlier_density_mean_matches_block_probability() {
        // One outlier in a K=1 graph: mean row density is 0.5 for any
        // concentration; small concentrations push single draws to 0 or 1.
        let p = SbmParams::new(vec![1.0], vec![vec![0.5]]).unwrap();
        for (s, want_extreme) in [(1000.0, false), (0.1, true)] {
            let cfg = CorruptionConfig { beta_concentration: s };
            let mut densities = Vec::new();
            for seed in 0..1000 {
                let sample = SbmSample::generate(&p, 21, 0.05, &cfg, seed).unwrap();
                let i = sample.outliers[0];
                densities.push(sample.graph.degree(i) as f64 / 20.0);
            }
            let mean = densities.iter().sum::<f64>() / 1000.0;
            // Row density variance is at most 0.25; 4 standard errors.
            assert!(
                (mean - 0.5).abs() < 4.0 * (0.25_f64 / 1000.0).sqrt(),
                "s={s} mean={mean}"
            );
            let extreme = densities.iter().filter(|&&d| !(0.1..=0.9).contains(&d)).count();
            if want_extreme {
                assert!(extreme > 700, "{extreme}");
            } else {
                assert!(extreme < 10, "{extreme}");
            }
        }
    }

    #[test]
    fn bundle_round_trip() {
        let p = two_block();
        let s = SbmSample::generate(&p, 30, 0.2, &CorruptionConfig::default(), 77).unwrap();
        let json = serde_json::to_string(&s.to_bundle()).unwrap();
        let back = SbmSample::from_bundle(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
