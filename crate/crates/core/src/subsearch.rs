//! Simulated annealing over connected subgraphs of fixed size, minimizing
//! `c(S) = ‖A_S − Q̂(S)‖`.

use std::collections::VecDeque;
use std::rc::Rc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{CostEvaluator, Evaluation};
use crate::graph::{Graph, NodeSubset};
use crate::seeds;
use crate::spectral::SpectralConfig;
use crate::trace::{Annotation, RunTrace, TraceAnnotator, TraceRow};

/// Temperature schedule across outer iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `T_{t+1} = cooling_rate · T_t`.
    Geometric,
    /// `T_t = c / ln(t + t0 + 1)`; the initial temperature search is skipped.
    Logarithmic { c: f64, t0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    /// Outlier fraction γ; fixes `|S| = n − ⌊γn⌋` and the chain length.
    pub gamma_frac: f64,
    /// Overrides `|S|`.
    pub subgraph_size: Option<usize>,
    pub cooling_rate: f64,
    /// Overrides the chain length `⌊γn⌋`.
    pub chain_length: Option<usize>,
    pub t_max: usize,
    pub t_tol: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub schedule: ScheduleKind,
    /// Skips the initial temperature search.
    pub initial_temp: Option<f64>,
    pub probe_length: usize,
    pub target_acceptance: f64,
    pub temp_growth: f64,
    pub max_temp_steps: usize,
    pub neighbor_retries: usize,
    /// Wall-clock limit; the best state so far is returned when it runs out.
    pub time_budget_secs: Option<f64>,
    pub spectral: SpectralConfig,
}

impl Default for SaConfig {
    fn default() -> Self {
        SaConfig {
            gamma_frac: 0.0,
            subgraph_size: None,
            cooling_rate: 0.99,
            chain_length: None,
            t_max: 1000,
            t_tol: 25,
            epsilon: 1e-4,
            seed: 12345,
            schedule: ScheduleKind::Geometric,
            initial_temp: None,
            probe_length: 100,
            target_acceptance: 0.95,
            temp_growth: 1.5,
            max_temp_steps: 40,
            neighbor_retries: 100,
            time_budget_secs: None,
            spectral: SpectralConfig::default(),
        }
    }
}

impl SaConfig {
    pub fn with_gamma(gamma_frac: f64) -> Self {
        SaConfig {
            gamma_frac,
            ..SaConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(Error::InvalidInput(format!(
                "cooling rate {} outside (0, 1)",
                self.cooling_rate
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if self.t_tol == 0 {
            return Err(Error::InvalidInput("t_tol must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.gamma_frac) {
            return Err(Error::InvalidInput(format!("gamma {} outside [0, 1)", self.gamma_frac)));
        }
        if let ScheduleKind::Logarithmic { c, t0 } = self.schedule {
            if !(c > 0.0) || !(t0 >= 0.0) {
                return Err(Error::InvalidInput(
                    "logarithmic schedule needs c > 0 and t0 >= 0".into(),
                ));
            }
        }
        if self.initial_temp.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidInput("initial temperature must be positive".into()));
        }
        Ok(())
    }

    /// `|S|` for a graph on `n` nodes.
    pub fn subgraph_size_for(&self, n: usize) -> usize {
        self.subgraph_size
            .unwrap_or_else(|| n - seeds::floor_frac(self.gamma_frac, n).min(n))
    }

    /// Markov chain length for a graph on `n` nodes.
    pub fn chain_length_for(&self, n: usize) -> usize {
        self.chain_length
            .unwrap_or_else(|| seeds::floor_frac(self.gamma_frac, n))
            .max(1)
    }
}

/// Live annealing state.
#[derive(Debug, Clone)]
pub struct SaState {
    pub current: Rc<Evaluation>,
    pub best: Rc<Evaluation>,
    pub temperature: f64,
    pub outer_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `|S| = n`: nothing to search.
    Trivial,
    /// End-of-chain cost varied by less than ε over the stall window.
    Converged,
    MaxIterations,
    TimeBudget,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: NodeSubset,
    pub best_cost: f64,
    /// Clustering and `Γ̂` from the best state's cost evaluation.
    pub best_eval: Evaluation,
    pub trace: RunTrace,
    pub initial_temperature: f64,
    pub stop_reason: StopReason,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub elapsed_secs: f64,
}

/// `min(1, exp(delta / temperature))`.
pub fn acceptance_probability(delta: f64, temperature: f64) -> f64 {
    debug_assert!(temperature > 0.0);
    if delta >= 0.0 {
        return 1.0;
    }
    let p = (delta / temperature).exp();
    if p.is_nan() {
        0.0
    } else {
        p.min(1.0)
    }
}

/// Random connected subset of `size` nodes, grown by breadth-first search
/// with shuffled neighbor order from a uniform node of the largest component.
pub fn initial_subgraph(g: &Graph, size: usize, seed: u64) -> Result<NodeSubset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initial_subgraph_rng(g, size, &mut rng)
}

fn initial_subgraph_rng(g: &Graph, size: usize, rng: &mut ChaCha8Rng) -> Result<NodeSubset> {
    if size == 0 {
        return Err(Error::InvalidInput("subgraph size must be positive".into()));
    }
    let comps = g.components();
    let largest = comps.first().map_or(0, |c| c.len());
    if largest < size {
        return Err(Error::Infeasible {
            requested: size,
            component: largest,
        });
    }
    let comp = &comps[0];
    let root = comp[rng.random_range(0..comp.len())];
    let mut seen = vec![false; g.n()];
    seen[root] = true;
    let mut chosen = vec![root];
    let mut queue = VecDeque::from([root]);
    let mut nbrs = Vec::new();
    'grow: while let Some(u) = queue.pop_front() {
        nbrs.clear();
        nbrs.extend_from_slice(g.neighbors(u));
        nbrs.shuffle(rng);
        for &v in &nbrs {
            if chosen.len() == size {
                break 'grow;
            }
            if !seen[v] {
                seen[v] = true;
                chosen.push(v);
                queue.push_back(v);
            }
        }
    }
    NodeSubset::new(chosen)
}

/// A connected neighbor of `s`: one node out, one boundary node in, drawn
/// uniformly over valid (out, in) pairs and rejected while disconnected.
pub fn neighbor(g: &Graph, s: &NodeSubset, seed: u64) -> Result<NodeSubset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    neighbor_rng(g, s, 100, &mut rng)
}

fn neighbor_rng(g: &Graph, s: &NodeSubset, retries: usize, rng: &mut ChaCha8Rng) -> Result<NodeSubset> {
    let n = g.n();
    let size = s.len();
    if size >= n {
        return Err(Error::InvalidInput("the full node set has no neighbors".into()));
    }
    let mask = s.mask(n);
    // Boundary node j with c_j neighbors in s pairs with every i when c_j ≥ 2
    // and with all but its single neighbor when c_j = 1.
    let mut boundary: Vec<(usize, usize)> = Vec::new();
    let mut counts = vec![0usize; n];
    for &i in s.iter() {
        for &j in g.neighbors(i) {
            if !mask[j] {
                if counts[j] == 0 {
                    boundary.push((j, 0));
                }
                counts[j] += 1;
            }
        }
    }
    boundary.sort_unstable();
    let mut total = 0usize;
    for b in boundary.iter_mut() {
        let w = if counts[b.0] >= 2 { size } else { size - 1 };
        total += w;
        b.1 = total;
    }
    if total == 0 {
        return Err(Error::StuckNeighborhood { retries: 0 });
    }
    let mut candidate = Vec::with_capacity(size);
    for _ in 0..retries.max(1) {
        let r = rng.random_range(0..total);
        let pos = boundary.partition_point(|&(_, cum)| cum <= r);
        let j = boundary[pos].0;
        let i = if counts[j] >= 2 {
            s[rng.random_range(0..size)]
        } else {
            let only = *g.neighbors(j).iter().find(|&&v| mask[v]).expect("boundary node");
            let skip = s.position(only).expect("member");
            let r = rng.random_range(0..size - 1);
            s[r + usize::from(r >= skip)]
        };
        candidate.clear();
        candidate.extend(s.iter().copied().filter(|&v| v != i));
        let at = candidate.partition_point(|&v| v < j);
        candidate.insert(at, j);
        if g.is_connected_unchecked(&candidate) {
            return NodeSubset::new(candidate);
        }
    }
    Err(Error::StuckNeighborhood { retries })
}

/// Fraction of accepted moves over a `steps`-long Metropolis probe from `s0`
/// at temperature `t`.
fn probe_rate(
    ev: &mut CostEvaluator<'_>,
    s0: &Rc<Evaluation>,
    t: f64,
    steps: usize,
    retries: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let g = ev.graph();
    let mut current = Rc::clone(s0);
    let mut accepted = 0usize;
    let mut proposed = 0usize;
    for _ in 0..steps {
        let cand = match neighbor_rng(g, &current.subset, retries, rng) {
            Ok(c) => c,
            Err(Error::StuckNeighborhood { .. }) => break,
            Err(e) => return Err(e),
        };
        let ce = ev.cost(&cand)?;
        proposed += 1;
        if rng.random::<f64>() < move_probability(current.cost, ce.cost, t) {
            accepted += 1;
            current = ce;
        }
    }
    Ok(if proposed == 0 {
        1.0
    } else {
        accepted as f64 / proposed as f64
    })
}

/// Acceptance probability for a move between two possibly infinite costs.
fn move_probability(current: f64, candidate: f64, t: f64) -> f64 {
    if candidate.is_infinite() {
        if current.is_infinite() {
            1.0
        } else {
            0.0
        }
    } else {
        acceptance_probability(current - candidate, t)
    }
}

/// Smallest `T` in `1, g, g², …` (with `g = cfg.temp_growth`) whose probe
/// acceptance rate reaches `cfg.target_acceptance`.
pub fn set_initial_temp(g: &Graph, s0: &NodeSubset, k: usize, cfg: &SaConfig, seed: u64) -> Result<f64> {
    let mut ev = CostEvaluator::new(g, k, seeds::derive(seed, &[seeds::tag("cost")]), cfg.spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[seeds::tag("probe")]));
    initial_temp_search(&mut ev, s0, cfg, &mut rng)
}

fn initial_temp_search(
    ev: &mut CostEvaluator<'_>,
    s0: &NodeSubset,
    cfg: &SaConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let start = ev.cost(s0)?;
    let mut t = 1.0;
    for _ in 0..cfg.max_temp_steps {
        if probe_rate(ev, &start, t, cfg.probe_length, cfg.neighbor_retries, rng)? >= cfg.target_acceptance {
            return Ok(t);
        }
        t *= cfg.temp_growth;
    }
    log::warn!("initial temperature search hit its cap at T = {t}");
    Ok(t)
}

/// Acceptance rate of a fresh probe at `t`, independent of any search.
pub fn probe_acceptance_rate(g: &Graph, s0: &NodeSubset, k: usize, t: f64, cfg: &SaConfig, seed: u64) -> Result<f64> {
    let mut ev = CostEvaluator::new(g, k, seeds::derive(seed, &[seeds::tag("cost")]), cfg.spectral);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = ev.cost(s0)?;
    probe_rate(&mut ev, &start, t, cfg.probe_length, cfg.neighbor_retries, &mut rng)
}

pub fn run(g: &Graph, k: usize, cfg: &SaConfig) -> Result<SearchResult> {
    run_annotated(g, k, cfg, None)
}

/// Runs the search; `annotator` fills the ground-truth trace columns.
pub fn run_annotated(
    g: &Graph,
    k: usize,
    cfg: &SaConfig,
    annotator: Option<&dyn TraceAnnotator>,
) -> Result<SearchResult> {
    cfg.validate()?;
    let started = Instant::now();
    let budget = cfg.time_budget_secs.map(Duration::from_secs_f64);
    let n = g.n();
    let size = cfg.subgraph_size_for(n);
    if size > n || size < k.max(1) {
        return Err(Error::InvalidInput(format!(
            "subgraph size {size} invalid for n = {n}, k = {k}"
        )));
    }
    let mut ev = CostEvaluator::new(g, k, seeds::derive(cfg.seed, &[seeds::tag("cost")]), cfg.spectral);
    let annotate = |e: &Evaluation| annotator.map_or(Annotation::default(), |a| a.annotate(e));
    let mut trace = RunTrace::default();

    if size == n {
        let full = ev.cost(&NodeSubset::full(n))?;
        let ann = annotate(&full);
        trace.push(TraceRow {
            iter: 0,
            temperature: None,
            current_cost: full.cost,
            best_cost: full.cost,
            accepted_moves: None,
            subgraph_size: n,
            estimation_error: ann.estimation_error,
            outliers_in_s: ann.outliers_in_s,
        });
        return Ok(SearchResult {
            best: full.subset.clone(),
            best_cost: full.cost,
            best_eval: (*full).clone(),
            trace,
            initial_temperature: 0.0,
            stop_reason: StopReason::Trivial,
            evaluations: ev.evaluations(),
            cache_hits: ev.cache_hits(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let s0 = initial_subgraph_rng(g, size, &mut rng)?;
    let t0 = match (cfg.schedule, cfg.initial_temp) {
        (ScheduleKind::Logarithmic { c, t0 }, _) => c / (t0 + 1.0).ln(),
        (_, Some(t)) => t,
        (_, None) => {
            let mut probe_rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[seeds::tag("probe")]));
            initial_temp_search(&mut ev, &s0, cfg, &mut probe_rng)?
        }
    };
    let first = ev.cost(&s0)?;
    let mut state = SaState {
        current: Rc::clone(&first),
        best: first,
        temperature: t0,
        outer_iter: 0,
    };
    let chain = cfg.chain_length_for(n);
    let mut end_costs: VecDeque<f64> = VecDeque::with_capacity(cfg.t_tol + 1);
    let mut stop_reason = StopReason::MaxIterations;

    'outer: for t in 0..cfg.t_max {
        if budget.is_some_and(|b| started.elapsed() >= b) {
            stop_reason = StopReason::TimeBudget;
            break;
        }
        state.outer_iter = t;
        let mut accepted = 0usize;
        for _ in 0..chain {
            let cand = match neighbor_rng(g, &state.current.subset, cfg.neighbor_retries, &mut rng) {
                Ok(c) => c,
                Err(Error::StuckNeighborhood { retries }) => {
                    log::warn!("no connected neighbor after {retries} proposals; restarting from a fresh subgraph");
                    let fresh = initial_subgraph_rng(g, size, &mut rng)?;
                    state.current = ev.cost(&fresh)?;
                    if state.current.cost < state.best.cost {
                        state.best = Rc::clone(&state.current);
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            let ce = ev.cost(&cand)?;
            let p = move_probability(state.current.cost, ce.cost, state.temperature);
            if rng.random::<f64>() < p {
                accepted += 1;
                if ce.cost < state.best.cost {
                    state.best = Rc::clone(&ce);
                }
                state.current = ce;
            }
        }
        let ann = annotate(&state.current);
        trace.push(TraceRow {
            iter: t,
            temperature: Some(state.temperature),
            current_cost: state.current.cost,
            best_cost: state.best.cost,
            accepted_moves: Some(accepted),
            subgraph_size: size,
            estimation_error: ann.estimation_error,
            outliers_in_s: ann.outliers_in_s,
        });
        end_costs.push_back(state.current.cost);
        if end_costs.len() > cfg.t_tol {
            end_costs.pop_front();
        }
        if end_costs.len() == cfg.t_tol {
            let (lo, hi) = end_costs
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                    (lo.min(c), hi.max(c))
                });
            if hi - lo < cfg.epsilon {
                stop_reason = StopReason::Converged;
                break 'outer;
            }
        }
        state.temperature = match cfg.schedule {
            ScheduleKind::Geometric => state.temperature * cfg.cooling_rate,
            ScheduleKind::Logarithmic { c, t0 } => c / ((t + 1) as f64 + t0 + 1.0).ln(),
        };
    }

    Ok(SearchResult {
        best: state.best.subset.clone(),
        best_cost: state.best.cost,
        best_eval: (*state.best).clone(),
        trace,
        initial_temperature: t0,
        stop_reason,
        evaluations: ev.evaluations(),
        cache_hits: ev.cache_hits(),
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}
