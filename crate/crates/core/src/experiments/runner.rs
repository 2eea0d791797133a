//! One method on one graph, and the seeded cells sweeps are made of.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, PruneQuota};
use crate::error::{Error, Result};
use crate::estimator::{q_hat, Evaluation, GammaHat, PartitionedSubset};
use crate::graph::Graph;
use crate::metrics::{self, EvalReport, GroundTruth};
use crate::sbm::{SbmParams, SbmSample};
use crate::seeds;
use crate::spectral::{self, SpectralConfig};
use crate::subsearch::{self, SaConfig, StopReason};
use crate::trace::{RunTrace, TraceAnnotator, TraceRow};

use super::config::{ExperimentConfig, Method};

/// Ground truth shared by every run on one synthetic graph.
pub struct Truth<'a> {
    pub sample: &'a SbmSample,
    /// `‖A_F − E[A]_F‖`, computed once per graph.
    pub noise_norm: f64,
}

impl<'a> Truth<'a> {
    pub fn new(sample: &'a SbmSample, cfg: &SpectralConfig) -> Result<Self> {
        Ok(Truth {
            sample,
            noise_norm: metrics::inlier_noise_norm(sample, cfg)?,
        })
    }
}

/// Method settings for one graph.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub k: usize,
    /// Sizing and annealing parameters; the seed is replaced per run.
    pub sa: SaConfig,
    pub num_to_prune: usize,
    pub prune_quota: PruneQuota,
    pub max_removals: usize,
}

impl RunSpec {
    /// Synthetic setting with outlier fraction `gamma` on `n` nodes.
    pub fn synthetic(cfg: &ExperimentConfig, gamma: f64, n: usize) -> Self {
        let budget = cfg.outlier_budget(gamma, n);
        RunSpec {
            k: cfg.k,
            sa: cfg.sa_for(gamma, cfg.sa.seed),
            num_to_prune: cfg.num_to_prune.unwrap_or(budget),
            prune_quota: cfg.prune_quota,
            max_removals: cfg.max_removals.unwrap_or(budget),
        }
    }
}

/// Outcome of one method run. Costs of degenerate states are stored as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub method: Method,
    pub run: usize,
    pub seed: u64,
    #[serde(with = "non_finite_as_null")]
    pub cost: f64,
    pub estimation_error: Option<f64>,
    pub outliers_in_s: Option<usize>,
    pub subset: Vec<usize>,
    pub labels: Vec<usize>,
    pub gamma_hat: Option<GammaHat>,
    pub report: Option<EvalReport>,
    pub stop_reason: Option<StopReason>,
    pub elapsed_secs: f64,
    #[serde(skip)]
    pub trace: RunTrace,
}

impl MethodRun {
    pub fn subset_size(&self) -> usize {
        self.subset.len()
    }

    pub fn cost_to_overlap(&self) -> Option<f64> {
        self.report.as_ref().and_then(|r| r.cost_to_overlap)
    }

    fn from_eval(
        method: Method,
        run: usize,
        seed: u64,
        eval: &Evaluation,
        truth: Option<&Truth>,
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        let report = match (truth, eval.partition(), eval.gamma_hat.as_ref()) {
            (Some(t), Some(p), Some(gh)) => Some(metrics::bound_check_with_noise(t.sample, &p, gh, t.noise_norm, cfg)?),
            _ => None,
        };
        Ok(MethodRun {
            method,
            run,
            seed,
            cost: eval.cost,
            estimation_error: report.as_ref().map(|r| r.estimation_error),
            outliers_in_s: truth.map(|t| metrics::outliers_in(t.sample, &eval.subset)),
            subset: eval.subset.as_slice().to_vec(),
            labels: eval.labels.clone(),
            gamma_hat: eval.gamma_hat.clone(),
            report,
            stop_reason: None,
            elapsed_secs: 0.0,
            trace: RunTrace::default(),
        })
    }
}

fn single_row(eval: &Evaluation, truth: Option<&Truth>) -> RunTrace {
    let ann = truth
        .map(|t| GroundTruth { sample: t.sample }.annotate(eval))
        .unwrap_or_default();
    RunTrace {
        rows: vec![TraceRow {
            iter: 0,
            temperature: None,
            current_cost: eval.cost,
            best_cost: eval.cost,
            accepted_moves: None,
            subgraph_size: eval.subset.len(),
            estimation_error: ann.estimation_error,
            outliers_in_s: ann.outliers_in_s,
        }],
    }
}

/// Runs `method` once with `seed`.
pub fn run_method(
    g: &Graph,
    method: Method,
    spec: &RunSpec,
    run: usize,
    seed: u64,
    truth: Option<&Truth>,
) -> Result<MethodRun> {
    let started = Instant::now();
    let spectral = spec.sa.spectral;
    let gt = truth.map(|t| GroundTruth { sample: t.sample });
    let annotator = gt.as_ref().map(|a| a as &dyn TraceAnnotator);
    let mut out = match method {
        Method::Subsearch => {
            let sa = SaConfig {
                seed,
                ..spec.sa.clone()
            };
            let r = subsearch::run_annotated(g, spec.k, &sa, annotator)?;
            let mut out = MethodRun::from_eval(method, run, seed, &r.best_eval, truth, &spectral)?;
            out.stop_reason = Some(r.stop_reason);
            out.trace = r.trace;
            out
        }
        Method::Filtering => {
            let r = baselines::filtering(g, spec.k, spec.max_removals, seed, &spectral, annotator)?;
            let mut out = MethodRun::from_eval(method, run, seed, &r.best, truth, &spectral)?;
            out.trace = r.trace;
            out
        }
        Method::Pruning => {
            let r = baselines::pruning(g, spec.k, spec.num_to_prune, seed, spec.prune_quota, &spectral)?;
            let mut out = MethodRun::from_eval(method, run, seed, &r.eval, truth, &spectral)?;
            out.trace = single_row(&r.eval, truth);
            out
        }
        Method::Oracle => {
            let t = truth.ok_or_else(|| Error::InvalidInput("the oracle needs ground truth".into()))?;
            let eval = oracle_eval(t.sample)?;
            let mut out = MethodRun::from_eval(method, run, seed, &eval, truth, &spectral)?;
            out.trace = single_row(&eval, truth);
            out
        }
    };
    out.elapsed_secs = started.elapsed().as_secs_f64();
    Ok(out)
}

fn oracle_eval(sample: &SbmSample) -> Result<Evaluation> {
    let p: PartitionedSubset = baselines::oracle_partition(sample)?;
    let gh = baselines::oracle_estimate(sample)?;
    let s = p.union().clone();
    let a = sample.graph.restrict(&s, &s)?;
    let cost = spectral::spectral_norm(&(a - q_hat(&p, &gh)?), 0, &SpectralConfig::default())?.norm;
    Ok(Evaluation {
        cost,
        labels: p.labels().to_vec(),
        k: p.k(),
        subset: s,
        gamma_hat: Some(gh),
    })
}

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellCoords {
    pub gamma: f64,
    pub n: usize,
    pub graph: usize,
}

impl CellCoords {
    fn words(&self) -> [u64; 3] {
        [self.gamma.to_bits(), self.n as u64, self.graph as u64]
    }

    pub fn sample_seed(&self, master: u64) -> u64 {
        let [g, n, i] = self.words();
        seeds::derive(master, &[seeds::tag("sample"), g, n, i])
    }

    /// Seed of run `run` of `method`; independent of the other methods.
    pub fn run_seed(&self, master: u64, method: Method, run: usize) -> u64 {
        let [g, n, i] = self.words();
        seeds::derive(master, &[seeds::tag(method.name()), g, n, i, run as u64])
    }

    pub fn file_stem(&self) -> String {
        format!("gamma_{:.3}_n_{}_graph_{}", self.gamma, self.n, self.graph)
    }
}

/// All runs on one synthetic graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub coords: CellCoords,
    pub sample_seed: u64,
    pub noise_norm: f64,
    pub runs: Vec<MethodRun>,
}

impl CellResult {
    /// Least-cost run of `method`; ties keep the earliest run.
    pub fn best(&self, method: Method) -> Option<&MethodRun> {
        self.runs
            .iter()
            .filter(|r| r.method == method)
            .min_by(|a, b| a.cost.total_cmp(&b.cost).then(a.run.cmp(&b.run)))
    }
}

/// Generates the cell's graph and runs every method, repeating stochastic
/// ones `runs_per_graph` times.
pub fn run_cell(cfg: &ExperimentConfig, params: &SbmParams, coords: CellCoords) -> Result<(SbmSample, CellResult)> {
    let sample_seed = coords.sample_seed(cfg.seed);
    let sample = SbmSample::generate(params, coords.n, coords.gamma, &cfg.corruption, sample_seed)?;
    let truth = Truth::new(&sample, &cfg.sa.spectral)?;
    let spec = RunSpec::synthetic(cfg, coords.gamma, coords.n);
    let mut runs = Vec::new();
    for &method in &cfg.methods {
        let reps = if method.is_stochastic() { cfg.runs_per_graph } else { 1 };
        for run in 0..reps {
            let seed = coords.run_seed(cfg.seed, method, run);
            let r = run_method(&sample.graph, method, &spec, run, seed, Some(&truth))?;
            log::debug!(
                "{} {method} run {run}: cost {:.4} error {:?} in {:.1}s",
                coords.file_stem(),
                r.cost,
                r.estimation_error,
                r.elapsed_secs
            );
            runs.push(r);
        }
    }
    let noise_norm = truth.noise_norm;
    Ok((
        sample,
        CellResult {
            coords,
            sample_seed,
            noise_norm,
            runs,
        },
    ))
}

/// Serializes infinite costs as `null` and reads `null` back as `+∞`.
mod non_finite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
