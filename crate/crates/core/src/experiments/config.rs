use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::PruneQuota;
use crate::error::{Error, Result};
use crate::sbm::{CorruptionConfig, SbmParams};
use crate::seeds;
use crate::subsearch::SaConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Single,
    SweepGamma,
    SweepN,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Subsearch,
    Filtering,
    Pruning,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Subsearch, Method::Filtering, Method::Pruning, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::Subsearch => "subsearch",
            Method::Filtering => "filtering",
            Method::Pruning => "pruning",
            Method::Oracle => "oracle",
        }
    }

    /// Stochastic methods are repeated `runs_per_graph` times and the
    /// least-cost run is kept; the others run once.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::Subsearch | Method::Filtering)
    }

    /// Whether the method needs ground truth.
    pub fn needs_truth(self) -> bool {
        self == Method::Oracle
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Everything an experiment needs; the master seed determines every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub k: usize,
    /// Community proportions; uniform when absent.
    pub pi: Option<Vec<f64>>,
    pub gamma_matrix: Vec<Vec<f64>>,
    /// Outlier fraction for `single` and `sweep-n`.
    pub gamma: f64,
    pub gamma_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub graphs_per_gamma: usize,
    pub graphs_per_n: usize,
    pub runs_per_graph: usize,
    pub methods: Vec<Method>,
    pub sa: SaConfig,
    pub corruption: CorruptionConfig,
    /// Defaults to `⌊γn⌋`.
    pub num_to_prune: Option<usize>,
    pub prune_quota: PruneQuota,
    /// Defaults to `⌊γn⌋`.
    pub max_removals: Option<usize>,
    /// Fraction of nodes kept on a real graph.
    pub subgraph_frac: f64,
    pub edge_list: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Per-run wall-clock limit for SubSearch.
    pub time_budget_secs: Option<f64>,
    /// Worker threads for sweep cells; all available cores when absent.
    pub workers: Option<usize>,
    /// Write per-cell trace CSVs during sweeps.
    pub sweep_traces: bool,
    /// Reuse cell records already present in the output directory.
    pub resume: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::Single,
            n: 200,
            k: 2,
            pi: None,
            gamma_matrix: vec![vec![0.65, 0.35], vec![0.35, 0.65]],
            gamma: 0.3,
            gamma_grid: vec![0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40],
            n_grid: vec![100, 150, 200, 300, 400],
            graphs_per_gamma: 10,
            graphs_per_n: 5,
            runs_per_graph: 3,
            methods: Method::ALL.to_vec(),
            sa: SaConfig::default(),
            corruption: CorruptionConfig::default(),
            num_to_prune: None,
            prune_quota: PruneQuota::HalfEach,
            max_removals: None,
            subgraph_frac: 0.9,
            edge_list: None,
            out_dir: PathBuf::from("out"),
            seed: 12345,
            time_budget_secs: None,
            workers: None,
            sweep_traces: false,
            resume: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn params(&self) -> Result<SbmParams> {
        let pi = self.pi.clone().unwrap_or_else(|| vec![1.0 / self.k as f64; self.k]);
        let p = SbmParams::new(pi, self.gamma_matrix.clone())?;
        if p.k != self.k {
            return Err(Error::InvalidInput(format!(
                "k = {} but the connectivity matrix is {}x{}",
                self.k, p.k, p.k
            )));
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs_per_graph == 0 {
            return Err(Error::InvalidInput("runs_per_graph must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no methods requested".into()));
        }
        self.sa.validate()?;
        match self.kind {
            ExperimentKind::Real => {
                if !(self.subgraph_frac > 0.0 && self.subgraph_frac <= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "subgraph_frac {} outside (0, 1]",
                        self.subgraph_frac
                    )));
                }
                if self.edge_list.is_none() {
                    return Err(Error::InvalidInput("real experiments need an edge list".into()));
                }
                if self.k == 0 {
                    return Err(Error::InvalidInput("k must be positive".into()));
                }
                return Ok(());
            }
            ExperimentKind::SweepGamma => {
                if self.gamma_grid.is_empty() || self.graphs_per_gamma == 0 {
                    return Err(Error::InvalidInput("empty gamma grid".into()));
                }
                for &g in &self.gamma_grid {
                    check_gamma(g)?;
                }
            }
            ExperimentKind::SweepN => {
                if self.n_grid.is_empty() || self.graphs_per_n == 0 {
                    return Err(Error::InvalidInput("empty n grid".into()));
                }
                if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidInput("n grid must be strictly increasing".into()));
                }
                check_gamma(self.gamma)?;
            }
            ExperimentKind::Single => check_gamma(self.gamma)?,
        }
        self.params()?;
        Ok(())
    }

    /// Default for both pruning and filtering budgets: `⌊γn⌋`.
    pub fn outlier_budget(&self, gamma: f64, n: usize) -> usize {
        seeds::floor_frac(gamma, n)
    }

    pub fn sa_for(&self, gamma: f64, seed: u64) -> SaConfig {
        SaConfig {
            gamma_frac: gamma,
            seed,
            time_budget_secs: self.time_budget_secs.or(self.sa.time_budget_secs),
            ..self.sa.clone()
        }
    }

    pub fn worker_count(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
            .max(1)
    }
}

fn check_gamma(g: f64) -> Result<()> {
    if (0.0..1.0).contains(&g) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("gamma {g} outside [0, 1)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"kind": "sweep-gamma", "methods": ["subsearch", "oracle"], "sa": {"t_max": 5}}"#)
                .unwrap();
        assert_eq!(c.kind, ExperimentKind::SweepGamma);
        assert_eq!(c.methods, vec![Method::Subsearch, Method::Oracle]);
        assert_eq!(c.sa.t_max, 5);
        assert_eq!(c.sa.cooling_rate, 0.99);
        assert_eq!(c.graphs_per_gamma, 10);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let bad = [
            ExperimentConfig {
                runs_per_graph: 0,
                ..Default::default()
            },
            ExperimentConfig {
                methods: vec![],
                ..Default::default()
            },
            ExperimentConfig {
                k: 3,
                ..Default::default()
            },
            ExperimentConfig {
                gamma: 1.0,
                ..Default::default()
            },
            ExperimentConfig {
                kind: ExperimentKind::SweepGamma,
                gamma_grid: vec![],
                ..Default::default()
            },
            ExperimentConfig {
                kind: ExperimentKind::SweepN,
                n_grid: vec![200, 100],
                ..Default::default()
            },
            ExperimentConfig {
                kind: ExperimentKind::Real,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("sdp".parse::<Method>().is_err());
    }
}
