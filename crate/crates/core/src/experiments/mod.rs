//! Experiment harness: single runs, γ and n sweeps, and real graphs.
//!
//! Every output file is a function of the configuration and its master seed.
//! Sweep cells are written as soon as they finish, so an interrupted sweep
//! can be resumed with `resume` set.

pub mod config;
pub mod runner;
pub mod stats;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::GammaHat;
use crate::graph::{read_edge_list, IndexBase, NodeSubset};
use crate::seeds;
use crate::subsearch::SaConfig;

pub use config::{ExperimentConfig, ExperimentKind, Method};
pub use runner::{run_cell, run_method, CellCoords, CellResult, MethodRun, RunSpec, Truth};
pub use stats::Summary;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_trace(dir: &Path, stem: &str, run: &MethodRun) -> Result<()> {
    run.trace.write_csv(fs::File::create(dir.join(format!("{stem}.csv")))?)
}

/// Maps `f` over `items` on `workers` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> Result<R> + Sync) -> Result<Vec<R>> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<R>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

/// Result of `single`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleSummary {
    pub config: ExperimentConfig,
    pub cell: CellResult,
}

impl SingleSummary {
    pub fn best(&self, method: Method) -> Option<&MethodRun> {
        self.cell.best(method)
    }
}

/// One corrupted graph, every requested method. Writes `sample.json`,
/// `summary.json` and `trace_<method>.csv` for the kept run of each method.
pub fn cmd_single(cfg: &ExperimentConfig) -> Result<SingleSummary> {
    cfg.validate()?;
    let params = cfg.params()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let coords = CellCoords {
        gamma: cfg.gamma,
        n: cfg.n,
        graph: 0,
    };
    let (sample, cell) = run_cell(cfg, &params, coords)?;
    write_json(&cfg.out_dir.join("sample.json"), &sample.to_bundle())?;
    for &m in &cfg.methods {
        if let Some(best) = cell.best(m) {
            write_trace(&cfg.out_dir, &format!("trace_{m}"), best)?;
        }
    }
    let summary = SingleSummary {
        config: cfg.clone(),
        cell,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

fn sweep_cells(cfg: &ExperimentConfig, coords: &[CellCoords]) -> Result<Vec<CellResult>> {
    let params = cfg.params()?;
    let cell_dir = cfg.out_dir.join("cells");
    fs::create_dir_all(&cell_dir)?;
    let done = AtomicUsize::new(0);
    parallel_map(coords, cfg.worker_count(), |&c| {
        let path = cell_dir.join(format!("{}.json", c.file_stem()));
        if cfg.resume {
            if let Some(cell) = fs::read_to_string(&path)
                .ok()
                .and_then(|t| serde_json::from_str::<CellResult>(&t).ok())
                .filter(|cell| cell.coords == c)
            {
                log::info!("reusing {}", path.display());
                done.fetch_add(1, Ordering::Relaxed);
                return Ok(cell);
            }
        }
        let (_, cell) = run_cell(cfg, &params, c)?;
        write_json(&path, &cell)?;
        if cfg.sweep_traces {
            for m in &cfg.methods {
                if let Some(best) = cell.best(*m) {
                    write_trace(&cell_dir, &format!("{}_trace_{m}", c.file_stem()), best)?;
                }
            }
        }
        let k = done.fetch_add(1, Ordering::Relaxed) + 1;
        log::info!("cell {} done ({k}/{})", c.file_stem(), coords.len());
        Ok(cell)
    })
}

/// Per-(γ, method) statistics over graphs of the kept run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub gamma: f64,
    pub method: Method,
    pub graphs: usize,
    pub mean_error: f64,
    pub sd_error: Option<f64>,
    pub ci95_error: Option<f64>,
    pub mean_outliers_in_s: f64,
    /// Mean over finite costs.
    pub mean_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGammaSummary {
    pub config: ExperimentConfig,
    pub rows: Vec<GammaRow>,
    pub cells: Vec<CellResult>,
}

impl SweepGammaSummary {
    pub fn row(&self, gamma: f64, method: Method) -> Option<&GammaRow> {
        self.rows.iter().find(|r| r.gamma == gamma && r.method == method)
    }
}

fn finite_mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.filter(|x| x.is_finite()).collect();
    stats::mean(&v)
}

/// Rebuilds the γ-sweep table from cell records.
pub fn summarize_gamma(cells: &[CellResult], grid: &[f64], methods: &[Method]) -> Vec<GammaRow> {
    let mut rows = Vec::new();
    for &gamma in grid {
        for &m in methods {
            let kept: Vec<&MethodRun> = cells
                .iter()
                .filter(|c| c.coords.gamma == gamma)
                .filter_map(|c| c.best(m))
                .collect();
            let errors: Vec<f64> = kept.iter().filter_map(|r| r.estimation_error).collect();
            let s = stats::summarize(&errors);
            rows.push(GammaRow {
                gamma,
                method: m,
                graphs: s.count,
                mean_error: s.mean,
                sd_error: s.sd,
                ci95_error: s.ci95,
                mean_outliers_in_s: finite_mean(kept.iter().filter_map(|r| r.outliers_in_s.map(|o| o as f64))),
                mean_cost: finite_mean(kept.iter().map(|r| r.cost)),
            });
        }
    }
    rows
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `graphs_per_gamma` graphs per grid point; writes `cells/*.json`,
/// `sweep_gamma.csv` and `summary.json`.
pub fn cmd_sweep_gamma(cfg: &ExperimentConfig) -> Result<SweepGammaSummary> {
    cfg.validate()?;
    let coords: Vec<CellCoords> = cfg
        .gamma_grid
        .iter()
        .flat_map(|&gamma| (0..cfg.graphs_per_gamma).map(move |graph| CellCoords { gamma, n: cfg.n, graph }))
        .collect();
    let cells = sweep_cells(cfg, &coords)?;
    let rows = summarize_gamma(&cells, &cfg.gamma_grid, &cfg.methods);
    write_csv_rows(&cfg.out_dir.join("sweep_gamma.csv"), &rows)?;
    let summary = SweepGammaSummary {
        config: cfg.clone(),
        rows,
        cells,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Per-(n, method) statistics of the kept run's cost-to-overlap ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRow {
    pub n: usize,
    pub method: Method,
    /// Graphs with a non-vacuous ratio.
    pub graphs: usize,
    pub mean_cost_to_overlap: f64,
    pub sd_cost_to_overlap: Option<f64>,
    pub ci95_cost_to_overlap: Option<f64>,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSlope {
    pub method: Method,
    /// Log-log slope of mean cost-to-overlap against n.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepNSummary {
    pub config: ExperimentConfig,
    pub rows: Vec<SizeRow>,
    pub slopes: Vec<MethodSlope>,
    pub cells: Vec<CellResult>,
}

impl SweepNSummary {
    pub fn slope(&self, method: Method) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method).and_then(|s| s.slope)
    }
}

/// Rebuilds the n-sweep table, sorted by n, and the fitted slopes.
pub fn summarize_n(cells: &[CellResult], grid: &[usize], methods: &[Method]) -> (Vec<SizeRow>, Vec<MethodSlope>) {
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    let mut rows = Vec::new();
    for &n in &sorted {
        for &m in methods {
            let kept: Vec<&MethodRun> = cells
                .iter()
                .filter(|c| c.coords.n == n)
                .filter_map(|c| c.best(m))
                .collect();
            let ratios: Vec<f64> = kept.iter().filter_map(|r| r.cost_to_overlap()).collect();
            let s = stats::summarize(&ratios);
            rows.push(SizeRow {
                n,
                method: m,
                graphs: s.count,
                mean_cost_to_overlap: s.mean,
                sd_cost_to_overlap: s.sd,
                ci95_cost_to_overlap: s.ci95,
                mean_error: stats::mean(&kept.iter().filter_map(|r| r.estimation_error).collect::<Vec<_>>()),
            });
        }
    }
    let slopes = methods
        .iter()
        .map(|&m| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.method == m && r.graphs > 0)
                .map(|r| (r.n as f64, r.mean_cost_to_overlap))
                .unzip();
            MethodSlope {
                method: m,
                slope: stats::log_log_slope(&x, &y),
            }
        })
        .collect();
    (rows, slopes)
}

/// `graphs_per_n` graphs per size at fixed γ; writes `cells/*.json`,
/// `sweep_n.csv` and `summary.json`.
pub fn cmd_sweep_n(cfg: &ExperimentConfig) -> Result<SweepNSummary> {
    cfg.validate()?;
    let coords: Vec<CellCoords> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| {
            (0..cfg.graphs_per_n).map(move |graph| CellCoords {
                gamma: cfg.gamma,
                n,
                graph,
            })
        })
        .collect();
    let cells = sweep_cells(cfg, &coords)?;
    let (rows, slopes) = summarize_n(&cells, &cfg.n_grid, &cfg.methods);
    write_csv_rows(&cfg.out_dir.join("sweep_n.csv"), &rows)?;
    let summary = SweepNSummary {
        config: cfg.clone(),
        rows,
        slopes,
        cells,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Kept run of one method on a real graph, in file node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealOutcome {
    pub method: Method,
    pub run: MethodRun,
    /// `(file id, label)` for every kept node.
    pub labels: Vec<(usize, usize)>,
    pub gamma_hat: Option<GammaHat>,
    /// File ids of the nodes outside the kept set.
    pub removed: Vec<usize>,
    /// `degree_histogram[d] = (kept, removed)` counts of nodes with degree `d`.
    pub degree_histogram: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSummary {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub nodes: usize,
    pub edges: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub one_based: bool,
    pub subgraph_size: usize,
    pub chain_length: usize,
    pub outcomes: Vec<RealOutcome>,
}

impl RealSummary {
    pub fn outcome(&self, method: Method) -> Option<&RealOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Sizing on a real graph: `|S| = ⌊frac·n⌋` and chains of `⌊(1 − frac)·n⌋`.
pub fn real_sa_config(base: &SaConfig, frac: f64, n: usize) -> SaConfig {
    let removed = 1.0 - frac;
    SaConfig {
        gamma_frac: removed,
        subgraph_size: Some(seeds::floor_frac(frac, n)),
        chain_length: Some(seeds::floor_frac(removed, n).max(1)),
        ..base.clone()
    }
}

/// SubSearch and the ground-truth-free baselines on an edge-list graph.
/// Writes `summary.json`, `trace_<method>.csv` and `degrees_<method>.csv`.
pub fn cmd_real(cfg: &ExperimentConfig) -> Result<RealSummary> {
    cfg.validate()?;
    let path = cfg
        .edge_list
        .clone()
        .ok_or_else(|| Error::InvalidInput("real experiments need an edge list".into()))?;
    let loaded = read_edge_list(&path, IndexBase::Auto)?;
    let g = &loaded.graph;
    let n = g.n();
    let shift = usize::from(loaded.one_based);
    log::info!("{}: {} nodes, {} edges", path.display(), n, g.edge_count());
    fs::create_dir_all(&cfg.out_dir)?;

    let base = SaConfig {
        time_budget_secs: cfg.time_budget_secs.or(cfg.sa.time_budget_secs),
        ..cfg.sa.clone()
    };
    let sa = real_sa_config(&base, cfg.subgraph_frac, n);
    let size = sa.subgraph_size_for(n);
    let component = g.components().first().map_or(0, Vec::len);
    if size > component {
        return Err(Error::Infeasible {
            requested: size,
            component,
        });
    }
    let budget = n - size;
    let spec = RunSpec {
        k: cfg.k,
        sa: sa.clone(),
        num_to_prune: cfg.num_to_prune.unwrap_or(budget),
        prune_quota: cfg.prune_quota,
        max_removals: cfg.max_removals.unwrap_or(budget),
    };
    let coords = CellCoords {
        gamma: sa.gamma_frac,
        n,
        graph: 0,
    };
    let degrees = g.degrees();
    let max_degree = degrees.iter().copied().max().unwrap_or(0);
    let mut outcomes = Vec::new();
    for &m in &cfg.methods {
        if m.needs_truth() {
            log::warn!("skipping {m}: no ground truth for a real graph");
            continue;
        }
        let reps = if m.is_stochastic() { cfg.runs_per_graph } else { 1 };
        let mut best: Option<MethodRun> = None;
        for run in 0..reps {
            let r = run_method(g, m, &spec, run, coords.run_seed(cfg.seed, m, run), None)?;
            log::info!("{m} run {run}: cost {:.4} in {:.1}s", r.cost, r.elapsed_secs);
            if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                best = Some(r);
            }
        }
        let run = best.expect("at least one run");
        write_trace(&cfg.out_dir, &format!("trace_{m}"), &run)?;
        let kept = NodeSubset::new(run.subset.clone())?;
        let removed = kept.complement(n);
        let mut hist = vec![(0usize, 0usize); max_degree + 1];
        for &i in &kept {
            hist[degrees[i]].0 += 1;
        }
        for &i in &removed {
            hist[degrees[i]].1 += 1;
        }
        let mut w = csv::Writer::from_path(cfg.out_dir.join(format!("degrees_{m}.csv")))?;
        w.write_record(["degree", "kept", "removed"])?;
        for (d, (a, b)) in hist.iter().enumerate() {
            w.write_record([d.to_string(), a.to_string(), b.to_string()])?;
        }
        w.flush()?;
        outcomes.push(RealOutcome {
            method: m,
            labels: run
                .subset
                .iter()
                .zip(&run.labels)
                .map(|(&i, &l)| (i + shift, l))
                .collect(),
            gamma_hat: run.gamma_hat.clone(),
            removed: removed.iter().map(|&i| i + shift).collect(),
            degree_histogram: hist,
            run,
        });
    }
    let summary = RealSummary {
        config: cfg.clone(),
        path,
        nodes: n,
        edges: g.edge_count(),
        self_loops: loaded.stats.self_loops,
        duplicates: loaded.stats.duplicates,
        one_based: loaded.one_based,
        subgraph_size: size,
        chain_length: sa.chain_length_for(n),
        outcomes,
    };
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Dispatches on `cfg.kind` and returns the path of the summary file.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<PathBuf> {
    match cfg.kind {
        ExperimentKind::Single => cmd_single(cfg).map(|_| ()),
        ExperimentKind::SweepGamma => cmd_sweep_gamma(cfg).map(|_| ()),
        ExperimentKind::SweepN => cmd_sweep_n(cfg).map(|_| ()),
        ExperimentKind::Real => cmd_real(cfg).map(|_| ()),
    }?;
    Ok(cfg.out_dir.join("summary.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(kind: ExperimentKind, dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            kind,
            n: 40,
            gamma: 0.2,
            gamma_grid: vec![0.1, 0.2],
            n_grid: vec![30, 40],
            graphs_per_gamma: 2,
            graphs_per_n: 2,
            runs_per_graph: 2,
            out_dir: dir.to_path_buf(),
            workers: Some(2),
            ..Default::default()
        };
        cfg.sa.t_max = 5;
        cfg.sa.initial_temp = Some(1.0);
        cfg
    }

    #[test]
    fn parallel_map_keeps_order_and_propagates_errors() {
        let items: Vec<usize> = (0..17).collect();
        assert_eq!(
            parallel_map(&items, 4, |&i| Ok(i * i)).unwrap(),
            items.iter().map(|i| i * i).collect::<Vec<_>>()
        );
        let err = parallel_map(&items, 3, |&i| {
            if i == 5 {
                Err(Error::InvalidInput("five".into()))
            } else {
                Ok(i)
            }
        });
        assert!(matches!(err, Err(Error::InvalidInput(m)) if m == "five"));
    }

    #[test]
    fn single_writes_artifacts_deterministically() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let sa = cmd_single(&tiny(ExperimentKind::Single, a.path())).unwrap();
        cmd_single(&tiny(ExperimentKind::Single, b.path())).unwrap();
        for m in Method::ALL {
            let name = format!("trace_{m}.csv");
            let ta = fs::read(a.path().join(&name)).unwrap();
            assert_eq!(ta, fs::read(b.path().join(&name)).unwrap(), "{name}");
            assert!(sa.best(m).is_some());
        }
        assert_eq!(
            fs::read(a.path().join("sample.json")).unwrap(),
            fs::read(b.path().join("sample.json")).unwrap()
        );
        let back: SingleSummary =
            serde_json::from_str(&fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(back.cell.runs.len(), sa.cell.runs.len());
    }

    #[test]
    fn uncorrupted_single_run_agrees_with_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            gamma: 0.0,
            methods: vec![Method::Subsearch, Method::Oracle],
            ..tiny(ExperimentKind::Single, dir.path())
        };
        let s = cmd_single(&cfg).unwrap();
        let sub = s.best(Method::Subsearch).unwrap();
        let oracle = s.best(Method::Oracle).unwrap();
        assert_eq!(sub.subset, oracle.subset);
        // Both estimate on every node; only the spectral labels can differ.
        assert!((sub.estimation_error.unwrap() - oracle.estimation_error.unwrap()).abs() < 0.15);
    }

    #[test]
    fn gamma_sweep_shape_and_recomputation() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(ExperimentKind::SweepGamma, dir.path());
        let s = cmd_sweep_gamma(&cfg).unwrap();
        assert_eq!(s.rows.len(), 2 * Method::ALL.len());
        assert_eq!(s.cells.len(), 4);
        let cells: Vec<CellResult> = fs::read_dir(dir.path().join("cells"))
            .unwrap()
            .map(|e| serde_json::from_str(&fs::read_to_string(e.unwrap().path()).unwrap()).unwrap())
            .collect();
        let mut again = summarize_gamma(&cells, &cfg.gamma_grid, &cfg.methods);
        for (a, b) in again.iter_mut().zip(&s.rows) {
            assert_eq!(a.gamma, b.gamma);
            assert_eq!(a.method, b.method);
            assert!((a.mean_error - b.mean_error).abs() < 1e-12);
        }
        let csv_rows = csv::Reader::from_path(dir.path().join("sweep_gamma.csv"))
            .unwrap()
            .records()
            .count();
        assert_eq!(csv_rows, s.rows.len());

        let resumed = cmd_sweep_gamma(&ExperimentConfig { resume: true, ..cfg }).unwrap();
        assert_eq!(resumed.rows, s.rows);
    }

    #[test]
    fn n_sweep_sorted_with_slope() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            methods: vec![Method::Subsearch, Method::Oracle],
            ..tiny(ExperimentKind::SweepN, dir.path())
        };
        let s = cmd_sweep_n(&cfg).unwrap();
        assert_eq!(s.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![30, 30, 40, 40]);
        assert!(s.slope(Method::Oracle).is_some());
    }

    #[test]
    fn real_graph_outputs_use_file_ids() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("g.txt");
        // Two 1-based triangles joined by an edge, plus a pendant node.
        fs::write(&edges, "1 2\n2 3\n1 3\n4 5\n5 6\n4 6\n3 4\n6 7\n").unwrap();
        let mut cfg = tiny(ExperimentKind::Real, dir.path());
        cfg.k = 2;
        cfg.edge_list = Some(edges);
        cfg.subgraph_frac = 0.9;
        cfg.methods = vec![Method::Subsearch, Method::Pruning, Method::Oracle];
        cfg.num_to_prune = Some(2);
        let s = cmd_real(&cfg).unwrap();
        assert_eq!((s.nodes, s.edges, s.subgraph_size, s.chain_length), (7, 8, 6, 1));
        assert_eq!(s.outcomes.len(), 2);
        let sub = s.outcome(Method::Subsearch).unwrap();
        assert_eq!(sub.labels.len(), 6);
        assert_eq!(sub.removed.len(), 1);
        assert!(sub.labels.iter().all(|&(id, _)| (1..=7).contains(&id)));
        let hist_total: usize = sub.degree_histogram.iter().map(|(a, b)| a + b).sum();
        assert_eq!(hist_total, 7);
        assert!(dir.path().join("degrees_pruning.csv").exists());

        cfg.subgraph_frac = 1.0;
        cfg.edge_list = Some(dir.path().join("missing.txt"));
        assert!(matches!(cmd_real(&cfg), Err(Error::Io(_))));
    }
}
