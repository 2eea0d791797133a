use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sbm_subsearch::experiments::{self, ExperimentConfig, ExperimentKind, Method};
use sbm_subsearch::Error;

/// Robust SBM connectivity estimation by simulated-annealing subgraph search.
#[derive(Parser, Debug)]
#[command(name = "subsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One corrupted graph; trace and summary per method.
    Single(Overrides),
    /// Mean error and 95% interval per outlier fraction and method.
    SweepGamma(Overrides),
    /// Cost-to-overlap ratio against graph size.
    SweepN(Overrides),
    /// SubSearch and baselines on an edge-list graph.
    Real {
        /// Edge-list file (whitespace-separated ids, `#`/`%` comments).
        edge_list: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Outlier fraction; a comma-separated grid for sweep-gamma.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Node count; a comma-separated grid for sweep-n.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated subset of subsearch, filtering, pruning, oracle.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    subgraph_frac: Option<f64>,
    #[arg(long)]
    num_to_prune: Option<usize>,
    #[arg(long)]
    max_removals: Option<usize>,
    /// Wall-clock seconds per SubSearch run; the best state so far is kept.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    graphs: Option<usize>,
    #[arg(long)]
    runs_per_graph: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Reuse finished sweep cells found in the output directory.
    #[arg(long)]
    resume: bool,
}

fn single_value<T: Copy>(flag: &str, v: &[T]) -> Result<T, Error> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::InvalidInput(format!("--{flag} takes one value here"))),
    }
}

fn build_config(kind: ExperimentKind, o: Overrides, edge_list: Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.kind = kind;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(g) = o.gamma {
        match kind {
            ExperimentKind::SweepGamma => cfg.gamma_grid = g,
            _ => cfg.gamma = single_value("gamma", &g)?,
        }
    }
    if let Some(n) = o.n {
        match kind {
            ExperimentKind::SweepN => cfg.n_grid = n,
            _ => cfg.n = single_value("n", &n)?,
        }
    }
    if let Some(k) = o.k {
        cfg.k = k;
        if o.config.is_none() && k != cfg.gamma_matrix.len() {
            // Keep the default assortative structure at the new size.
            cfg.gamma_matrix = (0..k)
                .map(|a| (0..k).map(|b| if a == b { 0.65 } else { 0.35 }).collect())
                .collect();
        }
    }
    if let Some(d) = o.out_dir {
        cfg.out_dir = d;
    }
    if let Some(m) = o.methods {
        cfg.methods = m;
    }
    if let Some(f) = o.subgraph_frac {
        cfg.subgraph_frac = f;
    }
    if o.num_to_prune.is_some() {
        cfg.num_to_prune = o.num_to_prune;
    }
    if o.max_removals.is_some() {
        cfg.max_removals = o.max_removals;
    }
    if o.time_budget.is_some() {
        cfg.time_budget_secs = o.time_budget;
    }
    if let Some(g) = o.graphs {
        cfg.graphs_per_gamma = g;
        cfg.graphs_per_n = g;
    }
    if let Some(r) = o.runs_per_graph {
        cfg.runs_per_graph = r;
    }
    if o.workers.is_some() {
        cfg.workers = o.workers;
    }
    cfg.resume |= o.resume;
    if edge_list.is_some() {
        cfg.edge_list = edge_list;
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, overrides, edge_list) = match cli.command {
        Command::Single(o) => (ExperimentKind::Single, o, None),
        Command::SweepGamma(o) => (ExperimentKind::SweepGamma, o, None),
        Command::SweepN(o) => (ExperimentKind::SweepN, o, None),
        Command::Real { edge_list, overrides } => (ExperimentKind::Real, overrides, edge_list),
    };
    let result = build_config(kind, overrides, edge_list).and_then(|cfg| experiments::run_experiment(&cfg));
    match result {
        Ok(summary) => {
            println!("{}", summary.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
