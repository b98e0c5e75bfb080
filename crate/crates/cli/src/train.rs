use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use ortree::{
    fit_cart_with, load_table, objective, preprocess, rmse, solve, ModelFile, Provenance, SolverConfig, SolverReport,
    SplitRule, SplitSpec, TraceRecord,
};

use crate::manifest::{sibling, unix_now, RunManifest, RunResults};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleArg {
    /// Keep a last-level split iff it lowers the regularized objective.
    Objective,
    /// Keep a last-level split iff its SSE reduction exceeds λ·|node| / L̂.
    PerSample,
}

impl From<RuleArg> for SplitRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Objective => SplitRule::Objective,
            RuleArg::PerSample => SplitRule::PerSample,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TrainArgs {
    /// CSV file with a header row; every used column must be numeric.
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the target column.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    /// Penalty per active split, on the objective normalized by the baseline SSE.
    #[arg(long, default_value_t = 0.0005)]
    pub lambda: f64,
    /// Relative optimality gap at which to stop (1e-4 is 0.01%).
    #[arg(long, default_value_t = 1e-4)]
    pub gap: f64,
    /// Also stop once α − β falls to this value.
    #[arg(long)]
    pub abs_gap: Option<f64>,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 14400.0)]
    pub time_limit: f64,
    #[arg(long)]
    pub max_nodes: Option<u64>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed of the train/test shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of rows used for training.
    #[arg(long, default_value_t = 0.7)]
    pub split: f64,
    /// Model output path; the manifest and trace go next to it.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = RuleArg::Objective)]
    pub terminal_rule: RuleArg,
    /// Regions expanded per round.
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// Compute the completion upper bound for every k-th region only.
    #[arg(long, default_value_t = 1)]
    pub ub_stride: u64,
    /// Do not seed the search with the greedy tree.
    #[arg(long)]
    pub no_warm_start: bool,
    /// Do not print the report table.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs here instead of the recorded path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub struct TrainOutcome {
    pub report: SolverReport,
    pub results: RunResults,
    pub n_train: usize,
    pub n_test: usize,
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

impl TrainArgs {
    pub fn solver_config(&self, workers: usize) -> Result<SolverConfig> {
        anyhow::ensure!(
            self.time_limit.is_finite() && self.time_limit > 0.0,
            "--time-limit must be positive"
        );
        let config = SolverConfig {
            depth: self.depth,
            lambda: self.lambda,
            rel_gap: Some(self.gap),
            abs_gap: self.abs_gap,
            time_limit: Some(Duration::from_secs_f64(self.time_limit)),
            max_nodes: self.max_nodes,
            workers,
            batch_size: self.batch_size,
            warm_start: !self.no_warm_start,
            split_rule: self.terminal_rule.into(),
            upper_bound_stride: self.ub_stride,
            audit: false,
            seed: Some(self.seed),
        };
        config.validate()?;
        Ok(config)
    }
}

pub fn format_gap(gap: f64) -> String {
    let pct = 100.0 * gap;
    if pct < 0.01 {
        "<0.01".into()
    } else {
        format!("{pct:.2}")
    }
}

pub const TABLE_HEADER: &str = "| Method | Train RMSE | Test RMSE | Gap (%) | Time (s) |\n|---|---|---|---|---|";

pub fn train(args: &TrainArgs) -> Result<TrainOutcome> {
    let started = unix_now();
    let clock = Instant::now();
    let workers = args.workers.unwrap_or_else(default_workers);
    let config = args.solver_config(workers)?;

    let table = load_table(&args.data, &args.target).with_context(|| format!("loading {}", args.data.display()))?;
    let full = preprocess(&table)?;
    let (train, test) = full.split(&SplitSpec {
        train_fraction: args.split,
        seed: args.seed,
    })?;

    let report = solve(&train, &config)?;
    let cart = fit_cart_with(&train, args.depth, args.lambda, config.split_rule);
    let cart_objective = objective(&cart, &train, args.lambda)?.objective;
    let elapsed_s = clock.elapsed().as_secs_f64();

    let results = RunResults {
        objective: report.objective,
        lower_bound: report.lower_bound,
        gap: report.gap,
        abs_gap: report.abs_gap,
        termination: format!("{:?}", report.termination).to_lowercase(),
        train_rmse: rmse(&report.tree, &train)?,
        test_rmse: rmse(&report.tree, &test)?,
        cart_objective,
        cart_train_rmse: rmse(&cart, &train)?,
        cart_test_rmse: rmse(&cart, &test)?,
        nodes_explored: report.nodes_explored,
        elapsed_s,
    };

    let model = ModelFile::new(
        &report.tree,
        &train,
        args.lambda,
        Provenance {
            dataset_digest: full.digest(),
            seed: Some(args.seed),
            objective: report.objective,
            lower_bound: report.lower_bound,
            gap: report.gap,
            method: "branch-and-bound".into(),
        },
    );
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    model.save(&args.out)?;
    let trace_path = sibling(&args.out, ".trace.csv");
    write_trace(&trace_path, &report.trace)?;
    let manifest_path = sibling(&args.out, ".manifest.json");
    RunManifest {
        command: "train".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: args.clone(),
        workers,
        dataset_path: args.data.clone(),
        dataset_digest: full.digest(),
        seed: args.seed,
        outputs: vec![args.out.clone(), trace_path, manifest_path.clone()],
        started_unix_s: started,
        finished_unix_s: unix_now(),
        results: results.clone(),
    }
    .save(&manifest_path)?;

    if !args.quiet {
        println!("{TABLE_HEADER}");
        println!(
            "| CART | {:.2} | {:.2} | - | - |",
            results.cart_train_rmse, results.cart_test_rmse
        );
        println!(
            "| ortree | {:.2} | {:.2} | {} | {:.2} |",
            results.train_rmse,
            results.test_rmse,
            format_gap(results.gap),
            results.elapsed_s
        );
    }
    Ok(TrainOutcome {
        report,
        results,
        n_train: train.n_samples(),
        n_test: ortree::Rows::n_rows(&test),
    })
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let mut text = String::from(TraceRecord::CSV_HEADER);
    text.push('\n');
    for r in trace {
        text.push_str(&r.csv_line());
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn run(args: &TrainArgs) -> Result<()> {
    train(args).map(|_| ())
}

pub fn replay(args: &ReplayArgs) -> Result<()> {
    let manifest = RunManifest::load(&args.manifest)?;
    let mut config = manifest.config;
    config.workers = Some(manifest.workers);
    if let Some(out) = &args.out {
        config.out = out.clone();
    }
    let outcome = train(&config)?;
    if outcome.results.objective != manifest.results.objective
        || outcome.results.lower_bound != manifest.results.lower_bound
    {
        anyhow::bail!(
            "replay diverged: objective {} vs recorded {}",
            outcome.results.objective,
            manifest.results.objective
        );
    }
    Ok(())
}
