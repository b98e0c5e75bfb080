use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;
use serde::Deserialize;

use ortree::TraceRecord;

use crate::train::{format_gap, train, RuleArg, TrainArgs, TrainOutcome};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// TOML file with one `[[dataset]]` table per entry.
    #[arg(long)]
    pub suite: PathBuf,
    /// Directory for models, traces and the result tables.
    #[arg(long, default_value = "bench-out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    #[serde(rename = "dataset", default)]
    pub datasets: Vec<Entry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub name: String,
    /// Relative paths are resolved against the suite file's directory.
    pub path: PathBuf,
    pub target: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_gap")]
    pub gap: f64,
    #[serde(default = "default_split")]
    pub split: f64,
}

fn default_time_limit() -> f64 {
    14400.0
}
fn default_depth() -> usize {
    2
}
fn default_lambda() -> f64 {
    0.0005
}
fn default_gap() -> f64 {
    1e-4
}
fn default_split() -> f64 {
    0.7
}

/// Properties every completed run must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Audit {
    pub trace_monotone: bool,
    pub dominates_cart: bool,
}

impl Audit {
    pub fn passed(&self) -> bool {
        self.trace_monotone && self.dominates_cart
    }
}

pub fn trace_is_monotone(trace: &[TraceRecord]) -> bool {
    trace.iter().all(|r| r.beta <= r.alpha)
        && trace
            .windows(2)
            .all(|w| w[1].alpha <= w[0].alpha && w[1].beta >= w[0].beta)
}

/// Relative slack for comparing objectives summed in different orders.
pub const DOMINANCE_TOL: f64 = 1e-12;

fn audit(outcome: &TrainOutcome) -> Audit {
    let r = &outcome.results;
    Audit {
        trace_monotone: trace_is_monotone(&outcome.report.trace),
        dominates_cart: r.objective <= r.cart_objective + DOMINANCE_TOL * r.cart_objective.abs(),
    }
}

fn run_entry(entry: &Entry, base: &Path, out_dir: &Path, workers: Option<usize>) -> Result<TrainOutcome> {
    let args = TrainArgs {
        data: base.join(&entry.path),
        target: entry.target.clone(),
        depth: entry.depth,
        lambda: entry.lambda,
        gap: entry.gap,
        abs_gap: None,
        time_limit: entry.time_limit,
        max_nodes: None,
        workers,
        seed: entry.seed,
        split: entry.split,
        out: out_dir.join(format!("{}.json", entry.name)),
        terminal_rule: RuleArg::Objective,
        batch_size: 64,
        ub_stride: 1,
        no_warm_start: false,
        quiet: true,
    };
    train(&args)
}

const BENCH_HEADER: &str =
    "| Dataset | Method | Train RMSE | Test RMSE | Gap (%) | Time (s) |\n|---|---|---|---|---|---|";

const CSV_HEADER: &str = "dataset,method,status,n_train,n_test,train_rmse,test_rmse,objective,lower_bound,gap_pct,time_s,termination,trace_monotone,dominates_cart,error";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn run(args: &BenchArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.suite).with_context(|| format!("reading {}", args.suite.display()))?;
    let suite: Suite = toml::from_str(&text).with_context(|| format!("parsing {}", args.suite.display()))?;
    let base = args.suite.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;

    let mut md = vec![BENCH_HEADER.to_string()];
    let mut csv = vec![CSV_HEADER.to_string()];
    let mut failed = 0usize;
    let mut violations = 0usize;

    for entry in &suite.datasets {
        eprintln!("bench: {}", entry.name);
        match run_entry(entry, base, &args.out_dir, args.workers) {
            Ok(o) => {
                let r = &o.results;
                let a = audit(&o);
                if !a.passed() {
                    violations += 1;
                }
                md.push(format!(
                    "| {} | CART | {:.2} | {:.2} | - | - |",
                    entry.name, r.cart_train_rmse, r.cart_test_rmse
                ));
                md.push(format!(
                    "| {} | ortree | {:.2} | {:.2} | {} | {:.2} |",
                    entry.name,
                    r.train_rmse,
                    r.test_rmse,
                    format_gap(r.gap),
                    r.elapsed_s
                ));
                csv.push(format!(
                    "{},cart,ok,{},{},{},{},{},,,,,,,",
                    csv_field(&entry.name),
                    o.n_train,
                    o.n_test,
                    r.cart_train_rmse,
                    r.cart_test_rmse,
                    r.cart_objective
                ));
                csv.push(format!(
                    "{},ortree,ok,{},{},{},{},{},{},{},{},{},{},{},",
                    csv_field(&entry.name),
                    o.n_train,
                    o.n_test,
                    r.train_rmse,
                    r.test_rmse,
                    r.objective,
                    r.lower_bound,
                    100.0 * r.gap,
                    r.elapsed_s,
                    r.termination,
                    a.trace_monotone,
                    a.dominates_cart
                ));
            }
            Err(e) => {
                failed += 1;
                let msg = format!("{e:#}");
                md.push(format!("| {} | failed | - | - | - | - |", entry.name));
                csv.push(format!(
                    "{},ortree,failed,,,,,,,,,,,,{}",
                    csv_field(&entry.name),
                    csv_field(&msg)
                ));
                eprintln!("bench: {} failed: {msg}", entry.name);
            }
        }
    }

    let md = md.join("\n") + "\n";
    let csv = csv.join("\n") + "\n";
    fs::write(args.out_dir.join("results.md"), &md)?;
    fs::write(args.out_dir.join("results.csv"), &csv)?;
    print!("{md}");
    if violations > 0 {
        eprintln!("bench: {violations} run(s) violated the bound audit");
    }
    Ok(if failed > 0 || violations > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(alpha: f64, beta: f64) -> TraceRecord {
        TraceRecord {
            time_s: 0.0,
            alpha,
            beta,
            gap: 0.0,
            open_nodes: 0,
        }
    }

    #[test]
    fn monotone_trace_check() {
        assert!(trace_is_monotone(&[rec(1.0, 0.0), rec(0.9, 0.2), rec(0.9, 0.9)]));
        assert!(!trace_is_monotone(&[rec(1.0, 0.0), rec(1.1, 0.2)]));
        assert!(!trace_is_monotone(&[rec(1.0, 0.3), rec(0.9, 0.2)]));
        assert!(!trace_is_monotone(&[rec(0.5, 0.6)]));
    }

    #[test]
    fn suite_parses_with_defaults() {
        let s: Suite = toml::from_str(
            "[[dataset]]\nname = \"a\"\npath = \"a.csv\"\ntarget = \"y\"\n\n[[dataset]]\nname = \"b\"\npath = \"b.csv\"\ntarget = \"z\"\nseed = 3\ndepth = 1\n",
        )
        .unwrap();
        assert_eq!(s.datasets.len(), 2);
        assert_eq!(s.datasets[0].lambda, 0.0005);
        assert_eq!(s.datasets[1].seed, 3);
        assert_eq!(s.datasets[1].depth, 1);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
