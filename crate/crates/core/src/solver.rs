//! Reduced-space branch and bound over the top `D − 1` levels.
//!
//! Every bound goes through [`Evaluator::resolve`]: given which branchable
//! nodes are decided, it routes the samples, solves each terminal parent whose
//! sample set is known, and sums the pieces in node order. Lower bounds,
//! completions and the exhaustive oracle all share it, so a structure gets
//! bit-identical values no matter which path evaluates it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::greedy::{
    accept_split_with, best_splits, fit_cart_with, group_moments, GroupQuery, SplitCandidate, SplitRule, NO_GROUP,
};
use crate::region::{apply_branch, next_branch, root_region, Activity, BranchDecision, Region, SplitIndex};
use crate::tree::{fit_leaf_means, Layout, Split, TreeStructure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub depth: usize,
    pub lambda: f64,
    /// Stop once (α − β) / α is at most this.
    pub rel_gap: Option<f64>,
    /// Stop once α − β is at most this.
    pub abs_gap: Option<f64>,
    pub time_limit: Option<Duration>,
    /// Stop after this many regions have been evaluated.
    pub max_nodes: Option<u64>,
    pub workers: usize,
    /// Regions expanded per round. Fixed independently of `workers` so the
    /// search order never depends on the thread count.
    pub batch_size: usize,
    /// Seed the incumbent with the greedy tree.
    pub warm_start: bool,
    pub split_rule: SplitRule,
    /// Compute the completion bound for every k-th region only.
    pub upper_bound_stride: u64,
    /// Keep every pruned region in the report.
    pub audit: bool,
    /// Recorded in the report only; the search itself is deterministic.
    pub seed: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            depth: 2,
            lambda: 5e-4,
            rel_gap: Some(1e-4),
            abs_gap: None,
            time_limit: None,
            max_nodes: None,
            workers: 1,
            batch_size: 64,
            warm_start: true,
            split_rule: SplitRule::Objective,
            upper_bound_stride: 1,
            audit: false,
            seed: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        Layout::new(self.depth)?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be finite and non-negative, got {}", self.lambda));
        }
        match (self.rel_gap, self.abs_gap) {
            (None, None) => return bad("relative and absolute gap cannot both be disabled".into()),
            (Some(g), _) if !(g.is_finite() && g > 0.0) => {
                return bad(format!("relative gap must be finite and positive, got {g}"))
            }
            (_, Some(g)) if !(g.is_finite() && g >= 0.0) => {
                return bad(format!("absolute gap must be finite and non-negative, got {g}"))
            }
            _ => {}
        }
        if self.time_limit.is_some_and(|t| t.is_zero()) {
            return bad("time limit must be positive".into());
        }
        if self.max_nodes == Some(0) {
            return bad("node limit must be positive".into());
        }
        if self.workers == 0 {
            return bad("need at least one worker".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.upper_bound_stride == 0 {
            return bad("upper-bound stride must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Gap,
    TimeLimit,
    NodeLimit,
    Exhausted,
}

/// One line of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_s: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gap: f64,
    pub open_nodes: usize,
}

impl TraceRecord {
    pub const CSV_HEADER: &'static str = "time_s,alpha,beta,gap,open_nodes";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.time_s, self.alpha, self.beta, self.gap, self.open_nodes
        )
    }
}

/// Per-internal-node split indices; `None` is inactive. Compared
/// lexicographically to break objective ties.
pub type StructureKey = Vec<Option<SplitIndex>>;

#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Best tree found, leaves set to sample means.
    pub tree: TreeStructure,
    pub key: StructureKey,
    /// α: objective of `tree`.
    pub objective: f64,
    /// β: global lower bound.
    pub lower_bound: f64,
    /// (α − β) / α.
    pub gap: f64,
    pub abs_gap: f64,
    pub termination: Termination,
    pub nodes_explored: u64,
    pub nodes_pruned: u64,
    pub nodes_fathomed: u64,
    pub elapsed: Duration,
    pub warm_start_objective: Option<f64>,
    pub trace: Vec<TraceRecord>,
    pub dataset_digest: String,
    pub seed: Option<u64>,
    /// Pruned regions with their lower bounds; filled only in audit mode.
    pub pruned_regions: Vec<Region>,
}

/// A fully decided branchable node: `None` inactive, `Some(s)` active with
/// split `s`; the outer `Option` is `None` while undecided.
pub(crate) type Decided = Option<Option<SplitIndex>>;

/// What a branchable node tells the router.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Route {
    /// Activity or feature still open: nothing is known downstream.
    Unknown,
    Off,
    /// Active on `feature` with threshold index somewhere in `lo..=hi`.
    Window {
        feature: usize,
        lo: u32,
        hi: u32,
    },
}

impl Route {
    fn of_decided(d: Decided) -> Route {
        match d {
            None => Route::Unknown,
            Some(None) => Route::Off,
            Some(Some(s)) => Route::Window {
                feature: s.feature,
                lo: s.index,
                hi: s.index,
            },
        }
    }

    fn of_region(region: &Region) -> Vec<Route> {
        region
            .nodes()
            .iter()
            .map(|n| match (n.activity, n.window) {
                (Activity::Off, _) => Route::Off,
                (Activity::On, Some((lo, hi))) => Route::Window {
                    feature: n.features[0],
                    lo,
                    hi,
                },
                _ => Route::Unknown,
            })
            .collect()
    }
}

pub(crate) struct Resolution {
    pub value: f64,
    /// Accepted split of each exactly known terminal parent, in node order.
    pub parents: Vec<Option<SplitCandidate>>,
}

pub(crate) struct Evaluator<'a> {
    data: &'a Dataset,
    layout: Layout,
    lambda: f64,
    rule: SplitRule,
    features: Vec<usize>,
}

pub(crate) struct RegionEval {
    pub lower: f64,
    pub upper: Option<(f64, StructureKey)>,
}

#[derive(Clone, Copy, PartialEq)]
enum ParentState {
    /// Some ancestor is still open.
    Unknown,
    /// Every ancestor is off or has a window: the samples routed here are a
    /// subset of the final sample set.
    Partial,
    /// Every ancestor is off or fixed.
    Exact,
}

impl<'a> Evaluator<'a> {
    pub fn new(data: &'a Dataset, depth: usize, lambda: f64, rule: SplitRule) -> Result<Self> {
        Ok(Evaluator {
            data,
            layout: Layout::new(depth)?,
            lambda,
            rule,
            features: data.splittable_features(),
        })
    }

    /// λ·n_on plus a bound on every terminal parent.
    ///
    /// A sample is routed through a windowed node only if it goes the same
    /// way for every threshold in the window. Exact parents get their exact
    /// cost. Partial parents get min(leaf, best split) on the samples known
    /// to reach them, which can only grow as more samples arrive. Parents
    /// under an open node contribute zero.
    pub fn resolve(&self, routes: &[Route], n_on: usize) -> Resolution {
        let data = self.data;
        let l_hat = data.baseline_sse();
        let first = self.layout.terminal_parents().start().to_owned();
        let n_par = first;

        let mut state = vec![ParentState::Exact; n_par];
        let mut forced_off = vec![false; n_par];
        for (g, (st, off)) in state.iter_mut().zip(&mut forced_off).enumerate() {
            let mut t = (first + g) / 2;
            while t >= 1 {
                match routes[t - 1] {
                    Route::Unknown => *st = ParentState::Unknown,
                    Route::Off => *off = true,
                    Route::Window { lo, hi, .. } if lo < hi && *st == ParentState::Exact => *st = ParentState::Partial,
                    Route::Window { .. } => {}
                }
                t /= 2;
            }
        }

        let group_of: Vec<u32> = (0..data.n_samples())
            .map(|i| {
                let mut t = 1;
                while t < first {
                    t = match routes[t - 1] {
                        Route::Unknown => return NO_GROUP,
                        Route::Off => 2 * t + 1,
                        Route::Window { feature, lo, hi } => {
                            let r = data.rank(feature, i);
                            if r < lo {
                                2 * t
                            } else if r >= hi {
                                2 * t + 1
                            } else {
                                return NO_GROUP;
                            }
                        }
                    };
                }
                (t - first) as u32
            })
            .collect();
        let totals = group_moments(data, &group_of, n_par);
        let queries: Vec<GroupQuery> = (0..n_par)
            .map(|g| GroupQuery {
                features: if state[g] != ParentState::Unknown && !forced_off[g] {
                    &self.features
                } else {
                    &[]
                },
                window: None,
            })
            .collect();
        let found = best_splits(data, &group_of, &queries, &totals);

        let mut sum = 0.0;
        let mut parents = vec![None; n_par];
        for g in 0..n_par {
            let rule = match state[g] {
                ParentState::Unknown => continue,
                ParentState::Partial => SplitRule::Objective,
                ParentState::Exact => self.rule,
            };
            let sse = totals[g].sse();
            match found[g] {
                Some(c) if !forced_off[g] && accept_split_with(rule, &c, self.lambda, l_hat) => {
                    sum += (sse - c.gain) / l_hat + self.lambda;
                    if state[g] == ParentState::Exact {
                        parents[g] = Some(c);
                    }
                }
                _ => sum += sse / l_hat,
            }
        }
        Resolution {
            value: self.lambda * n_on as f64 + sum,
            parents,
        }
    }

    /// Greedy completion of `region` into a full structure, top-down.
    fn complete(&self, region: &Region) -> Vec<Decided> {
        let data = self.data;
        let b = self.layout.n_branchable();
        let mut decided: Vec<Decided> = vec![None; b];
        let mut node_of = vec![1usize; data.n_samples()];
        let l_hat = data.baseline_sse();
        for level in 0..self.layout.depth() - 1 {
            let first = 1usize << level;
            let width = first;
            let mut searching = vec![false; width];
            let mut queries = Vec::with_capacity(width);
            for (g, search) in searching.iter_mut().enumerate() {
                let t = first + g;
                let node = region.node(t);
                let parent_off = t > 1 && decided[t / 2 - 1] == Some(None);
                let q = if parent_off || node.activity == Activity::Off {
                    decided[t - 1] = Some(None);
                    None
                } else if let Some(fixed) = node.fixed() {
                    decided[t - 1] = Some(fixed);
                    None
                } else {
                    Some(GroupQuery {
                        features: &node.features,
                        window: node.window,
                    })
                };
                *search = q.is_some();
                queries.push(q.unwrap_or(GroupQuery {
                    features: &[],
                    window: None,
                }));
            }
            let group_of: Vec<u32> = node_of
                .iter()
                .map(|&t| {
                    if searching[t - first] {
                        (t - first) as u32
                    } else {
                        NO_GROUP
                    }
                })
                .collect();
            let totals = group_moments(data, &group_of, width);
            let found = best_splits(data, &group_of, &queries, &totals);
            for g in (0..width).filter(|&g| searching[g]) {
                let t = first + g;
                let node = region.node(t);
                let as_index = |c: &SplitCandidate| SplitIndex {
                    feature: c.feature,
                    index: c.threshold_index as u32,
                };
                decided[t - 1] = Some(match node.activity {
                    Activity::Free => found[g]
                        .filter(|c| accept_split_with(self.rule, c, self.lambda, l_hat))
                        .map(|c| as_index(&c)),
                    _ => Some(found[g].map(|c| as_index(&c)).unwrap_or(SplitIndex {
                        feature: node.features[0],
                        index: node.window.map_or(1, |(lo, _)| lo),
                    })),
                });
            }
            for (i, t) in node_of.iter_mut().enumerate() {
                *t = match decided[*t - 1] {
                    Some(Some(s)) if data.rank(s.feature, i) < s.index => 2 * *t,
                    _ => 2 * *t + 1,
                };
            }
        }
        decided
    }

    fn key_of(&self, decided: &[Decided], res: &Resolution) -> StructureKey {
        decided
            .iter()
            .map(|d| d.expect("fully decided"))
            .chain(res.parents.iter().map(|p| {
                p.map(|c| SplitIndex {
                    feature: c.feature,
                    index: c.threshold_index as u32,
                })
            }))
            .collect()
    }

    /// Objective and key of a fully decided top structure.
    pub fn evaluate_full(&self, decided: &[Decided]) -> (f64, StructureKey) {
        let n_on = decided.iter().filter(|d| matches!(d, Some(Some(_)))).count();
        let routes: Vec<Route> = decided.iter().map(|&d| Route::of_decided(d)).collect();
        let res = self.resolve(&routes, n_on);
        let key = self.key_of(decided, &res);
        (res.value, key)
    }

    pub fn evaluate(&self, region: &Region, with_upper: bool) -> RegionEval {
        let res = self.resolve(&Route::of_region(region), region.n_fixed_on());
        if region.is_terminal() {
            let decided: Vec<Decided> = region.nodes().iter().map(|n| n.fixed()).collect();
            let key = self.key_of(&decided, &res);
            return RegionEval {
                lower: res.value,
                upper: Some((res.value, key)),
            };
        }
        let upper = with_upper.then(|| self.evaluate_full(&self.complete(region)));
        RegionEval {
            lower: res.value,
            upper,
        }
    }

    /// Converts a key into a tree with leaf means.
    pub fn tree_of(&self, key: &StructureKey) -> Result<TreeStructure> {
        let splits = key
            .iter()
            .map(|s| {
                s.map(|s| Split {
                    feature: s.feature,
                    threshold: self.data.sorted_values(s.feature)[s.index as usize],
                })
            })
            .collect();
        let tree = TreeStructure::from_splits(self.layout, splits)?;
        Ok(fit_leaf_means(&tree, self.data))
    }

    /// Top levels of an arbitrary tree as decided nodes.
    fn decided_from_tree(&self, tree: &TreeStructure) -> Result<Vec<Decided>> {
        self.layout
            .branchable_nodes()
            .map(|t| match tree.split(t) {
                None => Ok(Some(None)),
                Some(s) => {
                    let index = self.data.threshold_index(s.feature, s.threshold).ok_or_else(|| {
                        Error::InvalidTree(format!("node {t}: threshold {} is not an observed value", s.threshold))
                    })?;
                    Ok(Some(Some(SplitIndex {
                        feature: s.feature,
                        index: index as u32,
                    })))
                }
            })
            .collect()
    }
}

struct Open {
    lower: f64,
    seq: u64,
    region: Region,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // reversed: BinaryHeap pops the smallest (lower, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    value: f64,
    key: StructureKey,
}

impl Incumbent {
    fn offer(slot: &mut Option<Incumbent>, value: f64, key: StructureKey) {
        let better = match slot {
            None => true,
            Some(inc) => value < inc.value || (value == inc.value && key < inc.key),
        };
        if better {
            *slot = Some(Incumbent { value, key });
        }
    }
}

pub fn relative_gap(alpha: f64, beta: f64) -> f64 {
    ((alpha - beta) / alpha.abs().max(f64::MIN_POSITIVE)).max(0.0)
}

/// Solves the depth-`config.depth` problem on `data` to the configured gap.
pub fn solve(data: &Dataset, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let eval = Evaluator::new(data, config.depth, config.lambda, config.split_rule)?;

    let mut incumbent: Option<Incumbent> = None;
    let mut warm_start_objective = None;
    if config.warm_start {
        let cart = fit_cart_with(data, config.depth, config.lambda, config.split_rule);
        let (value, key) = eval.evaluate_full(&eval.decided_from_tree(&cart)?);
        warm_start_objective = Some(value);
        Incumbent::offer(&mut incumbent, value, key);
    }

    let mut root = root_region(data, config.depth)?;
    let root_eval = eval.evaluate(&root, true);
    let (ub, key) = root_eval.upper.expect("root completion always computed");
    Incumbent::offer(&mut incumbent, ub, key);
    root.lower_bound = Some(root_eval.lower);
    root.upper_bound = Some(ub);

    let mut explored = 1u64;
    let mut pruned = 0u64;
    let mut fathomed = 0u64;
    let mut seq = 0u64;
    let mut pruned_regions = Vec::new();
    let mut heap = BinaryHeap::new();
    if root.is_terminal() {
        fathomed += 1;
    } else {
        heap.push(Open {
            lower: root_eval.lower,
            seq,
            region: root,
        });
    }

    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut last_trace = Instant::now();
    let termination = loop {
        let alpha = incumbent.as_ref().unwrap().value;
        while heap.peek().is_some_and(|o| o.lower >= alpha) {
            let o = heap.pop().unwrap();
            pruned += 1;
            if config.audit {
                pruned_regions.push(o.region);
            }
        }
        let beta = heap.peek().map_or(alpha, |o| o.lower.min(alpha));
        let gap = relative_gap(alpha, beta);
        let record = TraceRecord {
            time_s: start.elapsed().as_secs_f64(),
            alpha,
            beta,
            gap,
            open_nodes: heap.len(),
        };

        let stop = if heap.is_empty() {
            Some(Termination::Exhausted)
        } else if config.rel_gap.is_some_and(|g| gap <= g) || config.abs_gap.is_some_and(|g| alpha - beta <= g) {
            Some(Termination::Gap)
        } else if config.time_limit.is_some_and(|t| start.elapsed() >= t) {
            Some(Termination::TimeLimit)
        } else if config.max_nodes.is_some_and(|m| explored >= m) {
            Some(Termination::NodeLimit)
        } else {
            None
        };
        let changed = trace.last().is_none_or(|r| r.alpha != alpha || r.beta != beta);
        if stop.is_some() || changed || last_trace.elapsed() >= Duration::from_millis(500) {
            trace.push(record);
            last_trace = Instant::now();
        }
        if let Some(t) = stop {
            break t;
        }

        let mut batch = Vec::with_capacity(config.batch_size);
        while batch.len() < config.batch_size {
            let Some(o) = heap.pop() else { break };
            if o.lower >= alpha {
                pruned += 1;
                if config.audit {
                    pruned_regions.push(o.region);
                }
                continue;
            }
            batch.push(o);
        }
        let mut children = Vec::with_capacity(2 * batch.len());
        for o in &batch {
            let decision = next_branch(&o.region, data);
            debug_assert!(decision != BranchDecision::Terminal);
            let (a, b) = apply_branch(&o.region, &decision, data)?;
            for mut c in [a, b] {
                seq += 1;
                c.seq = seq;
                children.push((o.lower, c));
            }
        }
        let stride = config.upper_bound_stride;
        let evals: Vec<RegionEval> = pool.install(|| {
            children
                .par_iter()
                .map(|(_, c)| eval.evaluate(c, stride == 1 || c.seq % stride == 0))
                .collect()
        });
        for ((parent_lower, mut child), ev) in children.into_iter().zip(evals) {
            explored += 1;
            let lower = ev.lower.max(parent_lower);
            child.lower_bound = Some(lower);
            if let Some((value, key)) = ev.upper {
                child.upper_bound = Some(value);
                Incumbent::offer(&mut incumbent, value, key);
            }
            if child.is_terminal() {
                fathomed += 1;
            } else if lower >= incumbent.as_ref().unwrap().value {
                pruned += 1;
                if config.audit {
                    pruned_regions.push(child);
                }
            } else {
                heap.push(Open {
                    lower,
                    seq: child.seq,
                    region: child,
                });
            }
        }
    };

    let last = *trace.last().unwrap();
    let inc = incumbent.unwrap();
    let tree = eval.tree_of(&inc.key)?;
    Ok(SolverReport {
        tree,
        key: inc.key,
        objective: inc.value,
        lower_bound: last.beta,
        gap: last.gap,
        abs_gap: last.alpha - last.beta,
        termination,
        nodes_explored: explored,
        nodes_pruned: pruned,
        nodes_fathomed: fathomed,
        elapsed: start.elapsed(),
        warm_start_objective,
        trace,
        dataset_digest: data.digest(),
        seed: config.seed,
        pruned_regions,
    })
}

/// Lower bound β(M) of a region.
pub fn lower_bound(region: &Region, data: &Dataset, lambda: f64, rule: SplitRule) -> Result<f64> {
    let eval = Evaluator::new(data, region.layout().depth(), lambda, rule)?;
    Ok(eval.evaluate(region, false).lower)
}

/// Upper bound α(M) of a region with the key of the completed structure.
pub fn upper_bound(region: &Region, data: &Dataset, lambda: f64, rule: SplitRule) -> Result<(f64, StructureKey)> {
    let eval = Evaluator::new(data, region.layout().depth(), lambda, rule)?;
    Ok(eval.evaluate(region, true).upper.expect("upper bound requested"))
}

/// Tree with leaf means for a structure key.
pub fn tree_from_key(data: &Dataset, depth: usize, key: &StructureKey) -> Result<TreeStructure> {
    Evaluator::new(data, depth, 0.0, SplitRule::Objective)?.tree_of(key)
}
