//! Fixed-depth binary regression trees.
//!
//! Nodes are numbered breadth-first from 1: children of `t` are `2t` and
//! `2t + 1`. A sample goes left at an active node iff `x[feature] < threshold`
//! and right otherwise; inactive internal nodes send everything right, so a
//! dead subtree collapses onto its rightmost leaf.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Rows};
use crate::error::{Error, Result};

/// Index arithmetic for a complete binary tree of a given depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    depth: usize,
}

impl Layout {
    pub const MAX_DEPTH: usize = 16;

    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 || depth > Self::MAX_DEPTH {
            return Err(Error::InvalidConfig(format!(
                "depth {depth} outside 1..={}",
                Self::MAX_DEPTH
            )));
        }
        Ok(Layout { depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// T = 2^(D+1) − 1.
    pub fn total_nodes(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    pub fn n_internal(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1 << self.depth
    }

    pub fn internal_nodes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_internal()
    }

    pub fn leaf_nodes(&self) -> std::ops::RangeInclusive<usize> {
        self.n_leaves()..=self.total_nodes()
    }

    pub fn is_leaf(&self, t: usize) -> bool {
        t > self.n_internal() && t <= self.total_nodes()
    }

    pub fn parent(t: usize) -> usize {
        t / 2
    }

    pub fn children(t: usize) -> (usize, usize) {
        (2 * t, 2 * t + 1)
    }

    /// Depth of node `t` (root is 0).
    pub fn node_depth(t: usize) -> usize {
        debug_assert!(t >= 1);
        (usize::BITS - 1 - t.leading_zeros()) as usize
    }

    /// Ancestors whose left branch lies on the root-to-`t` path.
    pub fn left_ancestors(t: usize) -> Vec<usize> {
        Self::ancestors_by_side(t, 0)
    }

    /// Ancestors whose right branch lies on the root-to-`t` path.
    pub fn right_ancestors(t: usize) -> Vec<usize> {
        Self::ancestors_by_side(t, 1)
    }

    fn ancestors_by_side(mut t: usize, side: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while t > 1 {
            if t % 2 == side {
                out.push(t / 2);
            }
            t /= 2;
        }
        out.reverse();
        out
    }

    /// Internal nodes at depths `0..=D-2`; these are the ones the search branches on.
    pub fn branchable_nodes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_branchable()
    }

    pub fn n_branchable(&self) -> usize {
        (1 << (self.depth - 1)) - 1
    }

    /// Internal nodes at depth D−1, resolved in closed form by the search.
    pub fn terminal_parents(&self) -> std::ops::RangeInclusive<usize> {
        (1 << (self.depth - 1))..=self.n_internal()
    }
}

/// An active split: `x[feature] < threshold` goes left. `threshold` is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
}

/// First-stage variables of a tree: per internal node an optional split
/// (`None` is d_t = 0), per leaf a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStructure {
    layout: Layout,
    splits: Vec<Option<Split>>,
    leaves: Vec<f64>,
}

impl TreeStructure {
    /// All nodes inactive, all predictions zero.
    pub fn inactive(layout: Layout) -> Self {
        TreeStructure {
            layout,
            splits: vec![None; layout.n_internal()],
            leaves: vec![0.0; layout.n_leaves()],
        }
    }

    /// Builds a tree from per-internal-node splits (index `t − 1`).
    pub fn from_splits(layout: Layout, splits: Vec<Option<Split>>) -> Result<Self> {
        if splits.len() != layout.n_internal() {
            return Err(Error::InvalidTree(format!(
                "expected {} internal nodes, got {}",
                layout.n_internal(),
                splits.len()
            )));
        }
        let tree = TreeStructure {
            layout,
            splits,
            leaves: vec![0.0; layout.n_leaves()],
        };
        tree.check_monotone()?;
        Ok(tree)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn depth(&self) -> usize {
        self.layout.depth
    }

    pub fn split(&self, t: usize) -> Option<Split> {
        self.splits[t - 1]
    }

    pub fn splits(&self) -> &[Option<Split>] {
        &self.splits
    }

    pub fn is_active(&self, t: usize) -> bool {
        self.splits[t - 1].is_some()
    }

    /// Sets node `t`. Does not re-check monotonicity; see [`Self::check_monotone`].
    pub fn set_split(&mut self, t: usize, split: Option<Split>) {
        self.splits[t - 1] = split;
    }

    pub fn leaf_value(&self, t: usize) -> f64 {
        self.leaves[t - self.layout.n_leaves()]
    }

    pub fn leaf_values(&self) -> &[f64] {
        &self.leaves
    }

    pub fn set_leaf_value(&mut self, t: usize, value: f64) {
        let base = self.layout.n_leaves();
        self.leaves[t - base] = value;
    }

    /// Number of active internal nodes.
    pub fn n_active(&self) -> usize {
        self.splits.iter().filter(|s| s.is_some()).count()
    }

    /// Deepest level reached by an active split plus one (0 for a stump-free tree).
    pub fn realized_depth(&self) -> usize {
        self.layout
            .internal_nodes()
            .filter(|&t| self.is_active(t))
            .map(|t| Layout::node_depth(t) + 1)
            .max()
            .unwrap_or(0)
    }

    /// d_t ≤ d_p(t) for every non-root internal node.
    pub fn check_monotone(&self) -> Result<()> {
        for t in self.layout.internal_nodes().skip(1) {
            if self.is_active(t) && !self.is_active(Layout::parent(t)) {
                return Err(Error::InvalidTree(format!(
                    "node {t} is active under inactive parent {}",
                    Layout::parent(t)
                )));
            }
        }
        Ok(())
    }

    /// Checks monotonicity plus that every threshold is an observed value.
    pub fn check_against(&self, data: &Dataset) -> Result<()> {
        self.check_monotone()?;
        for t in self.layout.internal_nodes() {
            if let Some(s) = self.split(t) {
                if s.feature >= data.n_features() {
                    return Err(Error::InvalidTree(format!(
                        "node {t} uses feature {} of {}",
                        s.feature,
                        data.n_features()
                    )));
                }
                if data.threshold_index(s.feature, s.threshold).is_none() {
                    return Err(Error::InvalidTree(format!(
                        "node {t} threshold {} is not an observed value",
                        s.threshold
                    )));
                }
            }
        }
        Ok(())
    }

    /// Leaf reached by a scaled feature vector.
    pub fn route(&self, x: &[f64]) -> usize {
        self.route_with(|j| x[j])
    }

    fn route_with(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut t = 1;
        while t <= self.layout.n_internal() {
            t = match self.splits[t - 1] {
                Some(s) if x(s.feature) < s.threshold => 2 * t,
                _ => 2 * t + 1,
            };
        }
        t
    }

    pub fn route_row<R: Rows + ?Sized>(&self, rows: &R, row: usize) -> usize {
        self.route_with(|j| rows.value(row, j))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.leaf_value(self.route(x))
    }

    pub fn predict_row<R: Rows + ?Sized>(&self, rows: &R, row: usize) -> f64 {
        self.leaf_value(self.route_row(rows, row))
    }
}

/// Sets each leaf to the mean target of its samples; empty leaves take the
/// mean of their nearest ancestor that received samples.
pub fn fit_leaf_means(tree: &TreeStructure, data: &Dataset) -> TreeStructure {
    let layout = tree.layout();
    let mut count = vec![0usize; layout.total_nodes() + 1];
    let mut sum = vec![0.0f64; layout.total_nodes() + 1];
    for i in 0..data.n_samples() {
        let y = data.targets()[i];
        let mut t = 1;
        loop {
            count[t] += 1;
            sum[t] += y;
            if layout.is_leaf(t) {
                break;
            }
            t = match tree.split(t) {
                Some(s) if data.value(i, s.feature) < s.threshold => 2 * t,
                _ => 2 * t + 1,
            };
        }
    }
    let mut out = tree.clone();
    for leaf in layout.leaf_nodes() {
        let mut t = leaf;
        while count[t] == 0 && t > 1 {
            t = Layout::parent(t);
        }
        out.set_leaf_value(leaf, sum[t] / count[t] as f64);
    }
    out
}

/// Per-sample routing and losses plus the regularized objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Leaf node index per sample.
    pub assignment: Vec<usize>,
    pub fitted: Vec<f64>,
    pub losses: Vec<f64>,
    pub sse: f64,
    /// sse / L̂ + λ · (active internal nodes).
    pub objective: f64,
}

pub fn objective(tree: &TreeStructure, data: &Dataset, lambda: f64) -> Result<Evaluation> {
    let baseline = data.baseline_sse();
    if baseline <= 0.0 {
        return Err(Error::DegenerateTarget);
    }
    let n = data.n_samples();
    let mut assignment = Vec::with_capacity(n);
    let mut fitted = Vec::with_capacity(n);
    let mut losses = Vec::with_capacity(n);
    for i in 0..n {
        let leaf = tree.route_row(data, i);
        let f = tree.leaf_value(leaf);
        let r = f - data.targets()[i];
        assignment.push(leaf);
        fitted.push(f);
        losses.push(r * r);
    }
    let sse: f64 = losses.iter().sum();
    let objective = sse / baseline + lambda * tree.n_active() as f64;
    Ok(Evaluation {
        assignment,
        fitted,
        losses,
        sse,
        objective,
    })
}

/// Unregularized root mean squared error in target units.
pub fn rmse<R: Rows + ?Sized>(tree: &TreeStructure, rows: &R) -> Result<f64> {
    let n = rows.n_rows();
    if n == 0 {
        return Err(Error::EmptyRows);
    }
    let sse: f64 = (0..n)
        .map(|i| {
            let r = tree.predict_row(rows, i) - rows.target(i);
            r * r
        })
        .sum();
    Ok((sse / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
        Dataset::from_raw_columns(names, "y".into(), cols, y).unwrap()
    }

    #[test]
    fn layout_indices() {
        let l = Layout::new(2).unwrap();
        assert_eq!(l.total_nodes(), 7);
        assert_eq!(l.internal_nodes(), 1..=3);
        assert_eq!(l.leaf_nodes(), 4..=7);
        assert_eq!(l.branchable_nodes(), 1..=1);
        assert_eq!(l.terminal_parents(), 2..=3);
        assert_eq!(Layout::children(3), (6, 7));
        assert_eq!(Layout::parent(7), 3);
        assert_eq!(Layout::left_ancestors(5), vec![1]);
        assert_eq!(Layout::right_ancestors(5), vec![2]);
        assert_eq!(Layout::node_depth(1), 0);
        assert_eq!(Layout::node_depth(7), 2);
        let l1 = Layout::new(1).unwrap();
        assert_eq!(l1.n_branchable(), 0);
        assert_eq!(l1.terminal_parents(), 1..=1);
        assert!(Layout::new(0).is_err());
    }

    #[test]
    fn ancestor_sets_cover_path() {
        for t in 1..64usize {
            let l = Layout::left_ancestors(t);
            let r = Layout::right_ancestors(t);
            assert_eq!(l.len() + r.len(), Layout::node_depth(t));
            let mut path = Vec::new();
            let mut u = t;
            while u > 1 {
                u /= 2;
                path.push(u);
            }
            let mut both: Vec<usize> = l.iter().chain(&r).copied().collect();
            both.sort_unstable();
            path.sort_unstable();
            assert_eq!(both, path);
        }
    }

    #[test]
    fn equal_value_goes_right() {
        let layout = Layout::new(1).unwrap();
        let tree = TreeStructure::from_splits(
            layout,
            vec![Some(Split {
                feature: 0,
                threshold: 0.5,
            })],
        )
        .unwrap();
        assert_eq!(tree.route(&[0.5]), 3);
        assert_eq!(tree.route(&[0.49]), 2);
    }

    #[test]
    fn inactive_tree_routes_to_rightmost_leaf() {
        let tree = TreeStructure::inactive(Layout::new(3).unwrap());
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(tree.route(&[x]), 15);
        }
    }

    #[test]
    fn dead_subtree_collapses_right() {
        let layout = Layout::new(2).unwrap();
        let s = |f, b| {
            Some(Split {
                feature: f,
                threshold: b,
            })
        };
        let tree = TreeStructure::from_splits(layout, vec![s(0, 0.5), None, s(1, 0.5)]).unwrap();
        // left of the root, node 2 inactive → leaf 5
        assert_eq!(tree.route(&[0.2, 0.0]), 5);
        assert_eq!(tree.route(&[0.2, 0.9]), 5);
        assert_eq!(tree.route(&[0.7, 0.2]), 6);
        assert_eq!(tree.route(&[0.7, 0.7]), 7);
    }

    #[test]
    fn monotonicity_enforced() {
        let layout = Layout::new(2).unwrap();
        let s = Some(Split {
            feature: 0,
            threshold: 0.5,
        });
        assert!(TreeStructure::from_splits(layout, vec![None, s, None]).is_err());
    }

    #[test]
    fn leaf_means_and_empty_leaf_inheritance() {
        let d = data(vec![vec![0.0, 1.0, 2.0, 3.0]], vec![1.0, 3.0, 5.0, 7.0]);
        let layout = Layout::new(2).unwrap();
        // root splits at 2/3 (scaled), node 2 splits at 1/3, node 3 splits at 1.0
        let v = d.sorted_values(0).to_vec();
        let s = |b: f64| {
            Some(Split {
                feature: 0,
                threshold: b,
            })
        };
        let tree = TreeStructure::from_splits(layout, vec![s(v[2]), s(v[1]), s(v[3])]).unwrap();
        let fitted = fit_leaf_means(&tree, &d);
        assert_eq!(fitted.leaf_value(4), 1.0);
        assert_eq!(fitted.leaf_value(5), 3.0);
        assert_eq!(fitted.leaf_value(6), 5.0);
        assert_eq!(fitted.leaf_value(7), 7.0);

        // node 2 inactive: its samples all land in leaf 5
        let d2 = data(vec![vec![0.0, 1.0, 2.0, 3.0]], vec![1.0, 3.0, 4.0, 6.0]);
        let tree = TreeStructure::from_splits(layout, vec![s(v[2]), None, s(v[3])]).unwrap();
        let fitted = fit_leaf_means(&tree, &d2);
        assert_eq!(fitted.leaf_value(6), 4.0);
        assert_eq!(fitted.leaf_value(7), 6.0);
        // leaf 4 is empty (node 2 inactive routes right); it inherits node 2's mean
        assert_eq!(fitted.leaf_value(4), 2.0);
        assert_eq!(fitted.leaf_value(5), 2.0);
    }

    #[test]
    fn inactive_tree_objective_is_one() {
        let d = data(vec![vec![0.0, 1.0, 2.0]], vec![1.0, 2.0, 6.0]);
        let tree = fit_leaf_means(&TreeStructure::inactive(Layout::new(2).unwrap()), &d);
        let e = objective(&tree, &d, 0.3).unwrap();
        assert_eq!(e.objective, 1.0);
        assert!(e.assignment.iter().all(|&t| t == 7));
    }

    #[test]
    fn perfect_fit_costs_only_penalty() {
        let d = data(vec![vec![0.0, 1.0, 2.0]], vec![1.0, 2.0, 6.0]);
        let v = d.sorted_values(0).to_vec();
        let s = |b: f64| {
            Some(Split {
                feature: 0,
                threshold: b,
            })
        };
        let layout = Layout::new(2).unwrap();
        let tree = TreeStructure::from_splits(layout, vec![s(v[1]), None, s(v[2])]).unwrap();
        let tree = fit_leaf_means(&tree, &d);
        let e = objective(&tree, &d, 0.01).unwrap();
        assert_eq!(e.sse, 0.0);
        assert!((e.objective - 0.02).abs() < 1e-15);
        assert_eq!(rmse(&tree, &d).unwrap(), 0.0);
    }

    #[test]
    fn rmse_of_inactive_tree() {
        let d = data(vec![vec![0.0, 1.0]], vec![1.0, 3.0]);
        let tree = fit_leaf_means(&TreeStructure::inactive(Layout::new(1).unwrap()), &d);
        assert_eq!(rmse(&tree, &d).unwrap(), 1.0);
        let empty = d.holdout(&[]);
        assert!(matches!(rmse(&tree, &empty), Err(Error::EmptyRows)));
    }

    #[test]
    fn realized_depth_counts_active_levels() {
        let layout = Layout::new(3).unwrap();
        let mut tree = TreeStructure::inactive(layout);
        assert_eq!(tree.realized_depth(), 0);
        tree.set_split(
            1,
            Some(Split {
                feature: 0,
                threshold: 0.5,
            }),
        );
        tree.set_split(
            3,
            Some(Split {
                feature: 0,
                threshold: 0.7,
            }),
        );
        assert_eq!(tree.realized_depth(), 2);
    }
}
