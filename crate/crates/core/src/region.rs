//! Subregions of the structure space and the branching rule.
//!
//! A [`Region`] constrains the internal nodes at depths `0..=D-2` (the
//! branchable nodes). Depth-(D−1) nodes never appear here: once everything
//! above them is fixed their sample sets are fixed too and they are resolved
//! exactly by a depth-1 search.
//!
//! Threshold windows are inclusive index ranges into the feature's sorted
//! distinct values. Index 0 (the column minimum) is never a candidate since
//! `x < min` holds for no sample.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tree::Layout;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activity {
    Free,
    Off,
    On,
}

/// Domain of one branchable node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDomain {
    pub activity: Activity,
    /// Candidate features, ascending. A singleton means the feature is fixed.
    pub features: Vec<usize>,
    /// Inclusive threshold-index window; present iff `activity == On` and
    /// `features` is a singleton.
    pub window: Option<(u32, u32)>,
}

impl NodeDomain {
    /// `Some(None)` if fixed off, `Some(Some(split))` if fully fixed on,
    /// `None` while something is still free.
    pub fn fixed(&self) -> Option<Option<SplitIndex>> {
        match self.activity {
            Activity::Off => Some(None),
            Activity::On => match self.window {
                Some((lo, hi)) if lo == hi => Some(Some(SplitIndex {
                    feature: self.features[0],
                    index: lo,
                })),
                _ => None,
            },
            Activity::Free => None,
        }
    }
}

/// A split given by feature and threshold index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SplitIndex {
    pub feature: usize,
    pub index: u32,
}

/// A full assignment of the branchable nodes (index `t − 1`; `None` = inactive).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Skeleton(pub Vec<Option<SplitIndex>>);

/// Box over the first-stage variables of the branchable nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    layout: Layout,
    nodes: Vec<NodeDomain>,
    /// β(M), once computed.
    pub lower_bound: Option<f64>,
    /// α(M), once computed.
    pub upper_bound: Option<f64>,
    /// Creation order, used as the FIFO tie-break.
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BranchDecision {
    OnD { node: usize },
    OnA { node: usize, feature: usize },
    OnB { node: usize, pivot_index: u32, pivot: f64 },
    Terminal,
}

/// Root of the search: every branchable node free over all splittable features.
pub fn root_region(data: &Dataset, depth: usize) -> Result<Region> {
    let layout = Layout::new(depth)?;
    let features = data.splittable_features();
    let activity = if features.is_empty() {
        Activity::Off
    } else {
        Activity::Free
    };
    let nodes = layout
        .branchable_nodes()
        .map(|_| NodeDomain {
            activity,
            features: features.clone(),
            window: None,
        })
        .collect();
    Ok(Region {
        layout,
        nodes,
        lower_bound: None,
        upper_bound: None,
        seq: 0,
    })
}

fn full_window(data: &Dataset, feature: usize) -> (u32, u32) {
    (1, (data.sorted_values(feature).len() - 1) as u32)
}

/// Branching priority: free d (breadth-first), then unfixed features (first
/// node, smallest feature), then the widest weighted threshold window.
pub fn next_branch(region: &Region, data: &Dataset) -> BranchDecision {
    if let Some(t) = region.nodes.iter().position(|n| n.activity == Activity::Free) {
        return BranchDecision::OnD { node: t + 1 };
    }
    if let Some(t) = region
        .nodes
        .iter()
        .position(|n| n.activity == Activity::On && n.features.len() > 1)
    {
        return BranchDecision::OnA {
            node: t + 1,
            feature: region.nodes[t].features[0],
        };
    }
    let mut best: Option<(f64, usize)> = None;
    for (k, n) in region.nodes.iter().enumerate() {
        if let (Activity::On, Some((lo, hi))) = (n.activity, n.window) {
            if lo < hi {
                let t = k + 1;
                let score = threshold_uncertainty(data, n.features[0], lo, hi, t);
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, t));
                }
            }
        }
    }
    match best {
        Some((_, t)) => {
            let n = &region.nodes[t - 1];
            let (lo, hi) = n.window.unwrap();
            let pivot_index = lo + (hi - lo) / 2;
            BranchDecision::OnB {
                node: t,
                pivot_index,
                pivot: data.sorted_values(n.features[0])[pivot_index as usize],
            }
        }
        None => BranchDecision::Terminal,
    }
}

/// (b^u − b^l) · 2^(−depth(t)).
pub fn threshold_uncertainty(data: &Dataset, feature: usize, lo: u32, hi: u32, node: usize) -> f64 {
    let v = data.sorted_values(feature);
    let width = v[hi as usize] - v[lo as usize];
    width * 0.5f64.powi(Layout::node_depth(node) as i32)
}

/// Splits `region` into two disjoint children by `decision`. Children carry no
/// cached bounds.
pub fn apply_branch(region: &Region, decision: &BranchDecision, data: &Dataset) -> Result<(Region, Region)> {
    let mut a = region.clone();
    let mut b = region.clone();
    for r in [&mut a, &mut b] {
        r.lower_bound = None;
        r.upper_bound = None;
    }
    match *decision {
        BranchDecision::Terminal => {
            return Err(Error::InvalidBranch("region is terminal".into()));
        }
        BranchDecision::OnD { node } => {
            let k = region.check_node(node)?;
            if region.nodes[k].activity != Activity::Free {
                return Err(Error::InvalidBranch(format!("d of node {node} already fixed")));
            }
            a.set_off_subtree(node);
            b.nodes[k].activity = Activity::On;
            b.sync_window(k, data);
        }
        BranchDecision::OnA { node, feature } => {
            let k = region.check_node(node)?;
            let feats = &region.nodes[k].features;
            if region.nodes[k].activity != Activity::On || feats.len() < 2 {
                return Err(Error::InvalidBranch(format!("node {node} has no open feature choice")));
            }
            if !feats.contains(&feature) {
                return Err(Error::InvalidBranch(format!(
                    "feature {feature} not in domain of node {node}"
                )));
            }
            a.nodes[k].features = vec![feature];
            b.nodes[k].features.retain(|&j| j != feature);
            a.sync_window(k, data);
            b.sync_window(k, data);
        }
        BranchDecision::OnB { node, pivot_index, .. } => {
            let k = region.check_node(node)?;
            let (lo, hi) = region.nodes[k]
                .window
                .ok_or_else(|| Error::InvalidBranch(format!("node {node} has no threshold window")))?;
            if !(lo <= pivot_index && pivot_index < hi) {
                return Err(Error::InvalidBranch(format!(
                    "pivot {pivot_index} does not bisect window ({lo}, {hi})"
                )));
            }
            a.nodes[k].window = Some((lo, pivot_index));
            b.nodes[k].window = Some((pivot_index + 1, hi));
        }
    }
    Ok((a, b))
}

impl Region {
    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Domain of branchable node `t`.
    pub fn node(&self, t: usize) -> &NodeDomain {
        &self.nodes[t - 1]
    }

    pub fn nodes(&self) -> &[NodeDomain] {
        &self.nodes
    }

    /// True when every branchable (d, a, b) is fixed.
    pub fn is_terminal(&self) -> bool {
        self.nodes.iter().all(|n| n.fixed().is_some())
    }

    /// Number of branchable nodes fixed active.
    pub fn n_fixed_on(&self) -> usize {
        self.nodes.iter().filter(|n| n.activity == Activity::On).count()
    }

    /// Whether a full assignment lies inside this region.
    pub fn contains(&self, skeleton: &Skeleton) -> bool {
        self.nodes.iter().zip(&skeleton.0).all(|(n, s)| match (n.activity, s) {
            (Activity::Free, _) => true,
            (Activity::Off, None) => true,
            (Activity::On, Some(s)) => {
                n.features.contains(&s.feature) && n.window.is_none_or(|(lo, hi)| lo <= s.index && s.index <= hi)
            }
            _ => false,
        })
    }

    /// The single skeleton of a terminal region.
    pub fn skeleton(&self) -> Option<Skeleton> {
        self.nodes
            .iter()
            .map(NodeDomain::fixed)
            .collect::<Option<Vec<_>>>()
            .map(Skeleton)
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        for (k, n) in self.nodes.iter().enumerate() {
            let t = k + 1;
            if n.activity == Activity::On && t > 1 && self.nodes[t / 2 - 1].activity == Activity::Off {
                return Err(Error::InvalidBranch(format!("node {t} on under an off parent")));
            }
            if n.activity != Activity::Off && n.features.is_empty() {
                return Err(Error::InvalidBranch(format!("node {t} has an empty feature domain")));
            }
            let want_window = n.activity == Activity::On && n.features.len() == 1;
            match n.window {
                Some((lo, hi)) if !want_window || lo > hi => {
                    return Err(Error::InvalidBranch(format!("node {t} has a bad window ({lo}, {hi})")))
                }
                None if want_window => return Err(Error::InvalidBranch(format!("node {t} is missing its window"))),
                _ => {}
            }
        }
        if let (Some(lb), Some(ub)) = (self.lower_bound, self.upper_bound) {
            if lb > ub {
                return Err(Error::InvalidBranch(format!("lower bound {lb} above upper bound {ub}")));
            }
        }
        Ok(())
    }

    fn check_node(&self, node: usize) -> Result<usize> {
        if node == 0 || node > self.nodes.len() {
            return Err(Error::InvalidBranch(format!("node {node} is not branchable")));
        }
        Ok(node - 1)
    }

    fn set_off_subtree(&mut self, node: usize) {
        let mut stack = vec![node];
        while let Some(t) = stack.pop() {
            if t > self.nodes.len() {
                continue;
            }
            let n = &mut self.nodes[t - 1];
            n.activity = Activity::Off;
            n.window = None;
            stack.extend([2 * t, 2 * t + 1]);
        }
    }

    fn sync_window(&mut self, k: usize, data: &Dataset) {
        let n = &mut self.nodes[k];
        if n.activity == Activity::On && n.features.len() == 1 {
            if n.window.is_none() {
                n.window = Some(full_window(data, n.features[0]));
            }
        } else {
            n.window = None;
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, n) in self.nodes.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            match n.activity {
                Activity::Free => write!(f, "{}:?", k + 1)?,
                Activity::Off => write!(f, "{}:off", k + 1)?,
                Activity::On => match n.window {
                    Some((lo, hi)) => write!(f, "{}:x{}[{lo}..{hi}]", k + 1, n.features[0])?,
                    None => write!(f, "{}:{:?}", k + 1, n.features)?,
                },
            }
        }
        Ok(())
    }
}

/// Every assignment of the branchable nodes respecting d-monotonicity, with
/// thresholds over each feature's separating indices `1..len`.
pub fn enumerate_skeletons(data: &Dataset, depth: usize) -> Result<Vec<Skeleton>> {
    let layout = Layout::new(depth)?;
    let features = data.splittable_features();
    let b = layout.n_branchable();
    let mut out = Vec::new();
    let mut cur = vec![None; b];
    fn rec(
        t: usize,
        b: usize,
        data: &Dataset,
        features: &[usize],
        cur: &mut Vec<Option<SplitIndex>>,
        out: &mut Vec<Skeleton>,
    ) {
        if t > b {
            out.push(Skeleton(cur.clone()));
            return;
        }
        let parent_on = t == 1 || cur[t / 2 - 1].is_some();
        cur[t - 1] = None;
        rec(t + 1, b, data, features, cur, out);
        if parent_on {
            for &j in features {
                for index in 1..data.sorted_values(j).len() as u32 {
                    cur[t - 1] = Some(SplitIndex { feature: j, index });
                    rec(t + 1, b, data, features, cur, out);
                }
            }
            cur[t - 1] = None;
        }
    }
    rec(1, b, data, &features, &mut cur, &mut out);
    Ok(out)
}

/// Size of [`enumerate_skeletons`] without materializing it.
pub fn count_skeletons(data: &Dataset, depth: usize) -> Result<u128> {
    let layout = Layout::new(depth)?;
    let b = layout.n_branchable();
    let per_node: u128 = data
        .splittable_features()
        .iter()
        .map(|&j| (data.sorted_values(j).len() - 1) as u128)
        .sum();
    fn count(t: usize, b: usize, per_node: u128) -> u128 {
        if t > b {
            return 1;
        }
        let below = count(2 * t, b, per_node).saturating_mul(count(2 * t + 1, b, per_node));
        per_node.saturating_mul(below).saturating_add(1)
    }
    Ok(if b == 0 { 1 } else { count(1, b, per_node) })
}
