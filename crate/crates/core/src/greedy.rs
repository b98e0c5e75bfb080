//! Exact depth-1 split search and the greedy CART baseline.
//!
//! All split searches go through one sorted sweep: for each feature the
//! samples are visited in value order and left-side moments (count, Σy, Σy²)
//! are accumulated, so every candidate's SSE is O(1) from
//! `Σy² − (Σy)²/n`. Several disjoint sample groups can share one sweep.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::tree::{fit_leaf_means, Layout, Split, TreeStructure};

/// Gains within `GAIN_TOL · L̂` of each other are treated as ties, and a best
/// gain at or below it counts as no improvement.
pub const GAIN_TOL: f64 = 1e-12;

pub(crate) const NO_GROUP: u32 = u32::MAX;

/// The best split of a sample set on one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Scaled threshold, an observed value of `feature`.
    pub threshold: f64,
    /// Position of `threshold` in the feature's sorted distinct values.
    pub threshold_index: usize,
    /// SSE(parent) − SSE(left) − SSE(right), never negative.
    pub gain: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl SplitCandidate {
    pub fn split(&self) -> Split {
        Split {
            feature: self.feature,
            threshold: self.threshold,
        }
    }
}

/// Rule deciding whether a terminal parent keeps its best depth-1 split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitRule {
    /// Accept iff Δ / L̂ > λ: the split strictly lowers the regularized objective.
    #[default]
    Objective,
    /// Accept iff Δ > λ·|P| / L̂, with |P| the node's sample count.
    PerSample,
}

/// Objective-consistent acceptance: Δ / L̂ > λ.
pub fn accept_split(candidate: &SplitCandidate, lambda: f64, baseline_sse: f64) -> bool {
    candidate.gain / baseline_sse > lambda
}

pub fn accept_split_with(rule: SplitRule, candidate: &SplitCandidate, lambda: f64, baseline_sse: f64) -> bool {
    match rule {
        SplitRule::Objective => accept_split(candidate, lambda, baseline_sse),
        SplitRule::PerSample => {
            let n = (candidate.left_count + candidate.right_count) as f64;
            candidate.gain > lambda * n / baseline_sse
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Moments {
    pub count: usize,
    pub sum: f64,
    pub sumsq: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
        self.sumsq += y * y;
    }

    #[inline]
    pub fn minus(&self, other: &Moments) -> Moments {
        Moments {
            count: self.count - other.count,
            sum: self.sum - other.sum,
            sumsq: self.sumsq - other.sumsq,
        }
    }

    /// Σ(y − ȳ)² via Σy² − (Σy)²/n.
    #[inline]
    pub fn sse(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.sumsq - self.sum * self.sum / self.count as f64).max(0.0)
        }
    }
}

/// What one group may split on.
#[derive(Debug, Clone)]
pub(crate) struct GroupQuery<'a> {
    /// Ascending feature indices.
    pub features: &'a [usize],
    /// Inclusive range of threshold indices; only meaningful for a single feature.
    pub window: Option<(u32, u32)>,
}

#[derive(Clone, Copy)]
struct SweepState {
    left: Moments,
    prev_rank: u32,
    enabled: bool,
}

#[derive(Clone, Copy)]
struct Best {
    gain: f64,
    feature: usize,
    rank: u32,
    left_count: usize,
}

/// Per-group moments of the centered targets.
pub(crate) fn group_moments(data: &Dataset, group_of: &[u32], n_groups: usize) -> Vec<Moments> {
    let mut totals = vec![Moments::default(); n_groups];
    for (&g, &y) in group_of.iter().zip(data.centered()) {
        if g != NO_GROUP {
            totals[g as usize].push(y);
        }
    }
    totals
}

/// Best split per group. `group_of[i]` is sample `i`'s group or [`NO_GROUP`].
///
/// Candidates are scanned feature-ascending then threshold-ascending; a later
/// candidate replaces the incumbent only if it beats it by more than the tie
/// tolerance. Returns `None` for a group without a separating threshold or
/// whose best gain is negligible.
pub(crate) fn best_splits(
    data: &Dataset,
    group_of: &[u32],
    queries: &[GroupQuery<'_>],
    totals: &[Moments],
) -> Vec<Option<SplitCandidate>> {
    let n_groups = queries.len();
    let tol = GAIN_TOL * data.baseline_sse();
    let parent_sse: Vec<f64> = totals.iter().map(Moments::sse).collect();
    let mut best: Vec<Option<Best>> = vec![None; n_groups];

    let mut features: Vec<usize> = queries.iter().flat_map(|q| q.features.iter().copied()).collect();
    features.sort_unstable();
    features.dedup();

    let y = data.centered();
    let mut state = vec![
        SweepState {
            left: Moments::default(),
            prev_rank: 0,
            enabled: false,
        };
        n_groups
    ];
    for &j in &features {
        let mut any = false;
        for (g, q) in queries.iter().enumerate() {
            let enabled = q.features.binary_search(&j).is_ok() && totals[g].count >= 2;
            state[g] = SweepState {
                left: Moments::default(),
                prev_rank: 0,
                enabled,
            };
            any |= enabled;
        }
        if !any {
            continue;
        }
        let ranks = data.ranks(j);
        for &i in data.order(j) {
            let i = i as usize;
            let g = group_of[i];
            if g == NO_GROUP {
                continue;
            }
            let g = g as usize;
            let st = &mut state[g];
            if !st.enabled {
                continue;
            }
            let r = ranks[i];
            if st.left.count > 0 && r != st.prev_rank {
                // every threshold index in (prev_rank, r] induces this partition
                let thr = match queries[g].window {
                    None => Some(r),
                    Some((lo, hi)) => {
                        let a = (st.prev_rank + 1).max(lo);
                        let b = r.min(hi);
                        (a <= b).then_some(b)
                    }
                };
                if let Some(thr) = thr {
                    let right = totals[g].minus(&st.left);
                    let gain = parent_sse[g] - st.left.sse() - right.sse();
                    let replace = match &best[g] {
                        None => true,
                        Some(b) => gain > b.gain + tol,
                    };
                    if replace {
                        best[g] = Some(Best {
                            gain,
                            feature: j,
                            rank: thr,
                            left_count: st.left.count,
                        });
                    }
                }
            }
            st.left.push(y[i]);
            st.prev_rank = r;
        }
    }

    best.into_iter()
        .zip(totals)
        .map(|(b, tot)| {
            let b = b?;
            if b.gain <= tol {
                return None;
            }
            Some(SplitCandidate {
                feature: b.feature,
                threshold: data.sorted_values(b.feature)[b.rank as usize],
                threshold_index: b.rank as usize,
                gain: b.gain.max(0.0),
                left_count: b.left_count,
                right_count: tot.count - b.left_count,
            })
        })
        .collect()
}

/// Best depth-1 split of `samples` over `allowed_features`.
///
/// Thresholds range over the distinct values of each feature among the
/// samples (left is `x < threshold`). Ties go to the smallest feature index,
/// then the smallest threshold. Returns `None` when no threshold separates
/// the samples or no split reduces the SSE.
pub fn best_depth1_split(samples: &[usize], data: &Dataset, allowed_features: &[usize]) -> Option<SplitCandidate> {
    let mut group_of = vec![NO_GROUP; data.n_samples()];
    for &i in samples {
        group_of[i] = 0;
    }
    let mut features = allowed_features.to_vec();
    features.sort_unstable();
    features.dedup();
    let totals = group_moments(data, &group_of, 1);
    let q = GroupQuery {
        features: &features,
        window: None,
    };
    best_splits(data, &group_of, &[q], &totals).pop().flatten()
}

/// Greedy top-down tree of depth `depth` using [`SplitRule::Objective`].
///
/// Depth 0 yields an inactive depth-1 tree (a single constant prediction).
pub fn fit_cart(data: &Dataset, depth: usize, lambda: f64) -> TreeStructure {
    fit_cart_with(data, depth, lambda, SplitRule::Objective)
}

pub fn fit_cart_with(data: &Dataset, depth: usize, lambda: f64, rule: SplitRule) -> TreeStructure {
    let layout = Layout::new(depth.max(1)).expect("depth within limits");
    let mut tree = TreeStructure::inactive(layout);
    if depth == 0 {
        return fit_leaf_means(&tree, data);
    }
    let features = data.splittable_features();
    let n = data.n_samples();
    let mut node_of = vec![1usize; n];
    let mut chosen: Vec<Option<(usize, u32)>> = vec![None; layout.n_internal() + 1];
    for level in 0..depth {
        let first = 1usize << level;
        let width = first;
        // a node may split only if every ancestor split
        let alive: Vec<bool> = (first..first + width)
            .map(|t| t == 1 || tree.is_active(Layout::parent(t)))
            .collect();
        let group_of: Vec<u32> = node_of
            .iter()
            .map(|&t| if alive[t - first] { (t - first) as u32 } else { NO_GROUP })
            .collect();
        let totals = group_moments(data, &group_of, width);
        let queries: Vec<GroupQuery> = (0..width)
            .map(|g| GroupQuery {
                features: if alive[g] { &features } else { &[] },
                window: None,
            })
            .collect();
        let found = best_splits(data, &group_of, &queries, &totals);
        for (g, cand) in found.iter().enumerate() {
            if let Some(c) = cand {
                if accept_split_with(rule, c, lambda, data.baseline_sse()) {
                    tree.set_split(first + g, Some(c.split()));
                    chosen[first + g] = Some((c.feature, c.threshold_index as u32));
                }
            }
        }
        for (i, t) in node_of.iter_mut().enumerate() {
            *t = match chosen[*t] {
                Some((j, idx)) if data.rank(j, i) < idx => 2 * *t,
                _ => 2 * *t + 1,
            };
        }
    }
    fit_leaf_means(&tree, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::objective;

    fn data(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let names = (0..cols.len()).map(|j| format!("x{j}")).collect();
        Dataset::from_raw_columns(names, "y".into(), cols, y).unwrap()
    }

    #[test]
    fn two_point_split() {
        let d = data(vec![vec![0.0, 1.0]], vec![0.0, 10.0]);
        let c = best_depth1_split(&[0, 1], &d, &[0]).unwrap();
        assert_eq!(c.feature, 0);
        assert_eq!(c.threshold, 1.0);
        assert_eq!(c.gain, 50.0);
        assert_eq!((c.left_count, c.right_count), (1, 1));
    }

    #[test]
    fn constant_target_has_no_useful_split() {
        let d = data(vec![vec![0.0, 1.0, 2.0, 3.0]], vec![1.0, 1.0, 1.0, 5.0]);
        // restricted to the three equal targets
        assert!(best_depth1_split(&[0, 1, 2], &d, &[0]).is_none());
    }

    #[test]
    fn single_sample_or_constant_feature_gives_none() {
        let d = data(vec![vec![0.0, 1.0, 2.0], vec![3.0, 3.0, 3.0]], vec![1.0, 2.0, 4.0]);
        assert!(best_depth1_split(&[1], &d, &[0, 1]).is_none());
        assert!(best_depth1_split(&[0, 1, 2], &d, &[1]).is_none());
    }

    #[test]
    fn ties_prefer_smaller_feature_then_threshold() {
        // features 0 and 1 identical → same gains; y symmetric gives two equal thresholds
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let d = data(vec![x.clone(), x], vec![0.0, 1.0, 1.0, 0.0]);
        let c = best_depth1_split(&[0, 1, 2, 3], &d, &[1, 0]).unwrap();
        assert_eq!(c.feature, 0);
        assert_eq!(c.threshold_index, 1);
    }

    #[test]
    fn accept_rule_boundaries() {
        let mk = |gain| SplitCandidate {
            feature: 0,
            threshold: 0.5,
            threshold_index: 1,
            gain,
            left_count: 2,
            right_count: 2,
        };
        assert!(!accept_split(&mk(0.0), 1e-4, 10.0));
        assert!(!accept_split(&mk(0.5), 0.05, 10.0));
        assert!(accept_split(&mk(0.51), 0.05, 10.0));
        // literal variant scales the penalty with the node size
        assert!(accept_split_with(SplitRule::PerSample, &mk(0.05), 0.1, 10.0));
        assert!(!accept_split_with(SplitRule::PerSample, &mk(0.04), 0.1, 10.0));
    }

    #[test]
    fn cart_depth_zero_and_rejected_root_are_constant() {
        let d = data(vec![vec![0.0, 1.0, 2.0, 3.0]], vec![1.0, 2.0, 3.0, 5.0]);
        for tree in [fit_cart(&d, 0, 1e-4), fit_cart(&d, 2, 10.0)] {
            assert_eq!(tree.n_active(), 0);
            assert_eq!(objective(&tree, &d, 10.0).unwrap().objective, 1.0);
        }
    }

    #[test]
    fn cart_fits_step_function() {
        let d = data(
            vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]],
            vec![1.0, 1.0, 4.0, 4.0, 9.0, 9.0],
        );
        let tree = fit_cart(&d, 2, 1e-3);
        let e = objective(&tree, &d, 1e-3).unwrap();
        assert!(e.sse < 1e-20);
        assert_eq!(tree.n_active(), 2);
        tree.check_against(&d).unwrap();
    }
}
