//! Globally optimal fixed-depth regression trees.
//!
//! The search branches only on the top `D − 1` levels of the tree. Leaf
//! predictions are sample means, thresholds are observed feature values, and
//! the last level of splits is solved exactly once the samples reaching it
//! are known.
//!
//! ```
//! use ortree::{solve, Dataset, SolverConfig};
//!
//! let x = vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]];
//! let y = vec![1.0, 1.0, 4.0, 4.0, 9.0, 9.0];
//! let data = Dataset::from_raw_columns(vec!["x".into()], "y".into(), x, y).unwrap();
//! let report = solve(&data, &SolverConfig { depth: 2, lambda: 1e-3, ..Default::default() }).unwrap();
//! assert_eq!(report.tree.n_active(), 2);
//! ```

pub mod analysis;
pub mod data;
pub mod error;
pub mod greedy;
pub mod model;
pub mod oracle;
pub mod region;
pub mod solver;
pub mod tree;

pub use analysis::struct_count_upper_bound;
pub use data::{
    load_columns, load_table, preprocess, read_columns, read_table, split_indices, Dataset, Holdout, RawTable, Rows,
    ScaleParams, SelectedRows, SplitSpec,
};
pub use error::{Error, Result};
pub use greedy::{
    accept_split, accept_split_with, best_depth1_split, fit_cart, fit_cart_with, SplitCandidate, SplitRule,
};
pub use model::{ModelFile, Provenance, SCHEMA_VERSION};
pub use oracle::{exhaustive_minimum, verify_oracle, OracleCheck, OracleResult};
pub use region::{apply_branch, next_branch, root_region, BranchDecision, Region, Skeleton, SplitIndex};
pub use solver::{lower_bound, solve, upper_bound, SolverConfig, SolverReport, Termination, TraceRecord};
pub use tree::{fit_leaf_means, objective, rmse, Evaluation, Layout, Split, TreeStructure};
