//! Exhaustive enumeration over all top structures, for checking the search.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::greedy::SplitRule;
use crate::region::{count_skeletons, enumerate_skeletons};
use crate::solver::{solve, Evaluator, SolverConfig, SolverReport, StructureKey};
use crate::tree::TreeStructure;

/// Default cap on the number of structures [`exhaustive_minimum`] will visit.
pub const DEFAULT_ORACLE_CAP: u64 = 2_000_000;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub key: StructureKey,
    pub tree: TreeStructure,
    /// Number of top structures evaluated.
    pub structures: u64,
}

/// Minimum objective over every monotone assignment of the top `D − 1`
/// levels, each completed by the exact depth-1 resolution of its terminal
/// parents. Ties go to the lexicographically smallest key.
pub fn exhaustive_minimum(
    data: &Dataset,
    depth: usize,
    lambda: f64,
    rule: SplitRule,
    cap: u64,
) -> Result<OracleResult> {
    let count = count_skeletons(data, depth)?;
    if count > cap as u128 {
        return Err(Error::OracleCapExceeded {
            count: count.to_string(),
            cap,
        });
    }
    let eval = Evaluator::new(data, depth, lambda, rule)?;
    let mut best: Option<(f64, StructureKey)> = None;
    let skeletons = enumerate_skeletons(data, depth)?;
    for s in &skeletons {
        let decided: Vec<_> = s.0.iter().map(|&x| Some(x)).collect();
        let (value, key) = eval.evaluate_full(&decided);
        let better = match &best {
            None => true,
            Some((v, k)) => value < *v || (value == *v && key < *k),
        };
        if better {
            best = Some((value, key));
        }
    }
    let (objective, key) = best.expect("at least the all-inactive structure");
    Ok(OracleResult {
        tree: eval.tree_of(&key)?,
        objective,
        key,
        structures: skeletons.len() as u64,
    })
}

#[derive(Debug, Clone)]
pub struct OracleCheck {
    pub solver: SolverReport,
    pub oracle: OracleResult,
    pub agrees: bool,
}

/// Relative tolerance for [`verify_oracle`].
pub const ORACLE_REL_TOL: f64 = 1e-9;

/// Runs the solver and the enumeration and compares objectives.
pub fn verify_oracle(data: &Dataset, config: &SolverConfig, cap: u64) -> Result<OracleCheck> {
    let solver = solve(data, config)?;
    let oracle = exhaustive_minimum(data, config.depth, config.lambda, config.split_rule, cap)?;
    let diff = (solver.objective - oracle.objective).abs();
    let agrees = diff <= ORACLE_REL_TOL * oracle.objective.abs().max(1e-12);
    Ok(OracleCheck { solver, oracle, agrees })
}
