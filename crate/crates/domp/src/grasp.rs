//! Multistart GRASP: randomized partial set, greedy completion, swap local
//! search with first-improvement acceptance, and column harvesting along the
//! improving trajectory. Provides the incumbent and the initial column pool.

use crate::evaluation::{ordered_value_any, solution_to_columns, Column, FacilitySet};
use crate::instance::{Instance, RankMatrix};
use crate::rng::SplitMix64;
use std::collections::HashSet;
use std::fmt;

#[derive(Debug, Clone)]
pub struct GraspConfig {
    /// Replications of the construct + improve cycle.
    pub replications: usize,
    /// Full passes of the swap neighborhood per replication.
    pub local_search_iterations: usize,
    /// Size of the random partial set the greedy completes; defaults to
    /// `p / 2` when absent.
    pub partial_size: Option<usize>,
    pub seed: u64,
}

impl Default for GraspConfig {
    fn default() -> GraspConfig {
        GraspConfig {
            replications: 20,
            local_search_iterations: 10,
            partial_size: None,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GraspResult {
    pub best_set: FacilitySet,
    pub best_value: i64,
    /// Deduplicated columns harvested from every improving solution.
    pub columns: Vec<Column>,
}

#[derive(Debug)]
pub enum GraspError {
    NoReplications,
    PartialTooLarge { q: usize, p: usize },
}

impl fmt::Display for GraspError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraspError::NoReplications => write!(f, "at least one replication is required"),
            GraspError::PartialTooLarge { q, p } => {
                write!(f, "partial size {q} exceeds p = {p}")
            }
        }
    }
}

impl std::error::Error for GraspError {}

/// Draws `q` distinct facilities uniformly without replacement.
pub fn construct_randomized_partial(inst: &Instance, q: usize, rng: &mut SplitMix64) -> FacilitySet {
    debug_assert!(q <= inst.n);
    let mut pool: Vec<usize> = (0..inst.n).collect();
    for i in 0..q {
        let pick = i + rng.next_below((inst.n - i) as u64) as usize;
        pool.swap(i, pick);
    }
    pool.truncate(q);
    FacilitySet::new(pool)
}

/// Completes a partial set to `p` facilities, each step adding the facility
/// with the best resulting objective (ties to the smallest index).
pub fn construct_greedy(inst: &Instance, ranks: &RankMatrix, partial: &FacilitySet) -> FacilitySet {
    let mut open: Vec<usize> = partial.as_slice().to_vec();
    while open.len() < inst.p {
        let mut best_j = usize::MAX;
        let mut best_value = i64::MAX;
        for j in 0..inst.n {
            if open.contains(&j) {
                continue;
            }
            open.push(j);
            let value = ordered_value_any(inst, ranks, &FacilitySet::new(open.clone()));
            open.pop();
            if value < best_value {
                best_value = value;
                best_j = j;
            }
        }
        open.push(best_j);
    }
    FacilitySet::new(open)
}

/// Swap local search over `(open, closed)` pairs, first improvement, with
/// the open set updated in place during the scan. When `harvest` is set the
/// starting solution and every accepted improvement are decomposed into
/// columns.
pub fn local_search(
    inst: &Instance,
    ranks: &RankMatrix,
    start: &FacilitySet,
    passes: usize,
    harvest: bool,
) -> (FacilitySet, i64, Vec<Column>) {
    let mut open: Vec<usize> = start.as_slice().to_vec();
    open.sort_unstable();
    let mut best = ordered_value_any(inst, ranks, &FacilitySet::new(open.clone()));
    let mut harvested: Vec<Column> = Vec::new();
    let mut push_columns = |open: &[usize], harvested: &mut Vec<Column>| {
        if harvest {
            let set = FacilitySet::new(open.to_vec());
            harvested.extend(solution_to_columns(inst, ranks, &set).expect("complete set"));
        }
    };
    push_columns(&open, &mut harvested);

    for _ in 0..passes {
        let snapshot = open.clone();
        for &j1 in &snapshot {
            if !open.contains(&j1) {
                continue;
            }
            let closed: Vec<usize> = (0..inst.n).filter(|j| !open.contains(j)).collect();
            for &j2 in &closed {
                let mut candidate: Vec<usize> =
                    open.iter().copied().filter(|&j| j != j1).collect();
                candidate.push(j2);
                let value = ordered_value_any(inst, ranks, &FacilitySet::new(candidate.clone()));
                if value < best {
                    best = value;
                    candidate.sort_unstable();
                    open = candidate;
                    push_columns(&open, &mut harvested);
                    break; // j1 left the set; move to the next open facility
                }
            }
        }
    }
    (FacilitySet::new(open), best, harvested)
}

fn one_replication(
    inst: &Instance,
    ranks: &RankMatrix,
    cfg: &GraspConfig,
    replication: usize,
) -> (FacilitySet, i64, Vec<Column>) {
    let mut rng = SplitMix64::new(cfg.seed.wrapping_add(replication as u64));
    let q = cfg.partial_size.unwrap_or(inst.p / 2);
    let partial = construct_randomized_partial(inst, q, &mut rng);
    let complete = construct_greedy(inst, ranks, &partial);
    local_search(inst, ranks, &complete, cfg.local_search_iterations, true)
}

fn collect(
    inst: &Instance,
    results: Vec<(FacilitySet, i64, Vec<Column>)>,
) -> GraspResult {
    let _ = inst;
    let mut best_idx = 0usize;
    for (i, r) in results.iter().enumerate() {
        if r.1 < results[best_idx].1 {
            best_idx = i;
        }
    }
    let mut seen: HashSet<(usize, Vec<(usize, usize)>)> = HashSet::new();
    let mut columns = Vec::new();
    for (_, _, cols) in &results {
        for col in cols {
            if seen.insert(col.key()) {
                columns.push(col.clone());
            }
        }
    }
    GraspResult {
        best_set: results[best_idx].0.clone(),
        best_value: results[best_idx].1,
        columns,
    }
}

/// Runs the full heuristic. Replications are independent (seeded as
/// `seed + replication`) and run in parallel under the `parallel` feature;
/// the reduction is in replication order either way.
pub fn run_grasp(
    inst: &Instance,
    ranks: &RankMatrix,
    cfg: &GraspConfig,
) -> Result<GraspResult, GraspError> {
    validate(inst, cfg)?;
    #[cfg(feature = "parallel")]
    let results: Vec<(FacilitySet, i64, Vec<Column>)> = {
        use rayon::prelude::*;
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| one_replication(inst, ranks, cfg, rep))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<(FacilitySet, i64, Vec<Column>)> = (0..cfg.replications)
        .map(|rep| one_replication(inst, ranks, cfg, rep))
        .collect();
    Ok(collect(inst, results))
}

/// Sequential twin of [`run_grasp`] for the benchmark suite.
pub fn run_grasp_seq(
    inst: &Instance,
    ranks: &RankMatrix,
    cfg: &GraspConfig,
) -> Result<GraspResult, GraspError> {
    validate(inst, cfg)?;
    let results: Vec<(FacilitySet, i64, Vec<Column>)> = (0..cfg.replications)
        .map(|rep| one_replication(inst, ranks, cfg, rep))
        .collect();
    Ok(collect(inst, results))
}

fn validate(inst: &Instance, cfg: &GraspConfig) -> Result<(), GraspError> {
    if cfg.replications == 0 {
        return Err(GraspError::NoReplications);
    }
    if let Some(q) = cfg.partial_size {
        if q > inst.p {
            return Err(GraspError::PartialTooLarge { q, p: inst.p });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::ordered_value;
    use crate::instance::{compute_ranks, generate, Instance};
    use crate::oracle::{solve_exhaustive, DEFAULT_LIMIT};

    fn example1() -> (Instance, RankMatrix) {
        let inst = Instance::new(
            2,
            vec![vec![1, 3, 6], vec![3, 1, 8], vec![6, 8, 1]],
            vec![4, 2, 1],
        )
        .unwrap();
        let ranks = compute_ranks(&inst);
        (inst, ranks)
    }

    #[test]
    fn randomized_partial_sizes() {
        let (inst, _) = example1();
        let mut rng = SplitMix64::new(9);
        assert!(construct_randomized_partial(&inst, 0, &mut rng).is_empty());
        let full = construct_randomized_partial(&inst, 3, &mut rng);
        assert_eq!(full.as_slice(), &[0, 1, 2]);
        let mut r1 = SplitMix64::new(4);
        let mut r2 = SplitMix64::new(4);
        assert_eq!(
            construct_randomized_partial(&inst, 1, &mut r1),
            construct_randomized_partial(&inst, 1, &mut r2)
        );
    }

    #[test]
    fn greedy_completion_on_the_worked_instance() {
        let (inst, ranks) = example1();
        // from {3}: both additions give 9, tie resolved to facility 1
        let done = construct_greedy(&inst, &ranks, &FacilitySet::new(vec![2]));
        assert_eq!(done.as_slice(), &[0, 2]);
        // already complete: unchanged
        let same = construct_greedy(&inst, &ranks, &FacilitySet::new(vec![1, 2]));
        assert_eq!(same.as_slice(), &[1, 2]);
    }

    #[test]
    fn greedy_from_empty_picks_best_singleton() {
        let (inst, ranks) = example1();
        let mut one = inst.clone();
        one.p = 1;
        let ranks1 = compute_ranks(&one);
        // singleton values: {1} -> 16, {2} -> 18, {3} -> 24
        assert_eq!(
            ordered_value_any(&one, &ranks1, &FacilitySet::new(vec![0])),
            16
        );
        assert_eq!(
            ordered_value_any(&one, &ranks1, &FacilitySet::new(vec![1])),
            18
        );
        assert_eq!(
            ordered_value_any(&one, &ranks1, &FacilitySet::new(vec![2])),
            24
        );
        let done = construct_greedy(&one, &ranks, &FacilitySet::new(vec![]));
        assert_eq!(done.as_slice(), &[0]);
    }

    #[test]
    fn local_search_improves_the_inferior_pair() {
        let (inst, ranks) = example1();
        let (end, value, _) = local_search(&inst, &ranks, &FacilitySet::new(vec![0, 1]), 1, false);
        assert_eq!(value, 9);
        assert_eq!(ordered_value(&inst, &ranks, &end).unwrap(), 9);
    }

    #[test]
    fn local_search_keeps_an_optimal_solution() {
        let (inst, ranks) = example1();
        let start = FacilitySet::new(vec![0, 2]);
        let (end, value, _) = local_search(&inst, &ranks, &start, 5, false);
        assert_eq!(value, 9);
        assert_eq!(end, start);
    }

    #[test]
    fn harvest_includes_the_printed_columns() {
        let (inst, ranks) = example1();
        let (_, _, cols) = local_search(&inst, &ranks, &FacilitySet::new(vec![0, 2]), 1, true);
        assert!(cols
            .iter()
            .any(|c| c.facility == 0 && c.couples == vec![(0, 0), (1, 2)]));
        assert!(cols.iter().any(|c| c.facility == 2 && c.couples == vec![(2, 1)]));
    }

    #[test]
    fn run_reaches_the_oracle_optimum_on_the_worked_instance() {
        let (inst, ranks) = example1();
        let cfg = GraspConfig {
            replications: 3,
            ..GraspConfig::default()
        };
        let result = run_grasp(&inst, &ranks, &cfg).unwrap();
        assert_eq!(result.best_value, 9);
        assert_eq!(
            ordered_value(&inst, &ranks, &result.best_set).unwrap(),
            result.best_value
        );
        for col in &result.columns {
            col.check(&inst, &ranks).unwrap();
        }
    }

    #[test]
    fn zero_replications_is_an_error() {
        let (inst, ranks) = example1();
        let cfg = GraspConfig {
            replications: 0,
            ..GraspConfig::default()
        };
        assert!(matches!(
            run_grasp(&inst, &ranks, &cfg),
            Err(GraspError::NoReplications)
        ));
    }

    #[test]
    fn deterministic_given_a_seed() {
        let inst = generate(10, 3, 55).unwrap();
        let ranks = compute_ranks(&inst);
        let cfg = GraspConfig::default();
        let a = run_grasp(&inst, &ranks, &cfg).unwrap();
        let b = run_grasp(&inst, &ranks, &cfg).unwrap();
        let c = run_grasp_seq(&inst, &ranks, &cfg).unwrap();
        assert_eq!(a.best_set, b.best_set);
        assert_eq!(a.best_value, b.best_value);
        assert_eq!(a.columns, b.columns);
        assert_eq!(a.best_set, c.best_set);
        assert_eq!(a.columns, c.columns);
    }

    #[test]
    fn never_beats_the_oracle_and_usually_matches_it() {
        let mut matches = 0;
        for seed in 0..8u64 {
            let inst = generate(9, 3, 2200 + seed).unwrap();
            let ranks = compute_ranks(&inst);
            let oracle = solve_exhaustive(&inst, DEFAULT_LIMIT).unwrap();
            let result = run_grasp(&inst, &ranks, &GraspConfig::default()).unwrap();
            assert!(result.best_value >= oracle.best_value);
            if result.best_value == oracle.best_value {
                matches += 1;
            }
        }
        assert!(matches >= 6, "GRASP matched the oracle on {matches}/8");
    }
}
