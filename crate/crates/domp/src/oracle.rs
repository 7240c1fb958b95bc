//! Brute-force enumeration of all p-subsets; the ground truth the rest of
//! the solver is tested against.

use crate::evaluation::FacilitySet;
use crate::instance::Instance;
use std::fmt;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best_value: i64,
    /// Every optimal set, in lexicographic enumeration order.
    pub best_sets: Vec<FacilitySet>,
    pub subsets_evaluated: u64,
}

#[derive(Debug)]
pub struct TooLarge {
    pub subsets: u128,
    pub limit: u64,
}

impl fmt::Display for TooLarge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "instance too large for oracle: C(n,p) = {} exceeds limit {}",
            self.subsets, self.limit
        )
    }
}

impl std::error::Error for TooLarge {}

pub const DEFAULT_LIMIT: u64 = 10_000_000;

fn binomial(n: usize, p: usize) -> u128 {
    let mut acc: u128 = 1;
    for t in 0..p.min(n - p) {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
        if acc > u128::from(u64::MAX) {
            return acc;
        }
    }
    acc
}

struct Search<'a> {
    inst: &'a Instance,
    weights: Vec<i64>,
}

#[derive(Debug, Clone)]
struct Best {
    value: i64,
    sets: Vec<Vec<usize>>,
    evaluated: u64,
}

impl<'a> Search<'a> {
    /// Extends `chosen` with every facility in `first..n`, keeping a running
    /// per-client minimum so each leaf costs one sort instead of a full
    /// re-evaluation.
    fn descend(&self, chosen: &mut Vec<usize>, mins: &[i64], first: usize, best: &mut Best) {
        let n = self.inst.n;
        let need = self.inst.p - chosen.len();
        for j in first..=(n - need) {
            let mut next: Vec<i64> = mins
                .iter()
                .enumerate()
                .map(|(i, &m)| m.min(self.inst.costs[i][j]))
                .collect();
            chosen.push(j);
            if need == 1 {
                next.sort_unstable();
                let value: i64 = next
                    .iter()
                    .zip(&self.weights)
                    .map(|(c, w)| c * w)
                    .sum();
                best.evaluated += 1;
                if value < best.value {
                    best.value = value;
                    best.sets.clear();
                }
                if value == best.value {
                    best.sets.push(chosen.clone());
                }
            } else {
                self.descend(chosen, &next, j + 1, best);
            }
            chosen.pop();
        }
    }

    fn branch(&self, j0: usize) -> Best {
        let n = self.inst.n;
        let mut best = Best {
            value: i64::MAX,
            sets: Vec::new(),
            evaluated: 0,
        };
        let mins: Vec<i64> = (0..n).map(|i| self.inst.costs[i][j0]).collect();
        let mut chosen = vec![j0];
        if self.inst.p == 1 {
            let mut sorted = mins;
            sorted.sort_unstable();
            best.value = sorted
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| c * w)
                .sum();
            best.sets.push(chosen);
            best.evaluated = 1;
        } else {
            self.descend(&mut chosen, &mins, j0 + 1, &mut best);
        }
        best
    }
}

fn merge(mut acc: Best, other: Best) -> Best {
    acc.evaluated += other.evaluated;
    if other.value < acc.value {
        acc.value = other.value;
        acc.sets = other.sets;
    } else if other.value == acc.value {
        acc.sets.extend(other.sets);
    }
    acc
}

fn finish(inst: &Instance, branches: Vec<Best>) -> OracleResult {
    let mut total = Best {
        value: i64::MAX,
        sets: Vec::new(),
        evaluated: 0,
    };
    for b in branches {
        total = merge(total, b);
    }
    debug_assert_eq!(total.evaluated, binomial(inst.n, inst.p) as u64);
    OracleResult {
        best_value: total.value,
        best_sets: total.sets.into_iter().map(FacilitySet::new).collect(),
        subsets_evaluated: total.evaluated,
    }
}

/// Enumerates every subset of size `p`. Refuses when `C(n, p)` exceeds
/// `limit`.
pub fn solve_exhaustive(inst: &Instance, limit: u64) -> Result<OracleResult, TooLarge> {
    let count = binomial(inst.n, inst.p);
    if count > u128::from(limit) {
        return Err(TooLarge {
            subsets: count,
            limit,
        });
    }
    let search = Search {
        inst,
        weights: inst.weights.clone(),
    };
    let firsts: Vec<usize> = (0..=(inst.n - inst.p)).collect();

    #[cfg(feature = "parallel")]
    let branches: Vec<Best> = {
        use rayon::prelude::*;
        firsts.par_iter().map(|&j0| search.branch(j0)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let branches: Vec<Best> = firsts.iter().map(|&j0| search.branch(j0)).collect();

    Ok(finish(inst, branches))
}

/// Sequential variant, kept public so the benchmark suite can compare it
/// against the parallel path.
pub fn solve_exhaustive_seq(inst: &Instance, limit: u64) -> Result<OracleResult, TooLarge> {
    let count = binomial(inst.n, inst.p);
    if count > u128::from(limit) {
        return Err(TooLarge {
            subsets: count,
            limit,
        });
    }
    let search = Search {
        inst,
        weights: inst.weights.clone(),
    };
    let branches: Vec<Best> = (0..=(inst.n - inst.p)).map(|j0| search.branch(j0)).collect();
    Ok(finish(inst, branches))
}
