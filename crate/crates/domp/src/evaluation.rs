//! Evaluation of the ordered median objective and conversion of integer
//! solutions into master columns.

use crate::instance::{Instance, RankMatrix};
use std::fmt;

/// A set of open facilities, kept sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FacilitySet {
    open: Vec<usize>,
}

impl FacilitySet {
    pub fn new(mut open: Vec<usize>) -> FacilitySet {
        open.sort_unstable();
        open.dedup();
        FacilitySet { open }
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.open.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.open
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.open.binary_search(&j).is_ok()
    }
}

impl fmt::Display for FacilitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_based: Vec<String> = self.open.iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "{{{}}}", one_based.join(","))
    }
}

/// A master variable: a facility together with the (client, position) couples
/// it serves. Couples are stored sorted by position. The cost is the
/// position-weighted sum of the couple costs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Column {
    pub facility: usize,
    /// `(client, position)` pairs, 0-based, sorted by position.
    pub couples: Vec<(usize, usize)>,
    pub cost: i64,
}

impl Column {
    pub fn new(inst: &Instance, facility: usize, mut couples: Vec<(usize, usize)>) -> Column {
        couples.sort_unstable_by_key(|&(_, k)| k);
        let cost = couples
            .iter()
            .map(|&(i, k)| inst.weights[k] * inst.costs[i][facility])
            .sum();
        Column {
            facility,
            couples,
            cost,
        }
    }

    /// Identity used for pool deduplication.
    pub fn key(&self) -> (usize, Vec<(usize, usize)>) {
        (self.facility, self.couples.clone())
    }

    /// Checks the structural invariants: distinct clients, distinct
    /// positions, ranks strictly increasing with position, and cost
    /// consistency.
    pub fn check(&self, inst: &Instance, ranks: &RankMatrix) -> Result<(), String> {
        let mut seen_clients = std::collections::HashSet::new();
        let mut prev: Option<(usize, u32)> = None;
        for &(i, k) in &self.couples {
            if !seen_clients.insert(i) {
                return Err(format!("client {i} appears twice"));
            }
            let r = ranks.rank(i, self.facility);
            if let Some((pk, pr)) = prev {
                if k <= pk {
                    return Err(format!("positions not increasing at {k}"));
                }
                if r <= pr {
                    return Err(format!("rank order violated at client {i}"));
                }
            }
            prev = Some((k, r));
        }
        let expect: i64 = self
            .couples
            .iter()
            .map(|&(i, k)| inst.weights[k] * inst.costs[i][self.facility])
            .sum();
        if expect != self.cost {
            return Err(format!("cost {} does not match couples ({expect})", self.cost));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum EvalError {
    EmptySet,
    WrongCardinality { got: usize, want: usize },
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptySet => write!(f, "facility set is empty"),
            EvalError::WrongCardinality { got, want } => {
                write!(f, "facility set has {got} elements, expected {want}")
            }
        }
    }
}

impl std::error::Error for EvalError {}

/// Cheapest service cost per client over the open set, together with the
/// serving facility. Cost ties go to the facility with the smaller global
/// rank (which also means the smaller index among equal costs).
pub fn allocation_costs(
    inst: &Instance,
    ranks: &RankMatrix,
    open: &FacilitySet,
) -> Result<(Vec<i64>, Vec<usize>), EvalError> {
    if open.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let mut costs = Vec::with_capacity(inst.n);
    let mut served_by = Vec::with_capacity(inst.n);
    for i in 0..inst.n {
        let mut best = usize::MAX;
        let mut best_cost = i64::MAX;
        let mut best_rank = u32::MAX;
        for j in open.iter() {
            let c = inst.costs[i][j];
            let r = ranks.rank(i, j);
            if c < best_cost || (c == best_cost && r < best_rank) {
                best = j;
                best_cost = c;
                best_rank = r;
            }
        }
        costs.push(best_cost);
        served_by.push(best);
    }
    Ok((costs, served_by))
}

/// The ordered median value of a complete solution (`|open| = p`).
pub fn ordered_value(inst: &Instance, ranks: &RankMatrix, open: &FacilitySet) -> Result<i64, EvalError> {
    if open.len() != inst.p {
        return Err(EvalError::WrongCardinality {
            got: open.len(),
            want: inst.p,
        });
    }
    Ok(ordered_value_any(inst, ranks, open))
}

/// Same formula for any nonempty open set; used by the greedy construction
/// while the set is still partial.
pub fn ordered_value_any(inst: &Instance, ranks: &RankMatrix, open: &FacilitySet) -> i64 {
    let (mut costs, _) = allocation_costs(inst, ranks, open).expect("nonempty set");
    costs.sort_unstable();
    costs
        .iter()
        .zip(&inst.weights)
        .map(|(c, w)| c * w)
        .sum()
}

/// Decomposes a complete solution into one column per facility that serves
/// at least one client. Positions are assigned by increasing global rank of
/// the chosen allocation, which makes the decomposition deterministic and
/// keeps every column feasible for the pricer.
pub fn solution_to_columns(
    inst: &Instance,
    ranks: &RankMatrix,
    open: &FacilitySet,
) -> Result<Vec<Column>, EvalError> {
    if open.len() != inst.p {
        return Err(EvalError::WrongCardinality {
            got: open.len(),
            want: inst.p,
        });
    }
    let (_, served_by) = allocation_costs(inst, ranks, open)?;
    let mut order: Vec<usize> = (0..inst.n).collect();
    order.sort_unstable_by_key(|&i| ranks.rank(i, served_by[i]));

    let mut per_facility: std::collections::BTreeMap<usize, Vec<(usize, usize)>> =
        std::collections::BTreeMap::new();
    for (k, &i) in order.iter().enumerate() {
        per_facility.entry(served_by[i]).or_default().push((i, k));
    }
    Ok(per_facility
        .into_iter()
        .map(|(j, couples)| Column::new(inst, j, couples))
        .collect())
}
