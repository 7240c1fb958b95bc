//! The restricted master problem: covering rows per client and position,
//! packing rows per facility, a cardinality row, one aggregated order row per
//! adjacent position pair, and lazily separated strong-order cut rows.

use crate::evaluation::Column;
use crate::instance::{Instance, RankMatrix};
use crate::lp::{LinearProgram, LpOutcome, LpStatus, Sense, DEFAULT_MAX_PIVOTS, TOL_OPT};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Dual multipliers of the master rows in the all-nonnegative convention
/// (duals of `<=` rows are negated). `eps[b]` belongs to the order row
/// coupling positions `b-1` and `b` (0-based, `b = 1..n`; `eps[0]` unused).
/// `zeta` is aligned with the cut registry.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: f64,
    pub eps: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl DualVector {
    pub fn zeros(n: usize, cuts: usize) -> DualVector {
        DualVector {
            alpha: vec![0.0; n],
            beta: vec![0.0; n],
            gamma: vec![0.0; n],
            delta: 0.0,
            eps: vec![0.0; n],
            zeta: vec![0.0; cuts],
        }
    }

    /// Componentwise convex combination `w * self + (1 - w) * other`.
    /// `other` may predate the latest cuts; missing entries count as zero.
    pub fn combine(&self, other: &DualVector, w: f64) -> DualVector {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            (0..a.len())
                .map(|t| w * a[t] + (1.0 - w) * b.get(t).copied().unwrap_or(0.0))
                .collect()
        };
        DualVector {
            alpha: mix(&self.alpha, &other.alpha),
            beta: mix(&self.beta, &other.beta),
            gamma: mix(&self.gamma, &other.gamma),
            delta: w * self.delta + (1.0 - w) * other.delta,
            eps: mix(&self.eps, &other.eps),
            zeta: mix(&self.zeta, &other.zeta),
        }
    }
}

/// A registered strong-order cut, identified by `(client, facility,
/// boundary)` where `boundary = b` couples positions `b-1` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CutKey {
    pub client: usize,
    pub facility: usize,
    pub boundary: usize,
}

#[derive(Debug, Clone)]
pub struct CutRegistry {
    pub cuts: Vec<(CutKey, u32)>, // key plus the rank threshold r_{ij}
    by_key: HashMap<CutKey, usize>,
}

impl CutRegistry {
    fn new() -> CutRegistry {
        CutRegistry {
            cuts: Vec::new(),
            by_key: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn contains(&self, key: &CutKey) -> bool {
        self.by_key.contains_key(key)
    }
}

#[derive(Debug)]
pub enum MasterError {
    NotOptimal,
    DuplicateCut(CutKey),
}

impl std::fmt::Display for MasterError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MasterError::NotOptimal => write!(f, "last solve was not optimal"),
            MasterError::DuplicateCut(k) => write!(
                f,
                "cut ({}, {}, {}) already present",
                k.client, k.facility, k.boundary
            ),
        }
    }
}

impl std::error::Error for MasterError {}

/// Row-sense convention for the client and position rows. The `Covering`
/// form matches the worked example; `Partitioning` is the printed
/// formulation and is kept for the equivalence regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowConvention {
    Covering,
    Partitioning,
}

pub struct RestrictedMaster<'a> {
    pub inst: &'a Instance,
    pub ranks: &'a RankMatrix,
    lp: LinearProgram,
    columns: Vec<Column>,
    dedup: HashMap<(usize, Vec<(usize, usize)>), usize>,
    cut_rows: Vec<usize>, // LP row per registry entry
    registry: CutRegistry,
    convention: RowConvention,
    last: Option<LpOutcome>,
}

impl<'a> RestrictedMaster<'a> {
    pub fn build(
        inst: &'a Instance,
        ranks: &'a RankMatrix,
        initial_columns: &[Column],
    ) -> RestrictedMaster<'a> {
        Self::build_with(inst, ranks, initial_columns, RowConvention::Covering)
    }

    pub fn build_with(
        inst: &'a Instance,
        ranks: &'a RankMatrix,
        initial_columns: &[Column],
        convention: RowConvention,
    ) -> RestrictedMaster<'a> {
        let n = inst.n;
        let mut lp = LinearProgram::new();
        let cover = match convention {
            RowConvention::Covering => Sense::Ge,
            RowConvention::Partitioning => Sense::Eq,
        };
        for _ in 0..n {
            lp.add_row(cover, 1.0); // client rows: 0..n
        }
        for _ in 0..n {
            lp.add_row(cover, 1.0); // position rows: n..2n
        }
        for _ in 0..n {
            lp.add_row(Sense::Le, 1.0); // facility rows: 2n..3n
        }
        lp.add_row(Sense::Le, inst.p as f64); // cardinality row: 3n
        for _ in 1..n {
            lp.add_row(Sense::Le, (n * n) as f64); // order rows: 3n+1 .. 4n
        }
        let mut rm = RestrictedMaster {
            inst,
            ranks,
            lp,
            columns: Vec::new(),
            dedup: HashMap::new(),
            cut_rows: Vec::new(),
            registry: CutRegistry::new(),
            convention,
            last: None,
        };
        for col in initial_columns {
            rm.add_column(col.clone());
        }
        rm
    }

    pub fn num_rows(&self) -> usize {
        self.lp.num_rows()
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn registry(&self) -> &CutRegistry {
        &self.registry
    }

    pub fn convention(&self) -> RowConvention {
        self.convention
    }

    fn client_row(&self, i: usize) -> usize {
        i
    }

    fn position_row(&self, k: usize) -> usize {
        self.inst.n + k
    }

    fn facility_row(&self, j: usize) -> usize {
        2 * self.inst.n + j
    }

    fn cardinality_row(&self) -> usize {
        3 * self.inst.n
    }

    fn order_row(&self, boundary: usize) -> usize {
        debug_assert!((1..self.inst.n).contains(&boundary));
        3 * self.inst.n + boundary
    }

    /// Sparse LP row coefficients of a column, cut rows included.
    pub fn coefficients(&self, col: &Column) -> Vec<(usize, f64)> {
        let n = self.inst.n;
        let nsq = (n * n) as f64;
        let mut coefs: Vec<(usize, f64)> = Vec::with_capacity(2 * col.couples.len() + 4);
        let mut order: Vec<f64> = vec![0.0; n + 1];
        for &(i, k) in &col.couples {
            coefs.push((self.client_row(i), 1.0));
            coefs.push((self.position_row(k), 1.0));
            let r = self.ranks.rank(i, col.facility) as f64;
            if k >= 1 {
                order[k] += nsq - r + 1.0; // couple sits at the upper side
            }
            if k + 1 < n {
                order[k + 1] += r; // couple sits at the lower side
            }
        }
        coefs.push((self.facility_row(col.facility), 1.0));
        coefs.push((self.cardinality_row(), 1.0));
        for b in 1..n {
            if order[b] != 0.0 {
                coefs.push((self.order_row(b), order[b]));
            }
        }
        for (c, &(key, threshold)) in self.registry.cuts.iter().enumerate() {
            let v = self.cut_coefficient(col, key, threshold);
            if v != 0.0 {
                coefs.push((self.cut_rows[c], v));
            }
        }
        coefs
    }

    fn cut_coefficient(&self, col: &Column, key: CutKey, threshold: u32) -> f64 {
        let mut v = 0.0;
        for &(i, k) in &col.couples {
            let r = self.ranks.rank(i, col.facility);
            if k == key.boundary && r <= threshold {
                v += 1.0;
            }
            if k + 1 == key.boundary && r >= threshold {
                v += 1.0;
            }
        }
        v
    }

    /// Adds a column unless an identical one is pooled; returns its index.
    pub fn add_column(&mut self, col: Column) -> Option<usize> {
        debug_assert!(col.check(self.inst, self.ranks).is_ok(), "malformed column");
        let key = col.key();
        if self.dedup.contains_key(&key) {
            return None;
        }
        let coefs = self.coefficients(&col);
        let idx = self
            .lp
            .add_column(col.cost as f64, &coefs)
            .expect("row indices are internal");
        debug_assert_eq!(idx, self.columns.len());
        self.dedup.insert(key, idx);
        self.columns.push(col);
        Some(idx)
    }

    pub fn contains(&self, col: &Column) -> bool {
        self.dedup.contains_key(&col.key())
    }

    /// Registers a strong-order cut row for `(client, facility, boundary)`.
    pub fn add_cut(&mut self, key: CutKey) -> Result<usize, MasterError> {
        if key.boundary == 0 || key.boundary >= self.inst.n {
            return Err(MasterError::DuplicateCut(key)); // out of range treated as unusable
        }
        if self.registry.contains(&key) {
            return Err(MasterError::DuplicateCut(key));
        }
        let threshold = self.ranks.rank(key.client, key.facility);
        let mut coefs: Vec<(usize, f64)> = Vec::new();
        for (c, col) in self.columns.iter().enumerate() {
            let v = self.cut_coefficient(col, key, threshold);
            if v != 0.0 {
                coefs.push((c, v));
            }
        }
        let row = self
            .lp
            .add_row_with(Sense::Le, 1.0, &coefs)
            .expect("column indices are internal");
        let entry = self.registry.cuts.len();
        self.registry.cuts.push((key, threshold));
        self.registry.by_key.insert(key, entry);
        self.cut_rows.push(row);
        self.last = None;
        Ok(row)
    }

    /// Disables (`enabled = false`) or re-enables a pooled column.
    pub fn set_column_enabled(&mut self, idx: usize, enabled: bool) {
        if enabled {
            self.lp.fix_column_bounds(idx, 0.0, f64::INFINITY);
        } else {
            self.lp.fix_column_bounds(idx, 0.0, 0.0);
        }
    }

    pub fn column_enabled(&self, idx: usize) -> bool {
        self.lp.column_bounds(idx).1 > 0.0
    }

    pub fn solve(&mut self) -> &LpOutcome {
        let out = self.lp.solve(DEFAULT_MAX_PIVOTS);
        self.last = Some(out);
        self.last.as_ref().unwrap()
    }

    pub fn last_outcome(&self) -> Option<&LpOutcome> {
        self.last.as_ref()
    }

    pub fn objective(&self) -> Option<f64> {
        self.last
            .as_ref()
            .filter(|o| o.status == LpStatus::Optimal)
            .map(|o| o.objective)
    }

    /// Per-column LP values of the last optimal solve.
    pub fn column_values(&self) -> Option<&[f64]> {
        self.last
            .as_ref()
            .filter(|o| o.status == LpStatus::Optimal)
            .map(|o| o.primal.as_slice())
    }

    /// Translates the LP row duals into the nonnegative convention.
    pub fn duals(&self) -> Result<DualVector, MasterError> {
        let out = self.last.as_ref().ok_or(MasterError::NotOptimal)?;
        if out.status != LpStatus::Optimal {
            return Err(MasterError::NotOptimal);
        }
        Ok(self.translate_multipliers(&out.row_duals))
    }

    /// Translates a Farkas certificate into the same convention; used with
    /// zero column costs by the Farkas pricer.
    pub fn farkas_duals(&self) -> Result<DualVector, MasterError> {
        let out = self.last.as_ref().ok_or(MasterError::NotOptimal)?;
        let cert = out.farkas.as_ref().ok_or(MasterError::NotOptimal)?;
        Ok(self.translate_multipliers(cert))
    }

    fn translate_multipliers(&self, y: &[f64]) -> DualVector {
        let n = self.inst.n;
        let nonneg = |v: f64| if v > 0.0 { v } else { 0.0 };
        let alpha = (0..n).map(|i| y[self.client_row(i)]).collect();
        let beta = (0..n).map(|k| y[self.position_row(k)]).collect();
        let gamma = (0..n).map(|j| nonneg(-y[self.facility_row(j)])).collect();
        let delta = nonneg(-y[self.cardinality_row()]);
        let mut eps = vec![0.0; n];
        for b in 1..n {
            eps[b] = nonneg(-y[self.order_row(b)]);
        }
        let zeta = self
            .cut_rows
            .iter()
            .map(|&row| nonneg(-y[row]))
            .collect();
        DualVector {
            alpha,
            beta,
            gamma,
            delta,
            eps,
            zeta,
        }
    }

    /// Value of the master dual objective at an arbitrary multiplier vector.
    pub fn dual_objective(&self, dv: &DualVector) -> f64 {
        let n = self.inst.n;
        let nsq = (n * n) as f64;
        let mut z = 0.0;
        z += dv.alpha.iter().sum::<f64>();
        z += dv.beta.iter().sum::<f64>();
        z -= dv.gamma.iter().sum::<f64>();
        z -= self.inst.p as f64 * dv.delta;
        z -= nsq * dv.eps.iter().sum::<f64>();
        z -= dv.zeta.iter().sum::<f64>();
        z
    }

    /// Reduced cost of an arbitrary column against a multiplier vector,
    /// computed from the LP row coefficients. With `zero_cost` the column
    /// cost is dropped (Farkas pricing convention).
    pub fn reduced_cost(&self, col: &Column, dv: &DualVector, zero_cost: bool) -> f64 {
        let mut rc = if zero_cost { 0.0 } else { col.cost as f64 };
        for &(i, k) in &col.couples {
            rc -= dv.alpha[i];
            rc -= dv.beta[k];
        }
        rc += dv.gamma[col.facility];
        rc += dv.delta;
        let n = self.inst.n;
        let nsq = (n * n) as f64;
        for &(i, k) in &col.couples {
            let r = self.ranks.rank(i, col.facility) as f64;
            if k >= 1 {
                rc += (nsq - r + 1.0) * dv.eps[k];
            }
            if k + 1 < n {
                rc += r * dv.eps[k + 1];
            }
        }
        for (c, &(key, threshold)) in self.registry.cuts.iter().enumerate() {
            let v = self.cut_coefficient(col, key, threshold);
            if v != 0.0 {
                rc += v * dv.zeta[c];
            }
        }
        rc
    }

    /// Lagrangian bound pair from the per-facility reduced-cost minima of an
    /// exact pricing round.
    pub fn lp_bound_pair(&self, z: f64, minima: &[f64]) -> (f64, f64) {
        let worst = minima.iter().copied().fold(0.0f64, f64::min);
        let lb1 = z + self.inst.p as f64 * worst;
        let lb2 = z + minima.iter().map(|&v| v.min(0.0)).sum::<f64>();
        (lb1, lb2)
    }

    /// Human-readable dump of the LP rows for fixture comparison.
    pub fn dump(&self) -> String {
        let n = self.inst.n;
        let mut out = String::new();
        let name = |row: usize| -> String {
            if row < n {
                format!("client_{}", row + 1)
            } else if row < 2 * n {
                format!("position_{}", row - n + 1)
            } else if row < 3 * n {
                format!("facility_{}", row - 2 * n + 1)
            } else if row == 3 * n {
                "cardinality".into()
            } else if row <= 4 * n - 1 {
                format!("order_{}", row - 3 * n + 1)
            } else {
                let c = self.cut_rows.iter().position(|&r| r == row).unwrap();
                let (key, _) = self.registry.cuts[c];
                format!(
                    "cut_{}_{}_{}",
                    key.client + 1,
                    key.facility + 1,
                    key.boundary + 1
                )
            }
        };
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.lp.num_rows()];
        for (c, _) in self.columns.iter().enumerate() {
            for &(r, v) in self.lp.column_entries(c) {
                per_row[r].push((c, v));
            }
        }
        for row in 0..self.lp.num_rows() {
            let sense = match self.lp.row_sense(row) {
                Sense::Ge => ">=",
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            let terms: Vec<String> = per_row[row]
                .iter()
                .map(|&(c, v)| format!("{v}*y{c}"))
                .collect();
            writeln!(
                out,
                "{:<14} {} {:>6}  [{}]",
                name(row),
                sense,
                self.lp.row_rhs(row),
                terms.join(" + ")
            )
            .unwrap();
        }
        out
    }

    /// At optimality every pooled column must price nonnegative; used by
    /// debug assertions and the test suite.
    pub fn pool_reduced_costs_ok(&self, dv: &DualVector) -> bool {
        self.columns
            .iter()
            .enumerate()
            .filter(|(idx, _)| self.column_enabled(*idx))
            .all(|(_, col)| self.reduced_cost(col, dv, false) >= -10.0 * TOL_OPT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{ordered_value, solution_to_columns, FacilitySet};
    use crate::instance::{compute_ranks, Instance};
    use crate::lp::LpStatus;

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

    fn example1_pool(inst: &Instance) -> Vec<Column> {
        // y_5^2 = facility 2, {(2,2)}; y_13^1 = facility 1, {(1,1),(3,3)}
        vec![
            Column::new(inst, 1, vec![(1, 1)]),
            Column::new(inst, 0, vec![(0, 0), (2, 2)]),
        ]
    }

    #[test]
    fn order_row_coefficients_match_the_printed_relrmp() {
        let (inst, ranks) = example1();
        let pool = example1_pool(&inst);
        let rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let n = inst.n;
        let coef_a = rm.coefficients(&pool[0]);
        let find = |coefs: &[(usize, f64)], row: usize| {
            coefs
                .iter()
                .find(|&&(r, _)| r == row)
                .map(|&(_, v)| v)
                .unwrap_or(0.0)
        };
        assert_eq!(find(&coef_a, 3 * n + 1), 8.0); // order row between positions 1,2
        assert_eq!(find(&coef_a, 3 * n + 2), 2.0); // order row between positions 2,3
        let coef_b = rm.coefficients(&pool[1]);
        assert_eq!(find(&coef_b, 3 * n + 1), 1.0);
        assert_eq!(find(&coef_b, 3 * n + 2), 3.0);
        assert_eq!(pool[0].cost, 2);
        assert_eq!(pool[1].cost, 10);
    }

    #[test]
    fn singleton_first_position_column_coefficients() {
        let (inst, ranks) = example1();
        let rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let col = Column::new(&inst, 2, vec![(2, 0)]); // facility 3, couple (3,1)
        let coefs = rm.coefficients(&col);
        let n = inst.n;
        // client 3 row, position 1 row, facility 3 row, cardinality,
        // and the order row between positions 1 and 2 with coefficient r_33.
        let as_map: std::collections::HashMap<usize, f64> = coefs.into_iter().collect();
        assert_eq!(as_map[&2], 1.0);
        assert_eq!(as_map[&n], 1.0);
        assert_eq!(as_map[&(2 * n + 2)], 1.0);
        assert_eq!(as_map[&(3 * n)], 1.0);
        assert_eq!(as_map[&(3 * n + 1)], 3.0); // r_33 = 3
        assert_eq!(as_map.len(), 5);
    }

    #[test]
    fn worked_example_lp_value_and_duals() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        let out = rm.solve();
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective, 12.0);
        let dv = rm.duals().unwrap();
        assert_eq!(dv.alpha, vec![0.0, 2.0, 0.0]);
        assert_eq!(dv.beta, vec![0.0, 0.0, 10.0]);
        assert_eq!(dv.gamma, vec![0.0, 0.0, 0.0]);
        assert_eq!(dv.delta, 0.0);
        assert_eq!(dv.eps, vec![0.0, 0.0, 0.0]);
        assert!(rm.pool_reduced_costs_ok(&dv));
    }

    #[test]
    fn empty_pool_is_infeasible_with_certificate() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let out = rm.solve();
        assert_eq!(out.status, LpStatus::Infeasible);
        assert!(out.farkas.is_some());
        let fv = rm.farkas_duals().unwrap();
        assert!(fv.alpha.iter().all(|&a| a >= -1e-9));
    }

    #[test]
    fn integral_solution_bounds_the_lp() {
        let (inst, ranks) = example1();
        let best = FacilitySet::new(vec![0, 2]);
        let cols = solution_to_columns(&inst, &ranks, &best).unwrap();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &cols);
        let out = rm.solve();
        assert_eq!(out.status, LpStatus::Optimal);
        let v = ordered_value(&inst, &ranks, &best).unwrap() as f64;
        assert!(out.objective <= v + 1e-9);
    }

    #[test]
    fn duplicate_columns_are_pooled_once() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        let dup = Column::new(&inst, 1, vec![(1, 1)]);
        assert!(rm.contains(&dup));
        assert!(rm.add_column(dup).is_none());
        assert_eq!(rm.num_columns(), 2);
    }

    #[test]
    fn bound_pair_from_worked_iteration_zero() {
        let (inst, ranks) = example1();
        let rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let (lb1, lb2) = rm.lp_bound_pair(12.0, &[-9.0, -11.0, -9.0]);
        assert_eq!(lb1, -10.0);
        assert_eq!(lb2, -17.0);
        let (c1, c2) = rm.lp_bound_pair(9.0, &[0.0, 0.0, 0.0]);
        assert_eq!(c1, 9.0);
        assert_eq!(c2, 9.0);
    }

    #[test]
    fn adding_an_inactive_cut_keeps_the_optimum() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        let before = rm.solve().objective;
        // order-consistent cut: boundary between positions 2 and 3 anchored
        // at the top-ranked pair, which no pooled column violates
        rm.add_cut(CutKey {
            client: 1,
            facility: 2,
            boundary: 2,
        })
        .unwrap();
        let after = rm.solve().objective;
        assert!(after >= before - 1e-9);
        let dv = rm.duals().unwrap();
        assert_eq!(dv.zeta.len(), 1);
    }

    #[test]
    fn duplicate_cut_is_rejected() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        let key = CutKey {
            client: 0,
            facility: 0,
            boundary: 1,
        };
        rm.add_cut(key).unwrap();
        assert!(matches!(
            rm.add_cut(key),
            Err(MasterError::DuplicateCut(_))
        ));
    }

    #[test]
    fn dump_names_every_row() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        rm.add_cut(CutKey {
            client: 0,
            facility: 0,
            boundary: 1,
        })
        .unwrap();
        let text = rm.dump();
        assert!(text.contains("client_2"));
        assert!(text.contains("order_2"));
        assert!(text.contains("cut_1_1_2"));
        assert!(text.contains("8*y0"));
    }
}
