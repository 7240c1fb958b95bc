//! The compact order-constraint formulation, solved as an LP relaxation for
//! bound comparisons, plus the linear map that carries master points into
//! its variable space.

use crate::instance::{Instance, RankMatrix};
use crate::lp::{LinearProgram, LpOutcome, LpStatus, Sense, DEFAULT_MAX_PIVOTS};
use crate::master::RestrictedMaster;
use crate::pricing::FixingMask;
use crate::stabilization::{run_column_generation, CgTermination, StabConfig};
use std::fmt;
use std::fmt::Write as _;

pub const DEFAULT_SIZE_GUARD: usize = 60;

#[derive(Debug)]
pub struct SizeGuard {
    pub n: usize,
    pub max_n: usize,
}

impl fmt::Display for SizeGuard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n = {} exceeds the compact-model guard {} (n^3 variables)",
            self.n, self.max_n
        )
    }
}

impl std::error::Error for SizeGuard {}

/// Compact model over assignment variables `x[i][j][k]` and open variables
/// `y[j]`, kept as an LP relaxation.
pub struct WocModel {
    n: usize,
    lp: LinearProgram,
    strong_rows: usize,
}

/// A master LP point mapped into the compact space: raw couple sums, no
/// rounding or padding.
#[derive(Debug, Clone)]
pub struct MappedPoint {
    pub n: usize,
    /// `x[(i * n + j) * n + k]`
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl MappedPoint {
    #[inline]
    pub fn x_at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.x[(i * self.n + j) * self.n + k]
    }
}

impl WocModel {
    pub fn num_vars(&self) -> usize {
        self.lp.num_cols()
    }

    pub fn num_rows(&self) -> usize {
        self.lp.num_rows()
    }

    pub fn strong_rows(&self) -> usize {
        self.strong_rows
    }

    pub fn solve(&mut self) -> LpOutcome {
        self.lp.solve(DEFAULT_MAX_PIVOTS)
    }

    fn x_var(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    fn y_var(&self, j: usize) -> usize {
        self.n * self.n * self.n + j
    }

    /// Feasibility of a mapped point against every row, within `tol`.
    /// Client and position equalities are checked as coverings and the
    /// cardinality row from below, matching the directions in which a master
    /// point can always be completed to a compact point.
    pub fn check_point(&self, point: &MappedPoint, tol: f64) -> Result<(), String> {
        let n = self.n;
        let value = |var: usize| -> f64 {
            if var < n * n * n {
                point.x[var]
            } else {
                point.y[var - n * n * n]
            }
        };
        for var in 0..self.lp.num_cols() {
            let v = value(var);
            if !(-tol..=1.0 + tol).contains(&v) {
                return Err(format!("variable {var} = {v} outside [0, 1]"));
            }
        }
        let mut activity = vec![0.0f64; self.lp.num_rows()];
        for var in 0..self.lp.num_cols() {
            let v = value(var);
            if v != 0.0 {
                for &(r, a) in self.lp.column_entries(var) {
                    activity[r] += a * v;
                }
            }
        }
        for row in 0..self.lp.num_rows() {
            let act = activity[row];
            let rhs = self.lp.row_rhs(row);
            let ok = match self.lp.row_sense(row) {
                Sense::Ge => act >= rhs - tol,
                Sense::Le => act <= rhs + tol,
                Sense::Eq => {
                    if row == self.cardinality_row() {
                        act <= rhs + tol
                    } else {
                        act >= rhs - tol
                    }
                }
            };
            if !ok {
                return Err(format!(
                    "row {row} violated: activity {act}, rhs {rhs}"
                ));
            }
        }
        Ok(())
    }

    fn cardinality_row(&self) -> usize {
        // client rows, position rows, linking rows, then cardinality
        2 * self.n + self.n * self.n
    }

    /// Plain-text export: objective, rows, bounds.
    pub fn export_text(&self, inst: &Instance) -> String {
        let n = self.n;
        let mut out = String::new();
        out.push_str("minimize\n");
        let mut terms = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let c = inst.weights[k] * inst.costs[i][j];
                    if c != 0 {
                        terms.push(format!("{c} x_{}_{}_{}", i + 1, j + 1, k + 1));
                    }
                }
            }
        }
        out.push_str(&terms.join(" + "));
        out.push_str("\nsubject to\n");
        for row in 0..self.lp.num_rows() {
            let sense = match self.lp.row_sense(row) {
                Sense::Ge => ">=",
                Sense::Le => "<=",
                Sense::Eq => "=",
            };
            writeln!(out, "r{row}: {} {}", sense, self.lp.row_rhs(row)).unwrap();
        }
        out.push_str("bounds\n0 <= x <= 1, 0 <= y <= 1\n");
        out
    }
}

/// Builds the LP relaxation; `strong` adds the disaggregated order rows.
pub fn build_woc(
    inst: &Instance,
    ranks: &RankMatrix,
    strong: bool,
    max_n: usize,
) -> Result<WocModel, SizeGuard> {
    let n = inst.n;
    if n > max_n {
        return Err(SizeGuard { n, max_n });
    }
    let nsq = (n * n) as f64;
    let mut lp = LinearProgram::new();
    // rows
    for _ in 0..n {
        lp.add_row(Sense::Eq, 1.0); // client rows 0..n
    }
    for _ in 0..n {
        lp.add_row(Sense::Eq, 1.0); // position rows n..2n
    }
    for _ in 0..n * n {
        lp.add_row(Sense::Le, 0.0); // linking rows 2n..2n+n^2
    }
    lp.add_row(Sense::Eq, inst.p as f64); // cardinality
    let weak0 = lp.num_rows();
    for _ in 1..n {
        lp.add_row(Sense::Le, nsq); // weak order rows, boundary 1..n-1
    }
    let mut strong_rows = 0;
    let strong0 = lp.num_rows();
    if strong {
        strong_rows = n * n * (n - 1);
        for _ in 0..strong_rows {
            lp.add_row(Sense::Le, 1.0);
        }
    }

    let client_row = |i: usize| i;
    let position_row = |k: usize| n + k;
    let linking_row = |i: usize, j: usize| 2 * n + i * n + j;
    let strong_row = |i: usize, j: usize, b: usize| strong0 + (i * n + j) * (n - 1) + (b - 1);

    // x variables
    for i in 0..n {
        for j in 0..n {
            let r = ranks.rank(i, j);
            for k in 0..n {
                let mut entries: Vec<(usize, f64)> = vec![
                    (client_row(i), 1.0),
                    (position_row(k), 1.0),
                    (linking_row(i, j), 1.0),
                ];
                if k >= 1 {
                    entries.push((weak0 + k - 1, nsq - r as f64 + 1.0));
                }
                if k + 1 < n {
                    entries.push((weak0 + k, r as f64));
                }
                if strong {
                    // rows anchored at (i', j', b): x_{ij}^b counts when
                    // r_{ij} <= r_{i'j'}; x_{ij}^{b-1} when r_{ij} >= r_{i'j'}
                    for i2 in 0..n {
                        for j2 in 0..n {
                            let r2 = ranks.rank(i2, j2);
                            if k >= 1 && r <= r2 {
                                entries.push((strong_row(i2, j2, k), 1.0));
                            }
                            if k + 1 < n && r >= r2 {
                                entries.push((strong_row(i2, j2, k + 1), 1.0));
                            }
                        }
                    }
                }
                let cost = (inst.weights[k] * inst.costs[i][j]) as f64;
                let var = lp.add_column(cost, &entries).expect("internal indices");
                lp.fix_column_bounds(var, 0.0, 1.0);
            }
        }
    }
    // y variables
    let cardinality = 2 * n + n * n;
    for j in 0..n {
        let mut entries: Vec<(usize, f64)> = (0..n).map(|i| (linking_row(i, j), -1.0)).collect();
        entries.push((cardinality, 1.0));
        let var = lp.add_column(0.0, &entries).expect("internal indices");
        lp.fix_column_bounds(var, 0.0, 1.0);
    }

    let model = WocModel {
        n,
        lp,
        strong_rows,
    };
    debug_assert_eq!(model.y_var(0), n * n * n);
    debug_assert_eq!(model.x_var(n - 1, n - 1, n - 1) + 1, n * n * n);
    Ok(model)
}

/// Raw linear image of the last master LP point.
pub fn map_master_point(rm: &RestrictedMaster) -> Option<MappedPoint> {
    let values = rm.column_values()?;
    let n = rm.inst.n;
    let mut x = vec![0.0f64; n * n * n];
    let mut y = vec![0.0f64; n];
    for (col, &v) in rm.columns().iter().zip(values) {
        if v == 0.0 {
            continue;
        }
        y[col.facility] += v;
        for &(i, k) in &col.couples {
            x[(i * n + col.facility) * n + k] += v;
        }
    }
    Some(MappedPoint { n, x, y })
}

#[derive(Debug, Clone, Copy)]
pub struct GapReport {
    pub mp_lp_value: f64,
    pub woc_lp_value: f64,
    pub gap_mp_pct: f64,
    pub gap_woc_pct: f64,
}

/// Integrality gaps of both relaxations against a reference integer value.
pub fn gap_report(
    inst: &Instance,
    ranks: &RankMatrix,
    incumbent_value: i64,
    max_n: usize,
) -> Result<GapReport, SizeGuard> {
    let mut model = build_woc(inst, ranks, false, max_n)?;
    let woc_out = model.solve();
    assert_eq!(woc_out.status, LpStatus::Optimal, "compact LP must solve");
    let mut rm = RestrictedMaster::build(inst, ranks, &[]);
    let report = run_column_generation(&mut rm, &StabConfig::default(), &FixingMask::empty());
    assert_eq!(report.termination, CgTermination::Converged);
    let z = incumbent_value as f64;
    let gap = |lp: f64| if z > 0.0 { 100.0 * (z - lp) / z } else { 0.0 };
    Ok(GapReport {
        mp_lp_value: report.objective,
        woc_lp_value: woc_out.objective,
        gap_mp_pct: gap(report.objective),
        gap_woc_pct: gap(woc_out.objective),
    })
}
