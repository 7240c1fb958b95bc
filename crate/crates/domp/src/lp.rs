//! A self-contained dense LP kernel: bounded-variable primal simplex with a
//! two-phase start, explicit basis inverse, Bland's rule as an anti-cycling
//! fallback, warm restarts after adding columns, and a Farkas certificate on
//! infeasibility.
//!
//! Problem shape: minimize `c^T x` subject to rows `a_i^T x {>=,<=,=} b_i`
//! and box bounds `l <= x <= u` (default `[0, +inf)`). Scale target is a few
//! hundred rows and a few thousand columns, so a dense `B^{-1}` is fine.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

/// Temporary diagnostics: total solves and pivots across the process.
pub static SOLVE_COUNT: AtomicU64 = AtomicU64::new(0);
pub static PIVOT_COUNT: AtomicU64 = AtomicU64::new(0);
pub static T_BUILD: AtomicU64 = AtomicU64::new(0);
pub static T_STEP_PRICE: AtomicU64 = AtomicU64::new(0);
pub static T_STEP_RATIO: AtomicU64 = AtomicU64::new(0);
pub static T_DEVEX: AtomicU64 = AtomicU64::new(0);
pub static T_REFACTOR: AtomicU64 = AtomicU64::new(0);
pub static T_RECOMPUTE: AtomicU64 = AtomicU64::new(0);
fn bump(c: &AtomicU64, t: std::time::Instant) {
    c.fetch_add(t.elapsed().as_micros() as u64, Ordering::Relaxed);
}

/// Feasibility / complementarity tolerance.
pub const TOL_FEAS: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const TOL_OPT: f64 = 1e-6;
const TOL_PIVOT: f64 = 1e-9;
const REFACTOR_EVERY: usize = 256;
const BLAND_TRIGGER: usize = 40;
// Degenerate-stall escape: after this many consecutive zero-length steps the
// bounds of the basic variables are expanded by a tiny deterministic amount,
// which breaks the ties; the true bounds are restored at optimality.
const PERTURB_TRIGGER: usize = 60;
const PERTURB_ROUNDS: usize = 40;
const PERTURB_BASE: f64 = 1e-7;
pub const DEFAULT_MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Ge,
    Le,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    sense: Sense,
    rhs: f64,
}

#[derive(Debug, Clone)]
struct Col {
    cost: f64,
    entries: Vec<(usize, f64)>,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    /// Values of the structural columns.
    pub primal: Vec<f64>,
    /// Row duals; `>=` rows carry nonnegative duals, `<=` rows nonpositive,
    /// `=` rows are unrestricted.
    pub row_duals: Vec<f64>,
    /// Infeasibility certificate with the same sign convention: aggregating
    /// the rows with these multipliers bounds every feasible point away from
    /// the aggregated right-hand side.
    pub farkas: Option<Vec<f64>>,
    pub pivots: usize,
}

#[derive(Debug)]
pub struct DimensionError(pub String);

impl fmt::Display for DimensionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "dimension error: {}", self.0)
    }
}

impl std::error::Error for DimensionError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
}

/// Structure-stable identity of a basis member, so a saved basis survives
/// column additions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasisVar {
    Struct(usize),
    Slack(usize),
}

#[derive(Debug, Clone)]
struct SavedBasis {
    basic: Vec<BasisVar>,
    struct_at_upper: Vec<bool>,
    slack_at_upper: Vec<bool>,
    /// Basis inverse at the last optimum, so warm restarts skip the
    /// O(m^3) refactorization.
    binv: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    rows: Vec<Row>,
    cols: Vec<Col>,
    saved: Option<SavedBasis>,
}

impl LinearProgram {
    pub fn new() -> LinearProgram {
        LinearProgram::default()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_sense(&self, row: usize) -> Sense {
        self.rows[row].sense
    }

    pub fn row_rhs(&self, row: usize) -> f64 {
        self.rows[row].rhs
    }

    pub fn column_cost(&self, col: usize) -> f64 {
        self.cols[col].cost
    }

    pub fn column_entries(&self, col: usize) -> &[(usize, f64)] {
        &self.cols[col].entries
    }

    pub fn column_bounds(&self, col: usize) -> (f64, f64) {
        (self.cols[col].lower, self.cols[col].upper)
    }

    /// Adds an empty row; later columns may reference it.
    pub fn add_row(&mut self, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { sense, rhs });
        if let Some(saved) = &mut self.saved {
            // The new slack starts basic; if the row is violated, the solve
            // falls back to a cold start via the feasibility check.
            saved.basic.push(BasisVar::Slack(self.rows.len() - 1));
            saved.slack_at_upper.push(false);
        }
        self.rows.len() - 1
    }

    /// Adds a row with coefficients on existing columns.
    pub fn add_row_with(
        &mut self,
        sense: Sense,
        rhs: f64,
        coefficients: &[(usize, f64)],
    ) -> Result<usize, DimensionError> {
        for &(c, _) in coefficients {
            if c >= self.cols.len() {
                return Err(DimensionError(format!(
                    "row references column {c} of {}",
                    self.cols.len()
                )));
            }
        }
        let row = self.add_row(sense, rhs);
        for &(c, v) in coefficients {
            if v != 0.0 {
                self.cols[c].entries.push((row, v));
            }
        }
        Ok(row)
    }

    /// Adds a column with bounds `[0, +inf)`; a previous basis remains a
    /// valid warm start.
    pub fn add_column(
        &mut self,
        cost: f64,
        entries: &[(usize, f64)],
    ) -> Result<usize, DimensionError> {
        for &(r, _) in entries {
            if r >= self.rows.len() {
                return Err(DimensionError(format!(
                    "column references row {r} of {}",
                    self.rows.len()
                )));
            }
        }
        let mut e: Vec<(usize, f64)> = entries.iter().copied().filter(|&(_, v)| v != 0.0).collect();
        e.sort_unstable_by_key(|&(r, _)| r);
        self.cols.push(Col {
            cost,
            entries: e,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        if let Some(saved) = &mut self.saved {
            saved.struct_at_upper.push(false);
        }
        Ok(self.cols.len() - 1)
    }

    /// Restricts a structural column; `(0, 0)` disables it inside a node,
    /// restoring the original bounds re-enables it.
    pub fn fix_column_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        assert!(lower <= upper, "lower {lower} > upper {upper}");
        self.cols[col].lower = lower;
        self.cols[col].upper = upper;
    }

    /// Serializes rows, columns and bounds; used to capture pathological
    /// instances for replay.
    pub fn dump_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(s, "{} {}", self.rows.len(), self.cols.len()).unwrap();
        for r in &self.rows {
            let c = match r.sense { Sense::Ge => 'G', Sense::Le => 'L', Sense::Eq => 'E' };
            writeln!(s, "{} {}", c, r.rhs).unwrap();
        }
        for col in &self.cols {
            write!(s, "{} {} {}", col.cost, col.lower, col.upper).unwrap();
            for &(r, a) in &col.entries { write!(s, " {} {}", r, a).unwrap(); }
            writeln!(s).unwrap();
        }
        s
    }

    /// Parses the [`dump_text`] format.
    pub fn parse_text(text: &str) -> LinearProgram {
        let mut lines = text.lines();
        let head: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
        let mut lp = LinearProgram::new();
        for _ in 0..head[0] {
            let l = lines.next().unwrap();
            let mut it = l.split_whitespace();
            let sense = match it.next().unwrap() { "G" => Sense::Ge, "L" => Sense::Le, _ => Sense::Eq };
            lp.add_row(sense, it.next().unwrap().parse().unwrap());
        }
        for _ in 0..head[1] {
            let l = lines.next().unwrap();
            let toks: Vec<f64> = l.split_whitespace().map(|t| t.parse().unwrap()).collect();
            let entries: Vec<(usize, f64)> = toks[3..].chunks(2).map(|c| (c[0] as usize, c[1])).collect();
            let idx = lp.add_column(toks[0], &entries).unwrap();
            lp.fix_column_bounds(idx, toks[1], toks[2]);
        }
        lp
    }

    pub fn solve(&mut self, max_pivots: usize) -> LpOutcome {
        let (outcome, saved) = {
            let t0 = std::time::Instant::now();
            let mut t = Tableau::build(self);
            bump(&T_BUILD, t0);
            let outcome = t.run(max_pivots);
            let saved = (outcome.status == LpStatus::Optimal).then(|| t.save_basis());
            (outcome, saved)
        };
        self.saved = saved;
        SOLVE_COUNT.fetch_add(1, Ordering::Relaxed);
        PIVOT_COUNT.fetch_add(outcome.pivots as u64, Ordering::Relaxed);
        if outcome.status == LpStatus::IterationLimit && std::env::var("LP_DUMP").is_ok() {
            std::fs::write("/tmp/bad_lp.txt", self.dump_text()).ok();
            eprintln!("dumped pathological LP to /tmp/bad_lp.txt");
        }
        outcome
    }
}

/// Per-solve working state in solver indexing: structural columns first,
/// then one slack per row, then any artificials.
struct Tableau<'a> {
    lp: &'a LinearProgram,
    m: usize,
    n_struct: usize,
    /// structural + slack count; artificials live at indices beyond this
    n_slack_end: usize,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// One `(row, coefficient)` entry per slack and artificial column.
    unit: Vec<(usize, f64)>,
    state: Vec<VarState>,
    basic: Vec<usize>,
    values: Vec<f64>,
    binv: Vec<Vec<f64>>,
    pivots: usize,
    last_refactor_pivot: usize,
    degenerate_streak: usize,
    has_artificials: bool,
    saved_bounds: Option<(Vec<f64>, Vec<f64>)>,
    devex: Vec<f64>,
}

enum StepResult {
    Optimal,
    Moved,
    Unbounded,
}

impl<'a> Tableau<'a> {
    fn build(lp: &'a LinearProgram) -> Tableau<'a> {
        let m = lp.rows.len();
        let n_struct = lp.cols.len();
        let total = n_struct + m;
        let mut cost = Vec::with_capacity(total);
        let mut lower = Vec::with_capacity(total);
        let mut upper = Vec::with_capacity(total);
        let mut unit = Vec::with_capacity(m);
        for c in &lp.cols {
            cost.push(c.cost);
            lower.push(c.lower);
            upper.push(c.upper);
        }
        for (r, row) in lp.rows.iter().enumerate() {
            cost.push(0.0);
            let (l, u) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(l);
            upper.push(u);
            unit.push((r, 1.0));
        }

        let mut t = Tableau {
            lp,
            m,
            n_struct,
            n_slack_end: total,
            cost,
            lower,
            upper,
            unit,
            state: Vec::new(),
            basic: Vec::new(),
            values: Vec::new(),
            binv: Vec::new(),
            pivots: 0,
            last_refactor_pivot: 0,
            degenerate_streak: 0,
            has_artificials: false,
            saved_bounds: None,
            devex: Vec::new(),
        };
        if !t.try_warm_start() {
            t.cold_start();
        }
        t.devex = vec![1.0; t.total_vars()];
        t
    }

    #[inline]
    fn total_vars(&self) -> usize {
        self.n_struct + self.unit.len()
    }

    #[inline]
    fn entries_of(&self, v: usize) -> &[(usize, f64)] {
        if v < self.n_struct {
            &self.lp.cols[v].entries
        } else {
            std::slice::from_ref(&self.unit[v - self.n_struct])
        }
    }

    /// Expands the finite bounds of the basic variables outward by small
    /// deterministic amounts, turning zero-length ratio steps into real ones.
    fn apply_perturbation(&mut self, round: usize) {
        if self.saved_bounds.is_none() {
            self.saved_bounds = Some((self.lower.clone(), self.upper.clone()));
        }
        let scale = PERTURB_BASE * 10f64.powi(round.min(3) as i32);
        for &v in &self.basic {
            if v >= self.n_slack_end {
                continue; // artificials keep their exact zero lower bound
            }
            let eps = scale * (1.0 + ((v * 29) % 97) as f64 / 97.0);
            if self.lower[v].is_finite() {
                self.lower[v] -= eps;
            }
            if self.upper[v].is_finite() {
                self.upper[v] += eps;
            }
        }
        self.degenerate_streak = 0;
    }

    /// Restores the exact bounds after a perturbed run, snapping nonbasic
    /// variables back and recomputing the basics from a fresh factorization.
    fn remove_perturbation(&mut self) {
        if let Some((lower, upper)) = self.saved_bounds.take() {
            debug_assert_eq!(lower.len(), self.lower.len());
            self.lower = lower;
            self.upper = upper;
            if self.refactorize().is_ok() {
                self.recompute_values();
            }
            self.degenerate_streak = 0;
        }
    }

    fn resting_state(&self, v: usize) -> VarState {
        if self.lower[v].is_finite() {
            VarState::AtLower
        } else {
            VarState::AtUpper
        }
    }

    fn nonbasic_value(&self, v: usize) -> f64 {
        match self.state[v] {
            VarState::AtLower => self.lower[v],
            VarState::AtUpper => self.upper[v],
            VarState::Basic(_) => unreachable!("basic variable queried as nonbasic"),
        }
    }

    fn try_warm_start(&mut self) -> bool {
        let Some(saved) = &self.lp.saved else {
            return false;
        };
        if saved.basic.len() != self.m
            || saved.struct_at_upper.len() != self.n_struct
            || saved.slack_at_upper.len() != self.m
        {
            return false;
        }
        let total = self.n_slack_end;
        self.state = (0..total)
            .map(|v| {
                let wants_upper = if v < self.n_struct {
                    saved.struct_at_upper[v]
                } else {
                    saved.slack_at_upper[v - self.n_struct]
                };
                if wants_upper && self.upper[v].is_finite() {
                    VarState::AtUpper
                } else {
                    self.resting_state(v)
                }
            })
            .collect();
        self.basic = Vec::with_capacity(self.m);
        for (slot, bv) in saved.basic.iter().enumerate() {
            let v = match *bv {
                BasisVar::Struct(c) => {
                    if c >= self.n_struct {
                        return false;
                    }
                    c
                }
                BasisVar::Slack(r) => {
                    if r >= self.m {
                        return false;
                    }
                    self.n_struct + r
                }
            };
            if matches!(self.state[v], VarState::Basic(_)) {
                return false; // duplicate
            }
            self.state[v] = VarState::Basic(slot);
            self.basic.push(v);
        }
        // the basis columns have not changed since the saved solve, so its
        // inverse is still exact
        if saved.binv.len() != self.m {
            return false;
        }
        self.binv = self.lp.saved.as_ref().unwrap().binv.clone();
        self.recompute_values();
        let feasible = self.basic.iter().enumerate().all(|(slot, &v)| {
            self.values[slot] >= self.lower[v] - TOL_FEAS
                && self.values[slot] <= self.upper[v] + TOL_FEAS
        });
        if feasible {
            self.has_artificials = false;
        }
        feasible
    }

    /// Slack basis where the residual fits the slack bounds, artificials
    /// elsewhere.
    fn cold_start(&mut self) {
        let total = self.n_slack_end;
        self.state = (0..total).map(|v| self.resting_state(v)).collect();
        self.basic = Vec::with_capacity(self.m);
        let resid = self.residuals();
        let mut art_rows: Vec<(usize, f64)> = Vec::new();
        for (r, &res) in resid.iter().enumerate() {
            let slack = self.n_struct + r;
            if res >= self.lower[slack] - TOL_FEAS && res <= self.upper[slack] + TOL_FEAS {
                self.state[slack] = VarState::Basic(r);
                self.basic.push(slack);
            } else {
                art_rows.push((r, if res >= 0.0 { 1.0 } else { -1.0 }));
                self.basic.push(usize::MAX);
            }
        }
        self.has_artificials = !art_rows.is_empty();
        for (r, sign) in art_rows {
            let v = self.total_vars();
            self.cost.push(0.0);
            self.lower.push(0.0);
            self.upper.push(f64::INFINITY);
            self.unit.push((r, sign));
            self.state.push(VarState::Basic(r));
            self.basic[r] = v;
        }
        // the start basis is diagonal with entries +-1, so its inverse is
        // immediate
        self.binv = (0..self.m)
            .map(|slot| {
                let mut row = vec![0.0; self.m];
                let (r, a) = self.unit[self.basic[slot] - self.n_struct];
                debug_assert_eq!(r, slot);
                row[r] = 1.0 / a;
                row
            })
            .collect();
        self.last_refactor_pivot = self.pivots;
        self.recompute_values();
    }

    fn phase_cost(&self, v: usize, phase_one: bool) -> f64 {
        if phase_one {
            if v >= self.n_slack_end {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[v]
        }
    }

    /// Row residuals `b - A_N x_N` with every nonbasic variable at its bound.
    fn residuals(&self) -> Vec<f64> {
        let mut resid: Vec<f64> = self.lp.rows.iter().map(|r| r.rhs).collect();
        for v in 0..self.total_vars() {
            if matches!(self.state[v], VarState::Basic(_)) {
                continue;
            }
            let x = self.nonbasic_value(v);
            if x != 0.0 {
                for &(r, a) in self.entries_of(v) {
                    resid[r] -= a * x;
                }
            }
        }
        resid
    }

    fn refactorize(&mut self) -> Result<(), ()> {
        let _t0 = std::time::Instant::now();
        let m = self.m;
        // Gauss-Jordan with partial pivoting on [B | I]; the right block
        // becomes B^{-1} row-indexed by basis slot.
        let mut work = vec![vec![0.0; 2 * m]; m];
        for (slot, &v) in self.basic.iter().enumerate() {
            for &(r, a) in self.entries_of(v) {
                work[r][slot] = a;
            }
        }
        for r in 0..m {
            work[r][m + r] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = work[col][col].abs();
            for r in col + 1..m {
                let a = work[r][col].abs();
                if a > best {
                    best = a;
                    piv = r;
                }
            }
            if best < TOL_PIVOT {
                return Err(());
            }
            work.swap(col, piv);
            let d = work[col][col];
            for x in work[col].iter_mut() {
                *x /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = work[r][col];
                    if f != 0.0 {
                        for k in 0..2 * m {
                            work[r][k] -= f * work[col][k];
                        }
                    }
                }
            }
        }
        // After elimination, solving B^T-systems reads the right block with
        // slot-major rows: row `slot` of the final block is the slot-th row
        // of B^{-1}.
        self.binv = work.into_iter().map(|row| row[m..].to_vec()).collect();
        self.last_refactor_pivot = self.pivots;
        bump(&T_REFACTOR, _t0);
        Ok(())
    }

    fn recompute_values(&mut self) {
        let _t0 = std::time::Instant::now();
        let resid = self.residuals();
        self.values = (0..self.m)
            .map(|slot| (0..self.m).map(|r| self.binv[slot][r] * resid[r]).sum())
            .collect();
        bump(&T_RECOMPUTE, _t0);
    }

    fn ftran(&self, v: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.m];
        for &(r, a) in self.entries_of(v) {
            if a != 0.0 {
                for (slot, wr) in w.iter_mut().enumerate() {
                    *wr += self.binv[slot][r] * a;
                }
            }
        }
        w
    }

    fn duals(&self, phase_one: bool) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (slot, &v) in self.basic.iter().enumerate() {
            let c = self.phase_cost(v, phase_one);
            if c != 0.0 {
                for (r, yr) in y.iter_mut().enumerate() {
                    *yr += c * self.binv[slot][r];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, v: usize, y: &[f64], phase_one: bool) -> f64 {
        let mut d = self.phase_cost(v, phase_one);
        for &(r, a) in self.entries_of(v) {
            d -= y[r] * a;
        }
        d
    }

    /// Devex reference-weight update after a basis change: nonbasic weights
    /// grow with the square of their pivotal-row entry relative to the
    /// entering column's, which steers pricing away from directions that
    /// keep hitting the same degenerate rows.
    fn update_devex(&mut self, ev: usize, slot: usize, w: &[f64], nvars: usize) {
        let piv = w[slot];
        if piv.abs() <= TOL_PIVOT {
            return;
        }
        let gamma_enter = self.devex[ev].max(1.0);
        let row = &self.binv[slot];
        let ratio2 = |alpha: f64| (alpha / piv) * (alpha / piv) * gamma_enter;
        for v in 0..nvars {
            if matches!(self.state[v], VarState::Basic(_)) || v == ev {
                continue;
            }
            if self.lower[v] == self.upper[v] {
                continue;
            }
            let mut alpha = 0.0;
            for &(r, a) in self.entries_of(v) {
                alpha += row[r] * a;
            }
            if alpha != 0.0 {
                let cand = ratio2(alpha);
                if cand > self.devex[v] {
                    self.devex[v] = cand;
                }
            }
        }
        let leave_weight = (gamma_enter / (piv * piv)).max(1.0);
        self.devex[self.basic[slot]] = leave_weight;
        self.devex[ev] = 1.0;
        // reference reset when weights blow up
        if self.devex.iter().any(|&g| g > 1e8) {
            for g in self.devex.iter_mut() {
                *g = 1.0;
            }
        }
    }

    fn step(&mut self, phase_one: bool, bland: bool) -> StepResult {
        let _t0 = std::time::Instant::now();
        let y = self.duals(phase_one);
        // Artificials may never re-enter once phase 2 starts.
        let nvars = if phase_one {
            self.total_vars()
        } else {
            self.n_slack_end
        };

        // Entering rule: devex-weighted reduced-cost violation, first index
        // on ties; plain first-index when Bland's rule is active.
        let mut enter: Option<(usize, f64)> = None; // (var, dir)
        let mut best_score = 0.0f64;
        for v in 0..nvars {
            let dir = match self.state[v] {
                VarState::Basic(_) => continue,
                VarState::AtLower => 1.0,
                VarState::AtUpper => -1.0,
            };
            if self.lower[v] == self.upper[v] {
                continue;
            }
            let d = self.reduced_cost(v, &y, phase_one);
            let viol = -dir * d;
            if viol > TOL_OPT {
                if bland {
                    enter = Some((v, dir));
                    break;
                }
                let score = viol * viol / self.devex[v];
                if enter.is_none() || score > best_score {
                    best_score = score;
                    enter = Some((v, dir));
                }
            }
        }
        let Some((ev, dir)) = enter else {
            bump(&T_STEP_PRICE, _t0);
            return StepResult::Optimal;
        };
        bump(&T_STEP_PRICE, _t0);
        let _t1 = std::time::Instant::now();
        let w = self.ftran(ev);
        let span = self.upper[ev] - self.lower[ev]; // may be +inf
        let mut t_max = span;
        let mut leave: Option<usize> = None;
        for slot in 0..self.m {
            let delta = -dir * w[slot];
            if delta.abs() <= TOL_PIVOT {
                continue;
            }
            let bv = self.basic[slot];
            let limit = if delta < 0.0 {
                if self.lower[bv].is_finite() {
                    ((self.values[slot] - self.lower[bv]) / -delta).max(0.0)
                } else {
                    continue;
                }
            } else if self.upper[bv].is_finite() {
                ((self.upper[bv] - self.values[slot]) / delta).max(0.0)
            } else {
                continue;
            };
            let take = match leave {
                None => limit <= t_max,
                Some(cur) => {
                    if limit < t_max - TOL_PIVOT {
                        true
                    } else if limit <= t_max + TOL_PIVOT {
                        if bland {
                            self.basic[slot] < self.basic[cur]
                        } else {
                            w[slot].abs() > w[cur].abs()
                        }
                    } else {
                        false
                    }
                }
            };
            if take {
                t_max = t_max.min(limit);
                leave = Some(slot);
            }
        }

        if t_max.is_infinite() {
            return StepResult::Unbounded;
        }
        let t = t_max.max(0.0);
        self.degenerate_streak = if t <= TOL_PIVOT {
            self.degenerate_streak + 1
        } else {
            0
        };

        match leave {
            None => {
                // Bound flip across the entering variable's own span.
                for slot in 0..self.m {
                    self.values[slot] -= dir * w[slot] * t;
                }
                self.state[ev] = match self.state[ev] {
                    VarState::AtLower => VarState::AtUpper,
                    VarState::AtUpper => VarState::AtLower,
                    VarState::Basic(_) => unreachable!(),
                };
            }
            Some(slot) => {
                let lv = self.basic[slot];
                let entering_value = match self.state[ev] {
                    VarState::AtLower => self.lower[ev] + t,
                    VarState::AtUpper => self.upper[ev] - t,
                    VarState::Basic(_) => unreachable!(),
                };
                for s in 0..self.m {
                    self.values[s] -= dir * w[s] * t;
                }
                        {
                    bump(&T_STEP_RATIO, _t1);
                    let _t2 = std::time::Instant::now();
                    self.update_devex(ev, slot, &w, nvars);
                    bump(&T_DEVEX, _t2);
                }
                let delta = -dir * w[slot];
                self.state[lv] = if delta < 0.0 {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                self.basic[slot] = ev;
                self.state[ev] = VarState::Basic(slot);
                self.values[slot] = entering_value;

                let piv = w[slot];
                let prow: Vec<f64> = self.binv[slot].iter().map(|x| x / piv).collect();
                for s in 0..self.m {
                    if s != slot && w[s] != 0.0 {
                        let f = w[s];
                        for r in 0..self.m {
                            self.binv[s][r] -= f * prow[r];
                        }
                    }
                }
                self.binv[slot] = prow;

                self.pivots += 1;
                if self.pivots % REFACTOR_EVERY == 0 && self.refactorize().is_ok() {
                    self.recompute_values();
                }
            }
        }
        StepResult::Moved
    }

    fn phase_objective(&self, phase_one: bool) -> f64 {
        let mut obj = 0.0;
        for (slot, &v) in self.basic.iter().enumerate() {
            obj += self.phase_cost(v, phase_one) * self.values[slot];
        }
        for v in 0..self.total_vars() {
            if matches!(self.state[v], VarState::Basic(_)) {
                continue;
            }
            let c = self.phase_cost(v, phase_one);
            if c != 0.0 {
                obj += c * self.nonbasic_value(v);
            }
        }
        obj
    }

    fn run(&mut self, max_pivots: usize) -> LpOutcome {
        if self.has_artificials {
            let mut perturb_rounds = 0;
            loop {
                if self.pivots >= max_pivots {
                    return self.outcome(LpStatus::IterationLimit);
                }
                if self.degenerate_streak > PERTURB_TRIGGER && perturb_rounds < PERTURB_ROUNDS {
                    self.apply_perturbation(perturb_rounds);
                    perturb_rounds += 1;
                }
                if std::env::var("LP_TRACE").is_ok() && self.pivots > 0 && self.pivots % 20000 == 0 {
                    eprintln!("grind PHASE1: pivots {} streak {} rounds {} infeas {:.6}", self.pivots, self.degenerate_streak, perturb_rounds, self.phase_objective(true));
                }
                let bland = self.degenerate_streak > BLAND_TRIGGER;
                match self.step(true, bland) {
                    StepResult::Optimal => {
                        if self.saved_bounds.is_some() {
                            self.remove_perturbation();
                            continue;
                        }
                        break;
                    }
                    StepResult::Moved => continue,
                    StepResult::Unbounded => {
                        unreachable!("phase 1 objective is bounded below by zero")
                    }
                }
            }
            let infeas = self.phase_objective(true);
            if infeas > 10.0 * TOL_FEAS {
                return self.infeasible_outcome();
            }
            self.retire_artificials();
        }

        self.degenerate_streak = 0;
        let mut perturb_rounds = 0;
        loop {
            if self.pivots >= max_pivots {
                return self.outcome(LpStatus::IterationLimit);
            }
            if self.degenerate_streak > PERTURB_TRIGGER && perturb_rounds < PERTURB_ROUNDS {
                self.apply_perturbation(perturb_rounds);
                perturb_rounds += 1;
            }
            if std::env::var("LP_TRACE").is_ok() && self.degenerate_streak >= 2000 && self.degenerate_streak < 2006 {
                let y = self.duals(false);
                let mut elig = Vec::new();
                for v in 0..self.n_slack_end {
                    let dir = match self.state[v] {
                        VarState::Basic(_) => continue,
                        VarState::AtLower => 1.0,
                        VarState::AtUpper => -1.0,
                    };
                    if self.lower[v] == self.upper[v] { continue; }
                    let d = self.reduced_cost(v, &y, false);
                    if -dir * d > TOL_OPT { elig.push((v, dir, d)); }
                    if elig.len() > 4 { break; }
                }
                eprintln!("cyc pv {} eligible {:?}", self.pivots, elig);
                if let Some(&(ev, dir, _)) = elig.first() {
                    let w = self.ftran(ev);
                    for slot in 0..self.m {
                        let delta = -dir * w[slot];
                        if delta.abs() <= TOL_PIVOT { continue; }
                        let bv = self.basic[slot];
                        let limit = if delta < 0.0 {
                            if self.lower[bv].is_finite() { ((self.values[slot] - self.lower[bv]) / -delta).max(0.0) } else { continue; }
                        } else if self.upper[bv].is_finite() { ((self.upper[bv] - self.values[slot]) / delta).max(0.0) } else { continue; };
                        if limit < 1e-7 {
                            eprintln!("   slot {} bv {} delta {:.3e} value {:.9e} lo {:.3e} hi {:.3e} limit {:.3e}", slot, bv, delta, self.values[slot], self.lower[bv], self.upper[bv], limit);
                        }
                    }
                }
            }
            let bland = self.degenerate_streak > BLAND_TRIGGER;
            match self.step(false, bland) {
                StepResult::Optimal => {
                    if self.saved_bounds.is_some() {
                        self.remove_perturbation();
                        continue;
                    }
                    break;
                }
                StepResult::Moved => continue,
                StepResult::Unbounded => return self.outcome(LpStatus::Unbounded),
            }
        }
        // Clean factorization before extracting the answer, unless the
        // product-form updates since the last one are too few to matter.
        if self.pivots - self.last_refactor_pivot > 64 && self.refactorize().is_ok() {
            self.recompute_values();
        }
        self.outcome(LpStatus::Optimal)
    }

    /// After a feasible phase 1, pivot leftover artificials out of the basis
    /// where possible; rows without a pivot are dependent and keep their
    /// artificial frozen at zero.
    fn retire_artificials(&mut self) {
        for slot in 0..self.m {
            let v = self.basic[slot];
            if v < self.n_slack_end {
                continue;
            }
            let mut replacement: Option<usize> = None;
            for cand in 0..self.n_slack_end {
                if matches!(self.state[cand], VarState::Basic(_)) {
                    continue;
                }
                if self.lower[cand] == self.upper[cand] {
                    continue;
                }
                let w = self.ftran(cand);
                if w[slot].abs() > 1e-7 {
                    replacement = Some(cand);
                    break;
                }
            }
            if let Some(cand) = replacement {
                let w = self.ftran(cand);
                self.state[v] = VarState::AtLower;
                self.basic[slot] = cand;
                self.state[cand] = VarState::Basic(slot);
                let piv = w[slot];
                let prow: Vec<f64> = self.binv[slot].iter().map(|x| x / piv).collect();
                for s in 0..self.m {
                    if s != slot && w[s] != 0.0 {
                        let f = w[s];
                        for r in 0..self.m {
                            self.binv[s][r] -= f * prow[r];
                        }
                    }
                }
                self.binv[slot] = prow;
                self.recompute_values();
            }
        }
        // No artificial may move again, basic or not.
        for v in self.n_slack_end..self.total_vars() {
            self.lower[v] = 0.0;
            self.upper[v] = 0.0;
            if !matches!(self.state[v], VarState::Basic(_)) {
                self.state[v] = VarState::AtLower;
            }
        }
    }

    fn infeasible_outcome(&mut self) -> LpOutcome {
        // The phase-1 duals certify infeasibility: every enabled column
        // prices nonpositive against them while the aggregated right-hand
        // side stays strictly positive.
        let y = self.duals(true);
        LpOutcome {
            status: LpStatus::Infeasible,
            objective: f64::INFINITY,
            primal: vec![0.0; self.n_struct],
            row_duals: vec![0.0; self.m],
            farkas: Some(y),
            pivots: self.pivots,
        }
    }

    fn outcome(&mut self, status: LpStatus) -> LpOutcome {
        let y = self.duals(false);
        let mut primal = vec![0.0; self.n_struct];
        for (v, x) in primal.iter_mut().enumerate() {
            *x = match self.state[v] {
                VarState::Basic(slot) => self.values[slot],
                VarState::AtLower => self.lower[v],
                VarState::AtUpper => self.upper[v],
            };
        }
        LpOutcome {
            status,
            objective: self.phase_objective(false),
            primal,
            row_duals: y,
            farkas: None,
            pivots: self.pivots,
        }
    }

    fn save_basis(&self) -> SavedBasis {
        // Dependent rows still hold a frozen artificial; map them to the
        // row's slack, which is equivalent at value zero.
        let basic = self
            .basic
            .iter()
            .enumerate()
            .map(|(slot, &v)| {
                if v < self.n_struct {
                    BasisVar::Struct(v)
                } else if v < self.n_slack_end {
                    BasisVar::Slack(v - self.n_struct)
                } else {
                    BasisVar::Slack(self.unit[v - self.n_struct].0)
                }
            })
            .collect();
        let struct_at_upper = (0..self.n_struct)
            .map(|v| matches!(self.state[v], VarState::AtUpper))
            .collect();
        let slack_at_upper = (self.n_struct..self.n_slack_end)
            .map(|v| matches!(self.state[v], VarState::AtUpper))
            .collect();
        SavedBasis {
            basic,
            struct_at_upper,
            slack_at_upper,
            binv: self.binv.clone(),
        }
    }
}

/// Checks a Farkas certificate by direct aggregation: returns the margin by
/// which the aggregated constraint separates the feasible box from the
/// right-hand side (positive margin = valid certificate).
pub fn farkas_margin(lp: &LinearProgram, cert: &[f64]) -> f64 {
    let mut rhs = 0.0;
    for (r, row) in lp.rows.iter().enumerate() {
        rhs += cert[r] * row.rhs;
        match row.sense {
            Sense::Ge => debug_assert!(cert[r] >= -1e-6, "Ge row with negative multiplier"),
            Sense::Le => debug_assert!(cert[r] <= 1e-6, "Le row with positive multiplier"),
            Sense::Eq => {}
        }
    }
    let mut lhs_max = 0.0;
    for col in &lp.cols {
        let a: f64 = col.entries.iter().map(|&(r, v)| cert[r] * v).sum();
        let contrib = if a > 1e-9 {
            if col.upper.is_finite() {
                a * col.upper
            } else {
                return f64::NEG_INFINITY;
            }
        } else if a < -1e-9 {
            if col.lower.is_finite() {
                a * col.lower
            } else {
                return f64::NEG_INFINITY;
            }
        } else {
            0.0
        };
        lhs_max += contrib;
    }
    rhs - lhs_max
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_lp(rows: &[(Sense, f64)], cols: &[(f64, &[(usize, f64)])]) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for &(s, b) in rows {
            lp.add_row(s, b);
        }
        for &(c, entries) in cols {
            lp.add_column(c, entries).unwrap();
        }
        lp
    }

    #[test]
    fn one_variable_bound() {
        // min x s.t. x >= 3
        let mut lp = simple_lp(&[(Sense::Ge, 3.0)], &[(1.0, &[(0, 1.0)])]);
        let out = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(out.status, LpStatus::Optimal);
        assert_eq!(out.objective, 3.0);
        assert_eq!(out.primal[0], 3.0);
        assert_eq!(out.row_duals[0], 1.0);
    }

    #[test]
    fn contradictory_bounds_give_certificate() {
        // x >= 2, x <= 1
        let mut lp = simple_lp(
            &[(Sense::Ge, 2.0), (Sense::Le, 1.0)],
            &[(0.0, &[(0, 1.0), (1, 1.0)])],
        );
        let out = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(out.status, LpStatus::Infeasible);
        let cert = out.farkas.expect("certificate");
        assert!(farkas_margin(&lp, &cert) > TOL_FEAS);
    }

    #[test]
    fn add_column_matches_fresh_solve() {
        // min 2x s.t. x >= 4, x <= 6, then add a cheaper column
        let mut lp = simple_lp(
            &[(Sense::Ge, 4.0), (Sense::Le, 6.0)],
            &[(2.0, &[(0, 1.0), (1, 1.0)])],
        );
        let first = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(first.status, LpStatus::Optimal);
        assert_eq!(first.objective, 8.0);
        lp.add_column(1.0, &[(0, 1.0)]).unwrap();
        let warm = lp.solve(DEFAULT_MAX_PIVOTS);

        let mut fresh = simple_lp(
            &[(Sense::Ge, 4.0), (Sense::Le, 6.0)],
            &[(2.0, &[(0, 1.0), (1, 1.0)]), (1.0, &[(0, 1.0)])],
        );
        let cold = fresh.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.objective - cold.objective).abs() < 1e-9);
        assert_eq!(warm.objective, 4.0);
    }

    #[test]
    fn nonnegative_reduced_cost_column_keeps_optimum() {
        let mut lp = simple_lp(&[(Sense::Ge, 1.0)], &[(1.0, &[(0, 1.0)])]);
        let before = lp.solve(DEFAULT_MAX_PIVOTS);
        lp.add_column(5.0, &[(0, 1.0)]).unwrap(); // reduced cost 5 - 1 >= 0
        let after = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(before.objective, after.objective);
    }

    #[test]
    fn violated_le_row_weakly_increases_minimum() {
        // min -x s.t. x <= 5  (i.e. max x)
        let mut lp = simple_lp(&[(Sense::Le, 5.0)], &[(-1.0, &[(0, 1.0)])]);
        let before = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(before.objective, -5.0);
        lp.add_row_with(Sense::Le, 3.0, &[(0, 1.0)]).unwrap();
        let after = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(after.status, LpStatus::Optimal);
        assert!(after.objective >= before.objective - 1e-12);
        assert_eq!(after.objective, -3.0);
    }

    #[test]
    fn disable_and_reenable_column() {
        // min x + 2y s.t. x + y >= 2
        let mut lp = simple_lp(
            &[(Sense::Ge, 2.0)],
            &[(1.0, &[(0, 1.0)]), (2.0, &[(0, 1.0)])],
        );
        let base = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(base.objective, 2.0);
        lp.fix_column_bounds(0, 0.0, 0.0);
        let disabled = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(disabled.objective, 4.0);
        lp.fix_column_bounds(0, 0.0, f64::INFINITY);
        let restored = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(restored.objective, base.objective);
    }

    #[test]
    fn disabling_all_columns_of_a_covering_row_is_infeasible() {
        let mut lp = simple_lp(
            &[(Sense::Ge, 1.0)],
            &[(1.0, &[(0, 1.0)]), (3.0, &[(0, 1.0)])],
        );
        lp.fix_column_bounds(0, 0.0, 0.0);
        lp.fix_column_bounds(1, 0.0, 0.0);
        let out = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(out.status, LpStatus::Infeasible);
        let cert = out.farkas.unwrap();
        assert!(farkas_margin(&lp, &cert) > TOL_FEAS);
    }

    #[test]
    fn equality_rows_and_upper_bounds() {
        // min -x - y s.t. x + y = 3, x <= 2, y <= 2
        let mut lp = LinearProgram::new();
        lp.add_row(Sense::Eq, 3.0);
        let x = lp.add_column(-1.0, &[(0, 1.0)]).unwrap();
        let y = lp.add_column(-1.0, &[(0, 1.0)]).unwrap();
        lp.fix_column_bounds(x, 0.0, 2.0);
        lp.fix_column_bounds(y, 0.0, 2.0);
        let out = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.objective + 3.0).abs() < 1e-9);
        assert!((out.primal[x] + out.primal[y] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_below_is_detected() {
        // min -x s.t. x >= 1 (no upper bound)
        let mut lp = simple_lp(&[(Sense::Ge, 1.0)], &[(-1.0, &[(0, 1.0)])]);
        let out = lp.solve(DEFAULT_MAX_PIVOTS);
        assert_eq!(out.status, LpStatus::Unbounded);
    }

    #[test]
    fn strong_duality_and_certificates_on_random_lps() {
        let mut rng = crate::rng::SplitMix64::new(2024);
        for case in 0..120u64 {
            let m = 2 + (case % 5) as usize;
            let n = 2 + (case % 7) as usize;
            let mut lp = LinearProgram::new();
            for r in 0..m {
                let sense = match (case + r as u64) % 3 {
                    0 => Sense::Ge,
                    1 => Sense::Le,
                    _ => Sense::Eq,
                };
                lp.add_row(sense, rng.int_in(0, 6) as f64);
            }
            for _ in 0..n {
                let cost = rng.int_in(0, 9) as f64;
                let entries: Vec<(usize, f64)> = (0..m)
                    .filter_map(|r| {
                        let v = rng.int_in(0, 3);
                        (v > 0).then_some((r, v as f64))
                    })
                    .collect();
                let c = lp.add_column(cost, &entries).unwrap();
                if case % 4 == 0 {
                    lp.fix_column_bounds(c, 0.0, rng.int_in(1, 5) as f64);
                }
            }
            let out = lp.solve(DEFAULT_MAX_PIVOTS);
            match out.status {
                LpStatus::Optimal => {
                    let dual_obj: f64 = (0..m).map(|r| out.row_duals[r] * lp.row_rhs(r)).sum();
                    let dual_obj = dual_obj
                        + (0..lp.num_cols())
                            .map(|c| {
                                // bound duals: reduced cost times the active bound
                                let rc: f64 = lp.column_cost(c)
                                    - lp
                                        .column_entries(c)
                                        .iter()
                                        .map(|&(r, v)| out.row_duals[r] * v)
                                        .sum::<f64>();
                                let (l, u) = lp.column_bounds(c);
                                if rc > 0.0 {
                                    rc * l
                                } else if u.is_finite() {
                                    rc * u
                                } else {
                                    0.0
                                }
                            })
                            .sum::<f64>();
                    assert!(
                        (dual_obj - out.objective).abs()
                            <= 10.0 * TOL_FEAS * (1.0 + out.objective.abs()),
                        "case {case}: duality gap {dual_obj} vs {}",
                        out.objective
                    );
                    for r in 0..m {
                        match lp.row_sense(r) {
                            Sense::Ge => assert!(out.row_duals[r] >= -TOL_OPT),
                            Sense::Le => assert!(out.row_duals[r] <= TOL_OPT),
                            Sense::Eq => {}
                        }
                        let act: f64 = (0..lp.num_cols())
                            .map(|c| {
                                lp.column_entries(c)
                                    .iter()
                                    .filter(|&&(rr, _)| rr == r)
                                    .map(|&(_, v)| v * out.primal[c])
                                    .sum::<f64>()
                            })
                            .sum();
                        match lp.row_sense(r) {
                            Sense::Ge => assert!(act >= lp.row_rhs(r) - 1e-6, "case {case}"),
                            Sense::Le => assert!(act <= lp.row_rhs(r) + 1e-6, "case {case}"),
                            Sense::Eq => assert!((act - lp.row_rhs(r)).abs() <= 1e-6),
                        }
                    }
                    for c in 0..lp.num_cols() {
                        let rc: f64 = lp.column_cost(c)
                            - lp
                                .column_entries(c)
                                .iter()
                                .map(|&(r, v)| out.row_duals[r] * v)
                                .sum::<f64>();
                        let (l, u) = lp.column_bounds(c);
                        if out.primal[c] > l + TOL_FEAS && out.primal[c] < u - TOL_FEAS {
                            assert!(rc.abs() <= 1e-5, "case {case}: interior var with rc {rc}");
                        }
                        if (out.primal[c] - l).abs() <= TOL_FEAS && !u.is_finite() {
                            assert!(rc >= -1e-5, "case {case}: at lower with rc {rc}");
                        }
                    }
                }
                LpStatus::Infeasible => {
                    let cert = out.farkas.expect("certificate");
                    assert!(
                        farkas_margin(&lp, &cert) > TOL_FEAS,
                        "case {case}: certificate does not validate"
                    );
                }
                LpStatus::Unbounded => panic!("case {case}: nonnegative costs cannot be unbounded"),
                LpStatus::IterationLimit => panic!("case {case}: iteration limit on a tiny LP"),
            }
        }
    }
}
