//! Branch-price-and-cut: best-bound tree search over fixings of the
//! aggregated assignment variables, with column generation at every node,
//! strong-order cut separation, and Lagrangian fathoming.

use crate::evaluation::{ordered_value, Column, FacilitySet};
use crate::grasp::{run_grasp, GraspConfig};
use crate::instance::{compute_ranks, Instance, RankMatrix};
use crate::master::{CutKey, CutRegistry, RestrictedMaster};
use crate::pricing::FixingMask;
use crate::stabilization::{run_column_generation, CgTermination, StabConfig};
use std::collections::HashMap;
use std::time::{Duration, Instant};

pub const TOL_INT: f64 = 1e-6;
pub const TOL_CUT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchStrategy {
    /// Weighted sum of the down and up scores (strategy 1).
    WeightedSum,
    /// Most promising side (strategy 2).
    BestSide,
    /// Safest worst side (strategy 3).
    WorstSide,
}

#[derive(Debug, Clone)]
pub struct BpcParams {
    pub time_limit: Duration,
    pub use_grasp: bool,
    pub grasp: GraspConfig,
    pub stab_enabled: bool,
    pub stab_delta: f64,
    pub hurry_first: bool,
    pub use_cuts: bool,
    pub branch_strategy: BranchStrategy,
    pub theta: f64,
    /// Externally supplied preprocessing fixings applied at the root.
    pub root_zero_fixings: Vec<(usize, usize, usize)>,
    pub max_root_cut_rounds: usize,
    pub max_cuts_per_round: usize,
}

impl Default for BpcParams {
    fn default() -> BpcParams {
        BpcParams {
            time_limit: Duration::from_secs(1800),
            use_grasp: true,
            grasp: GraspConfig::default(),
            stab_enabled: true,
            stab_delta: 0.6,
            hurry_first: true,
            use_cuts: true,
            branch_strategy: BranchStrategy::WeightedSum,
            theta: 0.5,
            root_zero_fixings: Vec::new(),
            max_root_cut_rounds: 50,
            max_cuts_per_round: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Branched,
    PrunedBound,
    PrunedInfeasible,
    Integral,
}

#[derive(Debug, Clone)]
pub struct NodeRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    /// Final LP value of the parent when the node was created.
    pub bound_at_creation: f64,
    /// This node's converged LP value, when it reached one.
    pub final_lp: Option<f64>,
    pub status: NodeStatus,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub best_value: Option<i64>,
    pub best_set: Option<FacilitySet>,
    pub lower_bound: f64,
    pub gap_pct: f64,
    pub nodes: usize,
    pub columns: usize,
    pub cuts: usize,
    pub wall_time: Duration,
    /// Integral nodes whose decoded value was strictly below the node LP
    /// (possible only under forced fixings or padding).
    pub integral_mismatches: usize,
    pub node_log: Vec<NodeRecord>,
    /// Global lower bound after each processed node (non-decreasing).
    pub lb_trace: Vec<f64>,
    /// Incumbent value after each improvement (non-increasing).
    pub ub_trace: Vec<f64>,
    /// Violated-cut count found on integral solutions (must stay zero).
    pub integral_cut_violations: usize,
}

/// Aggregated assignment values `x[(client, facility, position)]` of an LP
/// point given as column activities.
pub fn aggregate_values(
    columns: &[Column],
    values: &[f64],
) -> HashMap<(usize, usize, usize), f64> {
    let mut x: HashMap<(usize, usize, usize), f64> = HashMap::new();
    for (col, &v) in columns.iter().zip(values) {
        if v.abs() <= 1e-12 {
            continue;
        }
        for &(i, k) in &col.couples {
            *x.entry((i, col.facility, k)).or_insert(0.0) += v;
        }
    }
    x.retain(|_, v| v.abs() > 1e-12);
    x
}

/// Aggregation of the master's last optimal point.
pub fn aggregate_x(rm: &RestrictedMaster) -> Option<HashMap<(usize, usize, usize), f64>> {
    rm.column_values().map(|v| aggregate_values(rm.columns(), v))
}

fn fractional_triplets(
    x: &HashMap<(usize, usize, usize), f64>,
) -> Vec<((usize, usize, usize), f64)> {
    let mut out: Vec<((usize, usize, usize), f64)> = x
        .iter()
        .filter(|&(_, &v)| v > TOL_INT && v < 1.0 - TOL_INT)
        .map(|(&t, &v)| (t, v))
        .collect();
    out.sort_unstable_by_key(|&(t, _)| t);
    out
}

/// Picks the branching triplet among the fractional aggregated variables by
/// the unitary-contribution scores; ties go to the lexicographically
/// smallest triplet.
pub fn select_branching_variable(
    inst: &Instance,
    x: &HashMap<(usize, usize, usize), f64>,
    strategy: BranchStrategy,
    theta: f64,
) -> Option<(usize, usize, usize)> {
    let fractional = fractional_triplets(x);
    let mut best: Option<((usize, usize, usize), f64)> = None;
    for &((i, j, k), v) in &fractional {
        let contribution = (inst.weights[k] * inst.costs[i][j]) as f64;
        let down = contribution / v;
        let up = contribution / (1.0 - v);
        let score = match strategy {
            BranchStrategy::WeightedSum => theta * down + (1.0 - theta) * up,
            BranchStrategy::BestSide => down.min(up),
            BranchStrategy::WorstSide => down.max(up),
        };
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some(((i, j, k), score)),
        }
    }
    best.map(|(t, _)| t)
}

/// Strong-order separation on an aggregated point: for each candidate
/// `(client, facility, boundary)` the left-hand side sums the weight at the
/// boundary position with rank at most the threshold and the weight at the
/// previous position with rank at least the threshold. Returns the most
/// violated new cuts.
pub fn separate_cuts(
    n: usize,
    ranks: &RankMatrix,
    x: &HashMap<(usize, usize, usize), f64>,
    existing: &CutRegistry,
    max_cuts: usize,
    tol: f64,
) -> Vec<CutKey> {
    let nsq = n * n;
    // per boundary: weight of couples by rank, as prefix and suffix sums
    let mut pre = vec![vec![0.0f64; nsq + 2]; n];
    let mut suf = vec![vec![0.0f64; nsq + 2]; n];
    for (&(i, j, k), &v) in x {
        let r = ranks.rank(i, j) as usize;
        pre[k][r] += v;
        suf[k][r] += v;
    }
    for k in 0..n {
        for r in 1..=nsq {
            pre[k][r] += pre[k][r - 1];
        }
        for r in (1..=nsq).rev() {
            suf[k][r] += suf[k][r + 1];
        }
    }
    let mut violated: Vec<(f64, CutKey)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let r = ranks.rank(i, j) as usize;
            for b in 1..n {
                let lhs = pre[b][r] + suf[b - 1][r];
                if lhs > 1.0 + tol {
                    let key = CutKey {
                        client: i,
                        facility: j,
                        boundary: b,
                    };
                    if !existing.contains(&key) {
                        violated.push((lhs - 1.0, key));
                    }
                }
            }
        }
    }
    violated.sort_by(|a, b| {
        b.0.partial_cmp(&a.0).unwrap().then_with(|| {
            (a.1.client, a.1.facility, a.1.boundary).cmp(&(
                b.1.client,
                b.1.facility,
                b.1.boundary,
            ))
        })
    });
    violated.truncate(max_cuts);
    violated.into_iter().map(|(_, k)| k).collect()
}

/// Open facilities of an integral aggregated point, padded with the
/// smallest-index closed facilities when fewer than `p` are used.
pub fn decode_incumbent(
    inst: &Instance,
    x: &HashMap<(usize, usize, usize), f64>,
) -> FacilitySet {
    let mut used: Vec<f64> = vec![0.0; inst.n];
    for (&(_, j, _), &v) in x {
        used[j] += v;
    }
    let mut open: Vec<usize> = (0..inst.n).filter(|&j| used[j] >= 1.0 - TOL_INT).collect();
    for j in 0..inst.n {
        if open.len() >= inst.p {
            break;
        }
        if !open.contains(&j) {
            open.push(j);
        }
    }
    FacilitySet::new(open)
}

struct Pending {
    id: usize,
    mask: FixingMask,
    bound: f64,
    depth: usize,
    tick: usize,
}

pub fn solve(inst: &Instance, params: &BpcParams) -> SolveReport {
    let start = Instant::now();
    let ranks = compute_ranks(inst);

    let mut incumbent_value: Option<i64> = None;
    let mut incumbent_set: Option<FacilitySet> = None;
    let mut initial_columns: Vec<Column> = Vec::new();
    if params.use_grasp {
        let g = run_grasp(inst, &ranks, &params.grasp).expect("grasp configuration is valid");
        incumbent_value = Some(g.best_value);
        incumbent_set = Some(g.best_set);
        initial_columns = g.columns;
    }

    let mut rm = RestrictedMaster::build(inst, &ranks, &initial_columns);

    let mut root_mask = FixingMask::empty();
    for &t in &params.root_zero_fixings {
        root_mask = root_mask.with_zero(t);
    }
    root_mask.validate().expect("root fixings are consistent");

    let mut queue: Vec<Pending> = vec![Pending {
        id: 0,
        mask: root_mask,
        bound: f64::NEG_INFINITY,
        depth: 0,
        tick: 0,
    }];
    let mut node_log: Vec<NodeRecord> = vec![NodeRecord {
        id: 0,
        parent: None,
        depth: 0,
        bound_at_creation: f64::NEG_INFINITY,
        final_lp: None,
        status: NodeStatus::Branched, // patched when processed
    }];
    let mut next_id = 1usize;
    let mut next_tick = 1usize;
    let mut nodes_processed = 0usize;
    let mut cuts_added = 0usize;
    let mut integral_mismatches = 0usize;
    let mut integral_cut_violations = 0usize;
    let mut lb_trace: Vec<f64> = Vec::new();
    let mut ub_trace: Vec<f64> = Vec::new();
    let mut global_lb = f64::NEG_INFINITY;
    let mut timed_out = false;

    'tree: while !queue.is_empty() {
        if start.elapsed() >= params.time_limit {
            timed_out = true;
            break 'tree;
        }
        // best-bound selection, earlier tick on ties
        let pick = queue
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                a.bound
                    .partial_cmp(&b.bound)
                    .unwrap()
                    .then(a.tick.cmp(&b.tick))
            })
            .map(|(idx, _)| idx)
            .unwrap();
        let node = queue.swap_remove(pick);
        nodes_processed += 1;

        let ub = incumbent_value.map(|v| v as f64);
        if let Some(ub) = ub {
            if node.bound >= ub - 1e-6 {
                node_log[node.id].status = NodeStatus::PrunedBound;
                push_lb(&mut lb_trace, &mut global_lb, &queue, ub);
                continue;
            }
        }

        // node-local column availability
        for idx in 0..rm.num_columns() {
            let allowed = node.mask.allows_column(&rm.columns()[idx]);
            rm.set_column_enabled(idx, allowed);
        }

        let cg_cfg = StabConfig {
            delta_init: params.stab_delta,
            enabled: params.stab_enabled,
            hurry_first: params.hurry_first,
            abort_above: ub.map(|u| u - 1e-6),
            ..StabConfig::default()
        };
        let mut report = run_column_generation(&mut rm, &cg_cfg, &node.mask);

        // cut rounds: repeatedly separate on the fractional point and
        // re-price; deeper nodes get a single round
        if params.use_cuts && report.termination == CgTermination::Converged {
            let budget = if node.depth == 0 {
                params.max_root_cut_rounds
            } else {
                1
            };
            for _ in 0..budget {
                if start.elapsed() >= params.time_limit {
                    break;
                }
                let x = aggregate_x(&rm).expect("converged");
                let found = separate_cuts(
                    inst.n,
                    &ranks,
                    &x,
                    rm.registry(),
                    params.max_cuts_per_round,
                    TOL_CUT,
                );
                if found.is_empty() {
                    break;
                }
                for key in found {
                    rm.add_cut(key).expect("separation deduplicates");
                    cuts_added += 1;
                }
                let before = report.objective;
                report = run_column_generation(&mut rm, &cg_cfg, &node.mask);
                if report.termination != CgTermination::Converged {
                    break;
                }
                // separation that no longer moves the bound is ballast
                if report.objective - before <= 1e-9 * (1.0 + before.abs()) {
                    break;
                }
            }
        }

        match report.termination {
            CgTermination::Infeasible => {
                node_log[node.id].status = NodeStatus::PrunedInfeasible;
            }
            CgTermination::BoundExceeded => {
                node_log[node.id].status = NodeStatus::PrunedBound;
                node_log[node.id].final_lp = None;
            }
            CgTermination::IterationLimit => {
                panic!("column generation hit its iteration limit");
            }
            CgTermination::Converged => {
                let z = report.objective;
                node_log[node.id].final_lp = Some(z);
                if let Some(ub) = incumbent_value.map(|v| v as f64) {
                    if z >= ub - 1e-6 {
                        node_log[node.id].status = NodeStatus::PrunedBound;
                        push_lb(&mut lb_trace, &mut global_lb, &queue, ub);
                        continue;
                    }
                }
                let x = aggregate_x(&rm).expect("converged");
                let fractional = fractional_triplets(&x);
                if fractional.is_empty() {
                    // the branching proposition: integral aggregates force
                    // integral master variables
                    let values = rm.column_values().expect("converged");
                    debug_assert!(values
                        .iter()
                        .all(|v| v.abs() <= TOL_INT || (v - 1.0).abs() <= TOL_INT));
                    let violations = separate_cuts(
                        inst.n,
                        &ranks,
                        &x,
                        rm.registry(),
                        usize::MAX,
                        TOL_CUT,
                    );
                    integral_cut_violations += violations.len();

                    let decoded = decode_incumbent(inst, &x);
                    let v = ordered_value(inst, &ranks, &decoded).expect("padded to p");
                    assert!(
                        (v as f64) <= z + 1e-6,
                        "decoded value {v} above the node LP {z}"
                    );
                    if (v as f64) < z - 1e-6 {
                        integral_mismatches += 1;
                    }
                    node_log[node.id].status = NodeStatus::Integral;
                    if incumbent_value.map_or(true, |best| v < best) {
                        incumbent_value = Some(v);
                        incumbent_set = Some(decoded);
                        ub_trace.push(v as f64);
                        // newly dominated open nodes wait for their pop
                    }
                } else {
                    let triplet = select_branching_variable(
                        inst,
                        &x,
                        params.branch_strategy,
                        params.theta,
                    )
                    .expect("fractional point");
                    node_log[node.id].status = NodeStatus::Branched;
                    // up child first so it wins bound ties
                    let up = node.mask.with_one(triplet);
                    debug_assert!(up.validate().is_ok());
                    let down = node.mask.with_zero(triplet);
                    for mask in [up, down] {
                        let id = next_id;
                        next_id += 1;
                        node_log.push(NodeRecord {
                            id,
                            parent: Some(node.id),
                            depth: node.depth + 1,
                            bound_at_creation: z,
                            final_lp: None,
                            status: NodeStatus::Branched,
                        });
                        queue.push(Pending {
                            id,
                            mask,
                            bound: z,
                            depth: node.depth + 1,
                            tick: next_tick,
                        });
                        next_tick += 1;
                    }
                }
            }
        }
        let ub_now = incumbent_value.map(|v| v as f64).unwrap_or(f64::INFINITY);
        push_lb(&mut lb_trace, &mut global_lb, &queue, ub_now);
    }

    let ub = incumbent_value.map(|v| v as f64);
    let lower_bound = if queue.is_empty() && !timed_out {
        ub.unwrap_or(global_lb)
    } else {
        let open_min = queue.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        global_lb.max(f64::NEG_INFINITY).min(open_min).min(ub.unwrap_or(f64::INFINITY))
    };
    let gap_pct = match ub {
        Some(u) if u.abs() > 1e-12 => 100.0 * (u - lower_bound) / u,
        Some(_) => 0.0,
        None => 100.0,
    };
    SolveReport {
        status: if timed_out {
            SolveStatus::TimeLimit
        } else {
            SolveStatus::Optimal
        },
        best_value: incumbent_value,
        best_set: incumbent_set,
        lower_bound,
        gap_pct: gap_pct.max(0.0),
        nodes: nodes_processed,
        columns: rm.num_columns(),
        cuts: cuts_added,
        wall_time: start.elapsed(),
        integral_mismatches,
        node_log,
        lb_trace,
        ub_trace,
        integral_cut_violations,
    }
}

fn push_lb(trace: &mut Vec<f64>, global_lb: &mut f64, queue: &[Pending], ub: f64) {
    let open_min = queue.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let lb = open_min.min(ub);
    if lb > *global_lb {
        *global_lb = lb;
    }
    trace.push(*global_lb);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate;
    use crate::oracle::{solve_exhaustive, DEFAULT_LIMIT};

    fn example1() -> Instance {
        Instance::new(
            2,
            vec![vec![1, 3, 6], vec![3, 1, 8], vec![6, 8, 1]],
            vec![4, 2, 1],
        )
        .unwrap()
    }

    use crate::instance::Instance;

    #[test]
    fn worked_instance_solves_to_nine() {
        let inst = example1();
        let report = solve(&inst, &BpcParams::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        assert_eq!(report.best_value, Some(9));
        assert!(report.gap_pct <= 1e-6);
        assert_eq!(report.integral_mismatches, 0);
    }

    #[test]
    fn matches_oracle_on_small_instances() {
        for seed in [1u64, 2, 3] {
            let inst = generate(9, 3, 6000 + seed).unwrap();
            let oracle = solve_exhaustive(&inst, DEFAULT_LIMIT).unwrap();
            let report = solve(&inst, &BpcParams::default());
            assert_eq!(report.status, SolveStatus::Optimal, "seed {seed}");
            assert_eq!(report.best_value, Some(oracle.best_value), "seed {seed}");
        }
    }

    #[test]
    fn solves_without_grasp_or_cuts() {
        let inst = generate(8, 3, 7100).unwrap();
        let oracle = solve_exhaustive(&inst, DEFAULT_LIMIT).unwrap();
        let params = BpcParams {
            use_grasp: false,
            use_cuts: false,
            stab_enabled: false,
            hurry_first: false,
            ..BpcParams::default()
        };
        let report = solve(&inst, &params);
        assert_eq!(report.best_value, Some(oracle.best_value));
    }

    #[test]
    fn aggregate_of_an_integral_point_is_binary() {
        let inst = example1();
        let ranks = compute_ranks(&inst);
        let set = FacilitySet::new(vec![0, 2]);
        let cols = crate::evaluation::solution_to_columns(&inst, &ranks, &set).unwrap();
        let values = vec![1.0; cols.len()];
        let x = aggregate_values(&cols, &values);
        assert_eq!(x[&(0, 0, 0)], 1.0);
        assert_eq!(x[&(2, 2, 1)], 1.0);
        assert_eq!(x[&(1, 0, 2)], 1.0);
        assert_eq!(x.len(), 3);
    }

    #[test]
    fn shared_couple_weights_accumulate() {
        let inst = example1();
        // two half-weight columns on the same facility sharing couple (2,3)
        let a = Column::new(&inst, 0, vec![(0, 0), (1, 2)]);
        let b = Column::new(&inst, 0, vec![(1, 2)]);
        let x = aggregate_values(&[a, b], &[0.5, 0.5]);
        assert_eq!(x[&(1, 0, 2)], 1.0);
        assert_eq!(x[&(0, 0, 0)], 0.5);
    }

    #[test]
    fn covering_rows_aggregate_to_one_per_client() {
        let inst = generate(8, 3, 4242).unwrap();
        let ranks = compute_ranks(&inst);
        let mut rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let report = run_column_generation(
            &mut rm,
            &StabConfig::default(),
            &FixingMask::empty(),
        );
        assert_eq!(report.termination, CgTermination::Converged);
        let x = aggregate_x(&rm).unwrap();
        for i in 0..inst.n {
            let total: f64 = x
                .iter()
                .filter(|(&(ci, _, _), _)| ci == i)
                .map(|(_, &v)| v)
                .sum();
            assert!((total - 1.0).abs() < 1e-6, "client {i} covered {total}");
        }
    }

    #[test]
    fn branching_scores_collapse_at_one_half() {
        let inst = example1();
        let mut x = HashMap::new();
        x.insert((0, 0, 0), 0.5); // contribution 4 * 1 = 4
        x.insert((1, 1, 1), 0.5); // contribution 2 * 1 = 2
        x.insert((2, 2, 2), 0.5); // contribution 1 * 1 = 1
        let t = select_branching_variable(&inst, &x, BranchStrategy::WeightedSum, 0.5).unwrap();
        assert_eq!(t, (2, 2, 2)); // smallest weighted cost wins
    }

    #[test]
    fn single_fractional_triplet_is_chosen_by_all_strategies() {
        let inst = example1();
        let mut x = HashMap::new();
        x.insert((1, 0, 1), 0.3);
        x.insert((0, 0, 0), 1.0);
        for s in [
            BranchStrategy::WeightedSum,
            BranchStrategy::BestSide,
            BranchStrategy::WorstSide,
        ] {
            assert_eq!(select_branching_variable(&inst, &x, s, 0.5), Some((1, 0, 1)));
        }
    }

    #[test]
    fn zero_contribution_triplet_wins() {
        let mut inst = example1();
        inst.weights[1] = 0; // any couple at position 2 contributes nothing
        let mut x = HashMap::new();
        x.insert((0, 0, 0), 0.4);
        x.insert((2, 1, 1), 0.6);
        let t = select_branching_variable(&inst, &x, BranchStrategy::WeightedSum, 0.5).unwrap();
        assert_eq!(t, (2, 1, 1));
    }

    #[test]
    fn integral_points_violate_no_cut() {
        let inst = example1();
        let ranks = compute_ranks(&inst);
        let set = FacilitySet::new(vec![0, 2]);
        let cols = crate::evaluation::solution_to_columns(&inst, &ranks, &set).unwrap();
        let x = aggregate_values(&cols, &vec![1.0; cols.len()]);
        let rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let cuts = separate_cuts(inst.n, &ranks, &x, rm.registry(), 100, TOL_CUT);
        assert!(cuts.is_empty());
    }

    #[test]
    fn constructed_fractional_point_is_separated_with_violation_half() {
        let inst = example1();
        let ranks = compute_ranks(&inst);
        // Weight 0.5 on three couples at the boundary between positions 1
        // and 2: two at position 1 with low ranks, one at position 0 with a
        // high rank. Anchored at (client 2, facility 0), threshold r_21 = 5:
        // position-1 couples with rank <= 5 contribute 1.0, position-0
        // couples with rank >= 5 contribute 0.5.
        let mut x = HashMap::new();
        x.insert((0, 0, 1), 0.5); // rank r_11 = 1 <= 5
        x.insert((1, 1, 1), 0.5); // rank r_22 = 2 <= 5
        x.insert((2, 1, 0), 0.5); // rank r_32 = 9 >= 5
        let rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let cuts = separate_cuts(inst.n, &ranks, &x, rm.registry(), 100, TOL_CUT);
        assert!(!cuts.is_empty());
        // recompute the violation of the best cut
        let key = cuts[0];
        let thr = ranks.rank(key.client, key.facility);
        let mut lhs = 0.0;
        for (&(i, j, k), &v) in &x {
            let r = ranks.rank(i, j);
            if k == key.boundary && r <= thr {
                lhs += v;
            }
            if k + 1 == key.boundary && r >= thr {
                lhs += v;
            }
        }
        assert!((lhs - 1.5).abs() < 1e-9, "violation should be exactly 0.5");
    }

    #[test]
    fn decode_pads_to_p_facilities() {
        let inst = example1();
        let mut x = HashMap::new();
        // all clients on facility 0
        x.insert((0, 0, 0), 1.0);
        x.insert((1, 0, 1), 1.0);
        x.insert((2, 0, 2), 1.0);
        let set = decode_incumbent(&inst, &x);
        assert_eq!(set.len(), 2);
        assert!(set.contains(0));
        assert!(set.contains(1)); // smallest closed index
    }

    #[test]
    fn tree_invariants_hold() {
        let inst = generate(10, 4, 8123).unwrap();
        let report = solve(&inst, &BpcParams::default());
        assert_eq!(report.status, SolveStatus::Optimal);
        for w in report.lb_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "lower bound decreased");
        }
        for w in report.ub_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "incumbent increased");
        }
        for rec in &report.node_log {
            if let (Some(parent), Some(lp)) = (rec.parent, rec.final_lp) {
                if let Some(parent_lp) = report.node_log[parent].final_lp {
                    assert!(
                        lp >= parent_lp - 1e-6,
                        "child LP {lp} below parent {parent_lp}"
                    );
                }
            }
        }
        assert_eq!(report.integral_cut_violations, 0);
        assert_eq!(report.integral_mismatches, 0);
    }

    #[test]
    fn root_fixing_is_honored() {
        let inst = example1();
        let ranks = compute_ranks(&inst);
        let oracle = solve_exhaustive(&inst, DEFAULT_LIMIT).unwrap();
        // forbid the optimal assignment of client 1 to facility 1 at
        // position 1: the solver must still find an optimum of equal value
        // through the alternative optimal set {2,3}
        let params = BpcParams {
            root_zero_fixings: vec![(0, 0, 0)],
            ..BpcParams::default()
        };
        let report = solve(&inst, &params);
        assert_eq!(report.best_value, Some(oracle.best_value));
        let set = report.best_set.unwrap();
        let v = ordered_value(&inst, &ranks, &set).unwrap();
        assert_eq!(v, 9);
    }
}
