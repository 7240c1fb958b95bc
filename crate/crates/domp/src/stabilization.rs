//! Stabilized column generation for one restricted master: prices at a
//! convex combination of the best-known and the current duals, keeps a
//! Lagrangian bound, and always finishes with an exact certification round
//! at the true master duals.

use crate::lp::{LpStatus, TOL_OPT};
use crate::master::{DualVector, RestrictedMaster};
use crate::pricing::{exact_round, hurry_pricer, to_column, FacilityPricing, FixingMask};

#[derive(Debug, Clone)]
pub struct StabConfig {
    /// Initial weight of the current duals in the combination, in `(0, 1]`.
    pub delta_init: f64,
    /// Gap threshold that triggers a certification attempt.
    pub eps_gap: f64,
    /// With stabilization off the combination weight is pinned at 1.
    pub enabled: bool,
    /// Try the greedy pricer before the exact one.
    pub hurry_first: bool,
    pub max_iterations: usize,
    /// Abort once the Lagrangian bound pair proves the node cannot beat
    /// this value (branch-and-bound fathoming).
    pub abort_above: Option<f64>,
}

impl Default for StabConfig {
    fn default() -> StabConfig {
        StabConfig {
            delta_init: 0.6,
            eps_gap: 1e-6,
            enabled: true,
            hurry_first: true,
            max_iterations: 10_000,
            abort_above: None,
        }
    }
}

impl StabConfig {
    pub fn disabled() -> StabConfig {
        StabConfig {
            enabled: false,
            hurry_first: false,
            ..StabConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgTermination {
    Converged,
    IterationLimit,
    Infeasible,
    /// The node bound reached `abort_above`; the LP was not priced out.
    BoundExceeded,
}

#[derive(Debug, Clone)]
pub struct CgIteration {
    pub iteration: usize,
    pub objective: f64,
    pub lagrangian: f64,
    pub delta: f64,
    pub columns_added: usize,
    /// Present when an exact round ran at the unstabilized master duals.
    pub facility_minima: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct CgReport {
    pub objective: f64,
    pub iterations: usize,
    pub columns_added: usize,
    pub best_lagrangian: f64,
    /// Exact per-facility reduced-cost minima at termination.
    pub facility_minima: Vec<f64>,
    /// Best `max(lb1, lb2)` certified during the run.
    pub node_bound: f64,
    pub termination: CgTermination,
    pub trace: Vec<CgIteration>,
}

/// Re-solves the master, running Farkas pricing rounds while it is
/// infeasible. Returns false when no column can restore feasibility.
fn solve_with_farkas(rm: &mut RestrictedMaster, mask: &FixingMask, added: &mut usize) -> bool {
    loop {
        let status = rm.solve().status;
        match status {
            LpStatus::Optimal => return true,
            LpStatus::Infeasible => {
                let fv = rm.farkas_duals().expect("infeasible solve has a certificate");
                let round = exact_round(rm.inst, rm.ranks, &fv, &rm.registry().clone(), mask, true);
                let mut new_cols = 0;
                for fp in round {
                    if fp.min_reduced_cost < -TOL_OPT && !fp.couples.is_empty() {
                        let col = to_column(rm.inst, &fp);
                        debug_assert!(
                            (rm.reduced_cost(&col, &fv, true) - fp.min_reduced_cost).abs() < 1e-6
                        );
                        if rm.add_column(col).is_some() {
                            new_cols += 1;
                        }
                    }
                }
                if new_cols == 0 {
                    return false;
                }
                *added += new_cols;
            }
            LpStatus::Unbounded => unreachable!("master has nonnegative costs"),
            LpStatus::IterationLimit => panic!("pivot budget exhausted on the master LP"),
        }
    }
}

/// Lagrangian bound at an arbitrary sign-feasible multiplier vector, using
/// the exact per-facility minima priced at that vector.
fn lagrangian_at(rm: &RestrictedMaster, dv: &DualVector, round: &[FacilityPricing]) -> f64 {
    rm.dual_objective(dv)
        + round
            .iter()
            .map(|fp| fp.min_reduced_cost.min(0.0))
            .sum::<f64>()
}

pub fn run_column_generation(
    rm: &mut RestrictedMaster,
    cfg: &StabConfig,
    mask: &FixingMask,
) -> CgReport {
    let n = rm.inst.n;
    let ncuts = rm.registry().len();
    let registry = rm.registry().clone();

    let mut delta = if cfg.enabled {
        cfg.delta_init.clamp(f64::MIN_POSITIVE, 1.0)
    } else {
        1.0
    };
    let mut pi_bar = DualVector::zeros(n, ncuts);
    let mut lb_bar = 0.0f64;
    let mut gap = 1.0f64;
    let mut total_added = 0usize;
    let mut trace: Vec<CgIteration> = Vec::new();
    let mut node_bound = f64::NEG_INFINITY;
    let mut last_minima: Vec<f64> = Vec::new();

    let mut report = |objective: f64,
                      iterations: usize,
                      total_added: usize,
                      lb_bar: f64,
                      minima: Vec<f64>,
                      node_bound: f64,
                      termination: CgTermination,
                      trace: Vec<CgIteration>| CgReport {
        objective,
        iterations,
        columns_added: total_added,
        best_lagrangian: lb_bar,
        facility_minima: minima,
        node_bound,
        termination,
        trace,
    };

    let mut iteration = 0usize;
    loop {
        if iteration >= cfg.max_iterations {
            let z = rm.objective().unwrap_or(f64::NAN);
            return report(
                z,
                iteration,
                total_added,
                lb_bar,
                last_minima,
                node_bound,
                CgTermination::IterationLimit,
                trace,
            );
        }
        if !solve_with_farkas(rm, mask, &mut total_added) {
            return report(
                f64::INFINITY,
                iteration,
                total_added,
                lb_bar,
                last_minima,
                node_bound,
                CgTermination::Infeasible,
                trace,
            );
        }
        let z = rm.objective().expect("optimal after feasibility restore");
        let pi_master = rm.duals().expect("optimal");

        let pi_st = if cfg.enabled && delta < 1.0 {
            pi_master.combine(&pi_bar, delta)
        } else {
            pi_master.clone()
        };
        let at_master_duals = !cfg.enabled || delta >= 1.0;

        // one pricing round at the (possibly stabilized) duals
        let mut exact_pist: Option<Vec<FacilityPricing>> = None;
        let candidates: Vec<FacilityPricing> = if cfg.hurry_first {
            let found = hurry_pricer(rm.inst, rm.ranks, &pi_st, &registry, mask, false, -TOL_OPT);
            if found.is_empty() {
                let r = exact_round(rm.inst, rm.ranks, &pi_st, &registry, mask, false);
                exact_pist = Some(r.clone());
                r
            } else {
                found
            }
        } else {
            let r = exact_round(rm.inst, rm.ranks, &pi_st, &registry, mask, false);
            exact_pist = Some(r.clone());
            r
        };

        // a candidate enters only if it prices negative at the true duals
        let mut added = 0usize;
        for fp in &candidates {
            if fp.couples.is_empty() || fp.min_reduced_cost >= -TOL_OPT {
                continue;
            }
            let col = to_column(rm.inst, fp);
            if rm.reduced_cost(&col, &pi_master, false) < -TOL_OPT && rm.add_column(col).is_some() {
                added += 1;
            }
        }
        total_added += added;

        // Lagrangian bookkeeping only from exact rounds, where the bound is
        // valid; the best multiplier vector is kept with its best bound.
        if let Some(round) = &exact_pist {
            let lb = lagrangian_at(rm, &pi_st, round);
            if added > 0 {
                if lb > lb_bar {
                    pi_bar = pi_st.clone();
                    lb_bar = lb;
                }
            } else {
                pi_bar = pi_st.clone();
                lb_bar = lb_bar.max(lb);
            }
            if at_master_duals {
                let minima: Vec<f64> = round.iter().map(|f| f.min_reduced_cost).collect();
                let (lb1, lb2) = rm.lp_bound_pair(z, &minima);
                node_bound = node_bound.max(lb1.max(lb2));
                last_minima = minima;
            }
        }
        if z > 1e-12 {
            gap = (z - lb_bar) / z;
        }
        if cfg.enabled && gap < 1.0 - delta {
            delta = 1.0 - gap;
        }

        trace.push(CgIteration {
            iteration,
            objective: z,
            lagrangian: lb_bar,
            delta,
            columns_added: added,
            facility_minima: if at_master_duals {
                exact_pist
                    .as_ref()
                    .map(|r| r.iter().map(|f| f.min_reduced_cost).collect())
            } else {
                None
            },
        });

        // early fathoming on certified bounds
        if let Some(limit) = cfg.abort_above {
            if node_bound >= limit {
                return report(
                    z,
                    iteration + 1,
                    total_added,
                    lb_bar,
                    last_minima,
                    node_bound,
                    CgTermination::BoundExceeded,
                    trace,
                );
            }
        }

        if added == 0 || gap <= cfg.eps_gap {
            // certification at the true master duals
            let (minima, cert_added) = if at_master_duals && exact_pist.is_some() {
                (last_minima.clone(), added)
            } else {
                let round = exact_round(rm.inst, rm.ranks, &pi_master, &registry, mask, false);
                let minima: Vec<f64> = round.iter().map(|f| f.min_reduced_cost).collect();
                let (lb1, lb2) = rm.lp_bound_pair(z, &minima);
                node_bound = node_bound.max(lb1.max(lb2));
                lb_bar = lb_bar.max(lagrangian_at(rm, &pi_master, &round));
                let mut cert_added = 0usize;
                for fp in &round {
                    if fp.min_reduced_cost < -TOL_OPT && !fp.couples.is_empty() {
                        let col = to_column(rm.inst, fp);
                        if rm.add_column(col).is_some() {
                            cert_added += 1;
                        }
                    }
                }
                total_added += cert_added;
                last_minima = minima.clone();
                (minima, cert_added)
            };
            if let Some(limit) = cfg.abort_above {
                if node_bound >= limit {
                    return report(
                        z,
                        iteration + 1,
                        total_added,
                        lb_bar,
                        last_minima,
                        node_bound,
                        CgTermination::BoundExceeded,
                        trace,
                    );
                }
            }
            if cert_added == 0 {
                node_bound = node_bound.max(z);
                return report(
                    z,
                    iteration + 1,
                    total_added,
                    lb_bar,
                    minima,
                    node_bound,
                    CgTermination::Converged,
                    trace,
                );
            }
        }
        iteration += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::Column;
    use crate::instance::{compute_ranks, generate, Instance, RankMatrix};
    use crate::master::{RestrictedMaster, RowConvention};

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
        vec![
            Column::new(inst, 1, vec![(1, 1)]),
            Column::new(inst, 0, vec![(0, 0), (2, 2)]),
        ]
    }

    #[test]
    fn worked_example_converges_to_nine() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        let report = run_column_generation(&mut rm, &StabConfig::disabled(), &FixingMask::empty());
        assert_eq!(report.termination, CgTermination::Converged);
        assert!((report.objective - 9.0).abs() < 1e-6, "{}", report.objective);
        // iteration 0: printed value and per-facility minima
        let first = &report.trace[0];
        assert_eq!(first.objective, 12.0);
        assert_eq!(
            first.facility_minima.as_ref().unwrap(),
            &vec![-9.0, -11.0, -9.0]
        );
        // value never increases, Lagrangian bound never decreases
        for w in report.trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-9);
            assert!(w[1].lagrangian >= w[0].lagrangian - 1e-9);
        }
        assert!(report.best_lagrangian <= report.objective + 1e-6);
        assert!(report
            .facility_minima
            .iter()
            .all(|&m| m >= -crate::lp::TOL_OPT));
    }

    #[test]
    fn empty_pool_bootstraps_through_farkas_pricing() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let report = run_column_generation(&mut rm, &StabConfig::default(), &FixingMask::empty());
        assert_eq!(report.termination, CgTermination::Converged);
        assert!((report.objective - 9.0).abs() < 1e-6);
    }

    #[test]
    fn stabilized_and_unstabilized_agree() {
        for seed in [3u64, 11, 29] {
            let inst = generate(9, 3, seed).unwrap();
            let ranks = compute_ranks(&inst);
            let mut values = Vec::new();
            for delta in [0.2, 0.6, 1.0] {
                let mut rm = RestrictedMaster::build(&inst, &ranks, &[]);
                let cfg = StabConfig {
                    delta_init: delta,
                    enabled: delta < 1.0,
                    hurry_first: true,
                    ..StabConfig::default()
                };
                let report = run_column_generation(&mut rm, &cfg, &FixingMask::empty());
                assert_eq!(report.termination, CgTermination::Converged);
                values.push(report.objective);
            }
            for v in &values {
                assert!(
                    (v - values[0]).abs() < 1e-6,
                    "seed {seed}: values {values:?}"
                );
            }
        }
    }

    #[test]
    fn covering_and_partitioning_conventions_agree_at_optimum() {
        for seed in [5u64, 17] {
            let inst = generate(7, 3, seed).unwrap();
            let ranks = compute_ranks(&inst);
            let mut cover = RestrictedMaster::build(&inst, &ranks, &[]);
            let a = run_column_generation(&mut cover, &StabConfig::default(), &FixingMask::empty());
            let mut part = RestrictedMaster::build_with(
                &inst,
                &ranks,
                &[],
                RowConvention::Partitioning,
            );
            let b = run_column_generation(&mut part, &StabConfig::default(), &FixingMask::empty());
            assert_eq!(a.termination, CgTermination::Converged);
            assert_eq!(b.termination, CgTermination::Converged);
            assert!(
                (a.objective - b.objective).abs() < 1e-6,
                "seed {seed}: {} vs {}",
                a.objective,
                b.objective
            );
        }
    }

    #[test]
    fn abort_bound_prunes_early() {
        let (inst, ranks) = example1();
        let mut rm = RestrictedMaster::build(&inst, &ranks, &example1_pool(&inst));
        let cfg = StabConfig {
            abort_above: Some(-100.0), // absurd: anything certifies above this
            ..StabConfig::disabled()
        };
        let report = run_column_generation(&mut rm, &cfg, &FixingMask::empty());
        assert_eq!(report.termination, CgTermination::BoundExceeded);
        assert!(report.node_bound >= -100.0);
    }

    #[test]
    fn infeasible_mask_is_detected() {
        let (inst, ranks) = example1();
        // client 1 must sit at every position on facility 1 at once: the two
        // one-fixings conflict with serving the other clients anywhere
        let mask = FixingMask::empty()
            .with_zero((0, 0, 0))
            .with_zero((0, 1, 0))
            .with_zero((0, 2, 0))
            .with_zero((0, 0, 1))
            .with_zero((0, 1, 1))
            .with_zero((0, 2, 1))
            .with_zero((0, 0, 2))
            .with_zero((0, 1, 2))
            .with_zero((0, 2, 2));
        let mut rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let report = run_column_generation(&mut rm, &StabConfig::default(), &mask);
        assert_eq!(report.termination, CgTermination::Infeasible);
    }

    #[test]
    fn pool_prices_nonnegative_after_convergence() {
        let inst = generate(8, 3, 99).unwrap();
        let ranks = compute_ranks(&inst);
        let mut rm = RestrictedMaster::build(&inst, &ranks, &[]);
        let report = run_column_generation(&mut rm, &StabConfig::default(), &FixingMask::empty());
        assert_eq!(report.termination, CgTermination::Converged);
        let dv = rm.duals().unwrap();
        assert!(rm.pool_reduced_costs_ok(&dv));
        // spot-check random feasible sets
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..50 {
            let j = rng.next_below(8) as usize;
            let mut pool: Vec<usize> = (0..8).collect();
            for i in (1..8).rev() {
                let t = rng.next_below((i + 1) as u64) as usize;
                pool.swap(i, t);
            }
            let take = 1 + rng.next_below(3) as usize;
            let mut clients: Vec<usize> = pool.into_iter().take(take).collect();
            clients.sort_unstable_by_key(|&i| ranks.rank(i, j));
            // positions strictly increasing and compatible with rank order
            let mut couples = Vec::new();
            let mut k = rng.next_below(2) as usize;
            for &i in &clients {
                if k >= 8 {
                    break;
                }
                couples.push((i, k));
                k += 1 + rng.next_below(2) as usize;
            }
            let col = Column::new(&inst, j, couples);
            if col.check(&inst, &ranks).is_ok() {
                assert!(rm.reduced_cost(&col, &dv, false) >= -1e-5);
            }
        }
    }
}
