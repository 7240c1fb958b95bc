//! Pricing: per-facility reduced-cost matrices, the exact dynamic-programming
//! pricer, the greedy heuristic pricer, and the cut-dual sum structures. The
//! Farkas variant reuses the same machinery with column costs dropped.

use crate::evaluation::Column;
use crate::instance::{Instance, RankMatrix};
use crate::master::{CutRegistry, DualVector};
use std::collections::HashSet;
use std::fmt;

/// Triplets `(client, facility, position)` whose aggregated variable is fixed
/// by branching or preprocessing. Node-local.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixingMask {
    zeros: Vec<(usize, usize, usize)>,
    ones: Vec<(usize, usize, usize)>,
    zero_set: HashSet<(usize, usize, usize)>,
}

#[derive(Debug)]
pub struct MaskConflict(pub String);

impl fmt::Display for MaskConflict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "conflicting fixings: {}", self.0)
    }
}

impl std::error::Error for MaskConflict {}

impl FixingMask {
    pub fn empty() -> FixingMask {
        FixingMask::default()
    }

    pub fn zeros(&self) -> &[(usize, usize, usize)] {
        &self.zeros
    }

    pub fn ones(&self) -> &[(usize, usize, usize)] {
        &self.ones
    }

    pub fn is_empty(&self) -> bool {
        self.zeros.is_empty() && self.ones.is_empty()
    }

    pub fn validate(&self) -> Result<(), MaskConflict> {
        for t in &self.ones {
            if self.zero_set.contains(t) {
                return Err(MaskConflict(format!("{t:?} fixed both ways")));
            }
        }
        for (a, ta) in self.ones.iter().enumerate() {
            for tb in self.ones.iter().skip(a + 1) {
                let same = ta == tb;
                if !same && (ta.0 == tb.0 || ta.2 == tb.2) {
                    return Err(MaskConflict(format!(
                        "{ta:?} and {tb:?} share a client or position"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_zero(&self, t: (usize, usize, usize)) -> FixingMask {
        let mut next = self.clone();
        next.zeros.push(t);
        next.zero_set.insert(t);
        next
    }

    pub fn with_one(&self, t: (usize, usize, usize)) -> FixingMask {
        let mut next = self.clone();
        next.ones.push(t);
        next
    }

    /// Whether a pooled column is compatible with every fixing.
    pub fn allows_column(&self, col: &Column) -> bool {
        for &(i, j, k) in &self.zeros {
            if col.facility == j && col.couples.iter().any(|&(ci, ck)| ci == i && ck == k) {
                return false;
            }
        }
        for &(i, j, k) in &self.ones {
            if col.facility == j {
                if col
                    .couples
                    .iter()
                    .any(|&(ci, ck)| (ci == i && ck != k) || (ci != i && ck == k))
                {
                    return false;
                }
            } else if col.couples.iter().any(|&(ci, ck)| ci == i || ck == k) {
                return false;
            }
        }
        true
    }

    /// Marks forbidden `(client, position)` entries of a facility matrix.
    fn apply(&self, facility: usize, n: usize, blocked: &mut dyn FnMut(usize, usize)) {
        for &(i, j, k) in &self.zeros {
            if j == facility {
                blocked(i, k);
            }
        }
        for &(i, j, k) in &self.ones {
            if j == facility {
                for i2 in 0..n {
                    if i2 != i {
                        blocked(i2, k);
                    }
                }
                for k2 in 0..n {
                    if k2 != k {
                        blocked(i, k2);
                    }
                }
            } else {
                for k2 in 0..n {
                    blocked(i, k2);
                }
                for i2 in 0..n {
                    blocked(i2, k);
                }
            }
        }
    }
}

/// Prefix and suffix cut-dual sums per order boundary, indexed by global
/// rank, built once per pricing round. Lookups reproduce the naive double
/// sums bit for bit because both accumulate in the same order: ascending
/// rank for prefixes, descending for suffixes.
#[derive(Debug, Clone)]
pub struct ZetaSums {
    n: usize,
    prefix: Vec<Vec<f64>>, // prefix[b][r] over cuts at boundary b with threshold <= r
    suffix: Vec<Vec<f64>>, // suffix[b][r] over cuts at boundary b with threshold >= r
}

/// Two-pass construction: a forward pass writes the running prefix sum at
/// each cut's rank, a reverse pass the running suffix sum, and a spread pass
/// fills the gaps between cut ranks.
pub fn build_zeta_sums(n: usize, registry: &CutRegistry, zeta: &[f64]) -> ZetaSums {
    let nsq = n * n;
    let mut prefix = vec![vec![0.0f64; nsq + 1]; n];
    let mut suffix = vec![vec![0.0f64; nsq + 2]; n];

    // cuts sorted by boundary then rank threshold
    let mut order: Vec<usize> = (0..registry.cuts.len()).collect();
    order.sort_unstable_by_key(|&c| {
        let (key, thr) = registry.cuts[c];
        (key.boundary, thr)
    });

    let mut marks: Vec<(usize, usize)> = Vec::with_capacity(order.len());
    let mut prev_b = usize::MAX;
    let mut acc = 0.0;
    for &c in &order {
        let (key, thr) = registry.cuts[c];
        if key.boundary != prev_b {
            acc = 0.0;
            prev_b = key.boundary;
        }
        acc += zeta[c];
        prefix[key.boundary][thr as usize] = acc;
        marks.push((key.boundary, thr as usize));
    }
    let mut prev_b = usize::MAX;
    let mut acc = 0.0;
    for &c in order.iter().rev() {
        let (key, thr) = registry.cuts[c];
        if key.boundary != prev_b {
            acc = 0.0;
            prev_b = key.boundary;
        }
        acc += zeta[c];
        suffix[key.boundary][thr as usize] = acc;
    }
    // spread to non-cut ranks
    let cut_at: HashSet<(usize, usize)> = marks.into_iter().collect();
    for b in 1..n {
        let mut current = 0.0;
        for r in 1..=nsq {
            if cut_at.contains(&(b, r)) {
                current = prefix[b][r];
            } else {
                prefix[b][r] = current;
            }
        }
        let mut current = 0.0;
        for r in (1..=nsq).rev() {
            if cut_at.contains(&(b, r)) {
                current = suffix[b][r];
            } else {
                suffix[b][r] = current;
            }
        }
    }
    ZetaSums { n, prefix, suffix }
}

impl ZetaSums {
    pub fn empty(n: usize) -> ZetaSums {
        ZetaSums {
            n,
            prefix: vec![vec![0.0; n * n + 1]; n],
            suffix: vec![vec![0.0; n * n + 2]; n],
        }
    }

    /// Sum of cut duals at `boundary` with rank threshold `<= r`.
    #[inline]
    pub fn prefix_at(&self, boundary: usize, r: u32) -> f64 {
        debug_assert!(boundary >= 1 && boundary < self.n);
        self.prefix[boundary][r as usize]
    }

    /// Sum of cut duals at `boundary` with rank threshold `>= r`.
    #[inline]
    pub fn suffix_at(&self, boundary: usize, r: u32) -> f64 {
        debug_assert!(boundary >= 1 && boundary < self.n);
        self.suffix[boundary][r as usize]
    }
}

/// Contribution of couple `(i, k)` to the reduced cost of a column on
/// facility `j`. With `zero_cost` the weighted cost term is dropped (Farkas
/// pricing). `zs` carries the cut-dual sums when cut rows exist.
#[allow(clippy::too_many_arguments)]
pub fn d_coefficient(
    inst: &Instance,
    ranks: &RankMatrix,
    dv: &DualVector,
    zs: Option<&ZetaSums>,
    i: usize,
    j: usize,
    k: usize,
    zero_cost: bool,
) -> f64 {
    let n = inst.n;
    let nsq = (n * n) as f64;
    let r = ranks.rank(i, j);
    let mut d = if zero_cost {
        0.0
    } else {
        (inst.weights[k] * inst.costs[i][j]) as f64
    };
    d -= dv.alpha[i];
    d -= dv.beta[k];
    if k >= 1 {
        d += (nsq - r as f64 + 1.0) * dv.eps[k];
        if let Some(zs) = zs {
            d += zs.suffix_at(k, r);
        }
    }
    if k + 1 < n {
        d += r as f64 * dv.eps[k + 1];
        if let Some(zs) = zs {
            d += zs.prefix_at(k + 1, r);
        }
    }
    d
}

/// The per-facility pricing table: clients sorted by rank toward the
/// facility, entries `d[l][k]`, with masked couples at infinity.
#[derive(Debug, Clone)]
pub struct PricingMatrix {
    pub facility: usize,
    /// Clients in increasing rank (equivalently cost) toward the facility.
    pub perm: Vec<usize>,
    pub d: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn build_pricing_matrix(
    inst: &Instance,
    ranks: &RankMatrix,
    dv: &DualVector,
    zs: Option<&ZetaSums>,
    facility: usize,
    mask: &FixingMask,
    zero_cost: bool,
) -> PricingMatrix {
    let n = inst.n;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.sort_unstable_by_key(|&i| ranks.rank(i, facility));
    let mut d = vec![vec![0.0; n]; n];
    for (l, &i) in perm.iter().enumerate() {
        for (k, cell) in d[l].iter_mut().enumerate() {
            *cell = d_coefficient(inst, ranks, dv, zs, i, facility, k, zero_cost);
        }
    }
    let row_of: Vec<usize> = {
        let mut map = vec![0; n];
        for (l, &i) in perm.iter().enumerate() {
            map[i] = l;
        }
        map
    };
    mask.apply(facility, n, &mut |i, k| {
        d[row_of[i]][k] = f64::INFINITY;
    });
    PricingMatrix { facility, perm, d }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Empty,
    CopyLeft,
    CopyUp,
    CopyDiag,
    Include,
}

/// The minimum over feasible couple sets of the summed d-entries, plus the
/// reconstructed set. The recursion follows the published order exactly:
/// exclusion candidates are checked before inclusion, so zero-valued entries
/// never enter the set.
pub fn exact_pricer(pm: &PricingMatrix, dv: &DualVector) -> (f64, Vec<(usize, usize)>) {
    let n = pm.perm.len();
    let mut g = vec![vec![0.0f64; n]; n];
    let mut step = vec![vec![Step::Empty; n]; n];

    g[0][0] = if pm.d[0][0] < 0.0 { pm.d[0][0] } else { 0.0 };
    step[0][0] = if pm.d[0][0] < 0.0 {
        Step::Include
    } else {
        Step::Empty
    };
    for k in 1..n {
        if g[0][k - 1] <= pm.d[0][k] {
            g[0][k] = g[0][k - 1];
            step[0][k] = Step::CopyLeft;
        } else {
            g[0][k] = pm.d[0][k];
            step[0][k] = Step::Include;
        }
    }
    for l in 1..n {
        if g[l - 1][0] <= pm.d[l][0] {
            g[l][0] = g[l - 1][0];
            step[l][0] = Step::CopyUp;
        } else {
            g[l][0] = pm.d[l][0];
            step[l][0] = Step::Include;
        }
    }
    for l in 1..n {
        for k in 1..n {
            let include = g[l - 1][k - 1] + pm.d[l][k];
            let diag = g[l - 1][k - 1];
            let left = g[l][k - 1];
            let up = g[l - 1][k];
            let best = include.min(diag).min(left).min(up);
            let s = if best == diag {
                Step::CopyDiag
            } else if best == left {
                Step::CopyLeft
            } else if best == up {
                Step::CopyUp
            } else {
                Step::Include
            };
            g[l][k] = best;
            step[l][k] = s;
        }
    }

    let mut set = Vec::new();
    let (mut l, mut k) = (n - 1, n - 1);
    loop {
        match step[l][k] {
            Step::Include => {
                set.push((pm.perm[l], k));
                if l == 0 || k == 0 {
                    break;
                }
                l -= 1;
                k -= 1;
            }
            Step::CopyDiag => {
                l -= 1;
                k -= 1;
            }
            Step::CopyLeft => {
                if k == 0 {
                    break;
                }
                k -= 1;
            }
            Step::CopyUp => {
                if l == 0 {
                    break;
                }
                l -= 1;
            }
            Step::Empty => break,
        }
    }
    set.reverse();
    let rc = g[n - 1][n - 1] + dv.delta + dv.gamma[pm.facility];
    (rc, set)
}

/// Result of one exact pricing pass over a facility.
#[derive(Debug, Clone)]
pub struct FacilityPricing {
    pub facility: usize,
    pub min_reduced_cost: f64,
    pub couples: Vec<(usize, usize)>,
}

/// Exact pricing of every facility against one dual vector. With the
/// `parallel` feature the per-facility work is distributed; results are
/// collected in facility order either way.
pub fn exact_round(
    inst: &Instance,
    ranks: &RankMatrix,
    dv: &DualVector,
    registry: &CutRegistry,
    mask: &FixingMask,
    zero_cost: bool,
) -> Vec<FacilityPricing> {
    let zs = (!registry.is_empty()).then(|| build_zeta_sums(inst.n, registry, &dv.zeta));
    let price = |j: usize| -> FacilityPricing {
        let pm = build_pricing_matrix(inst, ranks, dv, zs.as_ref(), j, mask, zero_cost);
        let (rc, couples) = exact_pricer(&pm, dv);
        FacilityPricing {
            facility: j,
            min_reduced_cost: rc,
            couples,
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..inst.n).into_par_iter().map(price).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..inst.n).map(price).collect()
    }
}

/// Sequential twin of [`exact_round`], kept public for the benchmark suite.
pub fn exact_round_seq(
    inst: &Instance,
    ranks: &RankMatrix,
    dv: &DualVector,
    registry: &CutRegistry,
    mask: &FixingMask,
    zero_cost: bool,
) -> Vec<FacilityPricing> {
    let zs = (!registry.is_empty()).then(|| build_zeta_sums(inst.n, registry, &dv.zeta));
    (0..inst.n)
        .map(|j| {
            let pm = build_pricing_matrix(inst, ranks, dv, zs.as_ref(), j, mask, zero_cost);
            let (rc, couples) = exact_pricer(&pm, dv);
            FacilityPricing {
                facility: j,
                min_reduced_cost: rc,
                couples,
            }
        })
        .collect()
}

/// Greedy heuristic pricer: scans each facility's clients in rank order and
/// positions left to right past the last used one, grabbing the first
/// negative entry. Sound (every emission is recomputed exactly by the
/// caller) but not complete.
pub fn hurry_pricer(
    inst: &Instance,
    ranks: &RankMatrix,
    dv: &DualVector,
    registry: &CutRegistry,
    mask: &FixingMask,
    zero_cost: bool,
    threshold: f64,
) -> Vec<FacilityPricing> {
    let n = inst.n;
    let zs = (!registry.is_empty()).then(|| build_zeta_sums(n, registry, &dv.zeta));
    let mut found = Vec::new();
    for j in 0..n {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_unstable_by_key(|&i| ranks.rank(i, j));
        let mut blocked = vec![vec![false; n]; n];
        let row_of = {
            let mut map = vec![0; n];
            for (l, &i) in perm.iter().enumerate() {
                map[i] = l;
            }
            map
        };
        mask.apply(j, n, &mut |i, k| blocked[row_of[i]][k] = true);

        let mut cbar = 0.0;
        let mut couples: Vec<(usize, usize)> = Vec::new();
        let mut last_k: isize = -1;
        for &i in &perm {
            if last_k >= 0 && (last_k as usize) + 1 >= n {
                break;
            }
            let mut k = (last_k + 1) as usize;
            while k < n {
                if !blocked[row_of[i]][k] {
                    // stage one: without cut duals
                    let d_plain = d_coefficient(inst, ranks, dv, None, i, j, k, zero_cost);
                    if d_plain < 0.0 {
                        let d_full = if let Some(zs) = zs.as_ref() {
                            d_coefficient(inst, ranks, dv, Some(zs), i, j, k, zero_cost)
                        } else {
                            d_plain
                        };
                        if d_full < 0.0 {
                            cbar += d_full;
                            couples.push((i, k));
                            last_k = k as isize;
                            break;
                        }
                    }
                }
                k += 1;
            }
        }
        let rc = cbar + dv.delta + dv.gamma[j];
        if !couples.is_empty() && rc < threshold {
            found.push(FacilityPricing {
                facility: j,
                min_reduced_cost: rc,
                couples,
            });
        }
    }
    found
}

/// Builds the master column for a priced couple set.
pub fn to_column(inst: &Instance, fp: &FacilityPricing) -> Column {
    Column::new(inst, fp.facility, fp.couples.clone())
}
