//! Problem instances: `n` points that are both clients and candidate sites,
//! an integer cost matrix, the position weights, and the global cost ranking
//! derived from them.

use crate::rng::SplitMix64;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

/// A discrete ordered median instance.
///
/// `costs[i][j]` is the cost of serving client `i` from facility `j`;
/// `weights[k]` multiplies the `(k+1)`-th smallest allocation cost in the
/// objective. All data is integral.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub n: usize,
    pub p: usize,
    pub costs: Vec<Vec<i64>>,
    pub weights: Vec<i64>,
}

/// Global ranking of the `n^2` costs: `ranks[i][j]` is the 1-based position
/// of `costs[i][j]` in the sorted cost list. Ties are broken by `(i, j)`
/// lexicographic order, so the ranking is always a permutation of `1..=n^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankMatrix {
    pub ranks: Vec<Vec<u32>>,
}

impl RankMatrix {
    pub fn n(&self) -> usize {
        self.ranks.len()
    }

    #[inline]
    pub fn rank(&self, i: usize, j: usize) -> u32 {
        self.ranks[i][j]
    }
}

#[derive(Debug)]
pub enum InstanceError {
    Invalid(String),
    Parse { line: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for InstanceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InstanceError::Invalid(m) => write!(f, "invalid instance: {m}"),
            InstanceError::Parse { line, message } => {
                write!(f, "parse error at line {line}: {message}")
            }
            InstanceError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for InstanceError {}

impl From<std::io::Error> for InstanceError {
    fn from(e: std::io::Error) -> Self {
        InstanceError::Io(e)
    }
}

impl Instance {
    pub fn new(
        p: usize,
        costs: Vec<Vec<i64>>,
        weights: Vec<i64>,
    ) -> Result<Instance, InstanceError> {
        let inst = Instance {
            n: costs.len(),
            p,
            costs,
            weights,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.n == 0 {
            return Err(InstanceError::Invalid("n must be positive".into()));
        }
        if self.p == 0 || self.p > self.n {
            return Err(InstanceError::Invalid(format!(
                "p = {} out of range 1..={}",
                self.p, self.n
            )));
        }
        if self.costs.len() != self.n {
            return Err(InstanceError::Invalid(format!(
                "cost matrix has {} rows, expected {}",
                self.costs.len(),
                self.n
            )));
        }
        for (i, row) in self.costs.iter().enumerate() {
            if row.len() != self.n {
                return Err(InstanceError::Invalid(format!(
                    "cost row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    self.n
                )));
            }
            if let Some(&c) = row.iter().find(|&&c| c < 0) {
                return Err(InstanceError::Invalid(format!(
                    "negative cost {} in row {}",
                    c,
                    i + 1
                )));
            }
        }
        if self.weights.len() != self.n {
            return Err(InstanceError::Invalid(format!(
                "weight vector has {} entries, expected {}",
                self.weights.len(),
                self.n
            )));
        }
        if let Some(&w) = self.weights.iter().find(|&&w| w < 0) {
            return Err(InstanceError::Invalid(format!("negative weight {w}")));
        }
        Ok(())
    }
}

/// Ranks all costs globally; equal costs are ordered by client index, then
/// facility index, so the result is deterministic.
pub fn compute_ranks(inst: &Instance) -> RankMatrix {
    let n = inst.n;
    let mut order: Vec<(i64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            order.push((inst.costs[i][j], i, j));
        }
    }
    order.sort_unstable();
    let mut ranks = vec![vec![0u32; n]; n];
    for (pos, &(_, i, j)) in order.iter().enumerate() {
        ranks[i][j] = (pos + 1) as u32;
    }
    RankMatrix { ranks }
}

/// Generates a random instance: `n` points uniform in the 400x400 square,
/// costs are rounded Euclidean distances, each diagonal entry is replaced by
/// the smallest off-diagonal cost, and the weights are uniform integers in
/// `[n/4, n]`. Pure function of `(n, p, seed)`.
pub fn generate(n: usize, p: usize, seed: u64) -> Result<Instance, InstanceError> {
    if n == 0 || p == 0 || p > n {
        return Err(InstanceError::Invalid(format!(
            "cannot generate with n = {n}, p = {p}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let points: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.unit_f64() * 400.0, rng.unit_f64() * 400.0))
        .collect();

    let mut costs = vec![vec![0i64; n]; n];
    let mut min_off = i64::MAX;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dx = points[i].0 - points[j].0;
            let dy = points[i].1 - points[j].1;
            let c = (dx * dx + dy * dy).sqrt().round() as i64;
            costs[i][j] = c;
            min_off = min_off.min(c);
        }
    }
    if n == 1 {
        min_off = 0;
    }
    for (i, row) in costs.iter_mut().enumerate() {
        row[i] = min_off;
    }

    let lo = (n / 4) as i64;
    let weights: Vec<i64> = (0..n).map(|_| rng.int_in(lo, n as i64)).collect();

    Instance::new(p, costs, weights)
}

const MAGIC: &str = "DOMP 1";

/// Writes the plain-text instance format (see [`load`]).
pub fn save(inst: &Instance, path: &Path) -> Result<(), InstanceError> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("{} {}\n", inst.n, inst.p));
    for row in &inst.costs {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    let lambda: Vec<String> = inst.weights.iter().map(|w| w.to_string()).collect();
    out.push_str(&lambda.join(" "));
    out.push('\n');
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads an instance file:
///
/// ```text
/// DOMP 1
/// n p
/// <n rows of n costs>
/// <n weights>
/// ```
pub fn load(path: &Path) -> Result<Instance, InstanceError> {
    let text = fs::read_to_string(path)?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Instance, InstanceError> {
    let mut lines = text.lines().enumerate();

    let (ln, magic) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    if magic.trim() != MAGIC {
        return Err(parse_err(ln + 1, format!("expected `{MAGIC}` header")));
    }

    let (ln, header) = lines
        .next()
        .ok_or_else(|| parse_err(2, "missing `n p` line".into()))?;
    let mut it = header.split_whitespace();
    let n: usize = next_field(&mut it, ln + 1, "n")?;
    let p: usize = next_field(&mut it, ln + 1, "p")?;
    if it.next().is_some() {
        return Err(parse_err(ln + 1, "trailing data after `n p`".into()));
    }

    let mut costs = Vec::with_capacity(n);
    for r in 0..n {
        let (ln, row_text) = lines
            .next()
            .ok_or_else(|| parse_err(r + 3, format!("missing cost row {} of {}", r + 1, n)))?;
        let row: Vec<i64> = parse_int_row(row_text, ln + 1)?;
        if row.len() != n {
            return Err(parse_err(
                ln + 1,
                format!("cost row has {} entries, expected {}", row.len(), n),
            ));
        }
        costs.push(row);
    }

    let (ln, lambda_text) = lines
        .next()
        .ok_or_else(|| parse_err(n + 3, "missing weight line".into()))?;
    let weights = parse_int_row(lambda_text, ln + 1)?;
    if weights.len() != n {
        return Err(parse_err(
            ln + 1,
            format!("weight line has {} entries, expected {}", weights.len(), n),
        ));
    }

    Instance::new(p, costs, weights)
}

fn parse_err(line: usize, message: String) -> InstanceError {
    InstanceError::Parse { line, message }
}

fn next_field<T: std::str::FromStr>(
    it: &mut std::str::SplitWhitespace<'_>,
    line: usize,
    what: &str,
) -> Result<T, InstanceError> {
    it.next()
        .ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what}")))
}

fn parse_int_row(text: &str, line: usize) -> Result<Vec<i64>, InstanceError> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<i64>()
                .map_err(|_| parse_err(line, format!("`{tok}` is not an integer")))
        })
        .collect()
}
