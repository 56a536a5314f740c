//! Global leverage of a record universe: the largest leverage a record can
//! have inside a size-`k` database built from the universe.
//!
//! A candidate is a database `D` of `k` distinct records and a record `v` of
//! `D` such that both `D` and `D \ {v}` have full column rank, i.e. a
//! neighbouring pair of full-rank databases. Its value is `v^T (D^T D)^{-1} v`.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::numerics::SeedStream;
use crate::registry::Registry;

/// Largest number of subsets [`exact_gl`] enumerates per candidate record.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// A finite set of distinct records.
#[derive(Debug, Clone, PartialEq)]
pub struct Universe {
    records: Matrix,
}

impl Universe {
    pub fn new(records: Matrix) -> Result<Self> {
        let rows = records.to_rows();
        for i in 0..rows.len() {
            for j in 0..i {
                if rows[i] == rows[j] {
                    return Err(Error::InvalidParameter(format!("records {j} and {i} are identical")));
                }
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &Matrix {
        &self.records
    }

    pub fn m(&self) -> usize {
        self.records.rows()
    }

    pub fn d(&self) -> usize {
        self.records.cols()
    }

    pub fn record(&self, i: usize) -> &[f64] {
        self.records.row(i)
    }

    fn gram_of(&self, idx: &[usize]) -> Matrix {
        let d = self.d();
        let mut g = Matrix::zeros(d, d);
        for &i in idx {
            let r = self.record(i);
            for a in 0..d {
                for b in 0..d {
                    g[(a, b)] += r[a] * r[b];
                }
            }
        }
        g
    }

    // Leverage of record `v` in `others + {v}`, None when `others` is rank deficient.
    fn leverage_with(&self, v: usize, others: &[usize]) -> Option<f64> {
        let chol = Cholesky::new(&self.gram_of(others)).ok()?;
        let h = chol.quad_inverse(self.record(v));
        Some(h / (1.0 + h))
    }
}

/// `v^T (D^T D)^{-1} v` with `D = small + {v}`.
pub fn pair_leverage(small: &Matrix, v: &[f64]) -> Result<f64> {
    if v.len() != small.cols() {
        return Err(Error::DimMismatch {
            expected: small.cols(),
            actual: v.len(),
        });
    }
    let big = small.with_row(v)?;
    let chol = crate::linalg::gram_factor(&big)?;
    Ok(chol.quad_inverse(v))
}

/// Universe of the `d` standard basis vectors plus `(sqrt(1/eps - 1), 0, ..., 0)`.
pub fn gl_witness(d: usize, eps: f64) -> Result<Universe> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if eps == 0.5 {
        // the extra record coincides with e_1
        return Err(Error::Degenerate("witness universe needs eps != 1/2 for distinct records".into()));
    }
    let mut rows: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut extra = vec![0.0; d];
    extra[0] = (1.0 / eps - 1.0).sqrt();
    rows.push(extra);
    Universe::new(Matrix::from_rows(&rows)?)
}

/// Best candidate found by a search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlResult {
    pub value: f64,
    /// Universe index of the record attaining the value.
    pub record: usize,
    /// Sorted universe indices of the database.
    pub subset: Vec<usize>,
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u128::MAX / 1024 {
            return u128::MAX;
        }
    }
    c
}

fn check_k(u: &Universe, k: usize) -> Result<()> {
    if k < 2 || k > u.m() {
        return Err(Error::InvalidParameter(format!(
            "database size k = {k} must lie in [2, m = {}]",
            u.m()
        )));
    }
    Ok(())
}

// Visits every increasing index tuple of length k drawn from `pool`.
fn for_each_combination(pool: &[usize], k: usize, mut f: impl FnMut(&[usize])) {
    let n = pool.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut chosen: Vec<usize> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        f(&chosen);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
        for j in i..k {
            chosen[j] = pool[idx[j]];
        }
    }
}

fn better(a: &Option<GlResult>, value: f64) -> bool {
    a.as_ref().is_none_or(|b| value > b.value)
}

fn finish(best: Option<GlResult>) -> Result<GlResult> {
    best.ok_or_else(|| Error::Degenerate("no full-rank neighbouring pair of the requested size".into()))
}

/// Exact global leverage by enumerating every size-`k` database around every record.
pub fn exact_gl(u: &Universe, k: usize) -> Result<GlResult> {
    check_k(u, k)?;
    let per_record = binomial(u.m() - 1, k - 1);
    if per_record > ENUMERATION_LIMIT {
        return Err(Error::TooLarge(per_record));
    }
    let per_v: Vec<Option<GlResult>> = (0..u.m())
        .into_par_iter()
        .map(|v| {
            let pool: Vec<usize> = (0..u.m()).filter(|&i| i != v).collect();
            let mut best: Option<GlResult> = None;
            for_each_combination(&pool, k - 1, |others| {
                if let Some(lev) = u.leverage_with(v, others) {
                    if better(&best, lev) {
                        let mut subset = others.to_vec();
                        subset.push(v);
                        subset.sort_unstable();
                        best = Some(GlResult {
                            value: lev,
                            record: v,
                            subset,
                        });
                    }
                }
            });
            best
        })
        .collect();
    let mut best = None;
    for r in per_v.into_iter().flatten() {
        if better(&best, r.value) {
            best = Some(r);
        }
    }
    finish(best)
}

/// Ranking score `(|u|^2 / |v|^2) cos^2(theta) = <u, v>^2 / |v|^4`; infinite for `v = 0`.
pub fn greedy_score(u: &[f64], v: &[f64]) -> f64 {
    let vv = dot(v, v);
    if vv == 0.0 {
        return f64::INFINITY;
    }
    let uv = dot(u, v);
    uv * uv / (vv * vv)
}

/// Greedy heuristic: each record is paired with the `k - 1` records of lowest score.
pub fn greedy_gl(u: &Universe, k: usize) -> Result<GlResult> {
    check_k(u, k)?;
    let m = u.m();
    let scores: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| (0..m).map(|b| greedy_score(u.record(a), u.record(b))).collect())
        .collect();
    let per_u: Vec<Option<GlResult>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut others: Vec<usize> = (0..m).filter(|&b| b != a).collect();
            others.sort_by(|&x, &y| scores[a][x].total_cmp(&scores[a][y]).then(x.cmp(&y)));
            others.truncate(k - 1);
            match u.leverage_with(a, &others) {
                Some(value) => {
                    others.push(a);
                    others.sort_unstable();
                    Some(GlResult {
                        value,
                        record: a,
                        subset: others,
                    })
                }
                None => {
                    log::warn!("greedy database around record {a} is rank deficient; skipped");
                    None
                }
            }
        })
        .collect();
    let mut best = None;
    for r in per_u.into_iter().flatten() {
        if better(&best, r.value) {
            best = Some(r);
        }
    }
    finish(best)
}

/// Result of [`bcd_gl`] with the objective after every iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcdResult {
    pub best: GlResult,
    pub trace: Vec<f64>,
}

// Best record of a fixed database, None when no removal keeps full rank.
fn best_record(u: &Universe, subset: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &v in subset {
        let others: Vec<usize> = subset.iter().copied().filter(|&i| i != v).collect();
        if let Some(lev) = u.leverage_with(v, &others) {
            if best.is_none_or(|(_, b)| lev > b) {
                best = Some((v, lev));
            }
        }
    }
    best
}

/// Alternating local search: pick the best record of the current database,
/// then the best single-record swap for that record; repeat until neither
/// step improves or `max_iters` is reached.
pub fn bcd_gl(u: &Universe, k: usize, seed: &SeedStream, max_iters: usize) -> Result<BcdResult> {
    check_k(u, k)?;
    let m = u.m();
    let mut rng = seed.derive("bcd").rng();
    let mut start: Option<(Vec<usize>, usize, f64)> = None;
    for _ in 0..1000 {
        let mut subset = sample(&mut rng, m, k).into_vec();
        subset.sort_unstable();
        if let Some((v, val)) = best_record(u, &subset) {
            start = Some((subset, v, val));
            break;
        }
    }
    let (mut subset, mut v, mut value) = match start {
        Some(s) => s,
        None => {
            let g = greedy_gl(u, k)?;
            (g.subset, g.record, g.value)
        }
    };
    let mut trace = vec![value];
    for _ in 0..max_iters {
        let mut improved = false;
        // step 2: best swap of one other record for one outside record
        let mut best_swap: Option<(usize, usize, f64)> = None;
        for (pos, &w) in subset.iter().enumerate() {
            if w == v {
                continue;
            }
            for cand in 0..m {
                if subset.contains(&cand) {
                    continue;
                }
                let others: Vec<usize> = subset
                    .iter()
                    .enumerate()
                    .filter(|&(p, &i)| i != v && p != pos)
                    .map(|(_, &i)| i)
                    .chain(std::iter::once(cand))
                    .collect();
                if let Some(lev) = u.leverage_with(v, &others) {
                    if lev > best_swap.map_or(value, |b| b.2) {
                        best_swap = Some((pos, cand, lev));
                    }
                }
            }
        }
        if let Some((pos, cand, lev)) = best_swap {
            subset[pos] = cand;
            subset.sort_unstable();
            value = lev;
            improved = true;
        }
        // step 1: best record of the current database
        if let Some((bv, bval)) = best_record(u, &subset) {
            if bval > value {
                v = bv;
                value = bval;
                improved = true;
            }
        }
        trace.push(value);
        if !improved {
            break;
        }
    }
    Ok(BcdResult {
        best: GlResult {
            value,
            record: v,
            subset,
        },
        trace,
    })
}

/// Whether prepending `v` to both databases of a neighbouring pair leaves the
/// pair leverage no larger than before.
pub fn check_row_monotonicity(d0: &Matrix, d1: &Matrix, v: &[f64]) -> Result<bool> {
    if !d0.has_full_column_rank() || !d1.has_full_column_rank() {
        return Err(Error::RankDeficient);
    }
    let (big, small) = if d0.rows() > d1.rows() { (d0, d1) } else { (d1, d0) };
    let set = crate::rp::DomainSet::new(vec![big.clone(), small.clone()])?;
    let pair = set
        .neighbor_pairs()
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidParameter("databases are not neighbours".into()))?;
    let u = big.row(pair.row).to_vec();
    let before = crate::linalg::gram_factor(big)?.quad_inverse(&u);
    let after = crate::linalg::gram_factor(&big.with_leading_row(v)?)?.quad_inverse(&u);
    Ok(after <= before + 1e-12 * before.abs().max(1.0))
}

/// Global-leverage search strategy.
pub trait GlSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, u: &Universe, k: usize, seed: &SeedStream) -> Result<GlResult>;
}

struct Exact;
struct Greedy;
/// Local search with an iteration cap.
pub struct Bcd {
    pub max_iters: usize,
}

impl GlSolver for Exact {
    fn name(&self) -> &'static str {
        "exact"
    }
    fn solve(&self, u: &Universe, k: usize, _seed: &SeedStream) -> Result<GlResult> {
        exact_gl(u, k)
    }
}

impl GlSolver for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }
    fn solve(&self, u: &Universe, k: usize, _seed: &SeedStream) -> Result<GlResult> {
        greedy_gl(u, k)
    }
}

impl GlSolver for Bcd {
    fn name(&self) -> &'static str {
        "bcd"
    }
    fn solve(&self, u: &Universe, k: usize, seed: &SeedStream) -> Result<GlResult> {
        Ok(bcd_gl(u, k, seed, self.max_iters)?.best)
    }
}

/// The built-in solvers: exact, greedy, bcd.
pub fn gl_solvers() -> Registry<dyn GlSolver> {
    let mut reg: Registry<dyn GlSolver> = Registry::new();
    reg.register("exact", Box::new(Exact));
    reg.register("greedy", Box::new(Greedy));
    reg.register("bcd", Box::new(Bcd { max_iters: 100 }));
    reg
}
